"""Brownian particle inside a moving interval whose walls form one inert body.

The particle ``X`` lives in ``[Y0, Y0 + l]``.  Contact with the lower wall
pushes the particle up by ``dL0`` and contact with the upper wall pushes it
down by ``dLl``; the walls receive the opposite push, so their velocity is
``V = v0 - K (L0 - Ll)`` and ``Y0 = int V``.

Reparametrised by the total boundary local time ``tau = L0 + Ll``, the
relative drift of the particle, ``v = -V``, is piecewise linear with slope
``+K`` after a lower contact (``j = 0``) and ``-K`` after an upper contact
(``j = 1``); switches occur at rates ``a(v, l)`` and ``b(v, l) = a(-v, l)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import InsufficientData, InvalidArgument
from .observables import level_crossing_rate
from .paths import RngConfig, SampledPath, write_columns
from .stats import autocorrelation

CONVENTIONS = ("inert", "literal")


def rate_a(v, l: float):
    """Rate of switching from the lower to the upper wall."""
    return level_crossing_rate(v, l)


def rate_b(v, l: float):
    """Rate of switching from the upper to the lower wall."""
    return level_crossing_rate(-np.asarray(v, dtype=float), l)


@njit(cache=True, nogil=True)
def _a(v, l):
    if abs(v) < 1e-12:
        return 1.0 / l
    return 2.0 * v / -math.expm1(-2.0 * v * l)


# ---------------------------------------------------------------------------
# pathwise simulation


@dataclass(frozen=True)
class IntervalTrajectory:
    X: SampledPath
    Y0: SampledPath
    V: SampledPath
    L0: SampledPath
    Ll: SampledPath
    B: SampledPath
    l: float
    K: float
    x0: float
    v0: float
    convention: str = "inert"

    def write_csv(self, path) -> None:
        write_columns(path, ["t", "x", "y0", "v", "l0", "ll"],
                      [self.X.times(), self.X.values, self.Y0.values, self.V.values,
                       self.L0.values, self.Ll.values])


@njit(cache=True, nogil=True)
def _interval_kernel(dB, dt, l, K, vsign, state, X, Y, V, L0, Ll, store,
                     ev_tau, ev_v, ev_j):
    """Projection Euler for the particle-in-interval system.

    ``state = [z, y, V, l0, ll, last_j, n_events]`` with ``z = X - Y0``.
    ``vsign`` is -1 when contact with the lower wall decreases ``V`` (the
    inert convention) and +1 otherwise.  Barrier switches are written to the
    event buffers as ``(tau, -V or V, j)`` taken just before the contact.
    """
    z = state[0]
    y = state[1]
    vel = state[2]
    l0 = state[3]
    ll = state[4]
    last = int(state[5])
    nev = int(state[6])
    cap = ev_tau.size
    for i in range(dB.size):
        y_new = y + vel * dt
        z = z + dB[i] - vel * dt
        d0 = 0.0
        dl = 0.0
        if z < 0.0:
            d0 = -z
            z = 0.0
        elif z > l:
            dl = z - l
            z = l
        if d0 > 0.0 or dl > 0.0:
            j = 0 if d0 > 0.0 else 1
            if j != last and nev < cap:
                ev_tau[nev] = l0 + ll
                ev_v[nev] = -vel if vsign < 0 else vel
                ev_j[nev] = j
                nev += 1
            last = j
            l0 += d0
            ll += dl
            vel += vsign * K * (d0 - dl)
        y = y_new
        if store:
            X[i + 1] = y + z
            Y[i + 1] = y
            V[i + 1] = vel
            L0[i + 1] = l0
            Ll[i + 1] = ll
    state[0] = z
    state[1] = y
    state[2] = vel
    state[3] = l0
    state[4] = ll
    state[5] = last
    state[6] = nev


def _check_interval_args(l, K, x0, convention):
    if not (l > 0 and K > 0):
        raise InvalidArgument("l and K must be positive")
    if not 0 <= x0 <= l:
        raise InvalidArgument(f"x0 must lie in [0, l], got {x0}")
    if convention not in CONVENTIONS:
        raise InvalidArgument(f"convention must be one of {CONVENTIONS}")


def simulate_interval(l: float, K: float, x0: float, v0: float, dt: float, horizon: float,
                      rng: RngConfig | None = None, driver: SampledPath | None = None,
                      convention: str = "inert") -> IntervalTrajectory:
    """Simulate the particle-in-interval system by projection Euler.

    Either ``rng`` or an explicit Brownian ``driver`` must be given.  With
    ``convention="literal"`` lower-wall contact increases ``V`` instead; that
    variant is kept for comparison only.
    """
    _check_interval_args(l, K, x0, convention)
    if driver is None:
        if rng is None:
            raise InvalidArgument("either rng or driver is required")
        driver = _driver(rng, dt, horizon)
    n = driver.n
    dB = np.diff(driver.values)
    arrays = [np.zeros(n) for _ in range(5)]
    X, Y, V, L0, Ll = arrays
    X[0], V[0] = x0, v0
    state = np.array([x0, 0.0, v0, 0.0, 0.0, -1.0, 0.0])
    empty = np.zeros(0)
    _interval_kernel(dB, driver.dt, float(l), float(K), -1.0 if convention == "inert" else 1.0,
                     state, X, Y, V, L0, Ll, True, empty, empty, np.zeros(0, dtype=np.int64))
    wrap = lambda a: SampledPath(driver.t0, driver.dt, a)
    return IntervalTrajectory(wrap(X), wrap(Y), wrap(V), wrap(L0), wrap(Ll), driver,
                              float(l), float(K), float(x0), float(v0), convention)


def _driver(rng: RngConfig, dt: float, horizon: float) -> SampledPath:
    from .paths import generate_brownian_path

    return generate_brownian_path(rng, dt, horizon, 1)[0]


# ---------------------------------------------------------------------------
# the velocity chain


@dataclass
class VelocityChain:
    """States ``(tau, v, j)`` at barrier switches; ``v`` is linear in between."""

    tau: np.ndarray
    v: np.ndarray
    j: np.ndarray
    l: float
    K: float
    tau_end: float = field(default=float("nan"))

    def __len__(self) -> int:
        return self.tau.size

    @property
    def n_events(self) -> int:
        return max(self.tau.size - 1, 0)

    def slopes(self) -> np.ndarray:
        return np.where(self.j == 0, self.K, -self.K)

    def value_at(self, taus) -> tuple[np.ndarray, np.ndarray]:
        """Velocity and flag of the piecewise-linear chain at the given clock values."""
        taus = np.asarray(taus, dtype=float)
        idx = np.clip(np.searchsorted(self.tau, taus, side="right") - 1, 0, self.tau.size - 1)
        v = self.v[idx] + self.slopes()[idx] * (taus - self.tau[idx])
        return v, self.j[idx]

    def time_samples(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """Sample on a uniform clock grid of ``n`` points in ``[tau_0, tau_end)``."""
        grid = self.tau[0] + (self.tau_end - self.tau[0]) * (np.arange(n) + 0.5) / n
        return self.value_at(grid)

    def occupancy(self) -> float:
        """Fraction of clock time spent with ``j = 0``."""
        ends = np.append(self.tau[1:], self.tau_end)
        dur = ends - self.tau
        total = dur.sum()
        if not total > 0:
            raise InsufficientData("chain covers no clock time")
        return float(dur[self.j == 0].sum() / total)

    def write_csv(self, path) -> None:
        write_columns(path, ["tau", "v", "j"], [self.tau, self.v, self.j])


def velocity_chain(traj: IntervalTrajectory) -> VelocityChain:
    """Extract the switch states of a simulated trajectory.

    A state is emitted at the first contact and at every change of the wall
    being touched, with ``tau = L0 + Ll`` and the velocity just before the
    contact step.
    """
    L0, Ll, V = traj.L0.values, traj.Ll.values, traj.V.values
    d0 = np.diff(L0) > 0
    dl = np.diff(Ll) > 0
    contact = np.nonzero(d0 | dl)[0]
    which = np.where(d0[contact], 0, 1)
    if contact.size == 0:
        return VelocityChain(np.zeros(0), np.zeros(0), np.zeros(0, dtype=np.int64),
                             traj.l, traj.K, float(L0[-1] + Ll[-1]))
    keep = np.ones(contact.size, dtype=bool)
    keep[1:] = which[1:] != which[:-1]
    k = contact[keep]
    sign = -1.0 if traj.convention == "inert" else 1.0
    return VelocityChain((L0[k] + Ll[k]).astype(float), sign * V[k], which[keep].astype(np.int64),
                         traj.l, traj.K, float(L0[-1] + Ll[-1]))


def interval_chain(l: float, K: float, x0: float, v0: float, dt: float, horizon: float,
                   rng: RngConfig, convention: str = "inert", chunk: int = 1 << 20,
                   max_events: int = 1 << 22) -> VelocityChain:
    """Velocity chain of a long trajectory, simulated without storing the path."""
    _check_interval_args(l, K, x0, convention)
    gen = rng.generator()
    n = int(round(horizon / dt))
    sdt = math.sqrt(dt)
    state = np.array([x0, 0.0, v0, 0.0, 0.0, -1.0, 0.0])
    ev_tau = np.zeros(max_events)
    ev_v = np.zeros(max_events)
    ev_j = np.zeros(max_events, dtype=np.int64)
    empty = np.zeros(0)
    done = 0
    vsign = -1.0 if convention == "inert" else 1.0
    while done < n:
        m = min(chunk, n - done)
        dB = gen.standard_normal(m) * sdt
        _interval_kernel(dB, dt, float(l), float(K), vsign, state, empty, empty, empty, empty,
                         empty, False, ev_tau, ev_v, ev_j)
        done += m
    k = int(state[6])
    return VelocityChain(ev_tau[:k].copy(), ev_v[:k].copy(), ev_j[:k].copy(), float(l), float(K),
                         float(state[3] + state[4]))


@njit(cache=True, nogil=True)
def _thinning_kernel(u, l, K, tau_horizon, state, ev_tau, ev_v, ev_j, max_events):
    """Event-driven simulation of the sawtooth chain by thinning.

    ``state = [tau, v, j, n_events]``.  Over a lookahead window the switching
    rate is bounded by its value at the window end (the rate is monotone
    along the linear velocity path).  Returns the number of uniforms used;
    stops early when the buffer ``u`` runs low.
    """
    tau = state[0]
    v = state[1]
    j = int(state[2])
    nev = int(state[3])
    used = 0
    n = u.size
    while tau < tau_horizon and nev < max_events and used + 2 <= n:
        s = K if j == 0 else -K
        sgn = 1.0 if j == 0 else -1.0
        r_now = _a(sgn * v, l)
        w = 0.1
        if r_now > 0.0 and 0.5 / r_now < w:
            w = 0.5 / r_now
        if tau + w > tau_horizon:
            w = tau_horizon - tau
        bound = _a(sgn * (v + s * w), l)
        e = -math.log(1.0 - u[used]) / bound
        acc = u[used + 1]
        used += 2
        if e >= w:
            tau += w
            v += s * w
            continue
        tau += e
        v += s * e
        if acc * bound <= _a(sgn * v, l):
            j = 1 - j
            ev_tau[nev] = tau
            ev_v[nev] = v
            ev_j[nev] = j
            nev += 1
    state[0] = tau
    state[1] = v
    state[2] = j
    state[3] = nev
    return used


def simulate_velocity_chain(l: float, K: float, v0: float, j0: int, tau_horizon: float,
                            rng: RngConfig, max_events: int | None = None,
                            buffer: int = 1 << 20) -> VelocityChain:
    """Exact simulation of the sawtooth chain up to ``tau_horizon`` or ``max_events`` switches.

    The first state is the initial condition ``(0, v0, j0)``.
    """
    if not (l > 0 and K > 0):
        raise InvalidArgument("l and K must be positive")
    if not tau_horizon > 0:
        raise InvalidArgument("tau_horizon must be positive")
    if j0 not in (0, 1):
        raise InvalidArgument("j0 must be 0 or 1")
    cap = int(max_events) if max_events is not None else None
    gen = rng.generator()
    state = np.array([0.0, float(v0), float(j0), 0.0])
    chunks_tau, chunks_v, chunks_j = [], [], []
    total = 0
    limit = cap if cap is not None else np.iinfo(np.int64).max
    while state[0] < tau_horizon and total < limit:
        room = buffer if cap is None else min(buffer, cap - total)
        ev_tau = np.zeros(room)
        ev_v = np.zeros(room)
        ev_j = np.zeros(room, dtype=np.int64)
        state[3] = 0.0
        u = gen.random(2 * room + 64)
        _thinning_kernel(u, float(l), float(K), float(tau_horizon), state, ev_tau, ev_v, ev_j, room)
        k = int(state[3])
        chunks_tau.append(ev_tau[:k])
        chunks_v.append(ev_v[:k])
        chunks_j.append(ev_j[:k])
        total += k
    tau = np.concatenate([[0.0]] + chunks_tau)
    v = np.concatenate([[float(v0)]] + chunks_v)
    j = np.concatenate([np.array([j0], dtype=np.int64)] + chunks_j)
    return VelocityChain(tau, v, j, float(l), float(K), float(state[0]))


# ---------------------------------------------------------------------------
# generator, adjoint, stationary law


def apply_generator(f, df, v: float, j: int, l: float, K: float) -> float:
    """``A f(v, j)`` for the sawtooth chain; ``df`` is the v-derivative of ``f``."""
    if j == 0:
        return K * df(v, 0) + rate_a(v, l) * (f(v, 1) - f(v, 0))
    return -K * df(v, 1) + rate_b(v, l) * (f(v, 0) - f(v, 1))


def apply_adjoint(g, dg, v: float, j: int, l: float, K: float) -> float:
    """Formal adjoint ``A* g(v, j)``."""
    a, b = rate_a(v, l), rate_b(v, l)
    if j == 1:
        return K * dg(v, 1) + a * g(v, 0) - b * g(v, 1)
    return -K * dg(v, 0) - a * g(v, 0) + b * g(v, 1)


def stationary_density(v, K: float):
    """Stationary density per flag value, ``exp(-v^2/K) / (2 sqrt(pi K))``."""
    if not K > 0:
        raise InvalidArgument("K must be positive")
    v = np.asarray(v, dtype=float)
    out = np.exp(-v * v / K) / (2.0 * math.sqrt(math.pi * K))
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# small-interval rescaling


@dataclass
class OUComparison:
    path: SampledPath
    variance: float
    lags: np.ndarray
    acf: np.ndarray

    def reference_acf(self) -> np.ndarray:
        return np.exp(-self.lags)


def rescale_to_ou(chain: VelocityChain, l: float, lags=(0.25, 0.5, 1.0, 2.0),
                  min_points: int = 100) -> OUComparison:
    """Chain values at the successive switches from decreasing to increasing,
    placed on the grid ``n * 2 l^2``.

    With spacing ``2 l^2`` the limit is ``dX = dB - X dt`` (stationary
    variance 1/2, autocorrelation ``e^{-h}``); spacing ``l^2`` gives the same
    law run at twice the speed.
    """
    if chain.K != 1.0:
        raise InvalidArgument("rescaling requires a chain with K = 1")
    if abs(chain.l - l) > 1e-12 * max(1.0, l):
        raise InvalidArgument(f"chain was generated with l={chain.l}, not {l}")
    up = np.nonzero((chain.j[1:] == 0) & (chain.j[:-1] == 1))[0] + 1
    vals = chain.v[up]
    if chain.tau.size and chain.tau[0] == 0.0 and chain.j[0] == 0:
        vals = np.concatenate([[chain.v[0]], vals])
    dt = 2.0 * l * l
    lags = np.asarray(lags, dtype=float)
    need = max(min_points, int(np.ceil(lags.max() / dt)) + 2)
    if vals.size < need:
        raise InsufficientData(f"only {vals.size} switch points; need at least {need}")
    path = SampledPath(0.0, dt, vals)
    return OUComparison(path, float(np.var(vals)), lags, autocorrelation(path, lags))
