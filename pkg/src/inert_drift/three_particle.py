"""Two Brownian particles separated by an inert particle.

``X1 <= Y <= X2``; the left particle is pushed down by ``L1`` at contact with
``Y`` and the right one pushed up by ``L2``.  The inert particle receives the
opposite pushes, ``V = v + K (L1 - L2)`` and ``Y = y + int V``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy import integrate, special

from .errors import InvalidArgument
from .paths import RngConfig, SampledPath, generate_brownian_path, map_replicas, write_columns


@dataclass(frozen=True)
class ThreeTrajectory:
    X1: SampledPath
    X2: SampledPath
    Y: SampledPath
    V: SampledPath
    L1: SampledPath
    L2: SampledPath
    B1: SampledPath
    B2: SampledPath
    x: float
    y: float
    v: float
    K: float
    collision_flag: bool = False
    collision_time: float | None = None

    @property
    def gap(self) -> np.ndarray:
        return self.X2.values - self.X1.values

    def write_csv(self, path) -> None:
        write_columns(path, ["t", "x1", "x2", "y", "v", "l1", "l2"],
                      [self.X1.times(), self.X1.values, self.X2.values, self.Y.values,
                       self.V.values, self.L1.values, self.L2.values])


@njit(cache=True, nogil=True)
def _three_kernel(dB1, dB2, dt, K, state, out, store):
    """Projection Euler; ``state = [x1, x2, y, V, l1, l2, collided, steps]``.

    After a collision the state is frozen.  ``out`` has shape (6, n+1) and is
    filled from column 1 when ``store`` is set.
    """
    x1 = state[0]
    x2 = state[1]
    y = state[2]
    vel = state[3]
    l1 = state[4]
    l2 = state[5]
    collided = state[6] > 0.0
    steps = int(state[7])
    for i in range(dB1.size):
        if not collided:
            y = y + vel * dt
            x1 = x1 + dB1[i]
            x2 = x2 + dB2[i]
            d1 = 0.0
            d2 = 0.0
            if x1 > y:
                d1 = x1 - y
                x1 = y
            if x2 < y:
                d2 = y - x2
                x2 = y
            l1 += d1
            l2 += d2
            vel += K * (d1 - d2)
            steps += 1
            if x2 - x1 <= 0.0:
                collided = True
        if store:
            out[0, i + 1] = x1
            out[1, i + 1] = x2
            out[2, i + 1] = y
            out[3, i + 1] = vel
            out[4, i + 1] = l1
            out[5, i + 1] = l2
    state[0] = x1
    state[1] = x2
    state[2] = y
    state[3] = vel
    state[4] = l1
    state[5] = l2
    state[6] = 1.0 if collided else 0.0
    state[7] = steps


def _check_three_args(x, y, K):
    if not x > 0:
        raise InvalidArgument("initial gap x must be positive")
    if not 0 <= y <= x:
        raise InvalidArgument(f"need 0 <= y <= x, got y={y}, x={x}")
    if not K > 0:
        raise InvalidArgument("K must be positive")


def simulate_three(x: float, y: float, v: float, K: float, dt: float, horizon: float,
                   rng: RngConfig | None = None,
                   drivers: tuple[SampledPath, SampledPath] | None = None) -> ThreeTrajectory:
    """Simulate from ``X1 = 0``, ``X2 = x``, ``Y = y``, ``V = v``.

    ``drivers`` (two Brownian paths on a common grid) take precedence over ``rng``.
    """
    _check_three_args(x, y, K)
    if drivers is None:
        if rng is None:
            raise InvalidArgument("either rng or drivers is required")
        drivers = tuple(generate_brownian_path(rng, dt, horizon, 2))
    B1, B2 = drivers
    if not B1.same_grid(B2):
        raise InvalidArgument("drivers must share a grid")
    n = B1.n
    out = np.zeros((6, n))
    out[:, 0] = [0.0, x, y, v, 0.0, 0.0]
    state = np.array([0.0, x, y, v, 0.0, 0.0, 0.0, 0.0])
    _three_kernel(np.diff(B1.values), np.diff(B2.values), B1.dt, float(K), state, out, True)
    wrap = lambda a: SampledPath(B1.t0, B1.dt, a)
    collided = bool(state[6])
    t_coll = B1.t0 + state[7] * B1.dt if collided else None
    return ThreeTrajectory(*(wrap(out[i]) for i in range(6)), B1, B2, float(x), float(y),
                           float(v), float(K), collided, t_coll)


def scale_trajectory(traj: ThreeTrajectory, eps: float) -> ThreeTrajectory:
    """``eps * traj(t / eps^2)`` on the grid ``eps^2 * dt`` (velocity scaled by ``1/eps``)."""
    if not eps > 0:
        raise InvalidArgument("eps must be positive")
    e = float(eps)
    g = lambda p, c: SampledPath(p.t0 * e * e, p.dt * e * e, c * p.values)
    return ThreeTrajectory(g(traj.X1, e), g(traj.X2, e), g(traj.Y, e), g(traj.V, 1.0 / e),
                           g(traj.L1, e), g(traj.L2, e), g(traj.B1, e), g(traj.B2, e),
                           e * traj.x, e * traj.y, traj.v / e, traj.K / (e * e),
                           traj.collision_flag,
                           None if traj.collision_time is None else traj.collision_time * e * e)


def scaling_transport(traj: ThreeTrajectory, eps: float) -> ThreeTrajectory:
    """Re-run the scheme with drivers ``eps * B(t/eps^2)``, gap ``eps*x`` and
    constant ``K/eps^2``.

    Brownian scaling maps positions and local times by ``eps`` and time by
    ``eps^2``, so velocities scale by ``1/eps`` and the transfer constant by
    ``1/eps^2``.  The result should equal ``scale_trajectory(traj, eps)``;
    for ``eps`` a power of two the two agree bit for bit.
    """
    if not eps > 0:
        raise InvalidArgument("eps must be positive")
    e = float(eps)
    B1 = SampledPath(traj.B1.t0 * e * e, traj.B1.dt * e * e, e * traj.B1.values)
    B2 = SampledPath(traj.B2.t0 * e * e, traj.B2.dt * e * e, e * traj.B2.values)
    return simulate_three(e * traj.x, e * traj.y, traj.v / e, traj.K / (e * e), B1.dt,
                          B1.horizon, drivers=(B1, B2))


def transport_discrepancy(a: ThreeTrajectory, b: ThreeTrajectory) -> float:
    """Sup-norm distance between the state paths of two trajectories on one grid."""
    if not (a.X1.same_grid(b.X1)):
        raise InvalidArgument("trajectories live on different grids")
    pairs = [(a.X1, b.X1), (a.X2, b.X2), (a.Y, b.Y), (a.V, b.V), (a.L1, b.L1), (a.L2, b.L2)]
    return float(max(np.max(np.abs(p.values - q.values)) for p, q in pairs))


def gap_chain(traj: ThreeTrajectory) -> list[tuple[float, float]]:
    """Gap ``X2 - X1`` at ``T_0 = 0`` and at the successive zeros of ``V``.

    Zeros are sign changes of ``V`` between nonzero nodes, located by linear
    interpolation; if exact zeros separate the two nodes, the zero is placed
    at the right end of that plateau.  The initial plateau (``V`` is 0 until
    the first contact when ``v = 0``) belongs to ``T_0``.  Entries after a
    collision are not produced.
    """
    V = traj.V.values
    gap = traj.gap
    t = traj.V.times()
    out = [(float(gap[0]), float(t[0]))]
    last = traj.V.n
    if traj.collision_flag and traj.collision_time is not None:
        last = min(last, int(round((traj.collision_time - traj.V.t0) / traj.V.dt)) + 1)
    nz = np.nonzero(V[:last] != 0.0)[0]
    if nz.size < 2:
        return out
    sgn = np.sign(V[nz])
    change = np.nonzero(sgn[1:] != sgn[:-1])[0]
    for c in change:
        i, k = nz[c], nz[c + 1]
        if k > i + 1:
            T = t[k - 1]
            g = gap[k - 1]
        else:
            w = V[i] / (V[i] - V[k])
            T = t[i] + w * (t[k] - t[i])
            g = gap[i] + w * (gap[k] - gap[i])
        out.append((float(g), float(T)))
    return out


def write_gap_chain_csv(chain, path) -> None:
    cols = list(zip(*chain)) or [[], []]
    write_columns(path, ["gap", "T"], cols)


def linf_law(l: float) -> float:
    """``P(L_inf > l) = exp(-l^2)``."""
    if not l >= 0:
        raise InvalidArgument("l must be nonnegative")
    return math.exp(-l * l)


def bessel2_reference(x0: float, t: float, y):
    """Transition density of the 2-dimensional Bessel process from ``x0`` after time ``t``.

    ``(y/t) exp(-(x0^2 + y^2)/(2t)) I0(x0 y / t)``, evaluated with the
    exponentially scaled ``I0`` to avoid overflow.
    """
    if not t > 0:
        raise InvalidArgument("t must be positive")
    if not x0 >= 0:
        raise InvalidArgument("x0 must be nonnegative")
    y = np.asarray(y, dtype=float)
    out = np.where(y > 0, (y / t) * np.exp(-((x0 - y) ** 2) / (2 * t)) * special.i0e(x0 * y / t),
                   0.0)
    return float(out) if out.ndim == 0 else out


def bessel2_cdf(x0: float, t: float, y):
    """Distribution function of the Bessel(2) transition law, by quadrature."""
    ys = np.atleast_1d(np.asarray(y, dtype=float))
    order = np.argsort(ys)
    out = np.zeros(ys.size)
    acc, prev = 0.0, 0.0
    for idx in order:
        hi = max(ys[idx], 0.0)
        if hi > prev:
            acc += integrate.quad(lambda s: bessel2_reference(x0, t, s), prev, hi,
                                  epsabs=1e-12, epsrel=1e-10, limit=200)[0]
            prev = hi
        out[idx] = min(acc, 1.0)
    return float(out[0]) if np.ndim(y) == 0 else out


@dataclass
class TerminalSample:
    gap: np.ndarray
    collided: np.ndarray
    dt: float


def terminal_gaps(x: float, y: float, v: float, K: float, dt: float, horizon: float,
                  n_replicas: int, rng: RngConfig, coarsen: tuple[int, ...] = (1,),
                  threads: int = 1) -> dict[int, TerminalSample]:
    """Terminal gap and collision flag for many replicas.

    The finest scheme uses step ``dt``; each entry ``m`` of ``coarsen`` also
    runs the scheme with step ``m*dt`` on the same Brownian paths (increments
    summed in blocks of ``m``), so the levels are pathwise coupled.
    """
    _check_three_args(x, y, K)
    n = int(round(horizon / dt))
    for m in coarsen:
        if m < 1 or n % m:
            raise InvalidArgument(f"coarsening factor {m} does not divide {n} steps")
    sdt = math.sqrt(dt)
    dummy = np.zeros((6, 1))

    def one(i):
        z = rng.replica(i).generator().standard_normal((2, n)) * sdt
        res = []
        for m in coarsen:
            inc = z if m == 1 else z.reshape(2, n // m, m).sum(axis=2)
            st = np.array([0.0, x, y, v, 0.0, 0.0, 0.0, 0.0])
            _three_kernel(inc[0], inc[1], dt * m, float(K), st, dummy, False)
            res.append((st[1] - st[0], st[6] > 0))
        return res

    rows = map_replicas(one, int(n_replicas), threads)
    out = {}
    for c, m in enumerate(coarsen):
        out[m] = TerminalSample(np.array([r[c][0] for r in rows]),
                                np.array([r[c][1] for r in rows], dtype=bool), dt * m)
    return out
