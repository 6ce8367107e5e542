"""Local-time estimators, excursion bookkeeping and closed-form excursion laws.

Sign conventions for the escape law: ``consistent`` (default) uses
``exp(-2 int_0^tau (mu v 0))``, which agrees with the exponential law of the
total local time of Brownian motion with positive drift; ``paper-literal``
uses ``exp(-2 int_0^tau |mu ^ 0|)``.  Both are available so that simulation
can adjudicate between them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy import integrate

from .errors import InvalidArgument
from .paths import DriftSpec, RngConfig, SampledPath, map_replicas, write_columns
from .skorohod import MuTable, ReflectedSolution, SweepState, sweep
from .stats import ECDF

VARIANTS = ("consistent", "paper-literal")


def occupation_local_time(x: SampledPath, eps: float) -> SampledPath:
    """``t -> (1/(2 eps)) * int_0^t 1{x(s) < eps} ds`` for the piecewise-linear path.

    The occupation time of each cell is computed exactly for the linear
    interpolant, so ``x(t) = t`` gives exactly ``1/2`` for ``t >= eps``.
    """
    if not eps > 0:
        raise InvalidArgument(f"eps must be positive, got {eps}")
    v = x.values
    a, b = v[:-1], v[1:]
    d = b - a
    with np.errstate(divide="ignore", invalid="ignore"):
        cut = np.clip((eps - a) / d, 0.0, 1.0)
    frac = np.where(d > 0, cut, np.where(d < 0, 1.0 - cut, (a < eps).astype(float)))
    out = np.empty(v.size)
    out[0] = 0.0
    np.cumsum(frac, out=out[1:])
    return x.with_values(out * (x.dt / (2.0 * eps)))


@dataclass(frozen=True)
class ExcursionRecord:
    tau: float
    duration: float
    max_height: float
    t_start: float
    t_end: float
    censored: bool = False


def decompose_excursions(sol: ReflectedSolution, height_floor: float = 0.0,
                         zero_tol: float = 0.0) -> list[ExcursionRecord]:
    """Split the reflected path into maximal runs of nodes with ``x > zero_tol``.

    An excursion starts at the last zero node before the run and ends at the
    first zero node after it; a run still open at the final node is censored.
    """
    x = sol.x.values
    L = sol.L.values
    t = sol.x.times()
    pos = x > zero_tol
    if not pos.any():
        return []
    edges = np.diff(pos.astype(np.int8))
    starts = list(np.nonzero(edges == 1)[0] + 1)
    ends = list(np.nonzero(edges == -1)[0] + 1)
    if pos[0]:
        starts.insert(0, 0)
    if pos[-1]:
        ends.append(x.size)
    out = []
    for s, e in zip(starts, ends):
        left = max(s - 1, 0)
        censored = e >= x.size
        right = x.size - 1 if censored else e
        h = float(x[s:e].max())
        if h <= height_floor:
            continue
        out.append(ExcursionRecord(float(L[left]), float(t[right] - t[left]), h,
                                   float(t[left]), float(t[right]), bool(censored)))
    return out


def write_excursions_csv(records, path) -> None:
    cols = list(zip(*[(r.tau, r.duration, r.max_height, r.t_start, r.t_end, int(r.censored))
                      for r in records])) or [[]] * 6
    write_columns(path, ["tau", "duration", "max_height", "t_start", "t_end", "censored"], cols)


def _check_variant(variant: str) -> None:
    if variant not in VARIANTS:
        raise InvalidArgument(f"variant must be one of {VARIANTS}, got {variant!r}")


def escape_survival(mu: DriftSpec, tau: float, variant: str = "consistent") -> float:
    """Probability that the total local time exceeds ``tau``."""
    _check_variant(variant)
    if not tau >= 0:
        raise InvalidArgument("tau must be nonnegative")
    if tau == 0:
        return 1.0
    if variant == "consistent":
        integrand = lambda s: max(float(mu(s)), 0.0)
    else:
        integrand = lambda s: abs(min(float(mu(s)), 0.0))
    val, _ = integrate.quad(integrand, 0.0, float(tau), epsabs=0.0, epsrel=1e-8, limit=200)
    return math.exp(-2.0 * val)


def excursion_density(mu: DriftSpec, tau: float, lam: float, variant: str = "consistent") -> float:
    """Intensity density in (start local time tau, duration lam)."""
    if not lam > 0:
        raise InvalidArgument("lam must be positive")
    m = float(mu(tau))
    duration = math.exp(-m * m * lam / 2.0) / math.sqrt(2.0 * math.pi * lam**3)
    return duration * escape_survival(mu, tau, variant)


def level_crossing_rate(mu_value, l: float):
    """Rate, per unit local time, of excursions reaching height ``l``.

    ``mu e^{mu l} / sinh(mu l) = 2 mu / (1 - e^{-2 mu l})``, equal to ``1/l``
    in the limit ``mu -> 0``.
    """
    if not l > 0:
        raise InvalidArgument("l must be positive")
    m = np.asarray(mu_value, dtype=float)
    small = np.abs(m) < 1e-12
    safe = np.where(small, 1.0, m)
    with np.errstate(over="ignore"):
        out = np.where(small, 1.0 / l, 2.0 * safe / -np.expm1(-2.0 * safe * l))
    return float(out) if out.ndim == 0 else out


@dataclass
class TauInftyResult:
    ecdf: ECDF
    terminal_L: np.ndarray
    status: np.ndarray
    n_paths: int
    escaped: int
    censored: int
    ambiguous: int

    @property
    def ambiguity_fraction(self) -> float:
        return self.ambiguous / self.n_paths

    def summary(self) -> dict:
        return {"n_paths": self.n_paths, "escaped": self.escaped, "censored": self.censored,
                "ambiguous": self.ambiguous, "ambiguity_fraction": self.ambiguity_fraction}


ESCAPED, CENSORED, AMBIGUOUS = 0, 1, 2


def _terminal_local_time(mu: DriftSpec, rng: RngConfig, dt: float, horizon: float,
                         escape_level: float, epsilon: float, return_tol: float,
                         horizon_tol: float, chunk: int, l_cap: float):
    gen = rng.generator()
    n_steps = int(round(horizon / dt))
    table = MuTable(mu, epsilon, size=256)
    state = SweepState()
    sdt = math.sqrt(dt)
    f_last = 0.0
    done = 0
    last_contact = 0.0
    I_buf = np.zeros(chunk + 1)
    L_buf = np.zeros(chunk + 1)
    while done < n_steps:
        m = min(chunk, n_steps - done)
        f = np.empty(m + 1)
        f[0] = f_last
        np.cumsum(gen.standard_normal(m) * sdt, out=f[1:])
        f[1:] += f_last
        L_before = state.L
        state.istate[0] = 0
        state.fstate[0] = 0.0
        I_buf[0] = state.I
        L_buf[0] = L_before
        sweep(f, dt, table, l_cap, state, I_buf[: m + 1], L_buf[: m + 1])
        grew = np.nonzero(np.diff(L_buf[: m + 1]) > 0)[0]
        if grew.size:
            last_contact = (done + grew[-1] + 1) * dt
        done += m
        f_last = f[-1]
        L = state.L
        x = f_last + state.I + L
        drift = float(mu(L))
        if drift > 0 and math.exp(-2.0 * drift * x) <= return_tol:
            return L, ESCAPED
    L = state.L
    x = f_last + state.I + L
    drift = float(mu(L))
    if drift > 0 and (x >= escape_level or math.exp(-2.0 * drift * x) <= horizon_tol):
        return L, ESCAPED
    if drift <= 0 or last_contact >= 0.9 * horizon:
        return L, CENSORED
    return L, AMBIGUOUS


def estimate_tau_infty(mu: DriftSpec, n_paths: int, dt: float, horizon: float,
                       escape_level: float | None = None, rng: RngConfig | None = None,
                       epsilon: float = 1e-4, return_tol: float = 1e-9,
                       horizon_tol: float = 1e-3, chunk: int = 2048,
                       l_cap: float = 1e3, threads: int = 1) -> TauInftyResult:
    """Monte Carlo law of the total local time of the drifted reflected path.

    Each replica runs the epsilon solver on a fresh Brownian driver.  A path
    is classified as escaped (and its simulation stopped) once its drift is
    positive and the probability of ever returning to the barrier,
    ``exp(-2 mu(L) x)``, is below ``return_tol``; at the horizon the looser
    ``horizon_tol`` applies, as does ``x >= escape_level``.  A path is
    censored if its drift is not positive or it touched the barrier in the
    last tenth of the horizon; otherwise it is ambiguous.  The ECDF is taken
    over the terminal local times of all paths.
    """
    if n_paths < 1:
        raise InvalidArgument("n_paths must be positive")
    if not (dt > 0 and horizon > 0):
        raise InvalidArgument("dt and horizon must be positive")
    if escape_level is None:
        escape_level = 5.0 * math.sqrt(horizon)
    rng = rng or RngConfig(0)

    def one(i):
        return _terminal_local_time(mu, rng.replica(i), dt, horizon, escape_level,
                                    epsilon, return_tol, horizon_tol, chunk, l_cap)

    res = map_replicas(one, int(n_paths), threads)
    Ls = np.array([r[0] for r in res])
    st = np.array([r[1] for r in res], dtype=np.int8)
    return TauInftyResult(ECDF(Ls), Ls, st, int(n_paths), int(np.sum(st == ESCAPED)),
                          int(np.sum(st == CENSORED)), int(np.sum(st == AMBIGUOUS)))


@njit(cache=True, nogil=True)
def _renewal_kernel(z, u_min, u_max, dt, mu_dt, level, state, max_events):
    """Reflected drifted walk restarted at 0 whenever it reaches ``level``.

    Between grid nodes the free path is a Brownian bridge, so the barrier
    push is ``max(0, -m)`` with ``m`` the exactly sampled bridge minimum, and
    an undetected passage above ``level`` occurs with the bridge probability
    ``exp(-2 (level - a)(level - b) / dt)``.  (A cell that both touches 0 and
    passes ``level`` is ignored; with ``sqrt(dt) << level`` it never occurs.)

    ``state = [x, L_segment, L_total, events]``; returns the number of
    steps consumed.
    """
    sdt = math.sqrt(dt)
    x = state[0]
    Lseg = state[1]
    Ltot = state[2]
    events = state[3]
    used = 0
    for i in range(z.size):
        if events >= max_events:
            break
        used += 1
        dx = z[i] * sdt + mu_dt
        b = x + dx
        m = 0.5 * (x + b - math.sqrt(dx * dx - 2.0 * dt * math.log1p(-u_min[i])))
        crossed = b >= level
        if m < 0.0:
            Lseg -= m
            b -= m
        elif not crossed:
            crossed = u_max[i] < math.exp(-2.0 * (level - x) * (level - b) / dt)
        if crossed:
            events += 1.0
            Ltot += Lseg
            Lseg = 0.0
            x = 0.0
        else:
            x = b
    state[0] = x
    state[1] = Lseg
    state[2] = Ltot
    state[3] = events
    return used


@dataclass
class CrossingRateEstimate:
    mu_value: float
    level: float
    events: int
    local_time: float
    rate: float
    stderr: float
    exact: float = field(default=float("nan"))

    @property
    def rel_error(self) -> float:
        return abs(self.rate - self.exact) / self.exact


def estimate_crossing_rate(mu_value: float, level: float, n_events: int, dt: float,
                           rng: RngConfig, chunk: int = 1 << 20) -> CrossingRateEstimate:
    """Empirical rate, per unit local time, of excursions reaching ``level``.

    The reflected path ``x = B + mu t + L`` is simulated on the grid with
    exact bridge corrections inside each cell; when it reaches ``level`` it
    is restarted at 0.  By the strong Markov
    property at the following return to 0 (or, for escaping paths, by the
    Poisson structure of excursions in the local-time clock) the local time
    spent between restarts is exponential with the crossing rate, so the
    estimate is ``events / total local time``.
    """
    if not (level > 0 and dt > 0 and n_events > 0):
        raise InvalidArgument("level, dt and n_events must be positive")
    gen = rng.generator()
    state = np.zeros(4)
    while state[3] < n_events:
        z = gen.standard_normal(chunk)
        u = gen.random((2, chunk))
        _renewal_kernel(z, u[0], u[1], dt, mu_value * dt, level, state, float(n_events))
    events = int(state[3])
    rate = events / state[2]
    return CrossingRateEstimate(float(mu_value), float(level), events, float(state[2]), rate,
                                rate / math.sqrt(events), level_crossing_rate(mu_value, level))
