"""One-dimensional Skorohod solvers: the classic reflection map and the
epsilon-construction for reflection with local-time dependent drift.

The extended problem seeks ``L`` nondecreasing with ``L(0) = 0`` such that
``x = f + L + I >= 0`` with ``I(t) = int_0^t mu(L(s)) ds`` and ``L`` flat off
``{x = 0}``.  The epsilon approximation freezes the drift at ``mu(n*eps)``
while ``n*eps <= L < (n+1)*eps``; inputs are treated as piecewise linear
between grid nodes, so threshold crossings are located exactly inside cells.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import BlowUpError, InvalidArgument, NonConvergenceError
from .paths import DriftSpec, SampledPath, write_columns
from .stats import Report

DONE, NEED_TABLE, BLOW_UP = 0, 1, 2


@dataclass(frozen=True)
class ReflectedSolution:
    x: SampledPath
    L: SampledPath
    I: SampledPath
    epsilon: float
    gap: float | None = None
    eps_used: float | None = None

    def write_csv(self, path) -> None:
        write_columns(path, ["t", "x", "l", "i"],
                      [self.x.times(), self.x.values, self.L.values, self.I.values])


def classic_map(f: SampledPath, cell_minima=None) -> ReflectedSolution:
    """``L(t) = max(0, max_{s<=t} -f(s))`` as a running maximum.

    By default ``f`` is the piecewise-linear interpolant of its samples, whose
    minimum over a cell is attained at a node.  ``cell_minima`` (one value per
    cell) supplies the minimum of ``f`` inside each cell instead, e.g. the
    exact bridge minima of a Brownian driver from :func:`bridge_minima`.
    """
    fv = f.values
    if fv[0] < 0:
        raise InvalidArgument(f"f(0) must be nonnegative, got {fv[0]}")
    if cell_minima is None:
        L = np.maximum.accumulate(np.maximum(0.0, -fv)) + 0.0  # no negative zeros
    else:
        m = np.asarray(cell_minima, dtype=float)
        if m.shape != (fv.size - 1,):
            raise InvalidArgument(f"need {fv.size - 1} cell minima, got shape {m.shape}")
        if np.any(m > np.minimum(fv[:-1], fv[1:])):
            raise InvalidArgument("a cell minimum exceeds an endpoint value")
        L = np.empty(fv.size)
        L[0] = 0.0
        L[1:] = np.maximum.accumulate(np.maximum(0.0, -m))
    return ReflectedSolution(f.with_values(fv + L), f.with_values(L),
                             f.with_values(np.zeros_like(fv)), 0.0)


def bridge_minima(f: SampledPath, gen: np.random.Generator) -> np.ndarray:
    """Sample the minimum over each cell of a unit-variance Brownian path
    (any constant drift) conditioned on its node values.

    Uses the exact law of a Brownian bridge minimum,
    ``(a + b - sqrt((a - b)^2 - 2 dt log U)) / 2``.
    """
    a, b = f.values[:-1], f.values[1:]
    u = gen.random(a.size)
    return 0.5 * (a + b - np.sqrt((a - b) ** 2 - 2.0 * f.dt * np.log1p(-u)))


@njit(cache=True)
def _eps_sweep(f, dt, eps, mu_tab, base, l_cap, istate, fstate, I_out, L_out, store):
    """Advance the epsilon construction across the cells of ``f``.

    ``istate = [k, n]`` (cell index, current band), ``fstate = [pos, I, L]``
    (fraction of cell k already consumed, drift integral, local time).  The
    sweep stops early when band ``n`` lies outside the tabulated window
    ``mu_tab[i] = mu((base + i)*eps)`` (status 1) or
    when ``L`` reaches ``l_cap`` (status 2); it can be resumed with the same
    state after the caller has moved the window.
    """
    k = istate[0]
    n = istate[1]
    pos = fstate[0]
    I = fstate[1]
    L = fstate[2]
    nk = f.size
    status = 0
    while k < nk - 1:
        if n - base >= mu_tab.size:
            status = 1
            break
        s = mu_tab[n - base]
        df = f[k + 1] - f[k]
        rem = 1.0 - pos
        gcur = f[k] + df * pos + I
        inew = I + s * dt * rem
        gend = f[k + 1] + inew
        target = (n + 1) * eps
        if -gend >= target:
            slope = -(df + s * dt)
            u = 0.0
            if slope > 0.0:
                u = (target + gcur) / slope
            if u < 0.0:
                u = 0.0
            if u > rem:
                u = rem
            I += s * dt * u
            pos += u
            L = target
            n += 1
            if L >= l_cap:
                status = 2
                break
        else:
            if -gend > L:
                L = -gend
            I = inew
            k += 1
            pos = 0.0
            if store:
                I_out[k] = I
                L_out[k] = L
    istate[0] = k
    istate[1] = n
    fstate[0] = pos
    fstate[1] = I
    fstate[2] = L
    return status


class MuTable:
    """Sliding window of drift values ``mu(n*eps)`` for bands n >= base.

    Bands are visited in increasing order, so only a window needs to be kept;
    its size doubles on each refill up to ``max_size``.
    """

    def __init__(self, mu: DriftSpec, eps: float, size: int = 64, max_size: int = 1 << 16):
        self.mu = mu
        self.eps = eps
        self.size = size
        self.max_size = max_size
        self.base = 0
        self.values = np.zeros(0)
        self.refill(0)

    def refill(self, start: int) -> None:
        if self.values.size:
            self.size = min(2 * self.size, self.max_size)
        ls = self.eps * np.arange(start, start + self.size, dtype=float)
        vals = np.asarray(self.mu(ls), dtype=float).reshape(-1)
        if not np.all(np.isfinite(vals)):
            raise InvalidArgument("drift returned non-finite values")
        self.base = int(start)
        self.values = np.ascontiguousarray(vals)


class SweepState:
    """Resumable sweep state, also used for chunked terminal-only runs."""

    def __init__(self):
        self.istate = np.zeros(2, dtype=np.int64)
        self.fstate = np.zeros(3)

    @property
    def n(self) -> int:
        return int(self.istate[1])

    @property
    def I(self) -> float:
        return float(self.fstate[1])

    @property
    def L(self) -> float:
        return float(self.fstate[2])


_DUMMY = np.zeros(1)


def sweep(fv, dt, table: MuTable, l_cap, state: SweepState, I_out=None, L_out=None, t0=0.0):
    """Run the kernel to the end of ``fv``, sliding the drift window as needed."""
    store = I_out is not None
    Io = I_out if store else _DUMMY
    Lo = L_out if store else _DUMMY
    while True:
        status = _eps_sweep(fv, dt, table.eps, table.values, table.base, l_cap,
                            state.istate, state.fstate, Io, Lo, store)
        if status == NEED_TABLE:
            table.refill(state.n)
            continue
        if status == BLOW_UP:
            k = int(state.istate[0])
            raise BlowUpError(t0 + (k + state.fstate[0]) * dt, l_cap)
        return


def extended_solve(f: SampledPath, mu: DriftSpec, epsilon: float, l_cap: float = 1e3) -> ReflectedSolution:
    """Epsilon approximation of the extended Skorohod problem in one pass."""
    if not epsilon > 0:
        raise InvalidArgument(f"epsilon must be positive, got {epsilon}")
    if not l_cap > 0:
        raise InvalidArgument("l_cap must be positive")
    fv = np.ascontiguousarray(f.values, dtype=float)
    if fv[0] < 0:
        raise InvalidArgument(f"f(0) must be nonnegative, got {fv[0]}")
    table = MuTable(mu, float(epsilon))
    state = SweepState()
    I_out = np.zeros(fv.size)
    L_out = np.zeros(fv.size)
    sweep(fv, f.dt, table, float(l_cap), state, I_out, L_out, t0=f.t0)
    x = (fv + I_out) + L_out
    return ReflectedSolution(f.with_values(x), f.with_values(L_out), f.with_values(I_out),
                             float(epsilon), eps_used=float(epsilon))


def drift_defect(sol: ReflectedSolution, mu: DriftSpec) -> float:
    """Upper bound on ``sup_t |I(t) - int_0^t mu(L(s)) ds|`` for an epsilon solution.

    On a cell where ``L`` stays constant the frozen drift is ``mu(b)`` with
    ``b = eps*floor(L_k/eps)``, so the defect rate is exactly
    ``|mu(L_k) - mu(b)|``.  On contact cells the band follows ``L``, and
    the rate is at most ``lambda(L_{k+1})*eps``.
    """
    eps = sol.eps_used or sol.epsilon
    L = sol.L.values
    if L.size < 2 or not eps:
        return 0.0
    b = eps * np.floor(L[:-1] / eps)
    mb = np.asarray(mu(b), dtype=float)
    if mu.monotone == "constant":
        return 0.0
    rate = np.abs(np.asarray(mu(L[:-1]), dtype=float) - mb)
    moving = L[1:] > L[:-1]
    if np.any(moving):
        lam = np.array([float(mu.lambda_bound(v)) for v in L[1:][moving]])
        rate[moving] = lam * eps
    return float(np.sum(rate) * sol.L.dt)


def refine_until(f: SampledPath, mu: DriftSpec, tol: float, l_cap: float = 1e3,
                 eps0: float = 1.0, max_iter: int = 40) -> ReflectedSolution:
    """Halve epsilon from ``eps0`` until successive local times differ by < tol.

    Agreement of two successive levels alone can be accidental: while ``L``
    sits at a level commensurate with both grids of thresholds, the frozen
    drift errors coincide.  The finer level is therefore accepted only when,
    in addition, its drift defect ``R`` satisfies ``R*exp(lambda*T) < tol``,
    which bounds its distance to the exact solution (Gronwall, using that the
    reflection map is 1-Lipschitz in the sup norm).

    If the drift makes the local time blow up, refinement continues until the
    blow-up time estimates of successive levels agree to a few grid steps, and
    the finest estimate is raised.
    """
    if not tol > 0:
        raise InvalidArgument("tol must be positive")
    eps = float(eps0)
    prev = None
    gaps, defects = [], []
    blow_times = []
    T = f.horizon
    for _ in range(max_iter):
        try:
            sol = extended_solve(f, mu, eps, l_cap)
        except BlowUpError as exc:
            blow_times.append(exc.time)
            if len(blow_times) >= 2 and abs(blow_times[-1] - blow_times[-2]) <= 2.0 * f.dt:
                raise BlowUpError(exc.time, exc.level,
                                  f"local time exceeded {exc.level:g} at t~{exc.time:.6g} "
                                  f"(epsilon={eps:g})") from None
            eps /= 2.0
            prev = None
            continue
        # a coarser level may blow up inside the horizon while this one does not
        blow_times.clear()
        if prev is not None:
            gap = float(np.max(np.abs(sol.L.values - prev.L.values)))
            lam = float(mu.lambda_bound(float(sol.L.values[-1]) + eps))
            defect = drift_defect(sol, mu) * math.exp(min(lam * T, 700.0))
            gaps.append(gap)
            defects.append(defect)
            if gap < tol and defect < tol:
                return ReflectedSolution(sol.x, sol.L, sol.I, 0.0, gap=gap, eps_used=eps)
        prev = sol
        eps /= 2.0
    if blow_times:
        raise BlowUpError(blow_times[-1], l_cap)
    raise NonConvergenceError(
        f"epsilon refinement did not reach tol={tol:g} in {max_iter} halvings",
        {"gaps": gaps, "defect_bounds": defects, "last_epsilon": eps * 2.0},
    )


def default_tol(f: SampledPath) -> float:
    return 1e-9 * (1.0 + float(np.max(np.abs(f.values))))


def verify_solution(f: SampledPath, mu: DriftSpec, sol: ReflectedSolution,
                    tol: float | None = None) -> Report:
    """Check reconstruction, positivity, monotonicity, flatness and drift rate."""
    for p in (sol.x, sol.L, sol.I):
        if not f.same_grid(p):
            raise InvalidArgument("solution and input live on different grids")
    if tol is None:
        tol = default_tol(f)
    fv, x, L, I = f.values, sol.x.values, sol.L.values, sol.I.values
    rep = Report(title="reflected solution")

    recon = np.abs(x - (fv + L + I))
    k = int(np.argmax(recon))
    rep.add("reconstruction", recon[k] <= tol, float(recon[k]), tol, worst_node=k)

    rep.add("L(0)=0", abs(L[0]) <= tol, float(L[0]), tol)
    dL = np.diff(L)
    if dL.size:
        k = int(np.argmin(dL))
        rep.add("L nondecreasing", dL[k] >= -tol, float(dL[k]), tol, worst_node=k)
    else:
        rep.add("L nondecreasing", True, 0.0, tol)

    k = int(np.argmin(x))
    rep.add("x nonnegative", x[k] >= -tol, float(x[k]), tol, worst_node=k)

    if dL.size:
        away = np.minimum(x[:-1], x[1:]) > tol
        flat = np.where(away, dL, 0.0)
        k = int(np.argmax(flat))
        rep.add("flat off contact", flat[k] <= tol, float(flat[k]), tol, worst_node=k)

        width = max(sol.epsilon, sol.eps_used or 0.0)
        lo_l = np.maximum(L[:-1] - width, 0.0)
        hi_l = L[1:]
        probes = [lo_l + (hi_l - lo_l) * c for c in (0.0, 0.25, 0.5, 0.75, 1.0)]
        mus = np.array([np.asarray(mu(p), dtype=float) for p in probes])
        rate = np.diff(I) / f.dt
        slack = tol * (1.0 + np.max(np.abs(mus))) + 8 * np.finfo(float).eps * (1 + np.max(np.abs(I))) / f.dt
        excess = np.maximum(mus.min(axis=0) - rate, rate - mus.max(axis=0))
        k = int(np.argmax(excess))
        rep.add("drift rate", excess[k] <= slack, float(excess[k]), float(slack), worst_node=k)
    return rep
