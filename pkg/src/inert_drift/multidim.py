"""Extended Skorohod problem above a graph in R^d.

Solve ``x_t = w_t + int_0^t L_s ds + L_t`` with ``x`` confined to
``D = {x : x^d > f(x^1, ..., x^{d-1})}`` and ``L`` a bounded-variation push
along the inward normal, increasing only while ``x`` is on the boundary.
The epsilon construction freezes the drift velocity at ``L(T_n)`` between
the times ``T_n`` at which the total variation ``|L|`` reaches ``n*eps``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import optimize

from .errors import BlowUpError, DomainAssumptionError, InvalidArgument, StepFailure
from .paths import SampledPath, write_columns
from .stats import Report


@dataclass(frozen=True)
class GraphDomain:
    """Region above the graph of ``f``; ``grad`` returns the gradient of ``f``.

    Both callables take a vector of length ``d - 1``.
    """

    f: Callable
    grad: Callable
    alpha: float
    d: int = 2

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise InvalidArgument("alpha must lie in (0, 1)")
        if self.d < 2:
            raise InvalidArgument("dimension must be at least 2")

    def height(self, u) -> float:
        return float(self.f(np.asarray(u, dtype=float)))

    def gap(self, x) -> float:
        """Signed vertical distance ``x^d - f(x')`` (positive inside)."""
        x = np.asarray(x, dtype=float)
        return float(x[-1] - self.height(x[:-1]))

    def normal(self, x) -> np.ndarray:
        g = np.asarray(self.grad(np.asarray(x, dtype=float)[:-1]), dtype=float).reshape(-1)
        n = np.append(-g, 1.0)
        return n / np.linalg.norm(n)

    def check_point(self, x) -> None:
        """Enforce the working-window assumptions at a visited boundary point."""
        fx = self.height(np.asarray(x)[:-1])
        nd = self.normal(x)[-1]
        if not abs(fx) < 1.0 - self.alpha:
            raise DomainAssumptionError(f"|f| = {abs(fx):.4g} >= 1 - alpha at {np.asarray(x)}")
        if not nd > self.alpha:
            raise DomainAssumptionError(f"normal component {nd:.4g} <= alpha at {np.asarray(x)}")


def half_space(d: int = 2, alpha: float = 0.5) -> GraphDomain:
    return GraphDomain(lambda u: 0.0, lambda u: np.zeros(d - 1), alpha, d)


def tilted_plane(c: Sequence[float] | float, alpha: float = 0.3) -> GraphDomain:
    """``f(u) = c . u``."""
    c = np.atleast_1d(np.asarray(c, dtype=float))
    return GraphDomain(lambda u: float(np.dot(c, u)), lambda u: c.copy(), alpha, c.size + 1)


def project_to_boundary(p, domain: GraphDomain, tol: float = 1e-12,
                        max_iter: int = 50) -> np.ndarray:
    """Nearest boundary point to ``p`` by damped Gauss-Newton on ``u -> (u, f(u))``."""
    p = np.asarray(p, dtype=float)
    u = p[:-1].copy()
    scale = 1.0 + np.linalg.norm(p)

    def objective(v):
        r = np.append(v - p[:-1], domain.height(v) - p[-1])
        return r, 0.5 * float(r @ r)

    r, phi = objective(u)
    for _ in range(max_iter):
        g = np.asarray(domain.grad(u), dtype=float).reshape(-1)
        J = np.vstack([np.eye(u.size), g[None, :]])
        grad_phi = J.T @ r
        if np.linalg.norm(grad_phi) <= tol * scale:
            return np.append(u, domain.height(u))
        step = np.linalg.solve(J.T @ J, -grad_phi)
        t = 1.0
        while True:
            cand = u + t * step
            rc, pc = objective(cand)
            if pc <= phi or t < 1e-8:
                break
            t *= 0.5
        u, r, phi = cand, rc, pc
        if np.linalg.norm(t * step) <= tol * scale:
            g = np.asarray(domain.grad(u), dtype=float).reshape(-1)
            J = np.vstack([np.eye(u.size), g[None, :]])
            if np.linalg.norm(J.T @ r) <= math.sqrt(tol) * scale:
                return np.append(u, domain.height(u))
    raise StepFailure(f"boundary projection did not converge from {p}")


def inner_reflection_step(x, w_increment, domain: GraphDomain) -> tuple[np.ndarray, np.ndarray]:
    """Move by ``w_increment``; if that leaves the domain, push back to the
    nearest boundary point.  Returns the new point and the push ``dL``."""
    x = np.asarray(x, dtype=float)
    p = x + np.asarray(w_increment, dtype=float)
    if domain.gap(p) >= 0.0:
        return p, np.zeros_like(p)
    q = project_to_boundary(p, domain)
    return q, q - p


@dataclass(frozen=True)
class ReflectedSolutionND:
    t0: float
    dt: float
    x: np.ndarray
    L: np.ndarray
    total_variation: np.ndarray
    I: np.ndarray
    w: np.ndarray
    epsilon: float
    accrual_points: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    @property
    def d(self) -> int:
        return self.x.shape[0]

    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.x.shape[1])

    def coordinate(self, name: str, i: int) -> SampledPath:
        return SampledPath(self.t0, self.dt, getattr(self, name)[i])

    def write_csv(self, path) -> None:
        d = self.d
        header = ["t"] + [f"x_{i + 1}" for i in range(d)] + [f"l_{i + 1}" for i in range(d)] + ["abs_l"]
        write_columns(path, header, [self.times(), *self.x, *self.L, self.total_variation])


def _as_array(w) -> tuple[np.ndarray, float, float]:
    if isinstance(w, np.ndarray):
        raise InvalidArgument("pass the driver as a sequence of SampledPath")
    paths = list(w)
    first = paths[0]
    for p in paths[1:]:
        if not first.same_grid(p):
            raise InvalidArgument("driver coordinates must share a grid")
    return np.vstack([p.values for p in paths]), first.t0, first.dt


def extended_solve_nd(w: Sequence[SampledPath], domain: GraphDomain, epsilon: float,
                      l_cap: float = 1e3, check_window: bool = True) -> ReflectedSolutionND:
    """Epsilon construction for the d-dimensional extended problem.

    Within a grid cell the driver and drift are linear.  When the pushing in
    a cell would carry ``|L|`` past the next threshold, the cell is split:
    the crossing fraction is the exit fraction of the straight move plus the
    share of the remaining push needed to reach the threshold, and the rest
    of the cell is redone with the updated frozen drift.
    """
    if not epsilon > 0:
        raise InvalidArgument("epsilon must be positive")
    W, t0, dt = _as_array(w)
    d, n = W.shape
    if d != domain.d:
        raise InvalidArgument(f"driver has {d} coordinates, domain has d={domain.d}")
    if domain.gap(W[:, 0]) < 0:
        raise InvalidArgument("driver must start in the closure of the domain")
    X = np.zeros((d, n))
    L = np.zeros((d, n))
    I = np.zeros((d, n))
    TV = np.zeros(n)
    X[:, 0] = W[:, 0]
    x = W[:, 0].copy()
    Lv = np.zeros(d)
    Iv = np.zeros(d)
    tv = 0.0
    band = 0
    frozen = np.zeros(d)
    touched = []
    for k in range(n - 1):
        dw = W[:, k + 1] - W[:, k]
        rem = 1.0
        while True:
            delta = rem * dw + rem * dt * frozen
            x_new, dL = inner_reflection_step(x, delta, domain)
            m = float(np.linalg.norm(dL))
            target = (band + 1) * epsilon
            if m == 0.0 or tv + m < target:
                x = x_new
                Lv = Lv + dL
                Iv = Iv + rem * dt * frozen
                tv += m
                if m > 0.0:
                    touched.append(k + 1)
                    if check_window:
                        domain.check_point(x)
                break
            need = target - tv
            gap0 = domain.gap(x)
            if gap0 <= 0.0:
                u0 = 0.0
            else:
                phi = lambda s: domain.gap(x + s * delta)
                u0 = optimize.brentq(phi, 0.0, 1.0, xtol=1e-15, rtol=4 * np.finfo(float).eps)
            frac = u0 + (1.0 - u0) * need / m
            dLc = dL * (need / m)
            Iv = Iv + frac * rem * dt * frozen
            x = x + frac * delta + dLc
            Lv = Lv + dLc
            tv = target
            band += 1
            frozen = Lv.copy()
            rem *= 1.0 - frac
            if check_window:
                domain.check_point(x)
            if tv >= l_cap:
                raise BlowUpError(t0 + (k + 1.0 - rem) * dt, l_cap)
        X[:, k + 1] = x
        L[:, k + 1] = Lv
        I[:, k + 1] = Iv
        TV[k + 1] = tv
        if tv >= l_cap:
            raise BlowUpError(t0 + (k + 1) * dt, l_cap)
    return ReflectedSolutionND(t0, dt, X, L, TV, I, W, float(epsilon),
                               np.unique(np.array(touched, dtype=np.int64)))


def verify_nd(sol: ReflectedSolutionND, domain: GraphDomain, tol: float = 1e-9,
              angle_tol: float = 1e-6) -> Report:
    """Check reconstruction, monotone total variation accrued on the boundary,
    normal pushes, the two-sided bound on ``L^d`` and the a-priori bound on ``L^d``."""
    rep = Report(title="extended Skorohod solution in a graph domain")
    X, L, I, W, TV = sol.x, sol.L, sol.I, sol.w, sol.total_variation
    scale = 1.0 + float(np.max(np.abs(W)))
    tol_s = tol * scale

    recon = np.max(np.abs(X - (W + I + L)), axis=0)
    k = int(np.argmax(recon))
    rep.add("reconstruction", recon[k] <= tol_s, float(recon[k]), tol_s, worst_node=k)

    dTV = np.diff(TV)
    k = int(np.argmin(dTV)) if dTV.size else 0
    rep.add("|L| nondecreasing", (dTV.size == 0) or dTV[k] >= -tol_s,
            float(dTV[k]) if dTV.size else 0.0, tol_s, worst_node=k)

    dL = np.diff(L, axis=1)
    norms = np.linalg.norm(dL, axis=0)
    active = np.nonzero(norms > tol_s)[0]
    worst_gap, worst_angle, wg, wa = 0.0, 0.0, -1, -1
    for c in active:
        xe = X[:, c + 1]
        g = abs(domain.gap(xe))
        if g > worst_gap:
            worst_gap, wg = g, int(c + 1)
        nvec = domain.normal(xe)
        cosang = float(dL[:, c] @ nvec) / norms[c]
        ang = 1.0 - cosang
        if ang > worst_angle:
            worst_angle, wa = ang, int(c + 1)
    rep.add("accrual on boundary", worst_gap <= tol_s, worst_gap, tol_s, worst_node=wg)
    rep.add("push along normal", worst_angle <= angle_tol, worst_angle, angle_tol, worst_node=wa)

    Ld = L[-1]
    lower = domain.alpha * TV - Ld
    upper = Ld - TV
    excess = np.maximum(lower, upper)
    k = int(np.argmax(excess))
    rep.add("alpha|L| <= L^d <= |L|", excess[k] <= tol_s, float(excess[k]), tol_s, worst_node=k)

    bound = np.maximum.accumulate(np.maximum(-W[-1], 0.0)) + (1.0 - domain.alpha)
    over = Ld - bound
    k = int(np.argmax(over))
    rep.add("L^d a-priori bound", over[k] <= tol_s, float(over[k]), tol_s, worst_node=k)

    rep.warnings.append("the normal-continuity hypothesis needed for uniqueness is not checked")
    return rep
