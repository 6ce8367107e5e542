"""Sampled paths, drift specifications and the seeded Brownian generator."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import InvalidArgument
from .stats import Report


@dataclass(frozen=True)
class SampledPath:
    """Values on the uniform grid ``t0 + k*dt``, ``k = 0..n-1``."""

    t0: float
    dt: float
    values: np.ndarray

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise InvalidArgument(f"dt must be positive, got {self.dt}")
        vals = np.array(self.values, dtype=float)
        if vals.ndim != 1 or vals.size == 0:
            raise InvalidArgument("values must be a nonempty 1-d sequence")
        if not np.all(np.isfinite(vals)):
            raise InvalidArgument("values must be finite")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "t0", float(self.t0))
        object.__setattr__(self, "dt", float(self.dt))

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def horizon(self) -> float:
        return (self.n - 1) * self.dt

    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n)

    def with_values(self, values) -> "SampledPath":
        return SampledPath(self.t0, self.dt, values)

    def same_grid(self, other: "SampledPath") -> bool:
        return self.n == other.n and self.t0 == other.t0 and self.dt == other.dt

    def write_csv(self, path) -> None:
        write_columns(path, ["t", "value"], [self.times(), self.values])


def write_columns(path, header, columns) -> None:
    """Write equal-length columns as CSV with full-precision floats."""
    cols = [np.asarray(c) for c in columns]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in zip(*cols):
            w.writerow([_cell(v) for v in row])


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    return repr(float(v))


@dataclass(frozen=True)
class RngConfig:
    """A (master_seed, replica_index) pair that names one reproducible noise stream."""

    master_seed: int
    replica_index: int = 0

    def __post_init__(self):
        if not 0 <= int(self.master_seed) < 2**64:
            raise InvalidArgument("master_seed must be a 64-bit unsigned integer")
        if int(self.replica_index) < 0:
            raise InvalidArgument("replica_index must be nonnegative")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.master_seed), spawn_key=(int(self.replica_index),))
        return np.random.Generator(np.random.PCG64(ss))

    def replica(self, index: int) -> "RngConfig":
        return RngConfig(self.master_seed, index)


def generate_brownian_path(rng: RngConfig, dt: float, horizon: float, dim: int = 1) -> list[SampledPath]:
    """Independent standard Brownian paths started at 0, one per dimension.

    The number of steps is ``round(horizon/dt)``; a zero horizon yields the
    single node ``[0.0]``.
    """
    if not dt > 0:
        raise InvalidArgument(f"dt must be positive, got {dt}")
    if not horizon >= 0:
        raise InvalidArgument(f"horizon must be nonnegative, got {horizon}")
    if int(dim) < 1:
        raise InvalidArgument("dim must be a positive integer")
    n = int(round(horizon / dt))
    gen = rng.generator()
    inc = gen.standard_normal((int(dim), n)) * math.sqrt(dt)
    out = []
    for row in inc:
        vals = np.empty(n + 1)
        vals[0] = 0.0
        np.cumsum(row, out=vals[1:])
        out.append(SampledPath(0.0, dt, vals))
    return out


@dataclass(frozen=True)
class DriftSpec:
    """Drift ``mu(l)`` together with a claimed local Lipschitz bound ``lambda(l)``.

    ``eval`` should accept numpy arrays; scalar-only callables are wrapped.
    ``monotone`` is one of ``"increasing"``, ``"decreasing"``, ``"constant"``.
    """

    eval: Callable
    lambda_bound: Callable
    monotone: str = "increasing"
    divergence_ok: bool = True
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.monotone not in ("increasing", "decreasing", "constant"):
            raise InvalidArgument(f"unknown monotonicity {self.monotone!r}")

    def __call__(self, l):
        arr = np.asarray(l, dtype=float)
        try:
            out = np.asarray(self.eval(arr), dtype=float)
            if out.shape != arr.shape:
                out = np.broadcast_to(out, arr.shape).astype(float)
        except (TypeError, ValueError):
            out = np.vectorize(lambda s: float(self.eval(float(s))), otypes=[float])(arr)
        return out if out.ndim else float(out)


def constant_drift(c: float) -> DriftSpec:
    c = float(c)
    return DriftSpec(lambda l: np.full(np.shape(l), c), lambda l: 0.0, "constant", True,
                     "constant", {"c": c})


def linear_drift(K: float = 1.0) -> DriftSpec:
    K = float(K)
    return DriftSpec(lambda l: K * np.asarray(l, dtype=float), lambda l: abs(K),
                     "increasing" if K >= 0 else "decreasing", True, "linear", {"K": K})


def neg_square_drift() -> DriftSpec:
    """mu(l) = -l^2; violates the divergence condition, so solutions blow up."""
    return DriftSpec(lambda l: -np.asarray(l, dtype=float) ** 2, lambda l: 2.0 * abs(l),
                     "decreasing", False, "neg_square", {})


def one_minus_sqrt_drift(claimed_lambda: float = 1.0) -> DriftSpec:
    """mu(l) = 1 - sqrt(l), shipped with a (false) finite Lipschitz claim near 0."""
    lam = float(claimed_lambda)
    return DriftSpec(lambda l: 1.0 - np.sqrt(np.asarray(l, dtype=float)), lambda l: lam,
                     "decreasing", True, "one_minus_sqrt", {"claimed_lambda": lam})


DRIFTS = {
    "constant": constant_drift,
    "linear": linear_drift,
    "neg_square": neg_square_drift,
    "one_minus_sqrt": one_minus_sqrt_drift,
}


def make_drift(name: str, **params) -> DriftSpec:
    try:
        factory = DRIFTS[name]
    except KeyError:
        raise InvalidArgument(f"unknown drift {name!r}; choose from {sorted(DRIFTS)}") from None
    try:
        return factory(**params)
    except TypeError as exc:
        raise InvalidArgument(f"bad parameters for drift {name!r}: {exc}") from None


@dataclass
class ValidationReport(Report):
    violations: list = field(default_factory=list)
    divergence_flag: bool = False
    partial_sums: tuple = ()


def validate_drift(spec: DriftSpec, l_max: float, n_samples: int = 2000,
                   rng: RngConfig | None = None, tol: float = 1e-9) -> ValidationReport:
    """Sample the Lipschitz claim and apply a partial-sum divergence heuristic.

    Pairs are drawn half uniformly on [0, l_max] and half log-uniformly down
    to ``1e-12 * l_max`` so that singular behaviour at 0 is probed.
    """
    if not l_max > 0:
        raise InvalidArgument("l_max must be positive")
    gen = (rng or RngConfig(0)).generator()
    half = max(1, int(n_samples) // 2)
    uni = gen.uniform(0.0, l_max, size=(half, 2))
    logs = l_max * 10.0 ** gen.uniform(-12.0, 0.0, size=(int(n_samples) - half, 2))
    pairs = np.sort(np.vstack([uni, logs]), axis=1)
    pairs = np.vstack([pairs, [[0.0, l_max * 1e-12], [0.0, l_max]]])
    a, b = pairs[:, 0], pairs[:, 1]
    keep = b > a
    a, b = a[keep], b[keep]
    lam = float(spec.lambda_bound(l_max))
    lhs = np.abs(np.asarray(spec(b)) - np.asarray(spec(a)))
    rhs = lam * (b - a) * (1.0 + tol)
    bad = np.nonzero(lhs > rhs)[0]
    rep = ValidationReport(title=f"drift validation: {spec.name}")
    rep.violations = [(float(a[i]), float(b[i]), float(lhs[i]), float(rhs[i])) for i in bad]
    worst = None
    if bad.size:
        i = bad[np.argmax(lhs[bad] / np.maximum(b[bad] - a[bad], 1e-300))]
        worst = (float(a[i]), float(b[i]))
    rep.add("lipschitz", bad.size == 0, int(bad.size), lam, worst_pair=worst)

    N = max(1, math.ceil(l_max))
    ns = np.arange(1, N + 1, dtype=float)
    mus = np.asarray(spec(ns), dtype=float)
    terms = 1.0 / np.maximum(np.abs(mus), 1.0)
    total = float(terms.sum())
    head = float(terms[: N // 2].sum())
    tail = total - head
    heading_down = N >= 2 and mus[-1] < 0 and mus[-1] < mus[N // 2 - 1]
    flag = bool(heading_down and tail < 0.1)
    rep.divergence_flag = flag
    rep.partial_sums = (head, total)
    rep.add("divergence", not flag, tail, 0.1, partial_sum_half=head, partial_sum=total, n_max=N)
    rep.warnings.append(
        "divergence of sum (|mu(n)| v 1)^-1 is judged from finitely many terms; heuristic only"
    )
    return rep


def map_replicas(fn: Callable, n: int, threads: int = 1) -> list:
    """Evaluate ``fn(i)`` for ``i = 0..n-1`` and return results in index order.

    With ``threads > 1`` a thread pool is used; because every replica owns its
    own noise stream and results are re-ordered by index, the output does not
    depend on the number of threads.
    """
    if threads <= 1 or n <= 1:
        return [fn(i) for i in range(n)]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=int(threads)) as pool:
        return list(pool.map(fn, range(n)))
