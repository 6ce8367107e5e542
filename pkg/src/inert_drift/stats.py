"""Statistical comparison utilities: reports, ECDFs, KS distance, autocorrelation."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .errors import InsufficientData, InvalidArgument


@dataclass
class Check:
    name: str
    passed: bool
    value: Any = None
    tolerance: Any = None
    context: dict = field(default_factory=dict)

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"[{flag}] {self.name}: value={_fmt(self.value)} tol={_fmt(self.tolerance)}"

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": bool(self.passed),
            "value": _jsonable(self.value),
            "tolerance": _jsonable(self.tolerance),
            "context": _jsonable(self.context),
        }


@dataclass
class Report:
    """Named pass/fail checks. Any failed check fails the report."""

    title: str = ""
    checks: list[Check] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def add(self, name, passed, value=None, tolerance=None, **context) -> Check:
        c = Check(name, bool(passed), value, tolerance, context)
        self.checks.append(c)
        return c

    def extend(self, other: "Report") -> None:
        self.checks.extend(other.checks)
        self.warnings.extend(other.warnings)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def failed(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def lines(self) -> list[str]:
        return [c.line() for c in self.checks]

    def to_dict(self) -> dict:
        return {
            "title": self.title,
            "passed": self.passed,
            "checks": [c.to_dict() for c in self.checks],
            "warnings": list(self.warnings),
        }

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["name", "passed", "value", "tolerance"])
            for c in self.checks:
                w.writerow([c.name, int(c.passed), _fmt(c.value), _fmt(c.tolerance)])


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating, float)):
        f = float(v)
        return f if np.isfinite(f) else repr(f)
    return v


class ECDF:
    """Empirical distribution function of a finite sample (right-continuous)."""

    def __init__(self, samples: Sequence[float]):
        values = np.sort(np.asarray(samples, dtype=float).ravel())
        if values.size == 0:
            raise InvalidArgument("ECDF needs at least one sample")
        self.values = values
        self.n = values.size

    def __call__(self, q):
        return np.searchsorted(self.values, q, side="right") / self.n

    def left_limit(self, q):
        return np.searchsorted(self.values, q, side="left") / self.n

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["value", "probability"])
            for i, v in enumerate(self.values):
                w.writerow([repr(float(v)), repr((i + 1) / self.n)])


def ecdf(samples: Sequence[float]) -> ECDF:
    return ECDF(samples)


def ks_distance(e: ECDF, cdf: Callable) -> float:
    """sup |ECDF - cdf| over the sample, using both sides of every jump."""
    x = e.values
    F = np.asarray(cdf(x), dtype=float)
    # left limit of the reference; equals F for a continuous cdf
    F_left = np.asarray(cdf(np.nextafter(x, -np.inf)), dtype=float)
    # ties: evaluate the step at the last index of each run
    upper = np.searchsorted(x, x, side="right") / e.n
    lower = np.searchsorted(x, x, side="left") / e.n
    return float(max(np.max(np.abs(upper - F)), np.max(np.abs(F_left - lower))))


def ks_two_sample(a: ECDF, b: ECDF) -> float:
    grid = np.concatenate([a.values, b.values])
    return float(np.max(np.abs(a(grid) - b(grid))))


def autocorrelation(path, lags: Sequence[float]) -> np.ndarray:
    """Mean-removed sample autocorrelation of a uniformly sampled path at time lags.

    Lags are rounded to the nearest multiple of the path step.
    """
    values = np.asarray(path.values, dtype=float)
    n = values.size
    ks = np.rint(np.asarray(lags, dtype=float) / path.dt).astype(int)
    if np.any(ks < 0):
        raise InvalidArgument("lags must be nonnegative")
    if n < 2 or ks.max(initial=0) >= n - 1:
        raise InsufficientData(f"path of {n} nodes too short for lag index {ks.max()}")
    y = values - values.mean()
    c0 = np.dot(y, y) / n
    if c0 == 0:
        raise InsufficientData("constant path has no autocorrelation")
    out = np.empty(ks.size)
    for i, k in enumerate(ks):
        out[i] = np.dot(y[: n - k], y[k:]) / n / c0
    return out
