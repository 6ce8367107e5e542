"""Command-line front end: one subcommand per experiment.

Every run writes its tables as CSV and a JSON summary into the output
directory, named ``{experiment}_seed{seed}_*``.  The summary holds the
configuration (minus the output directory and thread count, which do not
affect results), the checks with their tolerances, and the estimates; it
has no timestamps, so identical configurations give identical bytes.

Exit codes: 0 all checks passed, 2 configuration error, 3 numerical failure
(blow-up, non-convergence, step failure), 4 a check failed.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import experiments as ex
from . import observables, skorohod
from .errors import InvalidArgument, NumericalFailure
from .paths import SampledPath, make_drift
from .stats import Report, _jsonable

SCHEMA_VERSION = 1
EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_CHECK = 0, 2, 3, 4


class ConfigError(InvalidArgument):
    pass


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce one run.  ``None`` means the experiment default."""

    experiment: str
    master_seed: int | None = None
    output_dir: str = "."
    threads: int = 1
    check: str | None = None
    input: str | None = None
    drift: str | None = None
    drift_params: dict = field(default_factory=dict)
    l: float | None = None
    K: float | None = None
    x: float | None = None
    y: float | None = None
    v: float | None = None
    dt: float | None = None
    horizon: float | None = None
    n_paths: int | None = None
    epsilon: float | None = None
    tolerance: float | None = None

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a JSON object")
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - names)
        if unknown:
            raise ConfigError(f"unknown configuration fields: {unknown}")
        if "experiment" not in data:
            raise ConfigError("configuration needs an 'experiment' field")
        cfg = cls(**data)
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"configuration is not valid JSON: {exc}") from None
        return cls.from_dict(data)

    def validate(self) -> None:
        if self.experiment not in SUBCOMMANDS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if self.master_seed is not None and (
                not isinstance(self.master_seed, int) or not 0 <= self.master_seed < 2**64):
            raise ConfigError("master_seed must be an integer in [0, 2^64)")
        if not isinstance(self.threads, int) or self.threads < 1:
            raise ConfigError("threads must be a positive integer")
        if not isinstance(self.drift_params, dict):
            raise ConfigError("drift_params must be an object")
        for name in ("l", "K", "x", "y", "v", "dt", "horizon", "epsilon", "tolerance"):
            val = getattr(self, name)
            if val is not None:
                if isinstance(val, bool) or not isinstance(val, (int, float)) or not math.isfinite(val):
                    raise ConfigError(f"{name} must be a finite number")
                setattr(self, name, float(val))
        if self.n_paths is not None and (not isinstance(self.n_paths, int) or self.n_paths < 1):
            raise ConfigError("n_paths must be a positive integer")
        sub = SUBCOMMANDS[self.experiment]
        used = {n for n in PARAMETER_FIELDS if getattr(self, n) not in (None, {})}
        extra = sorted(used - set(sub.fields))
        if extra:
            raise ConfigError(f"{self.experiment} does not take {extra}")
        if self.check is not None and self.check not in sub.checks:
            raise ConfigError(f"{self.experiment}: check must be one of {list(sub.checks)}")
        if sub.needs_seed(self) and self.master_seed is None:
            raise ConfigError(f"{self.experiment} is a Monte Carlo run; --seed is required")


PARAMETER_FIELDS = ("check", "input", "drift", "drift_params", "l", "K", "x", "y", "v", "dt",
                    "horizon", "n_paths", "epsilon", "tolerance")


@dataclass(frozen=True)
class Subcommand:
    run: Callable[[ExperimentConfig], ex.Outcome]
    help: str
    fields: tuple[str, ...] = ()
    checks: tuple[str, ...] = ()
    monte_carlo: bool = True

    def needs_seed(self, cfg: ExperimentConfig) -> bool:
        if self.monte_carlo:
            return True
        return cfg.check not in (None, "none")


def _kw(cfg: ExperimentConfig, mapping: dict[str, str]) -> dict:
    """Experiment keyword arguments for the config fields that are set."""
    out = {}
    for src, dst in mapping.items():
        val = getattr(cfg, src)
        if val is not None:
            out[dst] = val
    return out


def _drift(cfg: ExperimentConfig, default: str, **defaults):
    params = dict(defaults) if cfg.drift is None else {}
    params.update(cfg.drift_params)
    return make_drift(cfg.drift or default, **params)


def _read_path(path: str) -> SampledPath:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] < 2 or data.shape[0] < 2:
        raise ConfigError(f"{path}: expected columns t,value with at least two rows")
    t = data[:, 0]
    steps = np.diff(t)
    if not np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
        raise ConfigError(f"{path}: time column must be uniformly spaced")
    return SampledPath(t[0], steps[0], data[:, 1])


def bundled_path(dt: float = 1e-3, horizon: float = 1.0) -> SampledPath:
    """Deterministic test input ``0.3 + 0.5 t - sin(2 pi t)``."""
    n = int(round(horizon / dt))
    t = dt * np.arange(n + 1)
    return SampledPath(0.0, dt, 0.3 + 0.5 * t - np.sin(2.0 * np.pi * t))


# ---------------------------------------------------------------------------
# subcommand bodies


def _skorohod_solve(cfg: ExperimentConfig) -> ex.Outcome:
    if cfg.check == "classic":
        return ex.classic_map_suite(cfg.master_seed, **_kw(cfg, {"n_paths": "n_paths",
                                                                  "tolerance": "tol"}))
    if cfg.check == "refinement":
        return ex.refinement_suite(cfg.master_seed, **_kw(cfg, {
            "n_paths": "n_paths", "dt": "dt", "horizon": "horizon", "tolerance": "agreement"}))
    f = _read_path(cfg.input) if cfg.input else bundled_path(cfg.dt or 1e-3, cfg.horizon or 1.0)
    mu = _drift(cfg, "constant", c=0.0)
    tol = cfg.tolerance if cfg.tolerance is not None else skorohod.default_tol(f)
    if cfg.epsilon is not None:
        sol = skorohod.extended_solve(f, mu, cfg.epsilon)
    elif mu.monotone == "constant":
        sol = skorohod.extended_solve(f, mu, 1.0)
    else:
        sol = skorohod.refine_until(f, mu, tol)
    rep = skorohod.verify_solution(f, mu, sol, tol)
    rep.title = "reflected solution"
    est = {"final_L": float(sol.L.values[-1])}
    if mu.monotone == "constant" and float(mu(0.0)) == 0.0:
        diff = float(np.max(np.abs(sol.L.values - skorohod.classic_map(f).L.values)))
        rep.add("matches classic map", diff <= 1e-12, diff, 1e-12)
    return ex.Outcome(rep, {"solution": sol.write_csv}, est)


def _verify_escape(cfg: ExperimentConfig) -> ex.Outcome:
    out = ex.constant_drift_suite(cfg.master_seed, **_kw(cfg, {
        "n_paths": "n_paths", "dt": "dt", "horizon": "horizon", "epsilon": "epsilon",
        "tolerance": "tol"}))
    mu = _drift(cfg, "linear", K=1.0)
    taus = np.linspace(0.0, 3.0, 61)
    cons = [observables.escape_survival(mu, t, "consistent") for t in taus]
    lit = [observables.escape_survival(mu, t, "paper-literal") for t in taus]
    out.tables["survival"] = ex._table(["tau", "consistent", "paper_literal"], [taus, cons, lit])
    return out


def _verify_excursion_density(cfg: ExperimentConfig) -> ex.Outcome:
    out = ex.occupation_suite(cfg.master_seed, **_kw(cfg, {
        "n_paths": "n_paths", "dt": "dt", "horizon": "horizon", "epsilon": "epsilon",
        "tolerance": "rel_tol"}))
    exc = ex.excursion_suite(cfg.master_seed)
    out.report.extend(exc.report)
    out.estimates.update(exc.estimates)
    return out


def _verify_crossing_rate(cfg):
    return ex.crossing_rate_suite(cfg.master_seed, **_kw(cfg, {
        "l": "level", "n_paths": "n_events", "dt": "dt", "tolerance": "rel_tol"}))


def _simulate_interval(cfg):
    return ex.interval_suite(cfg.master_seed, **_kw(cfg, {
        "l": "l", "K": "K", "x": "x0", "v": "v0", "dt": "dt", "horizon": "horizon"}))


def _verify_stationary(cfg):
    return ex.stationary_suite(cfg.master_seed, **_kw(cfg, {
        "l": "l", "K": "K", "n_paths": "n_events", "tolerance": "ks_tol"}))


def _converge_ou(cfg):
    return ex.ou_suite(cfg.master_seed, **_kw(cfg, {"l": "l", "n_paths": "n_events"}))


def _simulate_three(cfg):
    return ex.three_suite(cfg.master_seed, **_kw(cfg, {
        "x": "x", "y": "y", "v": "v", "K": "K", "dt": "dt", "horizon": "horizon"}))


def _verify_scaling(cfg):
    return ex.scaling_suite(cfg.master_seed, threads=cfg.threads, **_kw(cfg, {
        "x": "x", "y": "y", "v": "v", "K": "K", "dt": "dt", "horizon": "horizon",
        "n_paths": "n_paths", "tolerance": "ks_tol"}))


def _verify_linf(cfg):
    return ex.linf_suite(cfg.master_seed, threads=cfg.threads, **_kw(cfg, {
        "n_paths": "n_paths", "dt": "dt", "horizon": "horizon", "epsilon": "epsilon",
        "tolerance": "ks_tol"}))


def _converge_bessel(cfg):
    return ex.bessel_suite(cfg.master_seed, threads=cfg.threads, **_kw(cfg, {
        "x": "x", "K": "K", "dt": "dt", "horizon": "horizon", "n_paths": "n_paths",
        "tolerance": "ks_tol"}))


def _solve_nd(cfg):
    return ex.nd_solve(cfg.master_seed, **_kw(cfg, {"dt": "dt", "horizon": "horizon",
                                                    "epsilon": "epsilon"}))


def _verify_nd(cfg):
    return ex.nd_suite(cfg.master_seed, **_kw(cfg, {
        "n_paths": "n_paths", "dt": "dt", "horizon": "horizon", "epsilon": "epsilon",
        "tolerance": "tol"}))


SUBCOMMANDS: dict[str, Subcommand] = {
    "skorohod-solve": Subcommand(
        _skorohod_solve, "solve the reflection problem; --check runs the map or refinement suite",
        ("check", "input", "drift", "drift_params", "dt", "horizon", "epsilon", "tolerance",
         "n_paths"), ("none", "classic", "refinement"), monte_carlo=False),
    "verify-escape": Subcommand(
        _verify_escape, "constant-drift closed form; escape-survival curves",
        ("drift", "drift_params", "dt", "horizon", "n_paths", "epsilon", "tolerance")),
    "verify-excursion-density": Subcommand(
        _verify_excursion_density, "occupation-time local time and excursion counts",
        ("dt", "horizon", "n_paths", "epsilon", "tolerance")),
    "verify-crossing-rate": Subcommand(
        _verify_crossing_rate, "rate of excursions reaching a level",
        ("l", "dt", "n_paths", "tolerance")),
    "simulate-interval": Subcommand(
        _simulate_interval, "simulate a Brownian particle between inert walls",
        ("l", "K", "x", "v", "dt", "horizon")),
    "verify-stationary": Subcommand(
        _verify_stationary, "stationary law of the velocity chain; generator identities",
        ("l", "K", "n_paths", "tolerance")),
    "converge-ou": Subcommand(
        _converge_ou, "rescaled velocity chain against the Ornstein-Uhlenbeck moments",
        ("l", "n_paths")),
    "simulate-three": Subcommand(
        _simulate_three, "simulate two Brownian particles around an inert particle",
        ("x", "y", "v", "K", "dt", "horizon")),
    "verify-scaling": Subcommand(
        _verify_scaling, "Brownian scaling of the three-particle system",
        ("x", "y", "v", "K", "dt", "horizon", "n_paths", "tolerance")),
    "verify-linf": Subcommand(
        _verify_linf, "law of the total local time for mu(l) = l",
        ("dt", "horizon", "n_paths", "epsilon", "tolerance")),
    "converge-bessel": Subcommand(
        _converge_bessel, "large-K gap law against Bessel(2)",
        ("x", "K", "dt", "horizon", "n_paths", "tolerance")),
    "solve-nd": Subcommand(
        _solve_nd, "solve the extended problem above a plane", ("dt", "horizon", "epsilon")),
    "verify-nd": Subcommand(
        _verify_nd, "graph-domain solver checks", ("dt", "horizon", "n_paths", "epsilon",
                                                   "tolerance")),
}


# ---------------------------------------------------------------------------
# running and writing


def _stem(cfg: ExperimentConfig) -> str:
    seed = "" if cfg.master_seed is None else f"_seed{cfg.master_seed}"
    return f"{cfg.experiment}{seed}"


# fields that do not influence results and are left out of the summary
RUN_ONLY_FIELDS = ("output_dir", "threads")


def _summary(cfg: ExperimentConfig, status: str, report: Report | None, estimates: dict,
             error: str | None = None) -> str:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "experiment": cfg.experiment,
        "master_seed": cfg.master_seed,
        "config": {k: v for k, v in cfg.to_dict().items() if k not in RUN_ONLY_FIELDS},
        "status": status,
        "passed": bool(report is not None and report.passed and error is None),
        "report": report.to_dict() if report is not None else None,
        "estimates": _jsonable(estimates),
        "error": error,
    }
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def run(cfg: ExperimentConfig, echo: Callable[[str], None] | None = print) -> int:
    """Run one experiment, write its artifacts and return the exit code."""
    cfg.validate()
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = _stem(cfg)
    try:
        outcome = SUBCOMMANDS[cfg.experiment].run(cfg)
    except NumericalFailure as exc:
        (out / f"{stem}_summary.json").write_text(
            _summary(cfg, "numerical-failure", None, {}, str(exc)))
        if echo:
            echo(f"numerical failure: {exc}")
        return EXIT_NUMERICAL
    for name, writer in outcome.tables.items():
        writer(out / f"{stem}_{name}.csv")
    outcome.report.write_csv(out / f"{stem}_report.csv")
    status = "pass" if outcome.report.passed else "fail"
    (out / f"{stem}_summary.json").write_text(
        _summary(cfg, status, outcome.report, outcome.estimates))
    if echo:
        for line in outcome.report.lines():
            echo(line)
        for w in outcome.report.warnings:
            echo(f"warning: {w}")
    return EXIT_OK if outcome.report.passed else EXIT_CHECK


def _drift_param(text: str) -> tuple[str, float]:
    key, sep, val = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    try:
        return key, float(val)
    except ValueError:
        raise argparse.ArgumentTypeError(f"drift parameter {key!r} must be numeric") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="inert-drift", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name, spec in SUBCOMMANDS.items():
        p = sub.add_parser(name, help=spec.help, description=spec.help)
        p.add_argument("--config", help="JSON configuration file; flags override its values")
        p.add_argument("--seed", type=int, dest="master_seed",
                       help="master seed" + (" (required)" if spec.monte_carlo else ""))
        p.add_argument("--threads", type=int, help="worker threads (output does not depend on it)")
        p.add_argument("--out", dest="output_dir", help="output directory (default .)")
        if "check" in spec.fields:
            p.add_argument("--check", choices=spec.checks)
        if "input" in spec.fields:
            p.add_argument("--input", help="CSV with columns t,value on a uniform grid")
        if "drift" in spec.fields:
            p.add_argument("--drift", help="drift name (constant, linear, neg_square, one_minus_sqrt)")
            p.add_argument("--drift-param", dest="drift_params", type=_drift_param,
                           action="append", metavar="KEY=VALUE")
        for fname, ftype in (("l", float), ("K", float), ("x", float), ("y", float),
                             ("v", float), ("dt", float), ("horizon", float),
                             ("n_paths", int), ("epsilon", float), ("tolerance", float)):
            if fname in spec.fields:
                p.add_argument(f"--{fname.replace('_', '-')}", dest=fname, type=ftype)
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    data = {}
    if getattr(args, "config", None):
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read configuration {args.config}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a JSON object")
        if data.get("experiment", args.experiment) != args.experiment:
            raise ConfigError(f"configuration is for {data['experiment']!r}, "
                              f"not {args.experiment!r}")
    data["experiment"] = args.experiment
    for key, val in vars(args).items():
        if key in ("config", "experiment") or val is None:
            continue
        data[key] = dict(val) if key == "drift_params" else val
    return ExperimentConfig.from_dict(data)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
        return run(cfg)
    except InvalidArgument as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
