"""The twelve acceptance criteria, each run through its CLI subcommand.

Every criterion uses master seed 1, fixed before any run.  A criterion
passes when its checks in the JSON summary pass at the stated tolerances
and the subcommand finishes within the stated runtime.
"""

from __future__ import annotations

import json
import time

import pytest

from conftest import ACCEPTANCE
from inert_drift import cli

SEED = 1
_RUNS: dict[tuple, tuple[int, dict, float]] = {}


def _run(tmp_path_factory, *args):
    key = tuple(args)
    if key not in _RUNS:
        out = tmp_path_factory.mktemp("acceptance")
        argv = [args[0], "--out", str(out), *args[1:]]
        t0 = time.perf_counter()
        code = cli.main(argv)
        elapsed = time.perf_counter() - t0
        summaries = list(out.glob("*_summary.json"))
        assert len(summaries) == 1
        _RUNS[key] = (code, json.loads(summaries[0].read_text()), elapsed)
    return _RUNS[key]


def _judge(num, tmp_path_factory, args, checks=None, budget=None):
    code, summary, elapsed = _run(tmp_path_factory, *args)
    assert summary["report"] is not None, summary["error"]
    rows = summary["report"]["checks"]
    if checks is not None:
        rows = [r for r in rows if r["name"] in checks]
        assert len(rows) == len(checks), [r["name"] for r in summary["report"]["checks"]]
    ok_checks = all(r["passed"] for r in rows)
    ok_time = budget is None or elapsed < budget
    detail = "; ".join(f"{r['name']}={r['value']} (tol {r['tolerance']})" for r in rows)
    detail += f"; runtime {elapsed:.1f}s" + (f" (budget {budget:g}s)" if budget else "")
    ACCEPTANCE.append((num, ok_checks and ok_time, detail))
    print(f"criterion {num}: {'PASS' if ok_checks and ok_time else 'FAIL'}  {detail}")
    assert ok_checks, detail
    assert ok_time, detail
    if checks is None:
        assert code == cli.EXIT_OK


def test_criterion_01_classic_map(tmp_path_factory):
    _judge(1, tmp_path_factory, ["skorohod-solve", "--check", "classic", "--seed", str(SEED)],
           budget=10)


def test_criterion_02_constant_drift(tmp_path_factory):
    _judge(2, tmp_path_factory, ["verify-escape", "--seed", str(SEED)], budget=30)


def test_criterion_03_uniqueness_and_blow_up(tmp_path_factory):
    _judge(3, tmp_path_factory, ["skorohod-solve", "--check", "refinement", "--seed", str(SEED)])


def test_criterion_04_occupation_local_time(tmp_path_factory):
    _judge(4, tmp_path_factory, ["verify-excursion-density", "--seed", str(SEED)],
           checks=["relative sup error"], budget=120)


def test_criterion_05_linf_law(tmp_path_factory):
    _judge(5, tmp_path_factory, ["verify-linf", "--seed", str(SEED)], budget=600)


def test_criterion_06_crossing_rate(tmp_path_factory):
    _judge(6, tmp_path_factory, ["verify-crossing-rate", "--seed", str(SEED)], budget=300)


def test_criterion_07_stationary_density(tmp_path_factory):
    _judge(7, tmp_path_factory, ["verify-stationary", "--seed", str(SEED)],
           checks=["KS vs Normal(0, K/2)", "flag occupancy"], budget=120)


def test_criterion_08_generator_identities(tmp_path_factory):
    _judge(8, tmp_path_factory, ["verify-stationary", "--seed", str(SEED)],
           checks=["duality residual", "adjoint annihilates stationary density"])


def test_criterion_09_ou_limit(tmp_path_factory):
    _judge(9, tmp_path_factory, ["converge-ou", "--seed", str(SEED)], budget=600)


def test_criterion_10_scaling(tmp_path_factory):
    _judge(10, tmp_path_factory, ["verify-scaling", "--seed", str(SEED)])


def test_criterion_11_bessel_limit(tmp_path_factory):
    _judge(11, tmp_path_factory, ["converge-bessel", "--seed", str(SEED)], budget=900)


def test_criterion_12_nd_solver(tmp_path_factory):
    _judge(12, tmp_path_factory, ["verify-nd", "--seed", str(SEED)], budget=120)
