from __future__ import annotations

import math

import numpy as np
import pytest

from inert_drift.errors import InvalidArgument
from inert_drift.paths import (
    DriftSpec,
    RngConfig,
    SampledPath,
    constant_drift,
    generate_brownian_path,
    linear_drift,
    make_drift,
    map_replicas,
    neg_square_drift,
    one_minus_sqrt_drift,
    validate_drift,
)


def test_sampled_path_rejects_bad_input():
    with pytest.raises(InvalidArgument):
        SampledPath(0.0, 0.0, [1.0, 2.0])
    with pytest.raises(InvalidArgument):
        SampledPath(0.0, 0.1, [1.0, np.nan])
    with pytest.raises(InvalidArgument):
        SampledPath(0.0, 0.1, [])


def test_sampled_path_is_immutable_and_has_grid():
    p = SampledPath(1.0, 0.5, [0.0, 1.0, 2.0])
    assert p.n == 3
    assert p.horizon == 1.0
    np.testing.assert_array_equal(p.times(), [1.0, 1.5, 2.0])
    with pytest.raises(ValueError):
        p.values[0] = 5.0


def test_sampled_path_csv(tmp_path):
    p = SampledPath(0.0, 0.1, [0.0, 0.3])
    p.write_csv(tmp_path / "p.csv")
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert lines[0] == "t,value"
    assert lines[2] == "0.1,0.3"


def test_zero_horizon_gives_single_node():
    (p,) = generate_brownian_path(RngConfig(1), 0.01, 0.0)
    assert p.n == 1 and p.values[0] == 0.0


def test_generator_rejects_bad_arguments():
    with pytest.raises(InvalidArgument):
        generate_brownian_path(RngConfig(1), 0.0, 1.0)
    with pytest.raises(InvalidArgument):
        generate_brownian_path(RngConfig(1), 0.01, -1.0)


def test_same_rng_is_bit_identical():
    a = generate_brownian_path(RngConfig(7, 3), 0.01, 1.0, 2)
    b = generate_brownian_path(RngConfig(7, 3), 0.01, 1.0, 2)
    for p, q in zip(a, b):
        assert np.array_equal(p.values, q.values)
    c = generate_brownian_path(RngConfig(7, 4), 0.01, 1.0, 2)
    assert not np.array_equal(a[0].values, c[0].values)


def test_brownian_moments_at_time_one():
    n = 100_000
    gen = RngConfig(11).generator()
    # value at t=1 on a 10-step grid, vectorised over replicas
    vals = (gen.standard_normal((n, 10)) * math.sqrt(0.1)).sum(axis=1)
    assert abs(vals.mean()) < 3 / math.sqrt(n)
    assert abs(vals.var() - 1.0) < 0.03
    # the per-replica generator agrees in law (and starts at zero)
    ends = np.array([generate_brownian_path(RngConfig(12, i), 0.1, 1.0)[0].values[-1]
                     for i in range(2000)])
    assert abs(ends.var() - 1.0) < 0.15


def test_refined_grid_has_same_marginal_variance():
    coarse = np.array([generate_brownian_path(RngConfig(5, i), 0.1, 1.0)[0].values[-1]
                       for i in range(4000)])
    fine = np.array([generate_brownian_path(RngConfig(6, i), 0.05, 1.0)[0].values[-1]
                     for i in range(4000)])
    se = math.sqrt(2.0 / 4000)
    assert abs(coarse.var() - 1.0) < 4 * se
    assert abs(fine.var() - 1.0) < 4 * se


def test_drift_spec_vectorises_scalar_callables():
    spec = DriftSpec(lambda l: math.sin(l), lambda l: 1.0)
    out = spec(np.array([0.0, math.pi / 2]))
    np.testing.assert_allclose(out, [0.0, 1.0])
    assert spec(0.0) == 0.0


def test_make_drift():
    assert make_drift("linear", K=2.0)(1.5) == 3.0
    with pytest.raises(InvalidArgument):
        make_drift("nope")
    with pytest.raises(InvalidArgument):
        make_drift("linear", bogus=1)


@pytest.mark.parametrize("spec", [constant_drift(-1.5), linear_drift(3.0), neg_square_drift()])
def test_shipped_drifts_pass_lipschitz_check(spec):
    rep = validate_drift(spec, 10.0, rng=RngConfig(2))
    assert rep["lipschitz"].passed
    assert rep.violations == []


def test_linear_drift_has_no_violations():
    rep = validate_drift(linear_drift(2.0), 5.0, rng=RngConfig(3))
    assert rep.passed
    assert rep.warnings


def test_one_minus_sqrt_violation_reported():
    rep = validate_drift(one_minus_sqrt_drift(claimed_lambda=1.0), 4.0, rng=RngConfig(4))
    assert not rep["lipschitz"].passed
    assert rep.violations
    a, b, lhs, rhs = rep.violations[0]
    assert lhs > rhs and a < b


def test_neg_square_divergence_flag():
    rep = validate_drift(neg_square_drift(), 100.0, rng=RngConfig(5))
    assert rep.divergence_flag
    assert not rep["divergence"].passed
    assert any("heuristic" in w for w in rep.warnings)
    ok = validate_drift(linear_drift(-1.0), 100.0, rng=RngConfig(5))
    assert not ok.divergence_flag


def test_map_replicas_is_order_preserving_and_thread_independent():
    fn = lambda i: generate_brownian_path(RngConfig(9, i), 0.1, 1.0)[0].values[-1]
    assert map_replicas(fn, 16, 1) == map_replicas(fn, 16, 4)
