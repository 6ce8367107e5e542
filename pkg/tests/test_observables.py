from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import integrate

from conftest import grid_path
from inert_drift.errors import InvalidArgument
from inert_drift.observables import (
    decompose_excursions,
    escape_survival,
    estimate_crossing_rate,
    estimate_tau_infty,
    excursion_density,
    level_crossing_rate,
    occupation_local_time,
    write_excursions_csv,
)
from inert_drift.paths import RngConfig, constant_drift, linear_drift
from inert_drift.skorohod import ReflectedSolution, bridge_minima, classic_map


def test_occupation_far_from_barrier():
    x = grid_path(lambda t: np.full_like(t, 0.5), 1.0, 1e-3)
    assert np.all(occupation_local_time(x, 0.1).values == 0)


def test_occupation_unit_slope():
    x = grid_path(lambda t: t, 1.0, 1e-3)
    for eps in (0.1, 0.2537, 1.0):
        est = occupation_local_time(x, eps)
        after = x.times() >= eps
        np.testing.assert_allclose(est.values[after], 0.5, atol=1e-12)


def test_occupation_rejects_bad_eps():
    with pytest.raises(InvalidArgument):
        occupation_local_time(grid_path(lambda t: t, 1.0, 0.1), 0.0)


def test_occupation_tracks_brownian_local_time(brownian):
    f = brownian(21, 1e-5, 10.0)
    f = f.with_values(f.values - f.values[0])
    ref = classic_map(f, cell_minima=bridge_minima(f, RngConfig(22).generator()))
    est = occupation_local_time(ref.x, 0.01)
    err = np.max(np.abs(est.values - ref.L.values)) / ref.L.values[-1]
    assert err < 0.05


def test_excursions_of_zero_path():
    z = grid_path(lambda t: np.zeros_like(t), 1.0, 0.01)
    sol = ReflectedSolution(z, z, z, 0.0)
    assert decompose_excursions(sol) == []


def test_single_sine_excursion():
    dt = 2 * math.pi / 2000
    x = grid_path(lambda t: np.maximum(0.0, np.sin(t)), 2 * math.pi, dt)
    zero = x.with_values(np.zeros(x.n))
    (rec,) = decompose_excursions(ReflectedSolution(x, zero, zero, 0.0), zero_tol=1e-12)
    assert rec.duration == pytest.approx(math.pi, abs=2 * dt)
    assert rec.max_height == pytest.approx(1.0, abs=1e-6)
    assert rec.tau == 0.0 and not rec.censored


def test_open_excursion_is_censored():
    x = grid_path(lambda t: t, 1.0, 0.1)
    zero = x.with_values(np.zeros(x.n))
    (rec,) = decompose_excursions(ReflectedSolution(x, zero, zero, 0.0))
    assert rec.censored


def test_excursion_taus_nondecreasing(brownian, tmp_path):
    f = brownian(23, 1e-4, 2.0)
    f = f.with_values(f.values - f.values[0])
    recs = decompose_excursions(classic_map(f), height_floor=0.01)
    taus = [r.tau for r in recs]
    assert recs and taus == sorted(taus)
    assert all(math.copysign(1.0, t) > 0 for t in taus)
    assert all(r.duration >= 0 and r.max_height > 0.01 for r in recs)
    write_excursions_csv(recs, tmp_path / "e.csv")
    assert (tmp_path / "e.csv").read_text().startswith("tau,duration,max_height,t_start,t_end,censored")


def test_escape_survival_values():
    assert escape_survival(constant_drift(0.0), 3.0) == 1.0
    assert escape_survival(constant_drift(0.0), 3.0, "paper-literal") == 1.0
    assert escape_survival(linear_drift(1.0), 1.0) == pytest.approx(math.exp(-1), rel=1e-8)
    assert escape_survival(constant_drift(-1.0), 1.0, "paper-literal") == pytest.approx(
        math.exp(-2), rel=1e-8)
    with pytest.raises(InvalidArgument):
        escape_survival(linear_drift(1.0), 1.0, "other")


@pytest.mark.parametrize("variant", ["consistent", "paper-literal"])
@pytest.mark.parametrize("mu", [linear_drift(1.0), constant_drift(-1.0), linear_drift(-0.5)])
def test_escape_survival_nonincreasing(mu, variant):
    vals = [escape_survival(mu, t, variant) for t in np.linspace(0, 3, 31)]
    assert vals[0] == 1.0
    assert all(b <= a + 1e-15 for a, b in zip(vals, vals[1:]))


def test_excursion_density_values():
    lam = 0.7
    assert excursion_density(constant_drift(0.0), 2.0, lam) == pytest.approx(
        1 / math.sqrt(2 * math.pi * lam**3))
    assert excursion_density(constant_drift(1.0), 0.0, 1.0) == pytest.approx(0.241971, abs=1e-6)
    with pytest.raises(InvalidArgument):
        excursion_density(constant_drift(1.0), 0.0, 0.0)


def test_excursion_density_driftless_tail():
    # intensity of durations above d is sqrt(2 / (pi d)) in the driftless case
    d = 0.3
    tail, _ = integrate.quad(lambda s: excursion_density(constant_drift(0.0), 0.0, s), d, np.inf)
    assert tail == pytest.approx(math.sqrt(2 / (math.pi * d)), rel=1e-7)


def test_level_crossing_rate_values():
    assert level_crossing_rate(1e-13, 2.0) == 0.5
    assert level_crossing_rate(1.0, 1.0) == pytest.approx(2.31304, abs=1e-5)
    assert level_crossing_rate(-1.0, 1.0) == pytest.approx(0.313035, abs=1e-6)
    with pytest.raises(InvalidArgument):
        level_crossing_rate(1.0, 0.0)


def test_level_crossing_rate_properties():
    mus = np.linspace(-5, 5, 101)
    r = level_crossing_rate(mus, 1.0)
    assert np.all(r > 0)
    assert level_crossing_rate(1e-6, 1.0) == pytest.approx(1.0, rel=1e-5)
    assert level_crossing_rate(40.0, 1.0) == pytest.approx(80.0)


def test_excursion_count_matches_density(brownian):
    # durations > d among excursions started before local time tau0, driftless
    d, tau0 = 0.05, 0.5
    counts = []
    for i in range(60):
        f = brownian(24, 1e-4, 5.0, replica=i)
        f = f.with_values(f.values - f.values[0])
        sol = classic_map(f)
        if sol.L.values[-1] < tau0 + 0.5:
            continue
        recs = decompose_excursions(sol)
        counts.append(sum(1 for r in recs if r.tau < tau0 and r.duration > d))
    expect = tau0 * math.sqrt(2 / (math.pi * d))
    counts = np.array(counts)
    se = counts.std(ddof=1) / math.sqrt(counts.size)
    # grid excursions are slightly shorter; allow 3 standard errors plus a grid margin
    assert abs(counts.mean() - expect) < 3 * se + 0.1 * expect


def test_tau_infty_zero_drift_never_escapes():
    res = estimate_tau_infty(constant_drift(0.0), 20, 1e-3, 5.0, rng=RngConfig(25))
    assert res.escaped == 0 and res.censored == 20


def test_tau_infty_small_sample_law():
    res = estimate_tau_infty(linear_drift(1.0), 400, 1e-3, 30.0, rng=RngConfig(26))
    from inert_drift.stats import ks_distance
    ks = ks_distance(res.ecdf, lambda l: 1 - np.exp(-np.asarray(l) ** 2))
    # 4x the 99% quantile of the KS statistic at n=400
    assert ks < 4 * 1.63 / math.sqrt(400)
    assert set(res.summary()) >= {"escaped", "censored", "ambiguous", "ambiguity_fraction"}


def test_crossing_rate_small_run():
    est = estimate_crossing_rate(0.0, 1.0, 2000, 1e-3, RngConfig(27), chunk=1 << 14)
    assert est.events == 2000
    assert est.exact == 1.0
    assert abs(est.rate - est.exact) < 4 * est.stderr + 0.03
