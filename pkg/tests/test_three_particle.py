from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import integrate
from scipy import stats as sps

from inert_drift import three_particle as tp
from inert_drift.errors import InvalidArgument
from inert_drift.paths import RngConfig, SampledPath, generate_brownian_path


def _check_invariants(traj, tol=1e-9):
    stop = traj.X1.n
    if traj.collision_flag:
        stop = int(round(traj.collision_time / traj.X1.dt)) + 1
    cut = lambda p: p.values[:stop]
    X1, X2, Y, V = cut(traj.X1), cut(traj.X2), cut(traj.Y), cut(traj.V)
    L1, L2, B1, B2 = cut(traj.L1), cut(traj.L2), cut(traj.B1), cut(traj.B2)
    assert np.all(X1[:-1] <= Y[:-1] + tol) and np.all(Y[:-1] <= X2[:-1] + tol)
    np.testing.assert_allclose(X1, B1 - B1[0] - L1, atol=tol)
    np.testing.assert_allclose(X2, traj.x + B2 - B2[0] + L2, atol=tol)
    np.testing.assert_allclose(V, traj.v + traj.K * (L1 - L2), atol=tol)
    # Y is the left-point Riemann sum of V
    Yr = traj.y + np.concatenate([[0.0], np.cumsum(V[:-1]) * traj.Y.dt])
    np.testing.assert_allclose(Y, Yr, atol=tol)
    assert L1[0] == 0 and L2[0] == 0
    assert np.all(np.diff(L1) >= 0) and np.all(np.diff(L2) >= 0)
    d1 = np.nonzero(np.diff(L1) > 0)[0] + 1
    d2 = np.nonzero(np.diff(L2) > 0)[0] + 1
    np.testing.assert_allclose(X1[d1], Y[d1], atol=tol)
    np.testing.assert_allclose(X2[d2], Y[d2], atol=tol)


def test_no_contact():
    t = 1e-3 * np.arange(101)
    B1 = SampledPath(0.0, 1e-3, -0.01 * t)
    B2 = SampledPath(0.0, 1e-3, 0.01 * t)
    traj = tp.simulate_three(1.0, 0.5, 0.0, 1.0, 1e-3, 0.1, drivers=(B1, B2))
    assert np.all(traj.Y.values == 0.5) and np.all(traj.V.values == 0)
    assert tp.gap_chain(traj) == [(1.0, 0.0)]


@pytest.mark.parametrize("K", [1.0, 10.0])
def test_reconstruction_identities(K):
    traj = tp.simulate_three(1.0, 0.4, 0.3, K, 1e-4, 5.0, rng=RngConfig(1))
    assert traj.L1.values[-1] > 0 and traj.L2.values[-1] > 0
    _check_invariants(traj)


def test_collision_freezes_state():
    t = 0.1 * np.arange(4)
    B1 = SampledPath(0.0, 0.1, np.array([0.0, 2.0, 2.5, 3.0]))
    B2 = SampledPath(0.0, 0.1, np.array([0.0, -2.0, -2.5, -3.0]))
    traj = tp.simulate_three(1.0, 0.5, 0.0, 1.0, 0.1, 0.3, drivers=(B1, B2))
    assert traj.collision_flag and traj.collision_time == pytest.approx(0.1)
    assert np.all(traj.gap[1:] == traj.gap[1])


def test_argument_errors():
    with pytest.raises(InvalidArgument):
        tp.simulate_three(1.0, 2.0, 0.0, 1.0, 1e-3, 1.0, rng=RngConfig(1))
    with pytest.raises(InvalidArgument):
        tp.simulate_three(-1.0, 0.0, 0.0, 1.0, 1e-3, 1.0, rng=RngConfig(1))
    with pytest.raises(InvalidArgument):
        tp.simulate_three(1.0, 0.5, 0.0, 1.0, 1e-3, 1.0)
    with pytest.raises(InvalidArgument):
        tp.scaling_transport(tp.simulate_three(1.0, 0.5, 0.0, 1.0, 1e-2, 0.1, rng=RngConfig(1)), 0)


def test_scaling_identity_at_one():
    traj = tp.simulate_three(1.0, 0.5, 0.0, 1.0, 1e-3, 2.0, rng=RngConfig(2))
    again = tp.scaling_transport(traj, 1.0)
    assert tp.transport_discrepancy(again, traj) == 0.0


@pytest.mark.parametrize("eps", [2.0, 0.5])
def test_scaling_transport_pathwise(eps):
    traj = tp.simulate_three(1.0, 0.3, 0.2, 1.0, 1e-3, 2.0, rng=RngConfig(3))
    a = tp.scaling_transport(traj, eps)
    b = tp.scale_trajectory(traj, eps)
    assert tp.transport_discrepancy(a, b) < 1e-10


def test_gap_chain_contacts_on_both_sides():
    traj = tp.simulate_three(1.0, 0.5, 0.0, 1.0, 1e-4, 20.0, rng=RngConfig(4))
    chain = tp.gap_chain(traj)
    assert chain[0] == (1.0, 0.0)
    assert len(chain) > 2
    t = traj.V.times()
    L1, L2 = traj.L1.values, traj.L2.values
    for (g0, T0), (g1, T1) in zip(chain[1:], chain[2:]):
        i, k = np.searchsorted(t, T0), np.searchsorted(t, T1)
        assert L1[k] > L1[i] and L2[k] > L2[i]
    assert all(g > 0 for g, _ in chain)
    assert [T for _, T in chain] == sorted(T for _, T in chain)


def test_gap_chain_csv(tmp_path):
    traj = tp.simulate_three(1.0, 0.5, 0.0, 1.0, 1e-3, 1.0, rng=RngConfig(5))
    tp.write_gap_chain_csv(tp.gap_chain(traj), tmp_path / "g.csv")
    traj.write_csv(tmp_path / "t.csv")
    assert (tmp_path / "g.csv").read_text().splitlines()[0] == "gap,T"
    assert (tmp_path / "t.csv").read_text().splitlines()[0] == "t,x1,x2,y,v,l1,l2"


def test_linf_law():
    assert tp.linf_law(0.0) == 1.0
    assert tp.linf_law(1.0) == pytest.approx(0.367879, abs=1e-6)
    with pytest.raises(InvalidArgument):
        tp.linf_law(-1.0)


def test_velocity_dominated_by_linf_law():
    maxima = []
    for i in range(20):
        traj = tp.simulate_three(1.0, 0.5, 0.0, 1.0, 1e-3, 50.0, rng=RngConfig(6, i))
        chain = tp.gap_chain(traj)
        t, V = traj.V.times(), np.abs(traj.V.values)
        Ts = [T for _, T in chain]
        for a, b in zip(Ts, Ts[1:]):
            seg = V[(t >= a) & (t <= b)]
            if seg.size:
                maxima.append(seg.max())
    maxima = np.array(maxima)
    assert maxima.size > 50
    for l in (0.5, 1.0, 1.5):
        p = np.mean(maxima > l)
        se = math.sqrt(max(p * (1 - p), 1e-12) / maxima.size)
        assert p <= tp.linf_law(l) + 3 * se


def test_bessel_reference_values():
    assert tp.bessel2_reference(0.0, 1.0, 1.0) == pytest.approx(math.exp(-0.5), rel=1e-12)
    total, _ = integrate.quad(lambda y: tp.bessel2_reference(1.0, 1.0, y), 0, np.inf)
    assert total == pytest.approx(1.0, abs=1e-9)
    with pytest.raises(InvalidArgument):
        tp.bessel2_reference(1.0, 0.0, 1.0)


def test_bessel_reference_large_arguments():
    # exponentially scaled I0 keeps the density finite far into the tail
    val = tp.bessel2_reference(50.0, 1.0, 50.0)
    assert np.isfinite(val) and val > 0


def test_bessel_cdf_matches_noncentral_chi_square():
    y = np.array([0.1, 0.5, 1.0, 2.0, 3.5])
    for x0, t in ((1.0, 1.0), (0.5, 2.0), (2.0, 0.5)):
        expect = sps.ncx2.cdf(y**2 / t, 2, x0**2 / t)
        np.testing.assert_allclose(tp.bessel2_cdf(x0, t, y), expect, atol=1e-8)


def test_mean_gap_grows():
    res = tp.terminal_gaps(1.0, 0.5, 0.0, 1.0, 1e-3, 1.0, 10_000, RngConfig(7))[1]
    gaps = res.gap[~res.collided]
    assert gaps.mean() > 1.0 + 3 * gaps.std() / math.sqrt(gaps.size)


def test_terminal_gaps_coupled_levels():
    out = tp.terminal_gaps(1.0, 0.5, 0.0, 1.0, 1e-3, 1.0, 50, RngConfig(8), coarsen=(1, 4))
    assert set(out) == {1, 4}
    assert out[4].dt == pytest.approx(4e-3)
    single = tp.terminal_gaps(1.0, 0.5, 0.0, 1.0, 1e-3, 1.0, 50, RngConfig(8))
    np.testing.assert_array_equal(single[1].gap, out[1].gap)
    with pytest.raises(InvalidArgument):
        tp.terminal_gaps(1.0, 0.5, 0.0, 1.0, 1e-3, 1.0, 5, RngConfig(8), coarsen=(3,))
