from __future__ import annotations

import math

import numpy as np
import pytest

from inert_drift import multidim as md
from inert_drift.errors import BlowUpError, DomainAssumptionError, InvalidArgument
from inert_drift.paths import RngConfig, SampledPath, generate_brownian_path, linear_drift
from inert_drift.skorohod import extended_solve


def _driver(seed, d=2, dt=1e-3, horizon=1.0, start=None):
    paths = generate_brownian_path(RngConfig(seed), dt, horizon, d)
    if start is not None:
        paths = [p.with_values(p.values + s) for p, s in zip(paths, start)]
    return paths


def test_half_space_step():
    x, dL = md.inner_reflection_step([0.0, 0.0], [0.3, -0.2], md.half_space())
    np.testing.assert_allclose(x, [0.3, 0.0], atol=1e-15)
    np.testing.assert_allclose(dL, [0.0, 0.2], atol=1e-15)


def test_interior_step_has_no_push():
    x, dL = md.inner_reflection_step([0.0, 0.5], [0.1, -0.2], md.half_space())
    np.testing.assert_allclose(x, [0.1, 0.3])
    assert np.all(dL == 0)


@pytest.mark.parametrize("c", [[0.2], [0.3, -0.1]])
def test_tilted_plane_projection(c):
    c = np.array(c)
    dom = md.tilted_plane(c)
    n = np.append(-c, 1.0) / math.sqrt(1 + c @ c)
    gen = RngConfig(1).generator()
    for _ in range(20):
        u = gen.uniform(-0.3, 0.3, c.size)
        on = np.append(u, c @ u)
        p = on - gen.uniform(0.01, 0.2) * n
        x, dL = md.inner_reflection_step(p, np.zeros_like(p), dom)
        assert abs(dom.gap(x)) < 1e-10
        cross = dL - (dL @ n) * n
        assert np.linalg.norm(cross) < 1e-10 * (1 + np.linalg.norm(dL))
        np.testing.assert_allclose(x, on, atol=1e-10)


def test_half_space_reduces_to_one_dimension():
    w = _driver(2)
    sol = md.extended_solve_nd(w, md.half_space(), 0.05)
    assert np.all(sol.L[0] == 0)
    one = extended_solve(w[1], linear_drift(1.0), 0.05)
    np.testing.assert_allclose(sol.L[1], one.L.values, atol=1e-12)
    np.testing.assert_allclose(sol.x[1], one.x.values, atol=1e-12)


def test_interior_path_untouched():
    t = 1e-3 * np.arange(1001)
    w = [SampledPath(0.0, 1e-3, 0.1 * np.sin(t)), SampledPath(0.0, 1e-3, 0.5 + 0.1 * t)]
    sol = md.extended_solve_nd(w, md.half_space(), 0.01)
    assert np.all(sol.L == 0) and np.all(sol.total_variation == 0)
    np.testing.assert_array_equal(sol.x[0], w[0].values)
    np.testing.assert_array_equal(sol.x[1], w[1].values)


def test_verify_passes_on_tilted_solution():
    dom = md.tilted_plane([0.2], alpha=0.3)
    sol = md.extended_solve_nd(_driver(3), dom, 0.01)
    rep = md.verify_nd(sol, dom, tol=1e-8)
    assert rep.passed, rep.lines()
    assert sol.total_variation[-1] > 0
    contact = sol.total_variation > 0
    Ld, tv = sol.L[-1][contact], sol.total_variation[contact]
    # strict inequality on contact-bearing paths
    assert np.all(dom.alpha * tv < Ld) and np.all(Ld < tv)
    assert any("not checked" in w for w in rep.warnings)


def test_tangential_corruption_fails_normal_check():
    dom = md.half_space()
    sol = md.extended_solve_nd(_driver(4), dom, 0.01)
    k = int(np.nonzero(np.diff(sol.total_variation) > 0)[0][0]) + 1
    L = sol.L.copy()
    L[0, k:] += 0.01
    X = sol.x.copy()
    X[0, k:] += 0.01
    bad = md.ReflectedSolutionND(sol.t0, sol.dt, X, L, sol.total_variation, sol.I, sol.w,
                                 sol.epsilon)
    rep = md.verify_nd(bad, dom)
    assert [c.name for c in rep.failed()] == ["push along normal"]


def test_a_priori_bound_on_many_drivers():
    dom = md.half_space(alpha=0.3)
    for i in range(100):
        w = generate_brownian_path(RngConfig(5, i), 1e-2, 1.0, 2)
        sol = md.extended_solve_nd(w, dom, 0.01)
        rep = md.verify_nd(sol, dom)
        assert rep["L^d a-priori bound"].passed, i


def test_window_violation_raises():
    # the steep plane has normal component 1/sqrt(1+4) < alpha = 0.5
    dom = md.tilted_plane([2.0], alpha=0.5)
    with pytest.raises(DomainAssumptionError):
        md.extended_solve_nd(_driver(6), dom, 0.01)
    md.half_space(alpha=0.5).check_point([0.0, 0.0])
    high = md.GraphDomain(lambda u: 0.6, lambda u: np.zeros(1), 0.5)
    with pytest.raises(DomainAssumptionError):
        high.check_point([0.0, 0.6])


def test_argument_errors():
    with pytest.raises(InvalidArgument):
        md.GraphDomain(lambda u: 0.0, lambda u: np.zeros(1), 1.5)
    with pytest.raises(InvalidArgument):
        md.extended_solve_nd(_driver(7, d=3), md.half_space(), 0.01)
    with pytest.raises(InvalidArgument):
        md.extended_solve_nd(_driver(7), md.half_space(), 0.0)
    with pytest.raises(InvalidArgument):
        md.extended_solve_nd(_driver(7, start=(0.0, -1.0)), md.half_space(), 0.01)


def test_blow_up_cap():
    with pytest.raises(BlowUpError):
        md.extended_solve_nd(_driver(8, horizon=5.0), md.half_space(), 0.01, l_cap=0.5)


def test_epsilon_refinement_is_cauchy():
    w = _driver(9)
    dom = md.tilted_plane([0.2])
    sols = [md.extended_solve_nd(w, dom, e) for e in (0.08, 0.04, 0.02, 0.01)]
    gaps = [np.max(np.abs(a.L - b.L)) for a, b in zip(sols, sols[1:])]
    assert gaps[-1] < gaps[0]


def test_rotation_commutes_with_solving():
    # a tilted plane in d=2 rotated into half-space position
    c = 0.2
    theta = math.atan(c)
    R = np.array([[math.cos(theta), math.sin(theta)], [-math.sin(theta), math.cos(theta)]])
    dom = md.tilted_plane([c], alpha=0.3)
    w = _driver(10)
    W = np.vstack([p.values for p in w])
    sol = md.extended_solve_nd(w, dom, 0.01)
    Wr = R @ W
    wr = [SampledPath(0.0, w[0].dt, Wr[0]), SampledPath(0.0, w[0].dt, Wr[1])]
    # the drift is linear in L, so the rotated problem is the half-space problem
    solr = md.extended_solve_nd(wr, md.half_space(alpha=0.3), 0.01, check_window=False)
    assert np.max(np.abs(R @ sol.x - solr.x)) < 1e-8
    assert np.max(np.abs(R @ sol.L - solr.L)) < 1e-8


def test_three_dimensions():
    dom = md.tilted_plane([0.1, -0.2], alpha=0.3)
    sol = md.extended_solve_nd(_driver(11, d=3), dom, 0.01)
    assert sol.d == 3
    assert md.verify_nd(sol, dom, tol=1e-8).passed


def test_nd_csv(tmp_path):
    sol = md.extended_solve_nd(_driver(12, horizon=0.01), md.half_space(), 0.01)
    sol.write_csv(tmp_path / "n.csv")
    assert (tmp_path / "n.csv").read_text().splitlines()[0] == "t,x_1,x_2,l_1,l_2,abs_l"
