import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from propsmall.doubling import (
    DegenerateSupremum,
    DoublingTable,
    SamplingLattice,
    ball_sup,
    check_monotonicity,
    cube_sup,
    doubling_index_ball,
    doubling_index_cube,
    propagation_fit,
    resolve_target,
    subcube_lower_bound_check,
    three_spheres_check,
)
from propsmall.fields import affine, constant, harmonic_polynomial, identity, scaled, shifted
from propsmall.geometry import Ball, Cube, PointSet
from propsmall.solver import GridFunction, sample, solve_dirichlet

ORIGIN = (0.0, 0.0)
UNIT = Cube(ORIGIN, 1.0)


# --- suprema ----------------------------------------------------------------------------


def test_ball_sup_of_affine_and_homogeneous():
    assert ball_sup(affine(2), Ball((0.2, 0.1), 0.3)) == pytest.approx(0.5, rel=1e-15)
    assert ball_sup(harmonic_polynomial(2, 5), Ball(ORIGIN, 0.8)) == pytest.approx(0.8**5, rel=1e-12)
    assert ball_sup(harmonic_polynomial(3, 4, 3), Ball((0.0, 0.0, 0.0), 0.5)) == pytest.approx(0.5**4, rel=1e-5)


def test_ball_sup_off_axis_maximiser_is_refined():
    # |x1 + 2 x2| has its maximum over B(0, 1) at a non-template direction
    f = lambda x: x[..., 0] + 2 * x[..., 1]  # noqa: E731
    assert ball_sup(f, Ball(ORIGIN, 1.0)) == pytest.approx(math.sqrt(5), rel=1e-9)


def test_grid_ball_sup_close_to_analytic():
    lat = Cube(ORIGIN, 2.0).lattice(129)
    u = harmonic_polynomial(2, 3)
    g = sample(u, lat)
    B = Ball((0.1, -0.2), 0.4)
    assert ball_sup(g, B) == pytest.approx(ball_sup(u, B), rel=2e-3)


def test_cube_sup():
    assert cube_sup(affine(2), UNIT) == 0.5
    assert cube_sup(harmonic_polynomial(2, 2), UNIT) == pytest.approx(0.25, rel=1e-12)


# --- ball index --------------------------------------------------------------------------------


def test_affine_ball_index():
    assert abs(doubling_index_ball(affine(2), Ball(ORIGIN, 0.3)) - math.log(2)) < 1e-6


@pytest.mark.parametrize("r", [0.05, 0.3, 1.0, 4.0])
def test_cubic_ball_index_independent_of_radius(r):
    assert abs(doubling_index_ball(harmonic_polynomial(2, 3), Ball(ORIGIN, r)) - 3 * math.log(2)) < 1e-6


def test_constant_ball_index():
    assert doubling_index_ball(constant(2, 5.0), Ball(ORIGIN, 1.0)) == 0.0


def test_degenerate_supremum():
    with pytest.raises(DegenerateSupremum):
        doubling_index_ball(constant(2, 0.0), Ball(ORIGIN, 1.0))


@settings(max_examples=25)
@given(st.integers(1, 8), st.floats(-1e6, 1e6).filter(lambda c: abs(c) > 1e-6))
def test_scalar_invariance(k, c):
    u = harmonic_polynomial(2, k)
    B = Ball((0.3, -0.1), 0.5)
    assert doubling_index_ball(scaled(u, c), B) == pytest.approx(doubling_index_ball(u, B), abs=1e-12)
    assert three_spheres_check(scaled(u, c), B).gamma == pytest.approx(three_spheres_check(u, B).gamma, abs=1e-12)


@pytest.mark.parametrize("n,k", [(2, 1), (2, 4), (3, 2), (3, 5)])
def test_gradient_index_of_homogeneous(n, k):
    g = resolve_target(harmonic_polynomial(n, k), "grad")
    assert doubling_index_ball(g, Ball((0.0,) * n, 0.4)) == pytest.approx((k - 1) * math.log(2), abs=1e-6)


# --- cube index ------------------------------------------------------------------------------------


def test_affine_cube_index_with_original_dilation():
    r = doubling_index_cube(affine(2), UNIT, dilation=20)
    assert abs(r.cube_index - math.log(20)) < 1e-9
    assert r.argmax_center[0] == 0.0 and r.dilation == 20


@pytest.mark.parametrize("k", [2, 3, 5])
def test_homogeneous_cube_index_at_least_central(k):
    r = doubling_index_cube(harmonic_polynomial(2, k), UNIT, centers=9, radii=4)
    assert r.cube_index >= k * math.log(4) - 1e-9
    assert r.cube_index >= r.ball_index - 1e-9


def test_cube_index_is_lexicographic_first_maximiser():
    r = doubling_index_cube(affine(2), UNIT, dilation=20, centers=5, radii=2)
    # every (x1 = 0, any x2, any r) pair ties; the smallest (x, r) wins
    assert r.argmax_center == (0.0, -0.5) and r.argmax_radius == 0.25


def test_nested_cubes_on_solved_field():
    u, _ = solve_dirichlet(identity(2), Cube(ORIGIN, 4.0), harmonic_polynomial(2, 3, 1), resolution=65)
    Q = UNIT
    lat = SamplingLattice.for_subdivision(Q, 2, centers=5, radii_levels=3)
    table = DoublingTable(u, lat)
    NQ = table.index(Q)[0]
    for q in Q.subdivide(2):
        assert table.index(q)[0] <= NQ


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 6), st.integers(0, 1), st.integers(2, 4), st.data())
def test_subcube_monotonicity_exact(k, variant, parts, data):
    u = harmonic_polynomial(2, k, variant)
    lat = SamplingLattice.for_subdivision(UNIT, parts, centers=3, radii_levels=2)
    table = DoublingTable(u, lat)
    q = data.draw(st.sampled_from(UNIT.subdivide(parts)))
    assert table.index(q)[0] <= table.index(UNIT)[0]


# --- monotonicity and three spheres -------------------------------------------------------------------


@pytest.mark.parametrize("k", [1, 3, 6])
def test_monotonicity_homogeneous(k):
    fit = check_monotonicity(harmonic_polynomial(2, k), Ball(ORIGIN, 1.0))
    assert fit.additive == pytest.approx(0.0, abs=1e-9) and fit.multiplicative == pytest.approx(0.0, abs=1e-9)
    assert fit.certifies(1e-9, 1e-9)


def test_monotonicity_constant():
    fit = check_monotonicity(constant(2, 3.0), Ball(ORIGIN, 1.0))
    assert fit.additive == 0 and fit.multiplicative == 0 and fit.certifies(0, 0)


@pytest.mark.parametrize("k", [2, 3, 4, 5])
def test_monotonicity_shifted_family(k):
    u = shifted(harmonic_polynomial(2, k), (0.4, -0.3))
    fit = check_monotonicity(u, Ball((0.1, 0.2), 0.5))
    assert fit.multiplicative <= 1.0
    assert fit.certifies(fit.multiplicative, 0.0) and fit.certifies(0.0, fit.additive)


def test_monotonicity_rejects_bad_t():
    with pytest.raises(ValueError):
        check_monotonicity(affine(2), Ball(ORIGIN, 1.0), ts=(0.75,))


@pytest.mark.parametrize("k", [1, 2, 5, 8])
def test_three_spheres_homogeneous(k):
    assert abs(three_spheres_check(harmonic_polynomial(2, k), Ball(ORIGIN, 0.7)).gamma - 0.5) < 1e-6


def test_three_spheres_far_from_zero_set():
    # sup over B((10, 0), r) of |x1| is 10 + r
    res = three_spheres_check(affine(2), Ball((10.0, 0.0), 1.0))
    assert res.gamma == pytest.approx(math.log(12 / 11) / math.log(12 / 10.5), rel=1e-12)
    assert res.feasible


def test_three_spheres_on_solved_field():
    u, _ = solve_dirichlet(identity(2), Cube(ORIGIN, 4.0), shifted(harmonic_polynomial(2, 3), (0.3, 0.1)),
                           resolution=65)
    res = three_spheres_check(u, Ball((0.2, -0.1), 0.6))
    assert 0 < res.gamma <= 1


# --- subcube bound ---------------------------------------------------------------------------------------


def test_subcube_bound_affine():
    res = subcube_lower_bound_check(affine(2), UNIT, Cube(ORIGIN, 0.25))
    assert res.ratio == pytest.approx(0.25) and res.K == 4
    assert res.exponent * res.index == pytest.approx(1.0)


@pytest.mark.parametrize("k", [2, 3])
def test_subcube_bound_homogeneous(k):
    u = harmonic_polynomial(2, k)
    res = subcube_lower_bound_check(u, UNIT, Cube(ORIGIN, 0.25), centers=9, radii=4)
    assert res.ratio == pytest.approx(4.0**-k, rel=1e-9)
    assert res.exponent * res.index == pytest.approx(k, rel=1e-9)


def test_subcube_bound_corner_on_solved_field():
    u, _ = solve_dirichlet(identity(2), Cube(ORIGIN, 4.0), harmonic_polynomial(2, 3), resolution=65)
    q = Cube((-0.375, -0.375), 0.25)
    res = subcube_lower_bound_check(u, UNIT, q, centers=5, radii=3)
    assert 0 < res.ratio <= 1 and res.exponent >= 0


def test_subcube_bound_preconditions():
    with pytest.raises(ValueError):
        subcube_lower_bound_check(affine(2), UNIT, Cube((2.0, 0.0), 0.25))
    with pytest.raises(ValueError):
        subcube_lower_bound_check(affine(2), UNIT, Cube(ORIGIN, 0.75))


# --- propagation of smallness ---------------------------------------------------------------------------


def test_propagation_identical_sets():
    lat = UNIT.lattice(33)
    E = PointSet.from_predicate(lat, lambda p: np.hypot(p[..., 0], p[..., 1]) < 0.2)
    fit = propagation_fit(sample(harmonic_polynomial(2, 2), lat), E, E)
    assert fit.gamma == pytest.approx(1.0) and fit.certifies()


def test_propagation_slab_and_quarter_cube():
    omega = Cube(ORIGIN, 2.0)
    lat = omega.lattice(401)
    u = sample(affine(2), lat)
    E = PointSet.from_predicate(lat, lambda p: np.abs(p[..., 0]) <= 0.01)
    K = PointSet.from_predicate(lat, lambda p: np.all(np.abs(p) <= 0.25, axis=-1))
    fit = propagation_fit(u, E, K)
    assert fit.sup_omega == pytest.approx(1.0)
    assert fit.sup_E == pytest.approx(0.01, abs=lat.h)
    assert fit.gamma == pytest.approx(math.log(0.25) / math.log(0.01), abs=0.01)
    assert fit.certifies()


def test_propagation_vacuous():
    lat = UNIT.lattice(9)
    E = PointSet.full(lat)
    K = PointSet.from_predicate(lat, lambda p: np.abs(p[..., 0]) < 0.1)
    fit = propagation_fit(sample(affine(2), lat), E, K)
    assert fit.vacuous and fit.gamma == 1.0


def test_propagation_sweep_over_degree():
    # Disc-shaped E, K and Omega centred on the common zero: every sup is a k-th power of a
    # radius, so the exponent is log(0.5) / log(0.1) for every degree.
    lat = Cube(ORIGIN, 2.0).lattice(401)
    r = np.hypot(*np.moveaxis(lat.points(), -1, 0))
    E = PointSet.from_predicate(lat, lambda p: np.hypot(p[..., 0], p[..., 1]) <= 0.1)
    K = PointSet.from_predicate(lat, lambda p: np.hypot(p[..., 0], p[..., 1]) <= 0.5)
    gammas = []
    for k in range(1, 9):
        g = sample(harmonic_polynomial(2, k), lat)
        u = GridFunction(lat, np.where(r <= 1.0, g.values, 0.0))
        gammas.append(propagation_fit(u, E, K).gamma)
    expected = math.log(0.5) / math.log(0.1)
    assert np.allclose(gammas, expected, atol=0.02)
    assert gammas[-1] <= gammas[0] + 0.02
