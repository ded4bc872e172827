import math

import numpy as np
import pytest
import scipy.sparse.linalg as spla
from hypothesis import given, settings
from hypothesis import strategies as st

from propsmall.fields import (
    adapted,
    affine,
    constant,
    diagonal,
    harmonic_polynomial,
    identity,
    rotated,
    scalar_perturbation,
)
from propsmall.geometry import Cube
from propsmall.solver import (
    GridFunction,
    conjugate_gradient,
    discretize,
    gradient,
    sample,
    solve_dirichlet,
)

UNIT = Cube((0.0, 0.0), 1.0)


def max_interior_error(u, exact):
    lat = u.lattice
    inner = (slice(1, -1),) * lat.n
    return float(np.abs(u.values[inner] - exact(lat.points())[inner]).max())


# --- discretisation ----------------------------------------------------------------------


def test_identity_stencil():
    s = discretize(identity(2), UNIT, 9)
    h2 = s.lattice.h ** 2
    st_ = s.stencil((4, 4))
    assert {k: v * h2 for k, v in st_.items() if v} == pytest.approx(
        {(0, 0): -4, (1, 0): 1, (-1, 0): 1, (0, 1): 1, (0, -1): 1}, rel=1e-14)


def test_anisotropic_stencil():
    s = discretize(diagonal([2.0, 1.0]), UNIT, 9)
    h2 = s.lattice.h ** 2
    st_ = {k: v * h2 for k, v in s.stencil((3, 5)).items() if v}
    assert st_ == pytest.approx({(0, 0): -6, (1, 0): 2, (-1, 0): 2, (0, 1): 1, (0, -1): 1}, rel=1e-14)


@pytest.mark.parametrize("A", [rotated([2.0, 1.0], math.pi / 6), scalar_perturbation(2, 0.3),
                               rotated([3.0, 1.0, 0.5], 0.2)])
def test_assembled_operator_is_exactly_symmetric(A):
    Q = Cube((0.0,) * A.n, 1.0)
    K = discretize(A, Q, 9).matrix
    assert (K != K.T).nnz == 0


def test_rejects_small_resolution_and_asymmetry():
    with pytest.raises(ValueError):
        discretize(identity(2), UNIT, 8)
    from propsmall.fields import CoefficientField

    skew = CoefficientField("skew", 2, lambda x: np.broadcast_to([[1.0, 0.2], [0.0, 1.0]], x.shape[:-1] + (2, 2)),
                            1.0, 0.0)
    with pytest.raises(ValueError):
        discretize(skew, UNIT, 9)


def test_consistency_is_second_order_for_rotated_field():
    A = rotated([2.0, 0.5], 0.7)
    u = adapted(harmonic_polynomial(2, 4), A)
    errs = []
    for k in (17, 33, 65):
        s = discretize(A, UNIT, k)
        errs.append(float(np.abs(s.apply(u(s.lattice.points()))).max()))
    assert 3.5 < errs[0] / errs[1] < 4.5 and 3.5 < errs[1] / errs[2] < 4.5


# --- conjugate gradients ---------------------------------------------------------------------


def test_cg_matches_direct_solve():
    s = discretize(scalar_perturbation(2, 0.4), UNIT, 17)
    b = np.random.default_rng(0).standard_normal(s.matrix.shape[0])
    x, its, res = conjugate_gradient(s.matrix, b, 1e-12, 1000)
    ref = spla.spsolve(s.matrix.tocsc(), b)
    assert res <= 1e-12 and its > 0
    assert np.allclose(x, ref, rtol=1e-9, atol=1e-12)


def test_cg_zero_rhs():
    s = discretize(identity(2), UNIT, 9)
    x, its, res = conjugate_gradient(s.matrix, np.zeros(s.matrix.shape[0]), 1e-10, 10)
    assert its == 0 and res == 0 and not x.any()


# --- Dirichlet solves ---------------------------------------------------------------------------


def test_affine_data_is_reproduced():
    u, rep = solve_dirichlet(identity(2), UNIT, affine(2))
    assert rep.converged and rep.max_principle
    assert max_interior_error(u, affine(2)) < 1e-9


def test_constant_data():
    for A in (identity(2), scalar_perturbation(2, 0.2), rotated([2.0, 1.0], 0.3)):
        u, rep = solve_dirichlet(A, UNIT, constant(2, 7.0), resolution=17)
        assert np.allclose(u.values, 7.0, atol=1e-9) and rep.converged


def test_degree_four_data_converges_at_second_order():
    exact = harmonic_polynomial(2, 4)
    errs = [max_interior_error(solve_dirichlet(identity(2), UNIT, exact, resolution=k)[0], exact)
            for k in (33, 65, 129)]
    ratios = [errs[0] / errs[1], errs[1] / errs[2]]
    assert all(3 <= r <= 5 for r in ratios)


def test_degree_three_data_is_reproduced_to_solver_tolerance():
    # the five-point stencil annihilates cubic harmonics, so only solver error remains
    exact = harmonic_polynomial(2, 3)
    for k in (33, 65, 129):
        assert max_interior_error(solve_dirichlet(identity(2), UNIT, exact, resolution=k)[0], exact) < 1e-9


def test_adapted_solution_for_anisotropic_field():
    A = diagonal([2.0, 0.5])
    exact = adapted(harmonic_polynomial(2, 4), A)
    errs = [max_interior_error(solve_dirichlet(A, UNIT, exact, resolution=k)[0], exact) for k in (17, 33, 65)]
    assert errs[0] / errs[1] > 3 and errs[1] / errs[2] > 3


@settings(max_examples=10, deadline=None)
@given(st.floats(0.5, 3.0), st.floats(0.5, 3.0), st.integers(0, 2**31))
def test_max_principle_for_diagonal_fields(a, b, seed):
    rng = np.random.default_rng(seed)
    lat = UNIT.lattice(17)
    g = rng.uniform(-1, 1, lat.shape)
    u, rep = solve_dirichlet(diagonal([a, b]), UNIT, g, resolution=17)
    assert rep.converged and rep.max_principle


def test_iteration_cap_reports_best_iterate():
    u, rep = solve_dirichlet(identity(2), UNIT, harmonic_polynomial(2, 4), resolution=33, maxiter=3)
    assert not rep.converged and rep.iterations == 3 and rep.max_iterations == 3


def test_solver_in_three_dimensions():
    Q = Cube((0.0, 0.0, 0.0), 1.0)
    exact = harmonic_polynomial(3, 2, 3)
    u, rep = solve_dirichlet(identity(3), Q, exact, resolution=17)
    assert rep.converged and max_interior_error(u, exact) < 1e-9


# --- grid functions ------------------------------------------------------------------------------


def test_gradient_exact_on_affine_and_quadratics():
    lat = UNIT.lattice(11)
    g = gradient(sample(affine(2), lat))
    assert np.allclose(g.values[..., 0], 1.0, atol=1e-13) and np.allclose(g.values[..., 1], 0.0, atol=1e-13)
    q = harmonic_polynomial(2, 2)
    g2 = gradient(sample(q, lat))
    P = lat.points()
    assert np.allclose(g2.values[..., 0], 2 * P[..., 0], atol=1e-12)
    assert np.allclose(g2.values[..., 1], -2 * P[..., 1], atol=1e-12)


def test_gradient_of_solution_converges():
    exact = harmonic_polynomial(2, 4)
    errs = []
    for k in (17, 33, 65):
        u, _ = solve_dirichlet(identity(2), UNIT, exact, resolution=k)
        g = gradient(u)
        errs.append(float(np.abs(g.values - exact.grad(u.lattice.points())).max()))
    assert errs[0] / errs[1] > 3 and errs[1] / errs[2] > 3


def test_interpolation_is_multilinear_and_nan_outside():
    lat = UNIT.lattice(5)
    f = sample(lambda x: 2 * x[..., 0] - x[..., 1] + 0.5, lat)
    pts = np.array([[0.1, 0.2], [-0.33, 0.41]])
    assert np.allclose(f(pts), 2 * pts[:, 0] - pts[:, 1] + 0.5)
    assert np.isnan(f(np.array([[0.6, 0.0]]))[0])


def test_grid_function_is_immutable_and_roundtrips(tmp_path):
    u, _ = solve_dirichlet(identity(2), UNIT, harmonic_polynomial(2, 3), resolution=9)
    with pytest.raises(ValueError):
        u.values[0, 0] = 1.0
    path = tmp_path / "u.grid"
    u.write(path)
    head = path.read_text().split("\n", 1)[0].split()
    assert head[:4] == ["grid", "2", "9", "9"]
    v = GridFunction.read(path)
    assert v.lattice == u.lattice and np.array_equal(v.values, u.values)
