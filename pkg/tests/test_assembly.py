import numpy as np
import pytest
from helpers import backward_error, dense_mass_exact, random_partition, random_poly_field

from dbn1d.assembly import (
    assemble_mass_algebraic,
    assemble_T_mass,
    assemble_T_stiff,
    boundary_gradient_vector,
    coefficient_matrix,
    dense_mass,
    dense_stiffness,
    hat_loads,
    mass_operator,
    rhs_dr,
    rhs_ls,
    stiffness_operator,
)
from dbn1d.linalg import alphabeta_inverse, qt_apply
from dbn1d.partition import Partition, make_uniform
from dbn1d.quadrature import ScalarField, constant, integrate

ONE = constant(1.0)
HALF = Partition(np.array([0.5]))
THIRDS = Partition(np.array([1 / 3, 2 / 3]))


def test_scalar_mass_and_stiffness():
    assert mass_operator(ONE, HALF).to_dense()[0, 0] == pytest.approx(1 / 24, rel=1e-14)
    assert assemble_T_mass(ONE, HALF).diag[0] == pytest.approx(1 / 6, rel=1e-14)
    assert stiffness_operator(ONE, HALF).to_dense()[0, 0] == pytest.approx(0.5, rel=1e-14)
    assert assemble_T_stiff(ONE, HALF).diag[0] == pytest.approx(2.0, rel=1e-14)


def test_stiffness_two_breakpoints():
    np.testing.assert_allclose(stiffness_operator(ONE, THIRDS).to_dense(),
                               [[2 / 3, 1 / 3], [1 / 3, 1 / 3]], atol=1e-13)


def test_dense_oracles_analytic():
    assert dense_mass(ONE, HALF)[0, 0] == pytest.approx(1 / 24, rel=1e-14)
    M = dense_mass(ONE, THIRDS)
    assert M[0, 0] == pytest.approx(8 / 81, rel=1e-14)
    assert np.array_equal(M, M.T)


@pytest.mark.parametrize("n", [3, 20])
def test_mass_matches_closed_form(n):
    p = make_uniform(n) if n == 3 else random_partition(np.random.default_rng(n), n)
    exact = dense_mass_exact(p.b)
    np.testing.assert_allclose(mass_operator(ONE, p).to_dense(), exact, atol=1e-12 * np.abs(exact).max())


def test_mass_weighted_matches_quadrature():
    p = random_partition(np.random.default_rng(5), 20)
    r = ScalarField(lambda x: 1 + x, lambda x: np.ones_like(x))
    Md = dense_mass(r, p)
    np.testing.assert_allclose(mass_operator(r, p).to_dense(), Md, atol=1e-10 * np.abs(Md).max())


def test_stiffness_inverse_two_routes():
    eps2 = 1e-4
    p = make_uniform(32)
    a = constant(eps2)
    x = np.random.default_rng(0).standard_normal(32)
    fast = stiffness_operator(a, p).apply_inverse(x)
    via_ab = alphabeta_inverse(coefficient_matrix(a, p)).matvec(x)
    np.testing.assert_allclose(fast, via_ab, rtol=1e-11, atol=1e-11 * np.abs(via_ab).max())


def test_coefficient_matrix_is_stiffness():
    p = random_partition(np.random.default_rng(2), 10)
    r = random_poly_field(np.random.default_rng(3))
    np.testing.assert_allclose(coefficient_matrix(r, p).to_dense(), dense_stiffness(r, p), rtol=1e-12)


def test_algebraic_scalar_and_roundtrip():
    alg = assemble_mass_algebraic(ONE, HALF)
    assert alg.apply_inverse(np.array([1.0]))[0] == pytest.approx(24.0, rel=1e-12)
    rng = np.random.default_rng(7)
    p = random_partition(rng, 16)
    r = random_poly_field(rng)
    x = rng.standard_normal(16)
    geo = mass_operator(r, p).apply_inverse(x)
    alg = assemble_mass_algebraic(r, p).apply_inverse(x)
    np.testing.assert_allclose(alg, geo, rtol=1e-9, atol=1e-9 * np.abs(geo).max())
    Md = dense_mass(r, p)
    assert backward_error(Md, alg, x) < 1e-13
    np.testing.assert_allclose(assemble_mass_algebraic(r, p).apply_inverse(Md @ x), x, rtol=1e-6)


def test_load_vectors():
    assert np.all(rhs_ls(constant(2.0), ONE, make_uniform(4)) == pytest.approx(0.0, abs=1e-15))
    ident = ScalarField(lambda x: x, lambda x: np.ones_like(x))
    assert rhs_ls(ident, ONE, HALF)[0] == pytest.approx(5 / 48, rel=1e-14)
    assert rhs_dr(constant(0.0), ONE, 1.0, HALF)[0] == pytest.approx(-1 / 8, rel=1e-14)
    r = ScalarField(lambda x: 1 + x)
    f = ScalarField(lambda x: 0.7 * (1 + x))
    np.testing.assert_allclose(rhs_dr(f, r, 0.7, make_uniform(5)), 0.0, atol=1e-15)


def test_rhs_matches_direct_quadrature():
    p = random_partition(np.random.default_rng(9), 10)
    f = ScalarField(lambda x: np.exp(x) * np.sin(4 * x))
    got = rhs_ls(f, ONE, p)
    direct = [integrate(lambda x, b=b: f(x) * (x - b), b, 1.0, panels=64) for b in p.b]
    np.testing.assert_allclose(got, direct, rtol=1e-12, atol=1e-14)


def test_hat_loads_are_qt_of_relu_loads():
    p = random_partition(np.random.default_rng(4), 6)
    f = ScalarField(np.cos)
    direct = np.array([integrate(lambda x, b=b: f(x) * (x - b), b, 1.0, panels=64) for b in p.b])
    np.testing.assert_allclose(hat_loads(f, p), qt_apply(p, direct), rtol=1e-11, atol=1e-13)


def test_boundary_gradient_vector():
    np.testing.assert_allclose(boundary_gradient_vector(make_uniform(3)), [0.75, 0.5, 0.25])
    np.testing.assert_allclose(boundary_gradient_vector(make_uniform(1)), [0.5])
