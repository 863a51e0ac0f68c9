import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.polynomial import legendre as npleg

from hpcpg.errors import DomainError, InvalidDegreeError
from hpcpg.orthopoly import (
    gauss_legendre_rule,
    jacobi_eval,
    jacobi_gen_eval,
    legendre_eval,
    legendre_table,
    shifted_basis_sample,
)


def test_legendre_small_cases():
    assert legendre_eval(2, 0.0) == pytest.approx(-0.5, abs=1e-15)
    for l in range(12):
        assert legendre_eval(l, -1.0) == pytest.approx((-1) ** l, abs=1e-14)
    assert legendre_eval(3, -1.0, 1) == pytest.approx(6.0, abs=1e-13)


def test_legendre_left_endpoint_slope():
    for l in range(1, 15):
        expected = 0.5 * (-1) ** (l - 1) * l * (l + 1)
        assert legendre_eval(l, -1.0, 1) == pytest.approx(expected, rel=1e-13)


def test_legendre_matches_symbolic(frozen):
    for row in frozen["legendre"]:
        got = legendre_eval(row["n"], np.array(row["x"]), row["k"])
        np.testing.assert_allclose(got, row["values"], rtol=1e-13, atol=1e-12)


def test_legendre_rejects_points_outside():
    with pytest.raises(DomainError):
        legendre_eval(3, 1.5)


def test_legendre_table_shape():
    tab = legendre_table(4, np.linspace(-1, 1, 7), 2)
    assert tab.shape == (3, 5, 7)


@pytest.mark.parametrize("m", range(13))
def test_orthogonality(m):
    for n in range(13):
        rule = gauss_legendre_rule((n + m) // 2 + 1)
        val = np.sum(rule.weights * legendre_eval(n, rule.nodes) * legendre_eval(m, rule.nodes))
        assert val == pytest.approx(2.0 / (2 * n + 1) if n == m else 0.0, abs=1e-12)


def test_generalized_jacobi_matches_symbolic(frozen):
    for row in frozen["jacobi_gen"]:
        fam = (row["family"], row["family"])
        got = jacobi_gen_eval(fam, row["n"], np.array(row["x"]), row["k"])
        np.testing.assert_allclose(got, row["values"], rtol=1e-12, atol=1e-11)


@pytest.mark.parametrize("n", range(4, 13))
def test_generalized_jacobi_boundary_and_second_derivative(n):
    ends = np.array([-1.0, 1.0])
    np.testing.assert_allclose(jacobi_gen_eval((-2, -2), n, ends, 0), 0.0, atol=1e-14)
    np.testing.assert_allclose(jacobi_gen_eval((-2, -2), n, ends, 1), 0.0, atol=1e-12)
    x = np.linspace(-1, 1, 17)
    np.testing.assert_allclose(
        jacobi_gen_eval((-2, -2), n, x, 2),
        4 * (n - 2) * (n - 3) * legendre_eval(n - 2, x),
        rtol=1e-12, atol=1e-10,
    )


def test_generalized_jacobi_lowest_member():
    assert jacobi_gen_eval((-1, -1), 2, 0.0) == pytest.approx(1.0)
    x = np.linspace(-1, 1, 9)
    np.testing.assert_allclose(jacobi_gen_eval((-1, -1), 2, x), 1 - x**2, atol=1e-15)


@pytest.mark.parametrize("family,n", [((-1, -1), 1), ((-2, -2), 3), ((-2, -2), 0)])
def test_generalized_jacobi_degree_floor(family, n):
    with pytest.raises(InvalidDegreeError):
        jacobi_gen_eval(family, n, 0.0)


def _gamma22(n):
    # squared norm of P_n^{(2,2)} under the weight (1 - x^2)^2
    return 2**5 / (2 * n + 5) * (math.gamma(n + 3) ** 2) / (math.gamma(n + 1) * math.gamma(n + 5))


@pytest.mark.parametrize("n", range(4, 13))
def test_generalized_jacobi_weighted_orthogonality(n):
    rule = gauss_legendre_rule(24)
    x, w = rule.nodes, rule.weights
    for m in range(4, 13):
        val = np.sum(w * (1 - x**2) ** 2 * jacobi_eval(n - 4, 2, 2, x) * jacobi_eval(m - 4, 2, 2, x))
        assert val == pytest.approx(_gamma22(n - 4) if n == m else 0.0, abs=1e-10)


@pytest.mark.parametrize("n", range(4, 11))
def test_generalized_jacobi_is_double_antiderivative(n):
    # J_n = 4(n-2)(n-3) * (double antiderivative of L_{n-2} from -1)
    c = np.zeros(n - 1)
    c[n - 2] = 1.0
    twice = npleg.legint(c, m=2, lbnd=-1)
    x = np.linspace(-0.95, 0.95, 20)
    np.testing.assert_allclose(
        jacobi_gen_eval((-2, -2), n, x),
        4 * (n - 2) * (n - 3) * npleg.legval(x, twice), atol=1e-11,
    )


def test_small_gauss_rules():
    r1 = gauss_legendre_rule(1)
    np.testing.assert_allclose(r1.nodes, [0.0], atol=1e-16)
    np.testing.assert_allclose(r1.weights, [2.0])
    r2 = gauss_legendre_rule(2)
    np.testing.assert_allclose(r2.nodes, [-1 / math.sqrt(3), 1 / math.sqrt(3)], atol=1e-15)
    np.testing.assert_allclose(r2.weights, [1.0, 1.0], atol=1e-15)
    r3 = gauss_legendre_rule(3)
    np.testing.assert_allclose(r3.nodes, [-math.sqrt(0.6), 0.0, math.sqrt(0.6)], atol=1e-15)
    np.testing.assert_allclose(r3.weights, [5 / 9, 8 / 9, 5 / 9], atol=1e-15)


def test_gauss_rules_against_high_precision(frozen):
    for n, rule in frozen["gauss"].items():
        got = gauss_legendre_rule(int(n))
        np.testing.assert_allclose(got.nodes, rule["nodes"], rtol=0, atol=1e-14)
        np.testing.assert_allclose(got.weights, rule["weights"], rtol=1e-13)


@given(st.integers(min_value=1, max_value=64))
@settings(max_examples=40, deadline=None)
def test_gauss_rule_invariants(n):
    rule = gauss_legendre_rule(n)
    assert len(rule) == n
    assert np.all(np.diff(rule.nodes) > 0)
    assert np.all(rule.weights > 0)
    assert rule.weights.sum() == pytest.approx(2.0, abs=1e-13)
    x, w = rule.nodes, rule.weights
    assert np.sum(w * x ** (2 * n - 1)) == pytest.approx(0.0, abs=1e-12)
    assert np.sum(w * x ** (2 * n - 2)) == pytest.approx(2.0 / (2 * n - 1), abs=1e-12)


@given(st.integers(min_value=1, max_value=20), st.integers(min_value=0, max_value=39))
@settings(max_examples=60, deadline=None)
def test_gauss_rule_integrates_random_degree(n, deg):
    if deg > 2 * n - 1:
        deg = 2 * n - 1
    rng = np.random.default_rng(deg * 97 + n)
    coef = rng.standard_normal(deg + 1)
    exact = np.polynomial.Polynomial(coef).integ()
    rule = gauss_legendre_rule(n)
    got = np.sum(rule.weights * np.polynomial.Polynomial(coef)(rule.nodes))
    want = exact(1.0) - exact(-1.0)
    assert got == pytest.approx(want, rel=1e-13, abs=1e-13 * np.abs(coef).sum())


def test_shifted_basis_examples():
    s = shifted_basis_sample((0, 1), 1, [0.0], 0)
    np.testing.assert_allclose(s[0][:, 0], [1.0, -1.0])
    s = shifted_basis_sample((0, 2), 2, [0.0], 1)
    assert s[1][2, 0] == pytest.approx(-3.0)
    s = shifted_basis_sample((0.3, 1.7), 6, [1.0], 0)
    np.testing.assert_allclose(s[0][:, 0], [legendre_eval(l, 0.0) for l in range(7)], atol=1e-15)


def test_shifted_basis_rejects_outside_points():
    with pytest.raises(DomainError):
        shifted_basis_sample((0, 1), 3, [1.2])
    with pytest.raises(DomainError):
        shifted_basis_sample((1, 1), 3, [1.0])


@given(st.floats(-5, 5), st.floats(0.01, 3), st.integers(2, 10))
@settings(max_examples=40, deadline=None)
def test_shifted_basis_chain_rule(a, h, r):
    b = a + h
    t = np.linspace(a, b, 9)
    s = shifted_basis_sample((a, b), r, t, 2)
    x = (2 * t - a - b) / h
    for k in range(3):
        for l in range(r + 1):
            c = np.zeros(l + 1)
            c[l] = 1.0
            want = npleg.legval(x, npleg.legder(c, k)) * (2 / h) ** k if k <= l else 0 * x
            np.testing.assert_allclose(s[k][l], want, rtol=1e-11, atol=1e-9 * (2 / h) ** k)
