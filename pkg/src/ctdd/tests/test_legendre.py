import logging

import numpy as np
from numpy.polynomial import legendre as npleg
import pytest

from ctdd.exceptions import DimensionMismatch
from ctdd.legendre import (
    LegendreSeries,
    default_node_count,
    diff_series,
    differentiation_matrix,
    fit_samples,
    gauss_legendre,
    legendre_eval,
    legendre_norm_sq,
    legendre_vandermonde,
    project,
    series_boundary_value,
    series_eval,
    series_norm,
    uniform_rule,
)

logger = logging.getLogger()


@pytest.mark.parametrize("i,t,expected", [
    (0, 0.3, 1.0),
    (1, -0.4, -0.4),
    (2, 0.5, -0.125),
    (3, 0.5, -0.4375),
])
def test_legendre_eval(i: int, t: float, expected: float):
    """
    Test for `legendre_eval` method.

    Args:
        i (int): Basis index.
        t (float): Evaluation point.
        expected (float): Known value.
    """
    assert legendre_eval(i, t) == pytest.approx(expected, abs=1e-15)


def test_legendre_eval_boundary():
    """
    Test for `legendre_eval` method at the interval ends.
    """
    for i in range(12):
        assert legendre_eval(i, 1.0) == pytest.approx(1.0)
        assert legendre_eval(i, -1.0) == pytest.approx((-1.0) ** i)


@pytest.mark.parametrize("i,t", [(-1, 0.0), (2, 1.5), (0, -1.01)])
def test_legendre_eval_invalid(i: int, t: float):
    with pytest.raises(ValueError):
        legendre_eval(i, t)


def test_orthogonality():
    """
    Test for `legendre_vandermonde` against the quadrature inner product.
    """
    rule = gauss_legendre(40)
    V = legendre_vandermonde(rule.nodes, 25)
    gram = (V * rule.weights[:, None]).T @ V
    expected = np.diag([legendre_norm_sq(i) for i in range(25)])
    assert np.allclose(gram, expected, atol=1e-13)


@pytest.mark.parametrize("size", [1, 3, 8, 20])
def test_quadrature_exactness(size: int):
    """
    Test for `gauss_legendre` exactness up to degree ``2Q - 1``.

    Args:
        size (int): Node count.
    """
    rule = gauss_legendre(size)
    assert np.all(np.diff(rule.nodes) > 0)
    assert np.all(rule.weights > 0)
    for k in range(2 * size):
        exact = 0.0 if k % 2 else 2.0 / (k + 1)
        assert rule.integrate(rule.nodes ** k) == pytest.approx(exact, abs=1e-13)


def test_quadrature_empty():
    with pytest.raises(ValueError):
        gauss_legendre(0)


def test_default_node_count():
    assert default_node_count(1) == 200
    assert default_node_count(100) == 216


def test_differentiation_matrix():
    """
    Test for `differentiation_matrix` pattern.
    """
    expected = np.array([
        [0.0, 1.0, 0.0, 1.0],
        [0.0, 0.0, 3.0, 0.0],
        [0.0, 0.0, 0.0, 5.0],
        [0.0, 0.0, 0.0, 0.0],
    ])
    assert np.array_equal(differentiation_matrix(4), expected)


def test_differentiation_exactness(seed: int):
    """
    Test for `diff_series` on polynomials of degree up to 30.

    Args:
        seed (int): Random seed.
    """
    rng = np.random.default_rng(seed)
    for degree in (0, 1, 5, 17, 30):
        coeffs = rng.normal(size=degree + 1)
        derivative = diff_series(LegendreSeries(coeffs)).coeffs[:, 0]
        expected = np.zeros(degree + 1)
        expected[:degree] = npleg.legder(coeffs)[:degree]
        assert np.allclose(derivative, expected, rtol=1e-12, atol=1e-10)


def test_project_polynomial(rule):
    """
    Test for `project` recovering the coefficients of a polynomial.

    Args:
        rule (QuadratureRule): 200-node rule.
    """
    coeffs = np.array([[0.5, -1.0], [2.0, 0.0], [0.0, 3.0], [-1.5, 0.25]])
    samples = npleg.legval(rule.nodes, coeffs).T
    series = project(samples, rule, 6, 2)
    assert np.allclose(series.coeffs[:4], coeffs, atol=1e-13)
    assert np.allclose(series.coeffs[4:], 0.0, atol=1e-13)
    assert np.allclose(series_eval(series, rule.nodes), samples, atol=1e-12)


def test_project_shape_mismatch(rule):
    with pytest.raises(DimensionMismatch):
        project(np.zeros((rule.size, 2)), rule, 4, 1)


def test_fit_samples_matches_project(rule):
    """
    Test for `fit_samples` on exact polynomial data.

    Args:
        rule (QuadratureRule): 200-node rule.
    """
    t = np.linspace(-1.0, 1.0, 57)
    values = t ** 3 - 2 * t + 1
    fitted = fit_samples(t, values, 8)
    projected = project(rule.nodes ** 3 - 2 * rule.nodes + 1, rule, 8, 1)
    assert np.allclose(fitted.coeffs, projected.coeffs, atol=1e-12)


def test_boundary_values():
    """
    Test for `series_boundary_value` with ``pi_i(1) = 1`` and ``pi_i(-1) = (-1)^i``.
    """
    series = LegendreSeries(np.array([1.0, 2.0, 3.0, 4.0]))
    assert series_boundary_value(series, 1)[0] == pytest.approx(10.0)
    assert series_boundary_value(series, -1)[0] == pytest.approx(-2.0)
    with pytest.raises(ValueError):
        series_boundary_value(series, 0)


def test_series_norm_and_arithmetic():
    """
    Test for `series_norm` and the series arithmetic.
    """
    one = LegendreSeries(np.array([1.0]))
    t = LegendreSeries(np.array([0.0, 1.0]))
    assert series_norm(one) == pytest.approx(np.sqrt(2.0))
    assert series_norm(t) == pytest.approx(np.sqrt(2.0 / 3.0))
    total = one + t
    assert total.order == 2
    assert np.allclose(total.coeffs[:, 0], [1.0, 1.0])
    assert np.allclose((2.0 * t - one).coeffs[:, 0], [-1.0, 2.0])
    with pytest.raises(ValueError):
        total.pad(1)


def test_uniform_rule():
    rule = uniform_rule(201)
    assert rule.nodes[0] == -1.0 and rule.nodes[-1] == 1.0
    assert rule.integrate(3.0 * rule.nodes + 1.0) == pytest.approx(2.0)


def test_spectral_decay_exponential(rule):
    """
    Test for `project` on ``e^t``: coefficients decay faster than geometrically.

    Args:
        rule (QuadratureRule): 200-node rule.
    """
    coeffs = np.abs(project(np.exp(rule.nodes), rule, 20, 1).coeffs[:, 0])
    for i in range(1, 10):
        assert coeffs[i + 1] < 0.3 * coeffs[i]
    assert coeffs[12] < 1e-11


def test_project_idempotent(seed: int):
    """
    Test for `project` after `series_eval` with at least ``2N`` nodes.

    Args:
        seed (int): Random seed.
    """
    rng = np.random.default_rng(seed)
    series = LegendreSeries(rng.normal(size=(20, 2)))
    rule = gauss_legendre(40)
    again = project(series_eval(series, rule.nodes), rule, 20, 2)
    assert np.allclose(again.coeffs, series.coeffs, atol=1e-12)
