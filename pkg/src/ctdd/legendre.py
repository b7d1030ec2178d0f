"""
Legendre basis, Gauss-Legendre quadrature, coefficient projection and the
spectral differentiation operator on the interval (-1, 1).

Basis polynomials are normalized by ``pi_i(1) = 1`` and satisfy
``(i+1) pi_{i+1} = (2i+1) t pi_i - i pi_{i-1}``.
"""
import logging
from dataclasses import dataclass
from typing import Literal, Union

import numpy as np
from numpy.polynomial import legendre as npleg

from ctdd.exceptions import DimensionMismatch

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=float)
    array.flags.writeable = False
    return array


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """
    Quadrature rule on (-1, 1).

    Args:
        nodes (np.ndarray): Strictly increasing nodes.
        weights (np.ndarray): Positive weights, one per node.
    """
    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        nodes = _frozen(self.nodes)
        weights = _frozen(self.weights)
        if nodes.ndim != 1 or nodes.shape != weights.shape:
            raise DimensionMismatch(f'Nodes {nodes.shape} and weights {weights.shape} do not match.')
        object.__setattr__(self, 'nodes', nodes)
        object.__setattr__(self, 'weights', weights)

    @property
    def size(self) -> int:
        return self.nodes.shape[0]

    def integrate(self, values: np.ndarray) -> np.ndarray:
        """
        Integrate sampled values over the interval.

        Args:
            values (np.ndarray): Array with the node axis first.

        Returns:
            np.ndarray: ``sum_q w_q values[q]``.
        """
        values = np.asarray(values, dtype=float)
        if values.shape[0] != self.size:
            raise DimensionMismatch(f'Expected {self.size} samples, got {values.shape[0]}.')
        return np.tensordot(self.weights, values, axes=(0, 0))


@dataclass(frozen=True, eq=False)
class LegendreSeries:
    """
    Truncated vector-valued Legendre expansion ``sum_{i<N} h_i pi_i``.

    Args:
        coeffs (np.ndarray): Coefficient block of shape ``(N, dim)``; ``N = 0`` is the zero function.
    """
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=float)
        if coeffs.ndim == 1:
            coeffs = coeffs.reshape(-1, 1)
        if coeffs.ndim != 2 or coeffs.shape[1] < 1:
            raise DimensionMismatch(f'Coefficient block must be (N, dim), got {coeffs.shape}.')
        object.__setattr__(self, 'coeffs', _frozen(coeffs))

    @classmethod
    def zeros(cls, dim: int, order: int = 0) -> 'LegendreSeries':
        return cls(np.zeros((order, dim)))

    @property
    def dim(self) -> int:
        return self.coeffs.shape[1]

    @property
    def order(self) -> int:
        """Truncation order N (number of coefficients)."""
        return self.coeffs.shape[0]

    def pad(self, order: int) -> 'LegendreSeries':
        """Zero-pad (never truncate) to ``order`` coefficients."""
        if order < self.order:
            raise ValueError(f'Cannot pad series of order {self.order} down to {order}.')
        coeffs = np.zeros((order, self.dim))
        coeffs[:self.order] = self.coeffs
        return LegendreSeries(coeffs)

    def apply(self, matrix: np.ndarray) -> 'LegendreSeries':
        """Apply a constant matrix to every coefficient vector."""
        matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
        if matrix.shape[1] != self.dim:
            raise DimensionMismatch(f'Matrix {matrix.shape} cannot act on dimension {self.dim}.')
        return LegendreSeries(self.coeffs @ matrix.T)

    def __add__(self, other: 'LegendreSeries') -> 'LegendreSeries':
        if other.dim != self.dim:
            raise DimensionMismatch(f'Cannot add series of dimension {self.dim} and {other.dim}.')
        order = max(self.order, other.order)
        return LegendreSeries(self.pad(order).coeffs + other.pad(order).coeffs)

    def __neg__(self) -> 'LegendreSeries':
        return LegendreSeries(-self.coeffs)

    def __sub__(self, other: 'LegendreSeries') -> 'LegendreSeries':
        return self + (-other)

    def __rmul__(self, scalar: float) -> 'LegendreSeries':
        return LegendreSeries(float(scalar) * self.coeffs)


def legendre_eval(i: int, t: float) -> float:
    """
    Evaluate the Legendre polynomial ``pi_i`` at ``t`` by the three-term recurrence.

    Args:
        i (int): Basis index, ``i >= 0``.
        t (float): Point in [-1, 1].

    Returns:
        float: ``pi_i(t)``.
    """
    if i < 0:
        raise ValueError(f'Basis index must be non-negative, got {i}.')
    if not -1.0 <= t <= 1.0:
        raise ValueError(f'Point {t} is outside of [-1, 1].')
    if i == 0:
        return 1.0
    p_prev, p = 1.0, float(t)
    for k in range(1, i):
        p_prev, p = p, ((2 * k + 1) * t * p - k * p_prev) / (k + 1)
    return p


def legendre_norm_sq(i: int) -> float:
    """Squared L2 norm ``||pi_i||^2 = 2 / (2i + 1)``."""
    if i < 0:
        raise ValueError(f'Basis index must be non-negative, got {i}.')
    return 2.0 / (2 * i + 1)


def legendre_norms_sq(order: int) -> np.ndarray:
    return 2.0 / (2 * np.arange(order) + 1.0)


def legendre_vandermonde(t: ArrayLike, order: int) -> np.ndarray:
    """
    Basis matrix ``V[q, i] = pi_i(t_q)`` for ``i < order``.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if order == 0:
        return np.zeros((t.shape[0], 0))
    return npleg.legvander(t, order - 1)


def default_node_count(order: int) -> int:
    """Node count used for any computation involving truncation order ``order``."""
    return max(2 * order + 16, 200)


def gauss_legendre(size: int) -> QuadratureRule:
    """
    Gauss-Legendre rule with ``size`` nodes, exact up to polynomial degree ``2 size - 1``.

    Args:
        size (int): Node count Q >= 1.

    Returns:
        QuadratureRule: Nodes and weights on (-1, 1).
    """
    if size < 1:
        raise ValueError(f'Quadrature needs at least one node, got {size}.')
    nodes, weights = npleg.leggauss(size)
    return QuadratureRule(nodes=nodes, weights=weights)


def uniform_rule(size: int) -> QuadratureRule:
    """Trapezoid rule on a uniform grid including both ends, used for display output."""
    if size < 2:
        raise ValueError(f'Uniform grid needs at least two nodes, got {size}.')
    nodes = np.linspace(-1.0, 1.0, size)
    weights = np.full(size, 2.0 / (size - 1))
    weights[[0, -1]] *= 0.5
    return QuadratureRule(nodes=nodes, weights=weights)


def project(samples: np.ndarray, rule: QuadratureRule, order: int, dim: int) -> LegendreSeries:
    """
    Project sampled values onto the first ``order`` Legendre coefficients.

    ``f_i = <f, pi_i> / ||pi_i||^2`` with the inner product evaluated by ``rule``.
    Exact for polynomial ``f`` of degree at most ``2Q - 1 - order``.

    Args:
        samples (np.ndarray): Values at the rule nodes, shape ``(Q, dim)`` (or ``(Q,)`` if ``dim == 1``).
        rule (QuadratureRule): Quadrature rule the samples were taken on.
        order (int): Truncation order N, ``N <= Q``.
        dim (int): Signal dimension.

    Returns:
        LegendreSeries: Truncated coefficient block.

    Raises:
        DimensionMismatch: Samples do not match the rule or ``dim``.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim == 1 and dim == 1:
        samples = samples.reshape(-1, 1)
    if samples.ndim != 2 or samples.shape != (rule.size, dim):
        raise DimensionMismatch(f'Expected samples of shape {(rule.size, dim)}, got {samples.shape}.')
    if order > rule.size:
        raise ValueError(f'Truncation order {order} exceeds node count {rule.size}.')
    basis = legendre_vandermonde(rule.nodes, order)
    inner = (basis * rule.weights[:, None]).T @ samples
    return LegendreSeries(inner / legendre_norms_sq(order)[:, None])


def fit_samples(t: np.ndarray, samples: np.ndarray, order: int) -> LegendreSeries:
    """
    Least-squares Legendre fit of samples taken at arbitrary times in [-1, 1].

    Args:
        t (np.ndarray): Sample times.
        samples (np.ndarray): Values, shape ``(len(t), dim)``.
        order (int): Number of coefficients.

    Returns:
        LegendreSeries: Fitted coefficients.
    """
    t = np.asarray(t, dtype=float)
    samples = np.asarray(samples, dtype=float)
    if samples.ndim == 1:
        samples = samples.reshape(-1, 1)
    if samples.shape[0] != t.shape[0]:
        raise DimensionMismatch(f'{t.shape[0]} sample times but {samples.shape[0]} samples.')
    if order > t.shape[0]:
        raise ValueError(f'Cannot fit {order} coefficients from {t.shape[0]} samples.')
    coeffs = npleg.legfit(t, samples, order - 1)
    return LegendreSeries(coeffs.reshape(order, -1))


def series_eval(series: LegendreSeries, t: ArrayLike) -> np.ndarray:
    """
    Evaluate ``sum_{i<N} h_i pi_i(t)``.

    Args:
        series (LegendreSeries): Series to evaluate.
        t (float or np.ndarray): Point(s) in [-1, 1].

    Returns:
        np.ndarray: Vector of length ``dim`` for scalar ``t``, else shape ``(len(t), dim)``.
    """
    scalar = np.ndim(t) == 0
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if series.order == 0:
        values = np.zeros((t.shape[0], series.dim))
    else:
        values = npleg.legval(t, series.coeffs).T
    return values[0] if scalar else values


def differentiation_matrix(order: int) -> np.ndarray:
    """
    Truncated spectral differentiation operator.

    ``D[i, j] = 2i + 1`` for ``j > i`` with ``i + j`` odd; the last row is zero
    because differentiation drops one degree.
    """
    i, j = np.meshgrid(np.arange(order), np.arange(order), indexing='ij')
    return np.where((j > i) & ((i + j) % 2 == 1), 2.0 * i + 1.0, 0.0)


def diff_series(series: LegendreSeries) -> LegendreSeries:
    """
    Coefficients of the derivative, same length ``N`` with a zero top entry.
    """
    return LegendreSeries(differentiation_matrix(series.order) @ series.coeffs)


def boundary_signs(order: int, end: Literal[-1, 1]) -> np.ndarray:
    if end not in (-1, 1):
        raise ValueError(f'Boundary must be -1 or +1, got {end}.')
    return np.ones(order) if end == 1 else (-1.0) ** np.arange(order)


def series_boundary_value(series: LegendreSeries, end: Literal[-1, 1]) -> np.ndarray:
    """
    Value at an interval end using ``pi_i(1) = 1`` and ``pi_i(-1) = (-1)^i``.
    """
    return boundary_signs(series.order, end) @ series.coeffs


def series_norm(series: LegendreSeries) -> float:
    """L2 norm of the represented function on (-1, 1)."""
    weights = legendre_norms_sq(series.order)
    return float(np.sqrt(np.sum(weights[:, None] * series.coeffs ** 2)))
