"""
Continuous-time LTI models ``dx/dt = Ax + Bu, y = Cx + Du`` on (-1, 1),
their structural indices, exact trajectory generation and derivative stacks.
"""
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from numpy.polynomial import Polynomial
from numpy.polynomial import legendre as npleg
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from ctdd.exceptions import DimensionMismatch, InsufficientDerivativeOrder, RankDeficient
from ctdd.legendre import (
    LegendreSeries,
    QuadratureRule,
    diff_series,
    legendre_vandermonde,
    series_eval,
)

logger = logging.getLogger(__name__)

RANK_REL_TOL = 1e-10
EXACT_SERIES_DEGREE = 8


def numerical_rank(matrix: np.ndarray, rel_tol: float = RANK_REL_TOL) -> int:
    """
    Rank as the number of singular values above ``rel_tol * sigma_max``.
    """
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    if matrix.size == 0:
        return 0
    sigma = np.linalg.svd(matrix, compute_uv=False)
    if sigma[0] == 0.0:
        return 0
    return int(np.sum(sigma > rel_tol * sigma[0]))


def _as_matrix(value, rows: Optional[int] = None, cols: Optional[int] = None) -> np.ndarray:
    matrix = np.atleast_2d(np.asarray(value, dtype=float))
    if rows is not None and matrix.shape[0] != rows or cols is not None and matrix.shape[1] != cols:
        raise DimensionMismatch(f'Expected a {rows}x{cols} matrix, got {matrix.shape}.')
    matrix.flags.writeable = False
    return matrix


@dataclass(frozen=True, eq=False)
class LtiSystem:
    """
    State-space model ``dx/dt = Ax + Bu, y = Cx + Du``.

    Args:
        A (np.ndarray): n x n state matrix.
        B (np.ndarray): n x m input matrix.
        C (np.ndarray): p x n output matrix.
        D (np.ndarray): p x m feedthrough matrix.
    """
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        A = _as_matrix(self.A)
        n = A.shape[0]
        if A.shape != (n, n) or n < 1:
            raise DimensionMismatch(f'State matrix must be square, got {A.shape}.')
        B = _as_matrix(self.B, rows=n)
        C = _as_matrix(self.C, cols=n)
        D = _as_matrix(self.D, rows=C.shape[0], cols=B.shape[1])
        for name, value in zip('ABCD', (A, B, C, D)):
            object.__setattr__(self, name, value)

    @classmethod
    def input_state(cls, A, B) -> 'LtiSystem':
        """System whose output is the state (``C = I``, ``D = 0``)."""
        A = np.atleast_2d(np.asarray(A, dtype=float))
        B = np.atleast_2d(np.asarray(B, dtype=float))
        n, m = B.shape
        return cls(A=A, B=B, C=np.eye(n), D=np.zeros((n, m)))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]

    @property
    def has_feedthrough(self) -> bool:
        return bool(np.any(self.D != 0.0))


@dataclass(frozen=True)
class StructuralIndices:
    mcmillan: int
    lag: int
    controllable: bool
    observable: bool


def observability_matrix(sys: LtiSystem, k: int) -> np.ndarray:
    """Stack ``col(C, CA, ..., CA^k)``."""
    blocks = [sys.C]
    for _ in range(k):
        blocks.append(blocks[-1] @ sys.A)
    return np.vstack(blocks)


def toeplitz_matrix(sys: LtiSystem, k: int) -> np.ndarray:
    """
    Block lower-triangular map from ``Lambda_{k+1}(u)`` to the input part of
    ``Lambda_{k+1}(y)``: ``T_0 = D``, ``T_k = [[D, 0], [O_{k-1} B, T_{k-1}]]``.
    """
    T = sys.D.copy()
    for j in range(1, k + 1):
        top = np.hstack([sys.D, np.zeros((sys.p, j * sys.m))])
        bottom = np.hstack([observability_matrix(sys, j - 1) @ sys.B, T])
        T = np.vstack([top, bottom])
    return T


def controllability_matrix(sys: LtiSystem) -> np.ndarray:
    blocks = [sys.B]
    for _ in range(sys.n - 1):
        blocks.append(sys.A @ blocks[-1])
    return np.hstack(blocks)


def structural_indices(sys: LtiSystem, rel_tol: float = RANK_REL_TOL) -> StructuralIndices:
    """
    Lag, McMillan degree, controllability and observability of ``sys``.

    The lag is the first ``k`` at which ``rank O_k`` stops growing, the McMillan
    degree is ``rank O_{n-1}``.

    Args:
        sys (LtiSystem): Model.
        rel_tol (float): Relative singular value threshold.

    Returns:
        StructuralIndices: Computed indices.
    """
    ranks = [0]
    lag = None
    for k in range(sys.n + 1):
        ranks.append(numerical_rank(observability_matrix(sys, k), rel_tol))
        if lag is None and ranks[-1] == ranks[-2]:
            lag = k
    mcmillan = ranks[sys.n]
    controllable = numerical_rank(controllability_matrix(sys), rel_tol) == sys.n
    indices = StructuralIndices(
        mcmillan=mcmillan,
        lag=lag if lag is not None else sys.n,
        controllable=controllable,
        observable=mcmillan == sys.n,
    )
    logger.debug('Structural indices: %s', indices)
    return indices


class InputSignal(ABC):
    """
    Input signal with analytically known derivatives.

    Args:
        dim (int): Number of input channels m.
        max_order (int, optional): Highest available derivative order, ``None`` if unlimited.
    """

    def __init__(self, dim: int, max_order: Optional[int] = None):
        self.dim = dim
        self.max_order = max_order

    @abstractmethod
    def derivative(self, order: int, t: np.ndarray) -> np.ndarray:
        """Values of ``u^{(order)}`` at ``t``, shape ``(len(t), dim)``."""

    def supports(self, order: int) -> bool:
        return self.max_order is None or order <= self.max_order

    def stack(self, t: np.ndarray, order: int) -> np.ndarray:
        """``Lambda_order(u)`` at ``t``, shape ``(len(t), order * dim)``."""
        if not self.supports(order - 1):
            raise InsufficientDerivativeOrder(
                f'Input provides derivatives up to {self.max_order}, {order - 1} requested.'
            )
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if order == 0:
            return np.zeros((t.shape[0], 0))
        return np.hstack([self.derivative(k, t) for k in range(order)])


class PolynomialInput(InputSignal):
    """
    Polynomial input, one polynomial per channel.

    Args:
        coefficients (Sequence[Sequence[float]]): Monomial coefficients per channel, lowest degree first.
    """

    def __init__(self, coefficients: Sequence[Sequence[float]]):
        self.polynomials = [Polynomial(np.asarray(c, dtype=float)) for c in coefficients]
        super().__init__(dim=len(self.polynomials), max_order=None)

    @classmethod
    def from_series(cls, series: LegendreSeries, tol: float = 1e-12) -> 'PolynomialInput':
        """Monomial form of a Legendre series; trailing coefficients below ``tol`` relative are dropped."""
        channels = []
        for j in range(series.dim):
            coeffs = series.coeffs[:, j] if series.order else np.zeros(1)
            scale = max(float(np.max(np.abs(coeffs))), 1.0)
            channels.append(npleg.leg2poly(npleg.legtrim(coeffs, tol * scale)))
        return cls(channels)

    @property
    def degree(self) -> int:
        return max(p.degree() for p in self.polynomials)

    def derivative(self, order: int, t: np.ndarray) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return np.column_stack([p.deriv(order)(t) if order else p(t) for p in self.polynomials])


class CallableInput(InputSignal):
    """
    Input given by closures for ``u, u', ..., u^{(k)}``.

    Args:
        derivatives (Sequence[Callable]): ``derivatives[k](t)`` returns ``u^{(k)}(t)`` of shape ``(len(t), dim)``.
        dim (int): Number of input channels.
    """

    def __init__(self, derivatives: Sequence[Callable[[np.ndarray], np.ndarray]], dim: int):
        self.derivatives = list(derivatives)
        super().__init__(dim=dim, max_order=len(self.derivatives) - 1)

    def derivative(self, order: int, t: np.ndarray) -> np.ndarray:
        if not self.supports(order):
            raise InsufficientDerivativeOrder(f'Derivative of order {order} is not available.')
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return np.asarray(self.derivatives[order](t), dtype=float).reshape(t.shape[0], self.dim)


@dataclass(frozen=True, eq=False)
class SampledSignal:
    """
    Signal and its first ``order - 1`` derivatives at quadrature nodes.

    Args:
        rule (QuadratureRule): Sampling rule.
        derivs (np.ndarray): ``Lambda_order(f)`` per node, shape ``(Q, order * dim)``.
        dim (int): Signal dimension.
    """
    rule: QuadratureRule
    derivs: np.ndarray
    dim: int

    def __post_init__(self):
        derivs = np.array(self.derivs, dtype=float)
        if derivs.ndim != 2 or derivs.shape[0] != self.rule.size or derivs.shape[1] % self.dim:
            raise DimensionMismatch(
                f'Derivative stack of shape {derivs.shape} does not fit {self.rule.size} nodes '
                f'and dimension {self.dim}.'
            )
        derivs.flags.writeable = False
        object.__setattr__(self, 'derivs', derivs)

    @property
    def order(self) -> int:
        return self.derivs.shape[1] // self.dim

    def stack(self, order: int) -> np.ndarray:
        """``Lambda_order(f)`` at the nodes."""
        if order > self.order:
            raise InsufficientDerivativeOrder(
                f'Signal carries derivatives up to {self.order - 1}, {order - 1} requested.'
            )
        return self.derivs[:, :order * self.dim]

    def block(self, k: int) -> np.ndarray:
        """``f^{(k)}`` at the nodes, shape ``(Q, dim)``."""
        return self.stack(k + 1)[:, k * self.dim:]

    def scaled(self, alpha: float) -> 'SampledSignal':
        return SampledSignal(self.rule, alpha * self.derivs, self.dim)

    @classmethod
    def from_series(cls, series: LegendreSeries, rule: QuadratureRule, order: int) -> 'SampledSignal':
        """
        Sample a Legendre series and its spectral derivatives.

        Args:
            series (LegendreSeries): Signal expansion.
            rule (QuadratureRule): Nodes to sample at.
            order (int): Number of stacked derivatives (``f`` counts as one).

        Returns:
            SampledSignal: Stack ``Lambda_order(f)`` at the nodes.
        """
        basis = legendre_vandermonde(rule.nodes, series.order)
        blocks = []
        current = series
        for _ in range(order):
            blocks.append(basis @ current.coeffs)
            current = diff_series(current)
        derivs = np.hstack(blocks) if blocks else np.zeros((rule.size, 0))
        return cls(rule=rule, derivs=derivs, dim=series.dim)


def sample_signal(signal: InputSignal, rule: QuadratureRule, order: int) -> SampledSignal:
    """Sample ``Lambda_order`` of an analytic signal at the rule nodes."""
    return SampledSignal(rule=rule, derivs=signal.stack(rule.nodes, order), dim=signal.dim)


@dataclass(frozen=True, eq=False)
class SampledTrajectory:
    """
    Input, state and (optionally) output derivative stacks on one rule.

    Args:
        input (SampledSignal): ``Lambda_L(u)``.
        state (SampledSignal): ``Lambda_K(x)``.
        output (SampledSignal, optional): ``Lambda_K(y)``.
    """
    input: SampledSignal
    state: SampledSignal
    output: Optional[SampledSignal] = None

    def __post_init__(self):
        signals = [s for s in (self.input, self.state, self.output) if s is not None]
        for signal in signals[1:]:
            if signal.rule is not self.input.rule and not np.array_equal(signal.rule.nodes, self.input.rule.nodes):
                raise DimensionMismatch('All signals of a trajectory must share the quadrature nodes.')

    @property
    def rule(self) -> QuadratureRule:
        return self.input.rule

    @property
    def L(self) -> int:
        return self.input.order

    @property
    def K(self) -> int:
        return self.state.order

    @property
    def u_derivs(self) -> np.ndarray:
        return self.input.derivs

    @property
    def x_derivs(self) -> np.ndarray:
        return self.state.derivs

    @property
    def y_derivs(self) -> Optional[np.ndarray]:
        return None if self.output is None else self.output.derivs

    @classmethod
    def from_series(
        cls,
        u_series: LegendreSeries,
        x_series: LegendreSeries,
        rule: QuadratureRule,
        L: int,
        K: int,
        y_series: Optional[LegendreSeries] = None,
    ) -> 'SampledTrajectory':
        """Build a trajectory from Legendre expansions, derivatives via ``diff_series``."""
        return cls(
            input=SampledSignal.from_series(u_series, rule, L),
            state=SampledSignal.from_series(x_series, rule, K),
            output=None if y_series is None else SampledSignal.from_series(y_series, rule, K),
        )


def required_input_order(sys: LtiSystem, L: int, K: int, with_output: bool = True) -> int:
    """Highest input derivative needed to stack ``Lambda_L(u)`` and ``Lambda_K(x)``, ``Lambda_K(y)``."""
    needed = max(L - 1, K - 2)
    if with_output and sys.has_feedthrough:
        needed = max(needed, K - 1)
    return needed


def state_derivatives(sys: LtiSystem, x: np.ndarray, u_stack: np.ndarray, K: int) -> np.ndarray:
    """
    Stack ``x, x', ..., x^{(K-1)}`` from ``x^{(i)} = A^i x + sum_{j<i} A^{i-1-j} B u^{(j)}``.

    Args:
        sys (LtiSystem): Model.
        x (np.ndarray): States, shape ``(Q, n)``.
        u_stack (np.ndarray): Input stacks with at least ``K - 1`` derivative blocks, shape ``(Q, >= (K-1) m)``.
        K (int): Stacking order.

    Returns:
        np.ndarray: Shape ``(Q, K n)``.
    """
    m = sys.m
    blocks = [x]
    for i in range(1, K):
        # x^{(i)} = A x^{(i-1)} + B u^{(i-1)}
        blocks.append(blocks[-1] @ sys.A.T + u_stack[:, (i - 1) * m:i * m] @ sys.B.T)
    return np.hstack(blocks)


def stack_output_derivatives(sys: LtiSystem, x_node: np.ndarray, u_stack: np.ndarray, k: int) -> np.ndarray:
    """
    ``Lambda_{k+1}(y) = O_k x + T_k Lambda_{k+1}(u)`` at one node.

    Args:
        sys (LtiSystem): Model.
        x_node (np.ndarray): State, length n.
        u_stack (np.ndarray): ``Lambda_{k+1}(u)``, length ``(k+1) m``.
        k (int): Highest output derivative order.

    Returns:
        np.ndarray: Output stack, length ``(k+1) p``.
    """
    x_node = np.asarray(x_node, dtype=float).reshape(-1)
    u_stack = np.asarray(u_stack, dtype=float).reshape(-1)
    if u_stack.shape[0] != (k + 1) * sys.m:
        raise DimensionMismatch(f'Input stack must have length {(k + 1) * sys.m}, got {u_stack.shape[0]}.')
    if x_node.shape[0] != sys.n:
        raise DimensionMismatch(f'State must have length {sys.n}, got {x_node.shape[0]}.')
    return observability_matrix(sys, k) @ x_node + toeplitz_matrix(sys, k) @ u_stack


def _augmented_exact_states(sys: LtiSystem, signal: PolynomialInput, x0: np.ndarray, t: np.ndarray) -> np.ndarray:
    degree = max(signal.degree, 0)
    n, m = sys.n, sys.m
    size = n + (degree + 1) * m
    M = np.zeros((size, size))
    M[:n, :n] = sys.A
    M[:n, n:n + m] = sys.B
    for j in range(degree):
        M[n + j * m:n + (j + 1) * m, n + (j + 1) * m:n + (j + 2) * m] = np.eye(m)
    z0 = np.concatenate([x0, signal.stack(np.array([-1.0]), degree + 1)[0]])
    return np.array([(expm(M * (tq + 1.0)) @ z0)[:n] for tq in t])


def _integrated_states(sys: LtiSystem, signal: InputSignal, x0: np.ndarray, t: np.ndarray) -> np.ndarray:
    def rhs(tau, x):
        return sys.A @ x + sys.B @ signal.derivative(0, np.array([tau]))[0]

    solution = solve_ivp(rhs, (-1.0, 1.0), x0, method='DOP853', t_eval=t, rtol=1e-12, atol=1e-14)
    if not solution.success:
        raise RuntimeError(f'State integration failed: {solution.message}')
    return solution.y.T


def simulate(
    sys: LtiSystem,
    signal: InputSignal,
    x0,
    rule: QuadratureRule,
    L: int,
    K: int,
    with_output: bool = True,
) -> SampledTrajectory:
    """
    Generate an exact input-state(-output) trajectory at the rule nodes.

    States come from the matrix exponential of the augmented polynomial system when
    the input is polynomial, otherwise from a high-order integrator with tight
    tolerances. Higher state derivatives use the recursion
    ``x^{(i)} = A^i x + sum_j A^{i-1-j} B u^{(j)}``; no numerical differentiation.

    Args:
        sys (LtiSystem): Model.
        signal (InputSignal): Input with analytic derivatives.
        x0 (array-like): State at ``t = -1``.
        rule (QuadratureRule): Nodes to sample at.
        L (int): Input stacking order.
        K (int): State/output stacking order.
        with_output (bool): Also stack ``Lambda_K(y)``.

    Returns:
        SampledTrajectory: Sampled stacks.

    Raises:
        InsufficientDerivativeOrder: The input lacks derivatives needed for ``L``, ``K``.
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.shape[0] != sys.n:
        raise DimensionMismatch(f'Initial state must have length {sys.n}, got {x0.shape[0]}.')
    if signal.dim != sys.m:
        raise DimensionMismatch(f'Input has {signal.dim} channels, system expects {sys.m}.')
    needed = required_input_order(sys, L, K, with_output)
    if not signal.supports(needed):
        raise InsufficientDerivativeOrder(
            f'L={L}, K={K} need input derivatives up to order {needed}, input provides {signal.max_order}.'
        )

    t = rule.nodes
    if isinstance(signal, PolynomialInput):
        x = _augmented_exact_states(sys, signal, x0, t)
    else:
        x = _integrated_states(sys, signal, x0, t)

    u_full = signal.stack(t, needed + 1)
    padded = np.zeros((rule.size, max(L, K) * sys.m))
    padded[:, :u_full.shape[1]] = u_full[:, :padded.shape[1]]

    output = None
    if with_output:
        # T_{K-1} touches u^{(K-1)} only through D, zero padding is exact when D = 0
        y = x @ observability_matrix(sys, K - 1).T + padded[:, :K * sys.m] @ toeplitz_matrix(sys, K - 1).T
        output = SampledSignal(rule, y, sys.p)

    logger.debug('Simulated trajectory on %d nodes (L=%d, K=%d).', rule.size, L, K)
    return SampledTrajectory(
        input=SampledSignal(rule, padded[:, :L * sys.m], sys.m),
        state=SampledSignal(rule, state_derivatives(sys, x, padded, K), sys.n),
        output=output,
    )


def simulate_series(sys: LtiSystem, u_series: LegendreSeries, x0, rule: QuadratureRule) -> np.ndarray:
    """
    States at the rule nodes driven by an input given as a Legendre series.

    Inputs of degree up to ``EXACT_SERIES_DEGREE`` after trimming use the exact
    augmented exponential, longer series the integrator.
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    signal = PolynomialInput.from_series(u_series)
    if signal.degree <= EXACT_SERIES_DEGREE:
        return _augmented_exact_states(sys, signal, x0, rule.nodes)
    return _integrated_states(sys, CallableInput([lambda t: series_eval(u_series, t)], dim=u_series.dim), x0, rule.nodes)


@dataclass(frozen=True, eq=False)
class AuxiliarySystem:
    """
    Linear model of the stacked input-output trajectory.

    State ``xi = Lambda_lag(w)`` ordered ``u, y, u', y', ...``, input ``nu = u^{(lag)}``.

    Args:
        A (np.ndarray): State matrix.
        B (np.ndarray): Input matrix.
        Q (np.ndarray): State weight selecting ``y`` (the cost ``||y||^2 + ||u^{(lag)}||^2``).
        lag (int): System lag.
    """
    A: np.ndarray
    B: np.ndarray
    Q: np.ndarray
    lag: int

    def as_system(self) -> LtiSystem:
        return LtiSystem.input_state(self.A, self.B)


def auxiliary_system(sys: LtiSystem) -> AuxiliarySystem:
    """
    Eliminate the state: ``d/dt xi = A xi + B nu`` with ``xi = Lambda_lag(col(u, y))``.

    Args:
        sys (LtiSystem): Model with observable ``(A, C)``.

    Returns:
        AuxiliarySystem: Stacked model and the output-selecting weight.

    Raises:
        RankDeficient: ``(A, C)`` is not observable.
    """
    indices = structural_indices(sys)
    if not indices.observable:
        raise RankDeficient('Auxiliary system needs an observable pair (A, C).')
    lag, m, p, q = indices.lag, sys.m, sys.p, sys.m + sys.p
    size = lag * q

    def select(offset: int, width: int, k: int) -> np.ndarray:
        sel = np.zeros((width, size))
        sel[:, k * q + offset:k * q + offset + width] = np.eye(width)
        return sel

    Su = np.vstack([select(0, m, k) for k in range(lag)])
    Sy = np.vstack([select(m, p, k) for k in range(lag)])
    X = np.linalg.pinv(observability_matrix(sys, lag - 1)) @ (Sy - toeplitz_matrix(sys, lag - 1) @ Su)

    A = np.zeros((size, size))
    B = np.zeros((size, m))
    for k in range(lag - 1):
        A[k * q:(k + 1) * q] = np.vstack([select(0, m, k + 1), select(m, p, k + 1)])
    last = (lag - 1) * q
    B[last:last + m] = np.eye(m)
    # y^{(lag)} = C A^lag x + sum_j C A^{lag-1-j} B u^{(j)} + D u^{(lag)}
    row = sys.C @ np.linalg.matrix_power(sys.A, lag) @ X
    for j in range(lag):
        row = row + sys.C @ np.linalg.matrix_power(sys.A, lag - 1 - j) @ sys.B @ select(0, m, j)
    A[last + m:last + q] = row
    B[last + m:last + q] = sys.D

    Q = np.zeros((size, size))
    Q[m:q, m:q] = np.eye(p)
    return AuxiliarySystem(A=A, B=B, Q=Q, lag=lag)
