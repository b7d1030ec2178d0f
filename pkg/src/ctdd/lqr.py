"""
Finite-horizon LQR on (-1, 1).

Reference solutions (closed form for the scalar example, Riccati ODE in general)
and the quadratic programs over truncated Legendre coefficients, posed either on
a data dictionary or on the model-based parameterization of the same stack.
"""
import logging
import warnings
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence, Union

import numpy as np
from scipy import linalg
from scipy.integrate import solve_ivp

from ctdd.excitation import block_name, signal_partition
from ctdd.exceptions import DimensionMismatch, RiccatiBlowUp
from ctdd.fundamental import DataDictionary, StackParameterization, Variant
from ctdd.legendre import (
    LegendreSeries,
    default_node_count,
    diff_series,
    gauss_legendre,
    legendre_norms_sq,
    project,
    series_boundary_value,
    series_norm,
)
from ctdd.lti import LtiSystem, auxiliary_system, observability_matrix, structural_indices, toeplitz_matrix

logger = logging.getLogger(__name__)

KKT_TOL = 1e-9
REFERENCE_ORDER = 48

# closed-form optimum of x' = -x + u, x(-1) = 1, J = int u^2 + x^2
_S = np.sqrt(2.0)
_E = np.exp(2.0 * _S)
_C = 1.0 / (_S * (_E - 1.0))


@dataclass(frozen=True, eq=False)
class LqrSolution:
    """
    Optimal (or reference) trajectory over Legendre coefficients.

    Args:
        variant (Variant): Input-state or input-output cost.
        order (int): Truncation order N (projection order for reference solutions).
        u_series (LegendreSeries): Input coefficients.
        cost (float): Optimal value ``J``.
        x_series (LegendreSeries, optional): State coefficients.
        y_series (LegendreSeries, optional): Output coefficients.
        g_hat (np.ndarray): QP unknowns, one row per coefficient; empty for references.
        kkt_residual (float): Stationarity residual of the KKT system.
        constraint_residual (float): Primal feasibility residual.
        lag (int): Derivative order of the input in the cost (0 for the state form).
        solver (str): ``ldl``, ``lstsq``, ``riccati`` or ``analytic``.
    """
    variant: Variant
    order: int
    u_series: LegendreSeries
    cost: float
    x_series: Optional[LegendreSeries] = None
    y_series: Optional[LegendreSeries] = None
    g_hat: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    kkt_residual: float = 0.0
    constraint_residual: float = 0.0
    lag: int = 0
    solver: str = 'ldl'

    @property
    def second_series(self) -> LegendreSeries:
        """The signal weighted by ``Q``: ``x`` for the state form, ``y`` otherwise."""
        return self.x_series if self.variant is Variant.INPUT_STATE else self.y_series

    def as_dict(self) -> dict:
        return {
            'variant': self.variant.value,
            'order': self.order,
            'cost': self.cost,
            'kkt_residual': self.kkt_residual,
            'constraint_residual': self.constraint_residual,
            'solver': self.solver,
        }


@dataclass(frozen=True, eq=False)
class LqrSpec:
    """
    One LQR problem instance.

    Args:
        target (LtiSystem or DataDictionary): Model (model-based QP) or data dictionary (data-driven QP).
        initial (np.ndarray): ``x0`` for the state form, ``xi0 = Lambda_lag(w)(-1)`` otherwise.
        order (int): Truncation order N.
        variant (Variant): Input-state or input-output cost.
        Q (np.ndarray, optional): Weight on ``x`` (state form) or ``y``.
        R (np.ndarray, optional): Weight on ``u`` (state form) or ``u^(lag)``.
    """
    target: Union[LtiSystem, DataDictionary]
    initial: np.ndarray
    order: int
    variant: Variant = Variant.INPUT_STATE
    Q: Optional[np.ndarray] = None
    R: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, 'variant', Variant(self.variant))
        object.__setattr__(self, 'initial', np.asarray(self.initial, dtype=float).reshape(-1))
        if self.order < 1:
            raise ValueError(f'Truncation order must be at least 1, got {self.order}.')
        if isinstance(self.target, DataDictionary):
            if self.target.variant is not self.variant:
                raise ValueError(f'A {self.target.variant.value} dictionary cannot pose a {self.variant.value} problem.')
            expected = self.target.initial_size()
        elif self.variant is Variant.INPUT_STATE:
            expected = self.target.n
        else:
            expected = structural_indices(self.target).lag * (self.target.m + self.target.p)
        if self.initial.shape[0] != expected:
            raise DimensionMismatch(f'Initial condition must have length {expected}, got {self.initial.shape[0]}.')


@dataclass(frozen=True)
class GapRow:
    order: int
    cost: float
    gap: float
    trajectory_gap: float

    def as_dict(self) -> dict:
        return {'N': self.order, 'J_N': self.cost, 'gap': self.gap, 'traj_gap': self.trajectory_gap}


@dataclass(frozen=True, eq=False)
class ModelParameterization(StackParameterization):
    """
    Stack ``Lambda(w)`` as a linear image of the latent ``(u, u', ..., u^(L-1), x)``
    through known model matrices.

    Args:
        matrix (np.ndarray): Map from latent to stack, shape ``(L m + K q, L m + n)``.
        stack_partition (tuple): Named row blocks.
        variant (Variant): Input-state or input-output stack.
        orders (tuple): ``(L, K)``.
    """
    matrix: np.ndarray
    stack_partition: tuple
    variant: Variant
    orders: tuple

    @property
    def L(self) -> int:
        return self.orders[0]

    @property
    def K(self) -> int:
        return self.orders[1]

    @property
    def rank(self) -> int:
        return self.matrix.shape[1]

    @property
    def partition(self) -> tuple:
        return self.stack_partition

    def reduced_block(self, name: str) -> np.ndarray:
        start = 0
        for block, size in self.stack_partition:
            if block == name:
                return self.matrix[start:start + size]
            start += size
        raise KeyError(f'Parameterization has no block {name!r}.')


def model_parameterization(sys: LtiSystem, L: int, K: int, variant: Variant = Variant.INPUT_STATE) -> ModelParameterization:
    """
    Build the model-based stack parameterization.

    State blocks use ``x^(k) = A^k x + sum_{j<k} A^{k-1-j} B u^(j)``; output blocks use
    ``Lambda_K(y) = O_{K-1} x + T_{K-1} Lambda_K(u)``.

    Args:
        sys (LtiSystem): Known model.
        L (int): Input stacking order.
        K (int): State/output stacking order, ``K <= L + 1``.
        variant (Variant): Input-state or input-output stack.

    Returns:
        ModelParameterization: Latent-to-stack map.
    """
    variant = Variant(variant)
    if K > L + 1:
        raise ValueError(f'Stacking orders need K <= L + 1, got L={L}, K={K}.')
    m, n = sys.m, sys.n
    inputs = np.hstack([np.eye(L * m), np.zeros((L * m, n))])

    if variant is Variant.INPUT_STATE:
        rows = []
        for k in range(K):
            row = np.zeros((n, L * m + n))
            row[:, L * m:] = np.linalg.matrix_power(sys.A, k)
            for j in range(k):
                row[:, j * m:(j + 1) * m] = np.linalg.matrix_power(sys.A, k - 1 - j) @ sys.B
            rows.append(row)
        second, dim = 'x', n
    else:
        T = toeplitz_matrix(sys, K - 1)
        if K > L and np.any(T[:, L * m:]):
            raise ValueError('K = L + 1 needs a system without feedthrough.')
        rows = [np.hstack([T[:, :L * m], observability_matrix(sys, K - 1)])]
        second, dim = 'y', sys.p

    return ModelParameterization(
        matrix=np.vstack([inputs] + rows),
        stack_partition=tuple(signal_partition('u', m, L) + signal_partition(second, dim, K)),
        variant=variant,
        orders=(L, K),
    )


def _weights(matrix: Optional[np.ndarray], dim: int, label: str) -> np.ndarray:
    if matrix is None:
        return np.eye(dim)
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    if matrix.shape != (dim, dim):
        raise DimensionMismatch(f'Weight {label} must be {dim}x{dim}, got {matrix.shape}.')
    return matrix


def _solve_kkt(H: np.ndarray, C: np.ndarray, d: np.ndarray, tol: float) -> tuple:
    size, rows = H.shape[0], C.shape[0]
    kkt = np.block([[H, C.T], [C, np.zeros((rows, rows))]])
    rhs = np.concatenate([np.zeros(size), d])

    def residuals(solution: np.ndarray) -> tuple:
        z, lam = solution[:size], solution[size:]
        return float(np.linalg.norm(H @ z + C.T @ lam)), float(np.linalg.norm(C @ z - d))

    solution, solver = None, 'ldl'
    try:
        with warnings.catch_warnings():
            warnings.simplefilter('error', linalg.LinAlgWarning)
            solution = linalg.solve(kkt, rhs, assume_a='sym')
    except (linalg.LinAlgError, linalg.LinAlgWarning) as error:
        logger.debug('Symmetric-indefinite factorization failed: %s', error)

    if solution is not None:
        stationarity, feasibility = residuals(solution)
        z_norm = np.linalg.norm(solution[:size])
        if not np.all(np.isfinite(solution)) or stationarity > tol * (1 + z_norm) or feasibility > tol * (1 + np.linalg.norm(d)):
            logger.debug('Factorized KKT solve rejected: residuals %.3e, %.3e.', stationarity, feasibility)
            solution = None

    if solution is None:
        logger.warning('KKT system is singular, falling back to minimum-norm least squares.')
        solution, _, _, _ = linalg.lstsq(kkt, rhs)
        solver = 'lstsq'

    stationarity, feasibility = residuals(solution)
    if feasibility > tol * (1 + np.linalg.norm(d)):
        logger.warning('Equality constraints are inconsistent: residual %.3e.', feasibility)
    return solution[:size], stationarity, feasibility, solver


def solve_stack_lqr(
    param: StackParameterization,
    initial: Sequence[float],
    order: int,
    Q: Optional[np.ndarray] = None,
    R: Optional[np.ndarray] = None,
    kkt_tol: float = KKT_TOL,
) -> LqrSolution:
    """
    Equality-constrained QP over ``h_0..h_{N-1}`` for any stack parameterization.

    Objective ``sum_i ||pi_i||^2 (|M_y h_i|_Q^2 + |M_u h_i|_R^2)`` with ``y = x`` and the
    plain input for the state form, ``y^(0)`` and ``u^(lag)`` otherwise; constraints are
    the chain-consistency rows and the initial-condition rows.

    Args:
        param (StackParameterization): Data dictionary or model parameterization.
        initial (Sequence[float]): Initial stack.
        order (int): Truncation order N.
        Q (np.ndarray, optional): Weight on the second signal.
        R (np.ndarray, optional): Weight on the input term.
        kkt_tol (float): Tolerance of the KKT residual checks.

    Returns:
        LqrSolution: Optimal coefficients and diagnostics.
    """
    if order < 1:
        raise ValueError(f'Truncation order must be at least 1, got {order}.')
    initial = np.asarray(initial, dtype=float).reshape(-1)
    lag = 0 if param.variant is Variant.INPUT_STATE else param.lag
    input_block = block_name('u', lag)
    if input_block not in dict(param.partition):
        raise ValueError(f'Cost needs block {input_block}, stack has L={param.L}.')

    second_block = param.reduced_block(block_name(param.signal, 0))
    input_rows = param.reduced_block(input_block)
    Q = _weights(Q, param.q, 'Q')
    R = _weights(R, param.m, 'R')
    local = second_block.T @ Q @ second_block + input_rows.T @ R @ input_rows
    H = np.kron(np.diag(2.0 * legendre_norms_sq(order)), 0.5 * (local + local.T))

    consistency = param.consistency_operator(order)
    start = param.initial_operator(order)
    if start.shape[0] != initial.shape[0]:
        raise DimensionMismatch(f'Initial condition must have length {start.shape[0]}, got {initial.shape[0]}.')
    C = np.vstack([consistency, start])
    d = np.concatenate([np.zeros(consistency.shape[0]), initial])

    z, stationarity, feasibility, solver = _solve_kkt(H, C, d, kkt_tol)
    h = z.reshape(order, param.rank)
    cost = float(0.5 * z @ H @ z)
    logger.debug('LQR at N=%d: J=%.16e via %s.', order, cost, solver)

    second = param.series(block_name(param.signal, 0), h)
    return LqrSolution(
        variant=param.variant,
        order=order,
        u_series=param.series(block_name('u', 0), h),
        cost=max(cost, 0.0),
        x_series=second if param.variant is Variant.INPUT_STATE else None,
        y_series=second if param.variant is Variant.INPUT_OUTPUT else None,
        g_hat=param.preimage(h),
        kkt_residual=stationarity,
        constraint_residual=feasibility,
        lag=lag,
        solver=solver,
    )


def solve_dd_lqr_state(
    dictionary: DataDictionary,
    x0: Sequence[float],
    order: int,
    Q: Optional[np.ndarray] = None,
    R: Optional[np.ndarray] = None,
    kkt_tol: float = KKT_TOL,
) -> LqrSolution:
    """
    Data-driven input-state LQR from a state dictionary with blocks ``u``, ``x``, ``x'``.

    Args:
        dictionary (DataDictionary): Input-state dictionary.
        x0 (Sequence[float]): Initial state.
        order (int): Truncation order N.

    Returns:
        LqrSolution: Optimal ``g``, ``u``/``x`` coefficients and the value ``J^N``.
    """
    if dictionary.variant is not Variant.INPUT_STATE:
        raise ValueError('State-form LQR needs an input-state dictionary.')
    return solve_stack_lqr(dictionary, x0, order, Q, R, kkt_tol)


def solve_dd_lqr_io(
    dictionary: DataDictionary,
    xi0: Sequence[float],
    order: int,
    Q: Optional[np.ndarray] = None,
    R: Optional[np.ndarray] = None,
    kkt_tol: float = KKT_TOL,
) -> LqrSolution:
    """
    Data-driven input-output LQR with cost ``||y||^2 + ||u^(lag)||^2``.

    Args:
        dictionary (DataDictionary): Input-output dictionary with ``L = K = lag + 1``.
        xi0 (Sequence[float]): ``Lambda_lag(col(u, y))(-1)``, interleaved ``u, y, u', y', ...``.
        order (int): Truncation order N.

    Returns:
        LqrSolution: Optimal ``g``, ``u``/``y`` coefficients and ``J^N``.
    """
    if dictionary.variant is not Variant.INPUT_OUTPUT:
        raise ValueError('Input-output LQR needs an input-output dictionary.')
    if dictionary.L != dictionary.K:
        raise ValueError(f'Input-output LQR needs L = K, got L={dictionary.L}, K={dictionary.K}.')
    return solve_stack_lqr(dictionary, xi0, order, Q, R, kkt_tol)


def solve_model_lqr_poly(
    sys: LtiSystem,
    initial: Sequence[float],
    order: int,
    variant: Variant = Variant.INPUT_STATE,
    Q: Optional[np.ndarray] = None,
    R: Optional[np.ndarray] = None,
    kkt_tol: float = KKT_TOL,
) -> LqrSolution:
    """
    Polynomially restricted LQR parameterized through the known model.

    The input-state form uses ``L = 1, K = 2``; the input-output form uses
    ``L = K = lag + 1`` with the lag of ``(A, C)``.
    """
    variant = Variant(variant)
    if variant is Variant.INPUT_STATE:
        param = model_parameterization(sys, 1, 2, variant)
    else:
        lag = structural_indices(sys).lag
        param = model_parameterization(sys, lag + 1, lag + 1, variant)
    return solve_stack_lqr(param, initial, order, Q, R, kkt_tol)


def solve_lqr(spec: LqrSpec, kkt_tol: float = KKT_TOL) -> LqrSolution:
    """Dispatch an :class:`LqrSpec` to the data-driven or model-based QP."""
    if isinstance(spec.target, DataDictionary):
        if spec.variant is Variant.INPUT_STATE:
            return solve_dd_lqr_state(spec.target, spec.initial, spec.order, spec.Q, spec.R, kkt_tol)
        return solve_dd_lqr_io(spec.target, spec.initial, spec.order, spec.Q, spec.R, kkt_tol)
    return solve_model_lqr_poly(spec.target, spec.initial, spec.order, spec.variant, spec.Q, spec.R, kkt_tol)


def analytic_example_signals(t: np.ndarray) -> tuple:
    """
    Closed-form optimum of ``x' = -x + u``, ``x(-1) = 1``, ``J = int u^2 + x^2``.

    Returns:
        tuple: ``(u*(t), x*(t))``.
    """
    t = np.asarray(t, dtype=float)
    alpha = 1.0 / (_C * ((_S - 2.0) * np.exp(-_S) - (_S + 2.0) * _E * np.exp(_S)))
    x = alpha * _C * ((_S - 2.0) * np.exp(_S * t) - (_S + 2.0) * _E * np.exp(-_S * t))
    u = -alpha * (np.exp(_S * t) - _E * np.exp(-_S * t)) / (_E - 1.0)
    return u, x


def solve_reference_analytic_example(order: int = REFERENCE_ORDER, resolution: Optional[int] = None) -> LqrSolution:
    """
    Reference solution of the scalar example, cost by Gauss-Legendre quadrature.

    Args:
        order (int): Number of Legendre coefficients kept for the trajectories.
        resolution (int, optional): Quadrature node count.

    Returns:
        LqrSolution: ``u*``, ``x*`` and ``J* ~ 0.4125``.
    """
    rule = gauss_legendre(resolution or default_node_count(order))
    u, x = analytic_example_signals(rule.nodes)
    x_series = project(x, rule, order, 1)
    return LqrSolution(
        variant=Variant.INPUT_STATE,
        order=order,
        u_series=project(u, rule, order, 1),
        x_series=x_series,
        cost=float(rule.integrate(u ** 2 + x ** 2)),
        constraint_residual=float(abs(analytic_example_signals(-1.0)[1] - 1.0)),
        solver='analytic',
    )


def solve_reference_riccati(
    sys: LtiSystem,
    Q: Optional[np.ndarray] = None,
    R: Optional[np.ndarray] = None,
    x0: Optional[Sequence[float]] = None,
    resolution: Optional[int] = None,
    order: int = REFERENCE_ORDER,
) -> LqrSolution:
    """
    Riccati reference: ``-P' = A^T P + P A - P B R^{-1} B^T P + Q`` backwards from ``P(1) = 0``,
    then the closed loop ``u = -R^{-1} B^T P x`` forwards from ``x(-1) = x0``.

    Args:
        sys (LtiSystem): Model; only ``A`` and ``B`` are used.
        Q (np.ndarray, optional): PSD state weight, identity by default.
        R (np.ndarray, optional): SPD input weight, identity by default.
        x0 (Sequence[float], optional): Initial state, ones by default.
        resolution (int, optional): Quadrature node count for the cost and projections.
        order (int): Number of Legendre coefficients kept for the trajectories.

    Returns:
        LqrSolution: Closed-loop trajectories and the quadrature cost.

    Raises:
        RiccatiBlowUp: The backward or forward integration fails.
    """
    n, m = sys.n, sys.m
    Q = _weights(Q, n, 'Q')
    R = _weights(R, m, 'R')
    try:
        linalg.cholesky(R)
    except linalg.LinAlgError:
        raise ValueError('Input weight R must be symmetric positive definite.')
    if np.linalg.eigvalsh(0.5 * (Q + Q.T))[0] < -1e-12 * max(1.0, np.linalg.norm(Q)):
        raise ValueError('State weight Q must be positive semidefinite.')
    x0 = np.ones(n) if x0 is None else np.asarray(x0, dtype=float).reshape(-1)
    if x0.shape[0] != n:
        raise DimensionMismatch(f'Initial state must have length {n}, got {x0.shape[0]}.')

    A, B = sys.A, sys.B
    gain_factor = linalg.solve(R, B.T)

    def riccati(_, p):
        P = p.reshape(n, n)
        dP = -(A.T @ P + P @ A - P @ B @ gain_factor @ P + Q)
        return (0.5 * (dP + dP.T)).ravel()

    backward = solve_ivp(riccati, (1.0, -1.0), np.zeros(n * n), method='DOP853', dense_output=True, rtol=1e-12, atol=1e-14)
    if not backward.success or not np.all(np.isfinite(backward.y)):
        raise RiccatiBlowUp(f'Riccati integration failed: {backward.message}')

    def gain(t):
        return gain_factor @ backward.sol(t).reshape(n, n)

    rule = gauss_legendre(resolution or default_node_count(order))
    forward = solve_ivp(
        lambda t, x: (A - B @ gain(t)) @ x,
        (-1.0, 1.0),
        x0,
        method='DOP853',
        t_eval=rule.nodes,
        rtol=1e-12,
        atol=1e-14,
    )
    if not forward.success or not np.all(np.isfinite(forward.y)):
        raise RiccatiBlowUp(f'Closed-loop integration failed: {forward.message}')

    x = forward.y.T
    u = np.array([-gain(t) @ xq for t, xq in zip(rule.nodes, x)])
    cost = float(rule.integrate(np.einsum('qi,ij,qj->q', x, Q, x) + np.einsum('qi,ij,qj->q', u, R, u)))
    logger.debug('Riccati reference: J=%.16e, x0^T P(-1) x0=%.16e.', cost, x0 @ backward.sol(-1.0).reshape(n, n) @ x0)

    x_series = project(x, rule, order, n)
    return LqrSolution(
        variant=Variant.INPUT_STATE,
        order=order,
        u_series=project(u, rule, order, m),
        x_series=x_series,
        cost=cost,
        constraint_residual=float(np.linalg.norm(series_boundary_value(x_series, -1) - x0)),
        solver='riccati',
    )


def solve_reference_riccati_io(
    sys: LtiSystem,
    xi0: Sequence[float],
    Q: Optional[np.ndarray] = None,
    R: Optional[np.ndarray] = None,
    resolution: Optional[int] = None,
    order: int = REFERENCE_ORDER,
) -> LqrSolution:
    """
    Riccati reference for the input-output cost ``|y|_Q^2 + |u^(lag)|_R^2``, solved on the
    auxiliary system with state ``xi = Lambda_lag(col(u, y))`` and input ``u^(lag)``.
    """
    aux = auxiliary_system(sys)
    m, p = sys.m, sys.p
    Qy = _weights(Q, p, 'Q')
    select_y = np.zeros((p, aux.A.shape[0]))
    select_y[:, m:m + p] = np.eye(p)
    solution = solve_reference_riccati(aux.as_system(), select_y.T @ Qy @ select_y, R, xi0, resolution, order)
    xi = solution.x_series
    return replace(
        solution,
        variant=Variant.INPUT_OUTPUT,
        u_series=LegendreSeries(xi.coeffs[:, :m]),
        y_series=LegendreSeries(xi.coeffs[:, m:m + p]),
        lag=aux.lag,
    )


def trajectory_cost(
    u_series: LegendreSeries,
    second_series: LegendreSeries,
    Q: Optional[np.ndarray] = None,
    R: Optional[np.ndarray] = None,
    lag: int = 0,
) -> float:
    """
    ``int |y|_Q^2 + |u^(lag)|_R^2`` of Legendre series, exact for the truncated signals.
    """
    Q = _weights(Q, second_series.dim, 'Q')
    R = _weights(R, u_series.dim, 'R')
    for _ in range(lag):
        u_series = diff_series(u_series)
    total = 0.0
    for series, weight in ((second_series, Q), (u_series, R)):
        norms = legendre_norms_sq(series.order)
        total += float(np.einsum('i,ij,jk,ik->', norms, series.coeffs, weight, series.coeffs))
    return total


def trajectory_gap(a: LqrSolution, b: LqrSolution) -> float:
    """L2 distance of ``col(u, x)`` (or ``col(u, y)``) between two solutions."""
    gaps = []
    for left, right in ((a.u_series, b.u_series), (a.second_series, b.second_series)):
        order = max(left.order, right.order)
        gaps.append(series_norm(left.pad(order) - right.pad(order)))
    return float(np.hypot(*gaps))


def difference_cost(a: LqrSolution, b: LqrSolution, Q: Optional[np.ndarray] = None, R: Optional[np.ndarray] = None) -> float:
    """``J(w_a - w_b)`` for two solutions of the same problem."""
    order = max(a.u_series.order, b.u_series.order, a.second_series.order, b.second_series.order)
    du = a.u_series.pad(order) - b.u_series.pad(order)
    ds = a.second_series.pad(order) - b.second_series.pad(order)
    return trajectory_cost(du, ds, Q, R, a.lag)


def optimality_gap_sweep(spec: LqrSpec, orders: Iterable[int], reference: LqrSolution, kkt_tol: float = KKT_TOL) -> tuple:
    """
    Solve ``spec`` for every truncation order and compare with a reference.

    Args:
        spec (LqrSpec): Problem template; its ``order`` is replaced per row.
        orders (Iterable[int]): Truncation orders.
        reference (LqrSolution): Reference optimum (analytic or Riccati).
        kkt_tol (float): KKT residual tolerance.

    Returns:
        tuple: List of :class:`GapRow`, one per order, and the list of solutions.
    """
    rows, solutions = [], []
    for order in orders:
        solution = solve_lqr(replace(spec, order=order), kkt_tol)
        row = GapRow(
            order=order,
            cost=solution.cost,
            gap=solution.cost - reference.cost,
            trajectory_gap=trajectory_gap(solution, reference),
        )
        logger.info('N=%d: J=%.6e, gap=%.3e.', order, row.cost, row.gap)
        rows.append(row)
        solutions.append(solution)
    return rows, solutions
