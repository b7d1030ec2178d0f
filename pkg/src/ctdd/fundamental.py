"""
Data dictionaries of the continuous-time fundamental lemma: trajectory membership,
data-driven simulation over Legendre coefficients and Gramian-based identification.

A dictionary stores the joint Gramian ``Gamma`` of one informative experiment and
the orthonormal basis ``U_1`` of its image. Every trajectory of the system satisfies
``Lambda(w) = Gamma g = U_1 h`` pointwise, so all solves are carried out in the
reduced coordinates ``h``; ``g = U_1 S_1^{-1} h`` is the minimum-norm preimage.
"""
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np
from scipy import linalg

from ctdd.excitation import (
    PE_TOL,
    Gramian,
    PeCertificate,
    ReducedBasis,
    block_name,
    check_pe,
    gramian_joint,
    reduced_basis,
)
from ctdd.exceptions import (
    DimensionMismatch,
    InsufficientDerivativeOrder,
    NotPersistentlyExciting,
    RankDeficient,
    RankMismatch,
)
from ctdd.legendre import LegendreSeries, boundary_signs, diff_series, differentiation_matrix, series_norm
from ctdd.lti import RANK_REL_TOL, LtiSystem, SampledTrajectory, numerical_rank

logger = logging.getLogger(__name__)


class Variant(str, Enum):
    INPUT_STATE = 'input-state'
    INPUT_OUTPUT = 'input-output'


class StackParameterization(ABC):
    """
    Per-coefficient linear parameterization of a derivative stack.

    Each Legendre coefficient of ``Lambda(w)`` is ``M h_i`` for a latent ``h_i``;
    subclasses provide the rows of ``M`` per block.
    """
    variant: Variant

    @property
    @abstractmethod
    def L(self) -> int:
        ...

    @property
    @abstractmethod
    def K(self) -> int:
        ...

    @property
    @abstractmethod
    def rank(self) -> int:
        """Latent dimension."""

    @property
    @abstractmethod
    def partition(self) -> tuple:
        ...

    @abstractmethod
    def reduced_block(self, name: str) -> np.ndarray:
        """Rows of the parameterization belonging to block ``name``."""

    @property
    def signal(self) -> str:
        """Name of the second signal, ``x`` or ``y``."""
        return 'x' if self.variant is Variant.INPUT_STATE else 'y'

    @property
    def m(self) -> int:
        return dict(self.partition)[block_name('u', 0)]

    @property
    def q(self) -> int:
        """Dimension of the second signal."""
        return dict(self.partition)[block_name(self.signal, 0)]

    @property
    def lag(self) -> int:
        """Derivative order of the initial stack; 1 for state data."""
        return 1 if self.variant is Variant.INPUT_STATE else self.K - 1

    def chains(self) -> list:
        """``(signal, order)`` pairs of derivative chains."""
        return [('u', self.L), (self.signal, self.K)]

    def initial_blocks(self) -> list:
        """
        Blocks fixed by the initial condition: ``x^(0)`` for state data,
        ``u^(k), y^(k)`` for ``k < K - 1`` (interleaved) for input-output data.
        """
        if self.variant is Variant.INPUT_STATE:
            return [block_name('x', 0)]
        blocks = []
        for k in range(self.K - 1):
            blocks += [block_name('u', k), block_name('y', k)]
        return blocks

    def initial_size(self) -> int:
        sizes = dict(self.partition)
        return sum(sizes[name] for name in self.initial_blocks())

    def coefficient_operator(self, name: str, order: int) -> np.ndarray:
        """Map from stacked ``h_0..h_{N-1}`` to stacked coefficients of block ``name``."""
        return np.kron(np.eye(order), self.reduced_block(name))

    def consistency_operator(self, order: int) -> np.ndarray:
        """
        Rows ``D(M_{c^(k-1)} h) - M_{c^(k)} h = 0`` for every chain ``c`` and
        ``k = 1..order_c - 1``. The zero last row of ``D`` is kept, so the top
        coefficient of every derivative vanishes.
        """
        D = differentiation_matrix(order)
        rows = []
        for signal, chain_order in self.chains():
            for k in range(1, chain_order):
                lower = self.reduced_block(block_name(signal, k - 1))
                upper = self.reduced_block(block_name(signal, k))
                rows.append(np.kron(D, lower) - np.kron(np.eye(order), upper))
        if not rows:
            return np.zeros((0, order * self.rank))
        return np.vstack(rows)

    def initial_operator(self, order: int) -> np.ndarray:
        """Rows ``sum_i (-1)^i M_init h_i`` evaluating the initial stack at ``t = -1``."""
        stacked = np.vstack([self.reduced_block(name) for name in self.initial_blocks()])
        return np.kron(boundary_signs(order, -1)[None, :], stacked)

    def preimage(self, h: np.ndarray) -> np.ndarray:
        return np.atleast_2d(h)

    def series(self, name: str, h: np.ndarray) -> LegendreSeries:
        """Coefficient series of block ``name`` for latent coefficients ``h`` of shape ``(N, r)``."""
        return LegendreSeries(np.atleast_2d(h) @ self.reduced_block(name).T)


@dataclass(frozen=True, eq=False)
class DataDictionary(StackParameterization):
    """
    Joint data Gramian with its block partition and reduced image basis.

    Args:
        gramian (Gramian): ``Gamma_{L,K}`` of the informative trajectory.
        basis (ReducedBasis): Orthonormal basis of ``im Gamma``.
        variant (Variant): Input-state or input-output data.
        mcmillan (int): Declared or inferred McMillan degree.
        certificate (PeCertificate, optional): Excitation certificate of order ``L + mcmillan``.
    """
    gramian: Gramian
    basis: ReducedBasis
    variant: Variant
    mcmillan: int
    certificate: Optional[PeCertificate] = None

    @property
    def rank(self) -> int:
        return self.basis.rank

    @property
    def L(self) -> int:
        return self.gramian.L

    @property
    def K(self) -> int:
        return self.gramian.K

    @property
    def partition(self) -> tuple:
        return self.gramian.partition

    @property
    def blocks(self) -> dict:
        """Map from block name to the matching rows of the Gramian."""
        return {name: self.gramian.matrix[rows] for name, rows in self.gramian.slices().items()}

    def block(self, name: str) -> np.ndarray:
        return self.gramian.block(name)

    def reduced_block(self, name: str) -> np.ndarray:
        """Rows of ``U_1`` belonging to block ``name``."""
        return self.basis.basis[self.gramian.slices()[name]]

    def preimage(self, h: np.ndarray) -> np.ndarray:
        """Minimum-norm ``g`` with ``Gamma g = U_1 h`` for each row of ``h``."""
        return (np.atleast_2d(h) / self.basis.kept_values) @ self.basis.basis.T


@dataclass(frozen=True, eq=False)
class IdentifiedModel:
    """
    Model identified from a state dictionary.

    Args:
        A_tilde (np.ndarray): Identified state matrix.
        B_tilde (np.ndarray): Identified input matrix.
        residual (float): ``||Gamma_x1 - [B A][Gamma_u; Gamma_x]||_F``.
    """
    A_tilde: np.ndarray
    B_tilde: np.ndarray
    residual: float

    @property
    def R0(self) -> np.ndarray:
        """Constant coefficient of ``R(s) = [-B, sI - A]``."""
        return np.hstack([-self.B_tilde, -self.A_tilde])

    @property
    def R1(self) -> np.ndarray:
        """First-order coefficient of ``R(s)``."""
        n, m = self.B_tilde.shape
        return np.hstack([np.zeros((n, m)), np.eye(n)])

    @property
    def kernel_rep(self) -> tuple:
        return self.R0, self.R1

    def to_system(self) -> LtiSystem:
        return LtiSystem.input_state(self.A_tilde, self.B_tilde)

    def as_dict(self) -> dict:
        return {
            'A_tilde': self.A_tilde.tolist(),
            'B_tilde': self.B_tilde.tolist(),
            'residual': self.residual,
            'kernel_rep': {'R0': self.R0.tolist(), 'R1': self.R1.tolist()},
        }


@dataclass(frozen=True, eq=False)
class DdSimulation:
    """
    Data-driven response over Legendre coefficients.

    Args:
        output (LegendreSeries): ``x`` (state data) or ``y`` (input-output data) coefficients.
        g_hat (np.ndarray): Minimum-norm ``g_i`` per coefficient, shape ``(N, Lm + Kq)``.
        residual (float): Least-squares residual of the linear system.
    """
    output: LegendreSeries
    g_hat: np.ndarray
    residual: float


def build_dictionary(
    traj: SampledTrajectory,
    L: int,
    K: int,
    variant: Variant = Variant.INPUT_STATE,
    mcmillan: Optional[int] = None,
    pe_tol: float = PE_TOL,
    rank_rel_tol: float = RANK_REL_TOL,
    force: bool = False,
) -> DataDictionary:
    """
    Build a data dictionary from one informative experiment.

    The input must be persistently exciting of order ``L + n``; the trajectory
    therefore has to carry ``L + n - 1`` input derivatives even though only ``L``
    of them enter the Gramian.

    Args:
        traj (SampledTrajectory): Informative trajectory.
        L (int): Input stacking order.
        K (int): State/output stacking order (``K <= L + 1``).
        variant (Variant): Input-state or input-output dictionary.
        mcmillan (int, optional): Declared McMillan degree; enables the rank diagnostic.
        pe_tol (float): Excitation threshold.
        rank_rel_tol (float): Relative singular value threshold for the image basis.
        force (bool): Build even if the excitation certificate fails.

    Returns:
        DataDictionary: Dictionary with Gramian, basis and certificate.

    Raises:
        NotPersistentlyExciting: Certificate fails and ``force`` is not set.
        RankMismatch: ``rank != Lm + mcmillan`` for a declared ``mcmillan``.
    """
    variant = Variant(variant)
    if K > L + 1:
        raise ValueError(f'Stacking orders need K <= L + 1, got L={L}, K={K}.')
    if variant is Variant.INPUT_OUTPUT and K == L + 1:
        logger.warning('K = L + 1 with input-output data is only valid without feedthrough.')

    gramian = gramian_joint(traj, L, K, use_state=variant is Variant.INPUT_STATE)
    basis = reduced_basis(gramian, rank_rel_tol)
    m = traj.input.dim
    if mcmillan is not None:
        n = mcmillan
    elif variant is Variant.INPUT_STATE:
        n = traj.state.dim
    else:
        n = max(basis.rank - L * m, 0)

    order = L + n
    if traj.input.order < order:
        if not force:
            raise InsufficientDerivativeOrder(
                f'Excitation check of order {order} needs {order - 1} input derivatives, '
                f'trajectory carries {traj.input.order - 1}.'
            )
        certificate = None
        logger.warning('Excitation of order %d not checked, too few input derivatives.', order)
    else:
        certificate = check_pe(traj.input, order, pe_tol)
        if not certificate.is_pe:
            message = (
                f'Input is not persistently exciting of order {order}: '
                f'min eigenvalue {certificate.min_eigenvalue:.3e} <= {pe_tol:.1e}.'
            )
            if not force:
                raise NotPersistentlyExciting(message, certificate)
            logger.warning('%s Building anyway.', message)

    if mcmillan is not None and basis.rank != L * m + mcmillan:
        raise RankMismatch(f'Dictionary rank {basis.rank} differs from Lm + n = {L * m + mcmillan}.')

    logger.info('Built %s dictionary: L=%d, K=%d, rank=%d.', variant.value, L, K, basis.rank)
    return DataDictionary(gramian=gramian, basis=basis, variant=variant, mcmillan=n, certificate=certificate)


def _candidate_stack(dictionary: DataDictionary, candidate: SampledTrajectory) -> np.ndarray:
    second = candidate.state if dictionary.variant is Variant.INPUT_STATE else candidate.output
    if second is None:
        raise InsufficientDerivativeOrder('Candidate carries no output samples.')
    stack = np.hstack([candidate.input.stack(dictionary.L), second.stack(dictionary.K)])
    if stack.shape[1] != dictionary.gramian.size:
        raise DimensionMismatch(
            f'Candidate stack has {stack.shape[1]} entries, dictionary expects {dictionary.gramian.size}.'
        )
    return stack


def membership_residual(dictionary: DataDictionary, candidate: SampledTrajectory) -> float:
    """
    Distance of a candidate's derivative stack from the dictionary image.

    ``sqrt(int ||(I - U_1 U_1^T) Lambda(t)||^2 dt)``; zero (up to rounding) exactly
    when the candidate is a trajectory of the system.

    Args:
        dictionary (DataDictionary): Data dictionary.
        candidate (SampledTrajectory): Candidate with the dictionary's stacking orders.

    Returns:
        float: Integrated residual.
    """
    stack = _candidate_stack(dictionary, candidate)
    U1 = dictionary.basis.basis
    outside = stack - (stack @ U1) @ U1.T
    return float(np.sqrt(candidate.rule.integrate(np.sum(outside ** 2, axis=1))))


def identify(dictionary: DataDictionary, rank_rel_tol: float = RANK_REL_TOL) -> IdentifiedModel:
    """
    Identify ``[B A] = Gamma_x1 [Gamma_u; Gamma_x]^+`` from a state dictionary.

    Args:
        dictionary (DataDictionary): Input-state dictionary with blocks ``u^(0)``, ``x^(0)``, ``x^(1)``.
        rank_rel_tol (float): Threshold for the regressor rank check.

    Returns:
        IdentifiedModel: ``A_tilde``, ``B_tilde`` and the fit residual.

    Raises:
        RankDeficient: ``[Gamma_u; Gamma_x]`` does not have rank ``m + n``.
    """
    if dictionary.variant is not Variant.INPUT_STATE or dictionary.K < 2:
        raise ValueError('Identification needs an input-state dictionary with K >= 2.')
    m, n = dictionary.m, dictionary.q
    regressor = np.vstack([dictionary.block(block_name('u', 0)), dictionary.block(block_name('x', 0))])
    target = dictionary.block(block_name('x', 1))
    rank = numerical_rank(regressor, rank_rel_tol)
    if rank != m + n:
        raise RankDeficient(f'Regressor [Gamma_u; Gamma_x] has rank {rank}, expected {m + n}.')

    solution, _, _, _ = linalg.lstsq(regressor.T, target.T)
    theta = solution.T
    residual = float(np.linalg.norm(target - theta @ regressor))
    model = IdentifiedModel(A_tilde=theta[:, m:], B_tilde=theta[:, :m], residual=residual)
    logger.info('Identified model with residual %.3e.', residual)
    return model


def kernel_residual(model: IdentifiedModel, u_series: LegendreSeries, x_series: LegendreSeries) -> float:
    """
    ``||R(D) Pi col(u, x)||`` for the identified kernel representation ``R(s) = [-B, sI - A]``.

    Zero for polynomial trajectories of the identified model.
    """
    order = max(u_series.order, x_series.order)
    u_series, x_series = u_series.pad(order), x_series.pad(order)
    residual = diff_series(x_series) + u_series.apply(-model.B_tilde) + x_series.apply(-model.A_tilde)
    return series_norm(residual)


def dd_simulate(
    dictionary: DataDictionary,
    u: LegendreSeries,
    initial: Sequence[float],
    order: Optional[int] = None,
    tol: float = 1e-8,
) -> DdSimulation:
    """
    Data-driven response to a polynomial input over truncated Legendre coefficients.

    Solves, in least squares, for ``g_0..g_{N-1}`` with ``Gamma_u g_i = u_i``, the
    derivative-consistency rows of every chain and the initial-condition rows.

    Args:
        dictionary (DataDictionary): Data dictionary.
        u (LegendreSeries): Input coefficients, at most ``N`` of them.
        initial (Sequence[float]): ``x(-1)`` for state data, ``Lambda_lag(col(u, y))(-1)`` otherwise.
        order (int, optional): Truncation order N, defaults to ``u.order``.
        tol (float): Residual above ``tol * (1 + ||rhs||)`` is reported as inconsistent.

    Returns:
        DdSimulation: Output coefficients, ``g`` and the residual.
    """
    order = order or u.order
    if u.dim != dictionary.m:
        raise DimensionMismatch(f'Input has dimension {u.dim}, dictionary expects {dictionary.m}.')
    u = u.pad(order)
    initial = np.asarray(initial, dtype=float).reshape(-1)

    matching = dictionary.coefficient_operator(block_name('u', 0), order)
    consistency = dictionary.consistency_operator(order)
    start = dictionary.initial_operator(order)
    if initial.shape[0] != start.shape[0]:
        raise DimensionMismatch(f'Initial stack must have length {start.shape[0]}, got {initial.shape[0]}.')

    system = np.vstack([matching, consistency, start])
    rhs = np.concatenate([u.coeffs.reshape(-1), np.zeros(consistency.shape[0]), initial])
    z, _, _, _ = linalg.lstsq(system, rhs)
    residual = float(np.linalg.norm(system @ z - rhs))
    if residual > tol * (1.0 + np.linalg.norm(rhs)):
        logger.warning('Data-driven simulation is inconsistent at N=%d: residual %.3e.', order, residual)

    h = z.reshape(order, dictionary.rank)
    return DdSimulation(
        output=dictionary.series(block_name(dictionary.signal, 0), h),
        g_hat=dictionary.preimage(h),
        residual=residual,
    )
