"""
Derivative-stacked Gramians, persistency-of-excitation certificates and reduced
SVD bases of their images.
"""
import logging
from dataclasses import dataclass
from typing import Union

import numpy as np

from ctdd.exceptions import DimensionMismatch, InsufficientDerivativeOrder
from ctdd.legendre import QuadratureRule
from ctdd.lti import RANK_REL_TOL, SampledSignal, SampledTrajectory

logger = logging.getLogger(__name__)

PE_TOL = 1e-9


def block_name(signal: str, k: int) -> str:
    return f'{signal}^({k})'


@dataclass(frozen=True, eq=False)
class Gramian:
    """
    Symmetric PSD Gramian of a derivative stack with named row blocks.

    Args:
        matrix (np.ndarray): The Gramian.
        partition (tuple): Ordered ``(name, size)`` row blocks, e.g. ``('u^(0)', m)``.
        L (int): Input (or single-signal) stacking order.
        K (int): Output/state stacking order, 0 for a single signal.
    """
    matrix: np.ndarray
    partition: tuple
    L: int
    K: int = 0

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=float)
        if sum(size for _, size in self.partition) != matrix.shape[0]:
            raise DimensionMismatch(f'Partition {self.partition} does not cover a {matrix.shape} matrix.')
        matrix.flags.writeable = False
        object.__setattr__(self, 'matrix', matrix)
        object.__setattr__(self, 'partition', tuple(self.partition))

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def slices(self) -> dict:
        """Map from block name to its row slice."""
        slices, start = {}, 0
        for name, size in self.partition:
            slices[name] = slice(start, start + size)
            start += size
        return slices

    def block(self, name: str) -> np.ndarray:
        """Rows of the Gramian belonging to block ``name``."""
        try:
            return self.matrix[self.slices()[name]]
        except KeyError:
            raise KeyError(f'Gramian has no block {name!r}, available: {[n for n, _ in self.partition]}.')

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)


@dataclass(frozen=True)
class PeCertificate:
    order: int
    min_eigenvalue: float
    is_pe: bool
    tolerance: float

    def as_dict(self) -> dict:
        return {
            'order': self.order,
            'min_eigenvalue': self.min_eigenvalue,
            'is_pe': self.is_pe,
            'tolerance': self.tolerance,
        }


@dataclass(frozen=True, eq=False)
class ReducedBasis:
    """
    Orthonormal basis ``U_1`` of the image of a Gramian.

    Args:
        basis (np.ndarray): Columns spanning the image.
        singular_values (np.ndarray): All singular values, descending.
        rank (int): Number of retained columns.
    """
    basis: np.ndarray
    singular_values: np.ndarray
    rank: int

    @property
    def kept_values(self) -> np.ndarray:
        return self.singular_values[:self.rank]


def _weighted_outer(stack: np.ndarray, rule: QuadratureRule) -> np.ndarray:
    matrix = (stack * rule.weights[:, None]).T @ stack
    return 0.5 * (matrix + matrix.T)


def signal_partition(name: str, dim: int, order: int) -> list:
    return [(block_name(name, k), dim) for k in range(order)]


def gramian_single(signal: SampledSignal, L: int, name: str = 'f') -> Gramian:
    """
    ``Gamma_L(f) = int Lambda_L(f) Lambda_L(f)^T dt`` by quadrature on the signal's rule.

    Args:
        signal (SampledSignal): Sampled signal with derivatives up to ``L - 1``.
        L (int): Stacking order.
        name (str): Block name prefix.

    Returns:
        Gramian: ``L d`` square Gramian.
    """
    stack = signal.stack(L)
    return Gramian(
        matrix=_weighted_outer(stack, signal.rule),
        partition=signal_partition(name, signal.dim, L),
        L=L,
    )


def gramian_joint(traj: SampledTrajectory, L: int, K: int, use_state: bool = False) -> Gramian:
    """
    Joint Gramian ``Gamma_{L,K}`` of ``col(Lambda_L(u), Lambda_K(y))`` (or of the state).

    Args:
        traj (SampledTrajectory): Sampled trajectory.
        L (int): Input stacking order.
        K (int): Output or state stacking order.
        use_state (bool): Stack the state instead of the output.

    Returns:
        Gramian: Joint Gramian with blocks ``u^(j)`` followed by ``y^(k)`` (or ``x^(k)``).

    Raises:
        InsufficientDerivativeOrder: The trajectory lacks the requested orders.
    """
    second = traj.state if use_state else traj.output
    if second is None:
        raise InsufficientDerivativeOrder('Trajectory carries no output samples.')
    name = 'x' if use_state else 'y'
    stack = np.hstack([traj.input.stack(L), second.stack(K)])
    gramian = Gramian(
        matrix=_weighted_outer(stack, traj.rule),
        partition=signal_partition('u', traj.input.dim, L) + signal_partition(name, second.dim, K),
        L=L,
        K=K,
    )
    logger.debug('Joint Gramian (L=%d, K=%d, %s) of size %d.', L, K, name, gramian.size)
    return gramian


def check_pe(signal: SampledSignal, L: int, tol: float = PE_TOL) -> PeCertificate:
    """
    Certify persistency of excitation of order ``L``: ``Gamma_L(f)`` positive definite.

    Args:
        signal (SampledSignal): Signal with derivatives up to ``L - 1``.
        L (int): Order.
        tol (float): Absolute threshold on the smallest eigenvalue.

    Returns:
        PeCertificate: Smallest eigenvalue and verdict.
    """
    min_eigenvalue = float(gramian_single(signal, L).eigenvalues()[0])
    certificate = PeCertificate(order=L, min_eigenvalue=min_eigenvalue, is_pe=min_eigenvalue > tol, tolerance=tol)
    logger.debug('PE certificate: %s', certificate)
    return certificate


def reduced_basis(gramian: Union[Gramian, np.ndarray], rel_tol: float = RANK_REL_TOL) -> ReducedBasis:
    """
    Reduced SVD ``G = U_1 S_1 V_1^T``; columns of ``U_1`` span ``im G``.

    Args:
        gramian (Gramian or np.ndarray): Matrix to factor.
        rel_tol (float): Keep singular values above ``rel_tol * sigma_max``.

    Returns:
        ReducedBasis: Basis, singular values and rank.
    """
    matrix = gramian.matrix if isinstance(gramian, Gramian) else np.atleast_2d(np.asarray(gramian, dtype=float))
    U, sigma, _ = np.linalg.svd(matrix)
    rank = int(np.sum(sigma > rel_tol * sigma[0])) if sigma.size and sigma[0] > 0.0 else 0
    return ReducedBasis(basis=U[:, :rank], singular_values=sigma, rank=rank)
