"""
Gram matrices, centering, the label matrix Gamma and the Phi matrices
used by the spectral layer solver.

HSIC is used without its 1/(n-1)^2 constant throughout: every consumer
either normalizes it away or takes an argmax.
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
from scipy.spatial.distance import pdist, squareform

from kdn.errors import MissingW, NonFiniteInput, SizeMismatch
from kdn.utils.csv_parser import write_matrix_csv

logger = logging.getLogger(__name__)

KERNEL_KINDS = ('linear', 'squared', 'polynomial', 'gaussian', 'multiquadratic')
GAMMA_MODES = ('centered', 'signed')

# Entries within this of zero count as having no sign
SIGN_TOL = 1e-12


@dataclass(frozen=True)
class KernelDescriptor:
    """One of the five kernels with its parameter (p or sigma)."""
    kind: str
    p: Optional[int] = None
    sigma: Optional[float] = None

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ValueError(f"Unknown kernel '{self.kind}', expected one of {KERNEL_KINDS}")
        if self.kind == 'polynomial' and (self.p is None or self.p < 2):
            raise ValueError(f"polynomial kernel needs p >= 2, got {self.p}")
        if self.kind in ('gaussian', 'multiquadratic') and not (self.sigma and self.sigma > 0):
            raise ValueError(f"{self.kind} kernel needs sigma > 0, got {self.sigma}")

    @classmethod
    def linear(cls) -> 'KernelDescriptor':
        return cls('linear')

    @classmethod
    def squared(cls) -> 'KernelDescriptor':
        return cls('squared')

    @classmethod
    def polynomial(cls, p: int) -> 'KernelDescriptor':
        return cls('polynomial', p=p)

    @classmethod
    def gaussian(cls, sigma: float) -> 'KernelDescriptor':
        return cls('gaussian', sigma=float(sigma))

    @classmethod
    def multiquadratic(cls, sigma: float) -> 'KernelDescriptor':
        return cls('multiquadratic', sigma=float(sigma))

    @property
    def needs_w(self) -> bool:
        """Whether the iterated Phi depends on the current weights."""
        return self.kind in ('polynomial', 'gaussian', 'multiquadratic')


@dataclass(frozen=True)
class GramMatrix:
    values: np.ndarray
    descriptor: KernelDescriptor

    @property
    def n(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class GammaMatrix:
    """Label matrix with the class of every row."""
    values: np.ndarray
    class_of: np.ndarray
    mode: str = 'centered'

    @property
    def n(self) -> int:
        return self.values.shape[0]


@dataclass
class SignCheckReport:
    holds: bool
    violating_pairs: List[Tuple[int, int]] = field(default_factory=list)
    note: str = ''


MatrixLike = Union[GramMatrix, GammaMatrix, np.ndarray]


def as_array(matrix: MatrixLike) -> np.ndarray:
    """Raw float64 values of a Gram/Gamma wrapper or plain array."""
    if isinstance(matrix, (GramMatrix, GammaMatrix)):
        return matrix.values
    return np.asarray(matrix, dtype=np.float64)


def _symmetrize(values: np.ndarray) -> np.ndarray:
    return 0.5 * (values + values.T)


def _check_finite(Z: np.ndarray, what: str) -> np.ndarray:
    Z = np.asarray(Z, dtype=np.float64)
    if not np.all(np.isfinite(Z)):
        raise NonFiniteInput(f"{what} contains NaN or infinite entries")
    return Z


def _as_rows(Z: np.ndarray) -> np.ndarray:
    Z = np.asarray(Z, dtype=np.float64)
    return Z.reshape(-1, 1) if Z.ndim == 1 else Z


# ============== Gram matrices ==============

def squared_distances(Z: np.ndarray) -> np.ndarray:
    """n x n matrix of squared Euclidean distances between rows."""
    Z = _as_rows(Z)
    if Z.shape[0] < 2:
        return np.zeros((Z.shape[0], Z.shape[0]))
    return squareform(pdist(Z, 'sqeuclidean'))


def median_pairwise_distance(Z: np.ndarray) -> float:
    """Median Euclidean distance over distinct row pairs (1.0 when all rows coincide)."""
    Z = _as_rows(Z)
    if Z.shape[0] < 2:
        return 1.0
    median = float(np.median(pdist(Z, 'euclidean')))
    return median if median > 0 else 1.0


def gaussian_gram(Z: np.ndarray, sigma: float) -> GramMatrix:
    """
    Gaussian kernel matrix exp(-||z_i - z_j||^2 / (2 sigma^2)).

    Args:
        Z: n x q rows
        sigma: Bandwidth (> 0)

    Returns:
        GramMatrix with entries in [0, 1] and a unit diagonal
    """
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    Z = _check_finite(_as_rows(Z), 'Z')

    values = np.exp(-squared_distances(Z) / (2.0 * sigma * sigma))
    values = _symmetrize(values)
    np.fill_diagonal(values, 1.0)
    return GramMatrix(values, KernelDescriptor.gaussian(sigma))


def gram(Z: np.ndarray, descriptor: KernelDescriptor) -> GramMatrix:
    """Kernel matrix of the rows of Z for any of the five kernels."""
    Z = _check_finite(_as_rows(Z), 'Z')
    kind = descriptor.kind

    if kind == 'gaussian':
        return gaussian_gram(Z, descriptor.sigma)
    if kind == 'linear':
        values = Z @ Z.T
    elif kind == 'polynomial':
        values = (Z @ Z.T) ** descriptor.p
    elif kind == 'squared':
        values = squared_distances(Z)
    else:
        values = np.sqrt(squared_distances(Z) + descriptor.sigma ** 2)

    return GramMatrix(_symmetrize(values), descriptor)


def projected_gram(R: np.ndarray, W: np.ndarray, sigma: float) -> GramMatrix:
    """Gaussian kernel of the projected rows R W."""
    return gaussian_gram(_as_rows(R) @ np.asarray(W, dtype=np.float64), sigma)


def label_gram(labels: np.ndarray, n_classes: Optional[int] = None) -> GramMatrix:
    """K_Y = Y Y^T for one-hot labels: 1 for same-class pairs, 0 otherwise."""
    labels = np.asarray(labels, dtype=np.int64)
    width = n_classes or (int(labels.max()) + 1 if labels.size else 0)
    Y = np.eye(width)[labels]
    return GramMatrix(Y @ Y.T, KernelDescriptor.linear())


def center_gram(K: MatrixLike) -> np.ndarray:
    """
    H K H with H = I - (1/n) 11^T.

    Args:
        K: Square symmetric matrix

    Returns:
        Centered matrix whose rows and columns sum to 0
    """
    values = as_array(K)
    n = values.shape[0]
    if values.shape != (n, n):
        raise SizeMismatch(f"expected a square matrix, got shape {values.shape}")

    row_means = values.mean(axis=1, keepdims=True)
    col_means = values.mean(axis=0, keepdims=True)
    return _symmetrize(values - row_means - col_means + values.mean())


def hsic_value(K_A: MatrixLike, K_B: MatrixLike) -> float:
    """Unnormalized empirical HSIC, Tr(H K_A H K_B)."""
    a, b = as_array(K_A), as_array(K_B)
    if a.shape != b.shape:
        raise SizeMismatch(f"Gram sizes differ: {a.shape} vs {b.shape}")
    # Tr(HAH B) = <HAH, B> for symmetric B
    return float(np.sum(center_gram(a) * b))


# ============== Gamma ==============

def build_gamma(labels: np.ndarray, mode: str = 'centered') -> GammaMatrix:
    """
    Build the label matrix Gamma.

    Args:
        labels: Integer class per sample
        mode: 'centered' for H K_Y H, 'signed' for +1 same class / -1 otherwise

    Returns:
        GammaMatrix
    """
    labels = np.asarray(labels, dtype=np.int64)
    same = labels[:, None] == labels[None, :]

    if mode == 'centered':
        values = center_gram(label_gram(labels))
    elif mode == 'signed':
        values = np.where(same, 1.0, -1.0)
    else:
        raise ValueError(f"Unknown gamma mode '{mode}', expected one of {GAMMA_MODES}")

    return GammaMatrix(values, labels.copy(), mode)


def gamma_sign_check(gamma: GammaMatrix) -> SignCheckReport:
    """
    Check that Gamma is positive on same-class pairs and negative across classes.

    Violations are listed as (i, j) with i < j; nothing is raised.
    """
    values = gamma.values
    class_of = np.asarray(gamma.class_of)

    if np.unique(class_of).size < 2:
        note = 'single class: Gamma carries no sign information'
        if gamma.mode == 'centered':
            note = 'single class: Gamma is identically 0'
        return SignCheckReport(holds=True, note=note)

    same = class_of[:, None] == class_of[None, :]
    bad = np.where(same, values <= SIGN_TOL, values >= -SIGN_TOL)
    np.fill_diagonal(bad, False)

    rows, cols = np.nonzero(np.triu(bad, k=1))
    pairs = [(int(i), int(j)) for i, j in zip(rows, cols)]

    note = ''
    if pairs:
        counts = np.bincount(class_of)
        note = f"{len(pairs)} pairs violate the sign pattern (class sizes {counts.tolist()})"
        logger.debug(note)
    return SignCheckReport(holds=not pairs, violating_pairs=pairs, note=note)


# ============== Phi matrices ==============

def laplacian(psi: np.ndarray) -> np.ndarray:
    """D_psi - psi with D_psi = Diag(psi 1)."""
    psi = np.asarray(psi, dtype=np.float64)
    return np.diag(psi.sum(axis=1)) - psi


def laplacian_quadratic(X: np.ndarray, psi: np.ndarray) -> np.ndarray:
    """
    2 X^T (D_psi - psi) X, equal to sum_ij psi_ij (x_i - x_j)(x_i - x_j)^T.

    Args:
        X: n x d matrix
        psi: Symmetric n x n weights

    Returns:
        d x d symmetric matrix
    """
    X = _as_rows(X)
    psi = np.asarray(psi, dtype=np.float64)
    if psi.shape != (X.shape[0], X.shape[0]):
        raise SizeMismatch(f"psi must be {X.shape[0]} x {X.shape[0]}, got {psi.shape}")
    return _symmetrize(2.0 * X.T @ laplacian(psi) @ X)


def phi_matrix(
    descriptor: KernelDescriptor,
    R: np.ndarray,
    gamma: MatrixLike,
    W: Optional[np.ndarray] = None,
    initial: bool = False
) -> np.ndarray:
    """
    Phi (or the starting Phi_0) whose dominant eigenvectors give the layer weights.

    Args:
        descriptor: Kernel of the layer objective
        R: n x m layer input
        gamma: n x n label matrix
        W: m x q current weights, required for the iterated polynomial,
            gaussian and multiquadratic forms
        initial: Return Phi_0 instead of Phi

    Returns:
        m x m symmetric matrix
    """
    R = _as_rows(R)
    G = as_array(gamma)
    if G.shape != (R.shape[0], R.shape[0]):
        raise SizeMismatch(f"gamma must be {R.shape[0]} x {R.shape[0]}, got {G.shape}")
    kind = descriptor.kind

    if initial:
        if kind in ('linear', 'polynomial'):
            phi = R.T @ G @ R
        elif kind == 'gaussian':
            phi = -R.T @ laplacian(G) @ R
        else:
            phi = R.T @ laplacian(G) @ R
        return _symmetrize(phi)

    if kind == 'linear':
        return _symmetrize(R.T @ G @ R)
    if kind == 'squared':
        return _symmetrize(R.T @ laplacian(G) @ R)

    if W is None:
        raise MissingW(f"the {kind} Phi depends on the current weights W")
    RW = R @ np.asarray(W, dtype=np.float64)

    if kind == 'polynomial':
        psi = G * (RW @ RW.T) ** (descriptor.p - 1)
        return _symmetrize(R.T @ psi @ R)
    if kind == 'gaussian':
        psi = G * gaussian_gram(RW, descriptor.sigma).values
        return _symmetrize(-R.T @ laplacian(psi) @ R)

    psi = G / gram(RW, KernelDescriptor.multiquadratic(descriptor.sigma)).values
    return _symmetrize(R.T @ laplacian(psi) @ R)


def export_matrix(path: Path, matrix: MatrixLike) -> None:
    """Write a Gram or Gamma matrix as headerless CSV at 17 significant digits."""
    write_matrix_csv(Path(path), as_array(matrix))
    logger.info("Wrote matrix %s", path)
