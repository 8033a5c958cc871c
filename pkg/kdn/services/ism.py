"""
Iterative spectral solver for one layer.

Maximizes Tr(Gamma K_RW) over W with orthonormal columns by repeatedly
taking the dominant eigenvectors of Q = R^T (Gamma_hat - Diag(Gamma_hat 1)) R,
where Gamma_hat = Gamma * K_RW.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy import linalg

from kdn.errors import ConfigError, EigenFailure, SizeMismatch
from kdn.services.kernelkit import MatrixLike, as_array, projected_gram

logger = logging.getLogger(__name__)

# Objective drops smaller than this are numerical noise
OBJECTIVE_SLACK = 1e-6


@dataclass(frozen=True)
class IsmConfig:
    tol: float = 1e-5
    max_iters: int = 50
    rank_tol: float = 1e-5
    q_override: Optional[int] = None

    def __post_init__(self):
        if not self.tol > 0:
            raise ConfigError(f"ism tol must be positive, got {self.tol}")
        if not self.rank_tol > 0:
            raise ConfigError(f"ism rank_tol must be positive, got {self.rank_tol}")
        if self.max_iters < 1:
            raise ConfigError(f"ism max_iters must be >= 1, got {self.max_iters}")
        if self.q_override is not None and self.q_override < 1:
            raise ConfigError(f"q_override must be >= 1, got {self.q_override}")


@dataclass
class IsmResult:
    W: np.ndarray
    eigenvalues: np.ndarray
    iters: int
    converged: bool
    objective: float
    sigma: float
    # True when no eigenvalue was positive and the top vector was kept anyway
    degenerate: bool = False
    history: List[float] = field(default_factory=list)
    spectra: List[np.ndarray] = field(default_factory=list)

    @property
    def q(self) -> int:
        return self.W.shape[1]


def _q_from_weights(R: np.ndarray, psi: np.ndarray) -> np.ndarray:
    Q = R.T @ (psi - np.diag(psi.sum(axis=1))) @ R
    return 0.5 * (Q + Q.T)


def _check_shapes(R: np.ndarray, G: np.ndarray) -> None:
    if G.shape != (R.shape[0], R.shape[0]):
        raise SizeMismatch(f"gamma must be {R.shape[0]} x {R.shape[0]}, got {G.shape}")


def init_q(R: np.ndarray, gamma: MatrixLike) -> np.ndarray:
    """
    Starting matrix Q_0 = R^T (Gamma - Diag(Gamma 1)) R.

    For a centered Gamma the rows sum to zero and this is R^T Gamma R.
    """
    R = np.asarray(R, dtype=np.float64)
    G = as_array(gamma)
    _check_shapes(R, G)

    row_sums = np.abs(G.sum(axis=1)).max() if G.size else 0.0
    if getattr(gamma, 'mode', 'centered') == 'centered' and row_sums > 1e-10:
        logger.warning("Centered gamma has row sums up to %.3g", row_sums)
    return _q_from_weights(R, G)


def update_q(R: np.ndarray, gamma: MatrixLike, W: np.ndarray, sigma: float) -> np.ndarray:
    """Q at the current weights W and bandwidth sigma."""
    R = np.asarray(R, dtype=np.float64)
    G = as_array(gamma)
    _check_shapes(R, G)
    gamma_hat = G * projected_gram(R, W, sigma).values
    return _q_from_weights(R, gamma_hat)


def select_width(eigenvalues: np.ndarray, rank_tol: float = 1e-5) -> int:
    """
    Number of eigenvalues kept as the layer width.

    Counts descending eigenvalues above rank_tol * max(lambda_1, 0) that are
    also positive; at least one is always kept.
    """
    eigenvalues = np.asarray(eigenvalues, dtype=np.float64)
    if eigenvalues.size == 0:
        raise ValueError("select_width needs at least one eigenvalue")

    top = max(float(eigenvalues[0]), 0.0)
    q = int(np.count_nonzero((eigenvalues > rank_tol * top) & (eigenvalues > 0)))
    if q == 0:
        logger.warning("No positive eigenvalue (largest %.3g); keeping one direction", eigenvalues[0])
        return 1
    return q


def _dominant(Q: np.ndarray, cfg: IsmConfig) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(top-q eigenvectors, their eigenvalues, full descending spectrum) of Q."""
    if not np.all(np.isfinite(Q)):
        raise EigenFailure("Q contains non-finite entries")
    try:
        values, vectors = linalg.eigh(Q)
    except (linalg.LinAlgError, ValueError) as e:
        raise EigenFailure(f"symmetric eigendecomposition failed: {e}") from e

    order = np.argsort(values)[::-1]
    values, vectors = values[order], vectors[:, order]

    if cfg.q_override is not None:
        q = min(cfg.q_override, values.size)
    else:
        q = select_width(values, cfg.rank_tol)

    W = vectors[:, :q].copy()
    # Largest-magnitude component of each column is made positive
    pivots = np.argmax(np.abs(W), axis=0)
    signs = np.sign(W[pivots, np.arange(q)])
    signs[signs == 0] = 1.0
    W *= signs
    return W, values[:q].copy(), values


def spectrum_change(current: np.ndarray, previous: np.ndarray) -> float:
    """||current - previous|| / ||current||, zero-padding the shorter spectrum."""
    size = max(current.size, previous.size)
    a = np.zeros(size)
    b = np.zeros(size)
    a[:current.size] = current
    b[:previous.size] = previous

    norm = np.linalg.norm(a)
    if norm == 0:
        return 0.0 if np.linalg.norm(b) == 0 else np.inf
    return float(np.linalg.norm(a - b) / norm)


def objective(R: np.ndarray, gamma: MatrixLike, W: np.ndarray, sigma: float) -> float:
    """Tr(Gamma K_RW)."""
    return float(np.sum(as_array(gamma) * projected_gram(R, W, sigma).values))


def solve(R: np.ndarray, gamma: MatrixLike, sigma: float, cfg: Optional[IsmConfig] = None) -> IsmResult:
    """
    Solve one layer.

    Args:
        R: n x m layer input
        gamma: n x n label matrix
        sigma: Gaussian bandwidth of the layer
        cfg: Solver settings

    Returns:
        IsmResult; converged is False when max_iters ran out first
    """
    cfg = cfg or IsmConfig()
    R = np.asarray(R, dtype=np.float64)
    if R.shape[0] < 2:
        raise ValueError(f"solve needs at least 2 samples, got {R.shape[0]}")
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")

    W, lam, spectrum = _dominant(init_q(R, gamma), cfg)
    spectra = [spectrum]
    history = [objective(R, gamma, W, sigma)]
    degenerate = spectrum[0] <= 0

    converged = False
    iters = 0
    for iters in range(1, cfg.max_iters + 1):
        W, lam_new, spectrum = _dominant(update_q(R, gamma, W, sigma), cfg)
        spectra.append(spectrum)
        degenerate = spectrum[0] <= 0

        value = objective(R, gamma, W, sigma)
        if value < history[-1] - OBJECTIVE_SLACK * max(1.0, abs(history[-1])):
            logger.warning("ISM objective decreased at iteration %d: %.6g -> %.6g", iters, history[-1], value)
        history.append(value)

        change = spectrum_change(lam_new, lam)
        lam = lam_new
        logger.debug("ISM iter %d: q=%d, change=%.3g, objective=%.6g", iters, W.shape[1], change, value)
        if change < cfg.tol:
            converged = True
            break

    if not converged:
        logger.warning("ISM did not converge in %d iterations (sigma=%.4g)", cfg.max_iters, sigma)

    return IsmResult(
        W=W,
        eigenvalues=lam,
        iters=iters,
        converged=converged,
        objective=history[-1],
        sigma=float(sigma),
        degenerate=bool(degenerate),
        history=history,
        spectra=spectra,
    )
