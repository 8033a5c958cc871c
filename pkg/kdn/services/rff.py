"""
Random Fourier Feature map approximating the Gaussian kernel, used as
the layer activation.
"""
from dataclasses import dataclass

import numpy as np

from kdn.errors import DimMismatch


@dataclass(frozen=True)
class RffMap:
    """
    z -> sqrt(2/m) cos(z omega + bias).

    omega is q x m with entries N(0, 1/sigma^2); bias is uniform on [0, 2 pi).
    """
    omega: np.ndarray
    bias: np.ndarray
    sigma: float
    seed: int = 0

    @property
    def q(self) -> int:
        return self.omega.shape[0]

    @property
    def m_rff(self) -> int:
        return self.omega.shape[1]


def sample_rff(q: int, sigma: float, m_rff: int = 300, seed: int = 0) -> RffMap:
    """
    Draw a feature map for inputs of dimension q.

    Args:
        q: Input dimension
        sigma: Gaussian bandwidth being approximated
        m_rff: Number of features
        seed: Generator seed; the same arguments always give the same map

    Returns:
        RffMap
    """
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if m_rff < 1 or q < 1:
        raise ValueError(f"q and m_rff must be >= 1, got q={q}, m_rff={m_rff}")

    rng = np.random.default_rng(seed)
    omega = rng.standard_normal((q, m_rff)) / sigma
    bias = rng.uniform(0.0, 2.0 * np.pi, m_rff)
    # uniform can round up to the open end
    bias[bias >= 2.0 * np.pi] = 0.0

    omega.flags.writeable = False
    bias.flags.writeable = False
    return RffMap(omega=omega, bias=bias, sigma=float(sigma), seed=int(seed))


def apply(rff_map: RffMap, Z: np.ndarray) -> np.ndarray:
    """Map n x q rows to n x m_rff features."""
    Z = np.asarray(Z, dtype=np.float64)
    if Z.ndim == 1:
        Z = Z.reshape(1, -1)
    if Z.shape[1] != rff_map.q:
        raise DimMismatch(f"RFF map expects {rff_map.q} input columns, got {Z.shape[1]}")
    return np.sqrt(2.0 / rff_map.m_rff) * np.cos(Z @ rff_map.omega + rff_map.bias)
