"""
Numerical evaluation of the HSIC lower bound L(sigma0, sigma1) for a
class-size profile, its sigma0 -> 0 limit L*, and the risk-sequence
schedule.

Conventions:
- classes are 0-based
- S is the set of same-class ordered pairs, diagonal included
- ub = exp(-min_sq_dist / (2 sigma0^2)) is the largest inner product
  between distinct samples in the previous layer's feature space
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg

from kdn.errors import WrongClassCount
from kdn.services.kernelkit import GammaMatrix, build_gamma

logger = logging.getLogger(__name__)

# Slack for the non-increasing check along a ub grid
MONOTONE_SLACK = 1e-12


@dataclass(frozen=True)
class ClassProfile:
    """Class sizes with the block sums of Gamma they induce."""
    counts: Tuple[int, ...]
    gamma_within: np.ndarray
    gamma_between: np.ndarray
    mode: str = 'signed'

    @classmethod
    def from_gamma(cls, gamma: GammaMatrix) -> 'ClassProfile':
        class_of = np.asarray(gamma.class_of)
        counts = np.bincount(class_of)
        tau = counts.size

        within = np.zeros(tau)
        between = np.zeros((tau, tau))
        for g1 in range(tau):
            rows = class_of == g1
            for g2 in range(tau):
                block = gamma.values[np.ix_(rows, class_of == g2)]
                if g1 == g2:
                    within[g1] = block.sum()
                else:
                    between[g1, g2] = np.abs(block).sum()

        return cls(tuple(int(c) for c in counts), within, between, gamma.mode)

    @classmethod
    def from_counts(cls, counts: Sequence[int], mode: str = 'signed') -> 'ClassProfile':
        """
        Profile of a dataset with the given class sizes.

        Args:
            counts: Samples per class (each >= 1)
            mode: 'signed' for +/-1 Gamma, 'centered' for H K_Y H
        """
        counts = [int(c) for c in counts]
        if not counts or min(counts) < 1:
            raise ValueError(f"class counts must all be >= 1, got {counts}")
        labels = np.repeat(np.arange(len(counts)), counts)
        return cls.from_gamma(build_gamma(labels, mode))

    @property
    def tau(self) -> int:
        return len(self.counts)

    @property
    def same_sum(self) -> float:
        """Sum of Gamma over S, which is also H*."""
        return float(self.gamma_within.sum())

    @property
    def cross_sum(self) -> float:
        """Sum of |Gamma| over the cross-class pairs."""
        return float(self.gamma_between.sum())


@dataclass
class BoundEval:
    sigma0: Optional[float]
    sigma1: float
    ub: float
    L: float
    L_star: float
    H_star: float


@dataclass
class MonotonicityReport:
    holds: bool
    values: np.ndarray
    L_star: float
    # Grid index where L first rose above its predecessor
    first_violation: Optional[int] = None


@dataclass
class RiskSequenceCheck:
    holds: bool
    within_schedule: bool
    increasing: bool
    failures: List[int] = field(default_factory=list)


@dataclass
class EmpiricalBoundCheck:
    hsic: float
    bound: float
    zeta: float
    holds: bool


def ub_of_sigma0(min_sq_dist: float, sigma0: float) -> float:
    """exp(-min_sq_dist / (2 sigma0^2))."""
    if not (min_sq_dist > 0 and sigma0 > 0):
        raise ValueError(f"min_sq_dist and sigma0 must be positive, got {min_sq_dist}, {sigma0}")
    return float(np.exp(-min_sq_dist / (2.0 * sigma0 * sigma0)))


def _check_group(profile: ClassProfile, g: int) -> int:
    if not 0 <= g < profile.tau:
        raise IndexError(f"class index {g} out of range for {profile.tau} classes")
    return g


def n_constant(profile: ClassProfile, group: Union[int, Tuple[int, int]],
               ub: float = 0.0, zeta: float = 1.0) -> float:
    """
    N_g for a single class, or N_{g1,g2}(ub) for an ordered class pair.

    N_g = (1/2 zeta) [sum_{k != g} n_k^2 + (n_g - 1)^2]
    N_{g1,g2}(ub) = (1/2 zeta) [sum_{k not in {g1,g2}} n_k^2 ub^2
                                + (1 - n_g1 ub)^2 + (1 + (n_g2 - 1) ub)^2]
    """
    n = np.asarray(profile.counts, dtype=np.float64)

    if isinstance(group, tuple):
        g1, g2 = (_check_group(profile, g) for g in group)
        if g1 == g2:
            raise IndexError(f"pair constant needs two different classes, got ({g1}, {g2})")
        others = np.delete(n, [g1, g2])
        total = np.sum(others ** 2) * ub * ub + (1.0 - n[g1] * ub) ** 2 + (1.0 + (n[g2] - 1.0) * ub) ** 2
        return float(total / (2.0 * zeta))

    g = _check_group(profile, group)
    total = np.sum(np.delete(n, g) ** 2) + (n[g] - 1.0) ** 2
    return float(total / (2.0 * zeta))


def limit_bound(profile: ClassProfile, sigma1: float, zeta: float = 1.0) -> float:
    """L* = sum_S Gamma - sum_{S^c} |Gamma| exp(-1 / (zeta sigma1^2))."""
    return profile.same_sum - profile.cross_sum * float(np.exp(-1.0 / (zeta * sigma1 * sigma1)))


def lower_bound_at_ub(profile: ClassProfile, ub: float, sigma1: float, zeta: float = 1.0) -> float:
    """L as a function of ub."""
    s2 = sigma1 * sigma1
    value = 0.0
    for g in range(profile.tau):
        value += profile.gamma_within[g] * np.exp(-n_constant(profile, g, zeta=zeta) * ub * ub / s2)
    for g1 in range(profile.tau):
        for g2 in range(profile.tau):
            if g1 != g2:
                value -= profile.gamma_between[g1, g2] * np.exp(-n_constant(profile, (g1, g2), ub, zeta) / s2)
    return float(value)


def lower_bound(profile: ClassProfile, sigma0: float, sigma1: float,
                min_sq_dist: float = 1.0, zeta: float = 1.0) -> BoundEval:
    """
    Evaluate L(sigma0, sigma1) with its limit and the optimum H*.

    Args:
        profile: Class profile
        sigma0: Bandwidth of the previous layer
        sigma1: Bandwidth of the current layer
        min_sq_dist: Smallest squared distance between distinct samples
        zeta: Squared norm of the analysis weights

    Returns:
        BoundEval
    """
    if not (sigma1 > 0 and zeta > 0):
        raise ValueError(f"sigma1 and zeta must be positive, got {sigma1}, {zeta}")
    ub = ub_of_sigma0(min_sq_dist, sigma0)
    return BoundEval(
        sigma0=float(sigma0),
        sigma1=float(sigma1),
        ub=ub,
        L=lower_bound_at_ub(profile, ub, sigma1, zeta),
        L_star=limit_bound(profile, sigma1, zeta),
        H_star=profile.same_sum,
    )


def bound_table(profile: ClassProfile, sigma0_grid: Sequence[float], sigma1: float,
                min_sq_dist: float = 1.0, zeta: float = 1.0) -> List[BoundEval]:
    """Bounds over a sigma0 grid, largest sigma0 first."""
    return [lower_bound(profile, s0, sigma1, min_sq_dist, zeta) for s0 in sorted(sigma0_grid, reverse=True)]


def lower_bound_3class(profile: ClassProfile, sigma1: float) -> float:
    """
    Three-class limit:
    sum_S Gamma - 2 B_01 e^{-1/sigma1^2} - 2 B_02 e^{-1/(2 sigma1^2)} - 2 B_12 e^{-1/(2 sigma1^2)}
    with B the one-directional cross-class |Gamma| block sums.
    """
    if profile.tau != 3:
        raise WrongClassCount(f"three-class limit needs 3 classes, got {profile.tau}")
    s2 = sigma1 * sigma1
    B = profile.gamma_between
    near = np.exp(-2.0 / (2.0 * s2))
    far = np.exp(-1.0 / (2.0 * s2))
    return float(profile.same_sum - 2.0 * B[0, 1] * near - 2.0 * B[0, 2] * far - 2.0 * B[1, 2] * far)


def monotonicity_scan(profile: ClassProfile, sigma1: float, ub_grid: Sequence[float],
                      zeta: float = 1.0) -> MonotonicityReport:
    """
    Check that L does not increase as ub grows along an ascending grid in (0, 1).
    """
    grid = np.asarray(ub_grid, dtype=np.float64)
    if grid.size == 0 or grid.min() <= 0 or grid.max() >= 1:
        raise ValueError("ub grid must lie inside (0, 1)")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("ub grid must be strictly ascending")

    values = np.array([lower_bound_at_ub(profile, ub, sigma1, zeta) for ub in grid])
    rises = np.flatnonzero(np.diff(values) > MONOTONE_SLACK)
    first = int(rises[0]) + 1 if rises.size else None
    if first is not None:
        logger.info("L increases at ub=%.4g (grid index %d)", grid[first], first)

    return MonotonicityReport(
        holds=first is None,
        values=values,
        L_star=limit_bound(profile, sigma1, zeta),
        first_violation=first,
    )


def delta_schedule(H0: float, H_star: float, layers: int) -> List[float]:
    """delta_l = (H* - H0) / (l + 1) for l = 1..layers."""
    if not H0 < H_star:
        raise ValueError(f"H0 must be below H*, got {H0} >= {H_star}")
    gap = H_star - H0
    return [gap / (l + 1) for l in range(1, layers + 1)]


def check_risk_sequence(H: Sequence[float], H_star: float, deltas: Sequence[float],
                        tol: float = 1e-12) -> RiskSequenceCheck:
    """
    Check H* - H_l <= delta_l for every layer and that H is strictly increasing.

    Args:
        H: Per-layer HSIC values
        H_star: Optimum
        deltas: Schedule from delta_schedule (at least as long as H)
    """
    if len(deltas) < len(H):
        raise ValueError(f"need {len(H)} deltas, got {len(deltas)}")

    failures = [l for l, (h, d) in enumerate(zip(H, deltas)) if H_star - h > d + tol]
    increasing = all(b > a for a, b in zip(H, H[1:]))
    return RiskSequenceCheck(
        holds=not failures and increasing,
        within_schedule=not failures,
        increasing=increasing,
        failures=failures,
    )


def empirical_bound_check(counts: Sequence[int], ub: float, sigma1: float,
                          mode: str = 'signed', zeta: Optional[float] = None) -> EmpiricalBoundCheck:
    """
    Compare L with the HSIC actually reached by the class-sum analysis weights.

    Sample vectors come from the Cholesky rows of a Gram with unit diagonal,
    ub between distinct same-class samples and 0 across classes. The analysis
    weights are the per-class sums of those vectors, normalized per column.

    Args:
        counts: Samples per class
        ub: Within-class inner product, in [0, 1)
        sigma1: Bandwidth of the evaluated layer
        mode: Gamma mode
        zeta: Override for the squared weight norm used in L (default: the
            largest per-class squared sum norm)

    Returns:
        EmpiricalBoundCheck
    """
    if not 0 <= ub < 1:
        raise ValueError(f"ub must be in [0, 1), got {ub}")
    labels = np.repeat(np.arange(len(counts)), counts)
    gamma = build_gamma(labels, mode)

    same = labels[:, None] == labels[None, :]
    gram = np.where(same, ub, 0.0)
    np.fill_diagonal(gram, 1.0)
    vectors = linalg.cholesky(gram, lower=True)

    sums = np.vstack([vectors[labels == g].sum(axis=0) for g in range(len(counts))]).T
    norms_sq = np.sum(sums * sums, axis=0)
    W_s = sums / np.sqrt(norms_sq)

    projected = vectors @ W_s
    diffs = projected[:, None, :] - projected[None, :, :]
    K = np.exp(-np.sum(diffs * diffs, axis=2) / (2.0 * sigma1 * sigma1))
    hsic = float(np.sum(gamma.values * K))

    zeta_used = float(norms_sq.max()) if zeta is None else float(zeta)
    bound = lower_bound_at_ub(ClassProfile.from_gamma(gamma), ub, sigma1, zeta_used)
    return EmpiricalBoundCheck(hsic=hsic, bound=bound, zeta=zeta_used, holds=hsic >= bound - 1e-9)
