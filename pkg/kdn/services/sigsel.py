"""
Per-layer Gaussian bandwidth selection.

Strategies:
- grid_hsic_star: solve the layer at every grid sigma and keep the best HSIC*
- max_separation: minimize Tr(K_X Q), the negated gap between the mean
  same-class and mean cross-class kernel values
- fixed: a caller-supplied sigma per layer
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

from kdn.errors import ConfigError, EigenFailure, SingleClass
from kdn.services import ism
from kdn.services.kernelkit import (
    GammaMatrix,
    label_gram,
    median_pairwise_distance,
    projected_gram,
    squared_distances,
)
from kdn.services.metrics import hsic_star

logger = logging.getLogger(__name__)

STRATEGIES = ('grid_hsic_star', 'max_separation', 'fixed')

# Multiples of the median pairwise distance tried by grid_hsic_star
DEFAULT_GRID_FACTORS = (0.1, 0.25, 0.5, 1.0, 2.0)

SEPARATION_INTERVAL = (0.05, 20.0)
SEPARATION_GRID_POINTS = 200
GOLDEN_ITERATIONS = 80


@dataclass
class SigmaSearchResult:
    sigma: float
    strategy: str
    objective_curve: List[Tuple[float, float]] = field(default_factory=list)
    # Solved layer at the chosen sigma (grid_hsic_star only)
    ism_result: Optional[ism.IsmResult] = None


def build_q_label(labels: np.ndarray) -> np.ndarray:
    """
    Q = g_bar 11^T - (g + g_bar) K_Y with a zero diagonal.

    g = 1/|S| and g_bar = 1/|S^c| count ordered pairs i != j, so
    Tr(K_X Q) = -(mean same-class K - mean cross-class K).
    """
    labels = np.asarray(labels)
    n = labels.size
    same = labels[:, None] == labels[None, :]
    off_diagonal = ~np.eye(n, dtype=bool)

    same_pairs = int(np.count_nonzero(same & off_diagonal))
    cross_pairs = int(np.count_nonzero(~same))
    if cross_pairs == 0:
        raise SingleClass("separation objective needs at least 2 classes")
    if same_pairs == 0:
        raise SingleClass("separation objective needs a class with at least 2 samples")

    g = 1.0 / same_pairs
    g_bar = 1.0 / cross_pairs
    Q = g_bar - (g + g_bar) * label_gram(labels).values
    np.fill_diagonal(Q, 0.0)
    return Q


def separation_objective(sq_dists: np.ndarray, Q: np.ndarray, sigma: float) -> float:
    """Tr(K_X(sigma) Q) from precomputed squared distances."""
    return float(np.sum(np.exp(-sq_dists / (2.0 * sigma * sigma)) * Q))


def sigma_by_separation(
    X: np.ndarray,
    labels: np.ndarray,
    interval: Optional[Tuple[float, float]] = None,
    grid_points: int = SEPARATION_GRID_POINTS,
) -> SigmaSearchResult:
    """
    Bandwidth that best separates same-class from cross-class kernel values.

    A log-spaced grid over the interval locates the basin; golden-section
    search over log sigma then refines inside the neighbouring grid points.

    Args:
        X: n x d rows
        labels: Class per row
        interval: (sigma_lo, sigma_hi); defaults to [0.05 m, 20 m] with m
            the median pairwise distance

    Returns:
        SigmaSearchResult with the grid curve
    """
    Q = build_q_label(labels)
    if interval is None:
        m = median_pairwise_distance(X)
        interval = (SEPARATION_INTERVAL[0] * m, SEPARATION_INTERVAL[1] * m)
    lo, hi = float(interval[0]), float(interval[1])
    if not 0 < lo < hi:
        raise ConfigError(f"sigma interval must satisfy 0 < lo < hi, got ({lo}, {hi})")

    sq_dists = squared_distances(X)
    grid = np.geomspace(lo, hi, grid_points)
    values = np.array([separation_objective(sq_dists, Q, s) for s in grid])
    curve = [(float(s), float(v)) for s, v in zip(grid, values)]

    best = int(np.argmin(values))
    sigma = float(grid[best])
    if 0 < best < grid_points - 1:
        bracket = (np.log(grid[best - 1]), np.log(grid[best]), np.log(grid[best + 1]))
        try:
            found = minimize_scalar(
                lambda log_s: separation_objective(sq_dists, Q, np.exp(log_s)),
                bracket=bracket,
                method='golden',
                options={'maxiter': GOLDEN_ITERATIONS},
            )
            if found.fun <= values[best]:
                sigma = float(np.clip(np.exp(found.x), lo, hi))
        except ValueError as e:
            # Flat basin: the grid point stands
            logger.debug("Golden search skipped: %s", e)
    else:
        logger.info("Separation optimum at interval endpoint sigma=%.4g", sigma)

    return SigmaSearchResult(sigma=sigma, strategy='max_separation', objective_curve=curve)


def default_grid(R: np.ndarray) -> List[float]:
    m = median_pairwise_distance(R)
    return [factor * m for factor in DEFAULT_GRID_FACTORS]


def sigma_by_hsic_grid(
    R: np.ndarray,
    gamma: GammaMatrix,
    grid: Optional[Sequence[float]] = None,
    ism_cfg: Optional[ism.IsmConfig] = None,
    jobs: int = 1,
) -> SigmaSearchResult:
    """
    Solve the layer at every grid sigma and keep the highest HSIC*.

    Ties go to the smaller sigma. Grid points whose solve fails are skipped.

    Args:
        R: n x m layer input
        gamma: Label matrix of the training labels
        grid: Candidate bandwidths (default: multiples of the median distance)
        ism_cfg: Solver settings
        jobs: Worker threads for the grid

    Returns:
        SigmaSearchResult carrying the winning IsmResult
    """
    grid = sorted(float(s) for s in (grid if grid is not None else default_grid(R)))
    if not grid:
        raise ConfigError("sigma grid is empty")
    if grid[0] <= 0:
        raise ConfigError(f"sigma grid values must be positive, got {grid[0]}")

    K_Y = label_gram(gamma.class_of)

    def score(sigma: float):
        try:
            result = ism.solve(R, gamma, sigma, ism_cfg)
        except EigenFailure as e:
            logger.warning("Skipping sigma=%.4g: %s", sigma, e)
            return None
        return hsic_star(projected_gram(R, result.W, sigma), K_Y), result

    if jobs > 1 and len(grid) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as executor:
            scored = list(executor.map(score, grid))
    else:
        scored = [score(s) for s in grid]

    curve = []
    best = None
    for sigma, entry in zip(grid, scored):
        if entry is None:
            continue
        value, result = entry
        curve.append((sigma, float(value)))
        if best is None or value > best[1]:
            best = (sigma, value, result)

    if best is None:
        raise EigenFailure(f"every sigma in the grid failed ({len(grid)} points)")

    logger.debug("HSIC* grid: %s", ', '.join(f"{s:.4g}:{v:.4f}" for s, v in curve))
    return SigmaSearchResult(sigma=best[0], strategy='grid_hsic_star', objective_curve=curve, ism_result=best[2])


def sigma_fixed(sigmas: Sequence[float], layer: int) -> SigmaSearchResult:
    """sigma for a 1-based layer from a list; the last entry covers deeper layers."""
    if not sigmas:
        raise ConfigError("fixed sigma strategy needs at least one sigma")
    sigma = float(sigmas[min(layer, len(sigmas)) - 1])
    if not sigma > 0:
        raise ConfigError(f"fixed sigma must be positive, got {sigma}")
    return SigmaSearchResult(sigma=sigma, strategy='fixed')
