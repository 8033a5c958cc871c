"""
Evaluation metrics for trained networks and the penalty identity check.
"""
import logging
import sys
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np
from sklearn.metrics import silhouette_score

from kdn.errors import SizeMismatch, TooFewSamples
from kdn.services.kernelkit import (
    GammaMatrix,
    MatrixLike,
    as_array,
    hsic_value,
    label_gram,
    projected_gram,
    squared_distances,
)

logger = logging.getLogger(__name__)

# Self-HSIC below this means a kernel with no variation after centering
DEGENERATE_HSIC = 1e-18


@dataclass
class LayerMetrics:
    layer: int
    hsic_star: float
    scatter_ratio: float
    block_gap: float


@dataclass
class MetricsReport:
    hsic_star: float
    csr: float
    scatter_ratio: float
    silhouette: float
    train_acc: float
    test_acc: Optional[float] = None
    per_layer: List[LayerMetrics] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class PenaltyTerms:
    """Per-sample penalties D_i and both sides of the trace identity."""
    D: np.ndarray
    trace_form: float
    pair_form: float
    residual: float

    @property
    def relative_residual(self) -> float:
        scale = max(1.0, abs(self.trace_form), abs(self.pair_form))
        return self.residual / scale


def _same_class(labels: np.ndarray) -> np.ndarray:
    labels = np.asarray(labels)
    return labels[:, None] == labels[None, :]


def hsic_star(K_f: MatrixLike, K_Y: MatrixLike) -> float:
    """
    HSIC normalized to [0, 1]:
    Tr(H K_f H K_Y) / sqrt(Tr(H K_f H K_f) Tr(H K_Y H K_Y)).

    Returns 0.0 (and logs a warning) when either kernel is constant after centering.
    """
    a, b = as_array(K_f), as_array(K_Y)
    if a.shape != b.shape:
        raise SizeMismatch(f"Gram sizes differ: {a.shape} vs {b.shape}")

    self_a = hsic_value(a, a)
    self_b = hsic_value(b, b)
    if self_a < DEGENERATE_HSIC or self_b < DEGENERATE_HSIC:
        logger.warning("Degenerate kernel in hsic_star (self-HSIC %.3g, %.3g); returning 0", self_a, self_b)
        return 0.0
    return hsic_value(a, b) / np.sqrt(self_a * self_b)


def csr(F: np.ndarray, labels: np.ndarray) -> float:
    """
    Cosine similarity ratio: cross-class over same-class inner-product mass.

    Pairs are i < j on the raw representations; 0 is ideal. Returns float max
    (with a warning) when the same-class mass is zero.
    """
    F = np.asarray(F, dtype=np.float64)
    inner = F @ F.T
    upper = np.triu(np.ones_like(inner, dtype=bool), k=1)
    same = _same_class(labels)

    numerator = float(inner[upper & ~same].sum())
    denominator = float(inner[upper & same].sum())
    if denominator == 0:
        logger.warning("CSR denominator is zero; returning float max")
        return sys.float_info.max
    return numerator / denominator


def scatter_ratio(R: np.ndarray, W: np.ndarray, sigma: float, labels: np.ndarray) -> float:
    """
    Tr(S_w) / Tr(S_b) of the projected rows R W.

    Both traces sum ||W^T (r_i - r_j)||^2 / (2 sigma^2) over pairs, S_w over
    same-class pairs and S_b over cross-class pairs.
    """
    projected = np.asarray(R, dtype=np.float64) @ np.asarray(W, dtype=np.float64)
    scaled = squared_distances(projected) / (2.0 * sigma * sigma)
    upper = np.triu(np.ones_like(scaled, dtype=bool), k=1)
    same = _same_class(labels)

    within = float(scaled[upper & same].sum())
    between = float(scaled[upper & ~same].sum())
    if between == 0:
        logger.warning("Between-class scatter is zero; returning float max")
        return sys.float_info.max
    return within / between


def block_gap(K: MatrixLike, labels: np.ndarray) -> float:
    """min of K over same-class pairs (diagonal included) minus max over cross-class pairs."""
    values = as_array(K)
    same = _same_class(labels)
    cross_max = float(values[~same].max()) if (~same).any() else 0.0
    return float(values[same].min()) - cross_max


def silhouette(F: np.ndarray, labels: np.ndarray) -> float:
    """Mean Euclidean silhouette; coincident points score 0."""
    labels = np.asarray(labels)
    classes, counts = np.unique(labels, return_counts=True)
    if classes.size < 2:
        raise TooFewSamples("silhouette needs at least 2 classes")
    if (counts < 2).any():
        raise TooFewSamples(f"silhouette needs 2 members per class, got counts {counts.tolist()}")
    return float(silhouette_score(np.asarray(F, dtype=np.float64), labels, metric='euclidean'))


def penalty_terms(R: np.ndarray, W: np.ndarray, sigma: float, gamma: GammaMatrix) -> PenaltyTerms:
    """
    Per-sample penalties of the layer objective and the identity they satisfy.

    D_i = (1/sigma^2) [sum_{j same class} Gamma_ij K_ij - sum_{j other class} |Gamma_ij| K_ij].
    With Gamma_hat = Gamma * K, the trace form Tr(W^T R^T (Gamma_hat - D_Gamma_hat) R W)
    equals sum_ij Gamma_hat_ij <W^T r_i, W^T r_j> - sum_i sigma^2 D_i ||W^T r_i||^2
    whenever Gamma is positive within classes and negative across them.
    """
    R = np.asarray(R, dtype=np.float64)
    W = np.asarray(W, dtype=np.float64)
    G = gamma.values
    if G.shape != (R.shape[0], R.shape[0]):
        raise SizeMismatch(f"gamma must be {R.shape[0]} x {R.shape[0]}, got {G.shape}")

    K = projected_gram(R, W, sigma).values
    same = _same_class(gamma.class_of)
    signed = np.where(same, G, -np.abs(G))
    D = (signed * K).sum(axis=1) / (sigma * sigma)

    gamma_hat = G * K
    P = R @ W
    trace_form = float(np.trace(P.T @ (gamma_hat - np.diag(gamma_hat.sum(axis=1))) @ P))
    pair_form = float(np.sum(gamma_hat * (P @ P.T)) - np.sum(sigma * sigma * D * np.sum(P * P, axis=1)))

    return PenaltyTerms(D=D, trace_form=trace_form, pair_form=pair_form, residual=abs(trace_form - pair_form))


def _accuracy(predicted: np.ndarray, labels: np.ndarray) -> float:
    return float(np.mean(np.asarray(predicted) == np.asarray(labels)))


def evaluate_model(model, train_features: np.ndarray, train_labels: np.ndarray,
                   test_features: Optional[np.ndarray] = None,
                   test_labels: Optional[np.ndarray] = None) -> MetricsReport:
    """
    Score a trained network.

    Features must already be standardized with the training transform.

    Args:
        model: NetworkModel
        train_features: Training rows
        train_labels: Training labels
        test_features: Optional held-out rows
        test_labels: Labels for the held-out rows

    Returns:
        MetricsReport with per-layer HSIC*, scatter ratio and block gap
    """
    # Imported here, network depends on this module
    from kdn.services import network

    train_labels = np.asarray(train_labels)
    K_Y = label_gram(train_labels, model.n_classes)

    per_layer = []
    R = np.asarray(train_features, dtype=np.float64)
    for index, layer in enumerate(model.layers, start=1):
        K = projected_gram(R, layer.W, layer.sigma)
        per_layer.append(LayerMetrics(
            layer=index,
            hsic_star=hsic_star(K, K_Y),
            scatter_ratio=scatter_ratio(R, layer.W, layer.sigma, train_labels),
            block_gap=block_gap(K, train_labels),
        ))
        R = network.apply_layer(layer, R)

    try:
        sil = silhouette(R, train_labels)
    except TooFewSamples as e:
        logger.warning("Silhouette skipped: %s", e)
        sil = 0.0

    test_acc = None
    if test_features is not None and test_labels is not None and len(test_labels):
        test_acc = _accuracy(network.predict(model, test_features), test_labels)

    return MetricsReport(
        hsic_star=per_layer[-1].hsic_star if per_layer else 0.0,
        csr=csr(R, train_labels),
        scatter_ratio=per_layer[-1].scatter_ratio if per_layer else sys.float_info.max,
        silhouette=sil,
        train_acc=_accuracy(network.predict(model, train_features), train_labels),
        test_acc=test_acc,
        per_layer=per_layer,
    )
