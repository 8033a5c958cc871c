"""
Greedy layer-wise network training, prediction and persistence.

Each layer picks a bandwidth, solves its weights spectrally, and feeds
the random-Fourier-feature image of R W to the next layer. Layers are
added until HSIC* passes the threshold and the layer kernel shows a block
gap of at least min_block_gap. Once HSIC* has passed, at most gap_patience
further layers are spent on the gap; max_layers caps the depth in any case.
"""
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from scipy.spatial.distance import cdist

from kdn.errors import ConfigError, DimMismatch, SingleClass
from kdn.services import ism, rff, sigsel
from kdn.services.ism import IsmConfig
from kdn.services.rff import RffMap
from kdn.services.dataio import DataSet, Standardizer
from kdn.services.kernelkit import GAMMA_MODES, GramMatrix, build_gamma, gaussian_gram, label_gram, projected_gram
from kdn.services.metrics import block_gap, hsic_star
from kdn.utils.storage import ModelStore

logger = logging.getLogger(__name__)

# Allowed dip between consecutive layers before the sequence counts as non-monotone
MONOTONE_SLACK = 0.01


@dataclass(frozen=True)
class TrainConfig:
    hsic_threshold: float = 0.99
    # Smallest same-class kernel value minus the largest cross-class one;
    # -1 turns the condition off
    min_block_gap: float = 0.5
    gap_patience: int = 2
    max_layers: int = 10
    m_rff: int = 300
    ism: IsmConfig = field(default_factory=IsmConfig)
    sigma_strategy: str = 'grid_hsic_star'
    # Candidate sigmas for grid_hsic_star (empty: median-based grid), or
    # the per-layer sigmas for fixed
    sigma_grid: Tuple[float, ...] = ()
    gamma_mode: str = 'centered'
    seed: int = 0
    jobs: int = 1

    def __post_init__(self):
        if not 0 < self.hsic_threshold <= 1:
            raise ConfigError(f"hsic_threshold must be in (0, 1], got {self.hsic_threshold}")
        if not -1 <= self.min_block_gap <= 1:
            raise ConfigError(f"min_block_gap must be in [-1, 1], got {self.min_block_gap}")
        if self.gap_patience < 0:
            raise ConfigError(f"gap_patience must be >= 0, got {self.gap_patience}")
        if self.max_layers < 1:
            raise ConfigError(f"max_layers must be >= 1, got {self.max_layers}")
        if self.m_rff < 1:
            raise ConfigError(f"m_rff must be >= 1, got {self.m_rff}")
        if self.sigma_strategy not in sigsel.STRATEGIES:
            raise ConfigError(f"Unknown sigma strategy '{self.sigma_strategy}', expected one of {sigsel.STRATEGIES}")
        if self.sigma_strategy == 'fixed' and not self.sigma_grid:
            raise ConfigError("fixed sigma strategy needs sigma_grid values")
        if any(not s > 0 for s in self.sigma_grid):
            raise ConfigError(f"sigma_grid values must be positive, got {list(self.sigma_grid)}")
        if self.gamma_mode not in GAMMA_MODES:
            raise ConfigError(f"Unknown gamma mode '{self.gamma_mode}', expected one of {GAMMA_MODES}")
        object.__setattr__(self, 'sigma_grid', tuple(float(s) for s in self.sigma_grid))

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data['sigma_grid'] = list(self.sigma_grid)
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'TrainConfig':
        data = dict(data)
        data['ism'] = IsmConfig(**data.get('ism', {}))
        data['sigma_grid'] = tuple(data.get('sigma_grid', ()))
        return cls(**data)


@dataclass
class LayerSpec:
    W: np.ndarray
    sigma: float
    rff: RffMap
    hsic_star: float
    block_gap: Optional[float] = None
    ism_iters: int = 0
    converged: bool = True
    # No positive eigenvalue; the single top direction was kept
    degenerate: bool = False
    spectra: List[np.ndarray] = field(default_factory=list)

    @property
    def m_in(self) -> int:
        return self.W.shape[0]

    @property
    def q(self) -> int:
        return self.W.shape[1]

    @property
    def m_out(self) -> int:
        return self.rff.m_rff

    @property
    def widths(self) -> Tuple[int, int, int]:
        return self.m_in, self.q, self.m_out


@dataclass
class NetworkModel:
    layers: List[LayerSpec]
    class_centers: np.ndarray
    config: TrainConfig
    class_names: Tuple[str, ...] = ()
    standardizer: Optional[Standardizer] = None

    @property
    def n_classes(self) -> int:
        return self.class_centers.shape[0]

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def hsic_sequence(self) -> List[float]:
        return [layer.hsic_star for layer in self.layers]

    @property
    def smallest_sigma(self) -> float:
        return min(layer.sigma for layer in self.layers)

    @property
    def monotone(self) -> bool:
        """HSIC* never drops by more than MONOTONE_SLACK from one layer to the next."""
        seq = self.hsic_sequence
        return all(b >= a - MONOTONE_SLACK for a, b in zip(seq, seq[1:]))

    @property
    def converged(self) -> bool:
        """HSIC* passed the threshold and the last layer reached min_block_gap."""
        if not self.layers:
            return False
        reached = any(h > self.config.hsic_threshold for h in self.hsic_sequence)
        gap = self.layers[-1].block_gap
        return reached and gap is not None and gap >= self.config.min_block_gap


def layer_seed(seed: int, layer: int) -> int:
    """RFF seed of a 1-based layer."""
    return int(seed) ^ int(layer)


def apply_layer(layer: LayerSpec, R: np.ndarray) -> np.ndarray:
    """R_l = phi(R_{l-1} W_l)."""
    R = np.asarray(R, dtype=np.float64)
    if R.shape[1] != layer.m_in:
        raise DimMismatch(f"layer expects {layer.m_in} input columns, got {R.shape[1]}")
    return rff.apply(layer.rff, R @ layer.W)


def _choose_sigma(R: np.ndarray, labels: np.ndarray, gamma, layer: int, cfg: TrainConfig) -> sigsel.SigmaSearchResult:
    if cfg.sigma_strategy == 'fixed':
        return sigsel.sigma_fixed(cfg.sigma_grid, layer)
    if cfg.sigma_strategy == 'max_separation':
        return sigsel.sigma_by_separation(R, labels)
    return sigsel.sigma_by_hsic_grid(R, gamma, cfg.sigma_grid or None, cfg.ism, jobs=cfg.jobs)


def train(ds: DataSet, cfg: Optional[TrainConfig] = None, standardizer: Optional[Standardizer] = None) -> NetworkModel:
    """
    Train a network on standardized data.

    Args:
        ds: Standardized training split with at least 2 classes
        cfg: Training settings
        standardizer: Transform that produced ds, stored with the model

    Returns:
        NetworkModel
    """
    cfg = cfg or TrainConfig()
    if ds.n_classes < 2:
        raise SingleClass("training needs at least 2 classes")

    labels = ds.labels
    gamma = build_gamma(labels, cfg.gamma_mode)
    K_Y = label_gram(labels, ds.n_classes)

    layers: List[LayerSpec] = []
    reached_at: Optional[int] = None
    R = ds.features
    for index in range(1, cfg.max_layers + 1):
        choice = _choose_sigma(R, labels, gamma, index, cfg)
        solved = choice.ism_result or ism.solve(R, gamma, choice.sigma, cfg.ism)
        if solved.degenerate:
            logger.warning("Layer %d: no positive eigenvalue, continuing with q=%d", index, solved.q)

        K = projected_gram(R, solved.W, choice.sigma)
        score = hsic_star(K, K_Y)
        gap = block_gap(K, labels)
        feature_map = rff.sample_rff(solved.q, choice.sigma, cfg.m_rff, layer_seed(cfg.seed, index))
        layer = LayerSpec(
            W=solved.W,
            sigma=choice.sigma,
            rff=feature_map,
            hsic_star=score,
            block_gap=gap,
            ism_iters=solved.iters,
            converged=solved.converged,
            degenerate=solved.degenerate,
            spectra=solved.spectra,
        )
        layers.append(layer)
        logger.info("Layer %d: sigma=%.4g, dims=%s, HSIC*=%.4f, block gap=%.3f, ISM iters=%d",
                    index, layer.sigma, layer.widths[:2], score, gap, solved.iters)

        R = apply_layer(layer, R)
        if reached_at is None and score > cfg.hsic_threshold:
            reached_at = index
        if reached_at is None:
            continue
        if gap >= cfg.min_block_gap:
            break
        if index - reached_at >= cfg.gap_patience:
            logger.warning("Layer %d: block gap %.3f still below %.3f after %d extra layers",
                           index, gap, cfg.min_block_gap, cfg.gap_patience)
            break
        logger.debug("Layer %d: HSIC* threshold met, block gap %.3f below %.3f",
                     index, gap, cfg.min_block_gap)

    centers = np.vstack([R[labels == c].mean(axis=0) for c in range(ds.n_classes)])
    model = NetworkModel(
        layers=layers,
        class_centers=centers,
        config=cfg,
        class_names=ds.class_names,
        standardizer=standardizer,
    )
    if reached_at is None:
        logger.warning("HSIC* stayed below %.3f for all %d layers", cfg.hsic_threshold, cfg.max_layers)
    if not model.monotone:
        logger.warning("HSIC* sequence is not monotone: %s", [round(h, 4) for h in model.hsic_sequence])
    return model


def forward(model: NetworkModel, X: np.ndarray, upto_layer: Optional[int] = None) -> np.ndarray:
    """
    Representation after the first upto_layer layers (all by default).

    Layer 0 is the standardized input itself.
    """
    upto = model.depth if upto_layer is None else upto_layer
    if not 0 <= upto <= model.depth:
        raise ValueError(f"upto_layer must be in [0, {model.depth}], got {upto}")

    R = np.asarray(X, dtype=np.float64)
    if R.ndim == 1:
        R = R.reshape(1, -1)
    if model.layers and R.shape[1] != model.layers[0].m_in:
        raise DimMismatch(f"model expects {model.layers[0].m_in} features, got {R.shape[1]}")

    for layer in model.layers[:upto]:
        R = apply_layer(layer, R)
    return R


def predict(model: NetworkModel, X: np.ndarray) -> np.ndarray:
    """Nearest class center in the final representation; ties go to the lowest class."""
    F = forward(model, X)
    # argmin returns the first minimum
    return np.argmin(cdist(F, model.class_centers, 'sqeuclidean'), axis=1)


def kernel_sequence(model: NetworkModel, X: np.ndarray) -> List[GramMatrix]:
    """
    Kernel matrices along the network.

    Entry 0 is the Gaussian kernel of X at the first layer's sigma; entry l
    is the kernel of R_{l-1} W_l at sigma_l.
    """
    X = np.asarray(X, dtype=np.float64)
    kernels = [gaussian_gram(X, model.layers[0].sigma)]
    R = X
    for layer in model.layers:
        kernels.append(projected_gram(R, layer.W, layer.sigma))
        R = apply_layer(layer, R)
    return kernels


# ============== Persistence ==============

def save(model: NetworkModel, model_dir: Path) -> None:
    """Write the model directory (manifest.json plus matrix CSVs)."""
    store = ModelStore(Path(model_dir))

    layer_entries = []
    for index, layer in enumerate(model.layers, start=1):
        base = store.layer_dir(index)
        layer_entries.append({
            'sigma': layer.sigma,
            'dims': list(layer.widths),
            'hsic_star': layer.hsic_star,
            'block_gap': layer.block_gap,
            'rff_seed': layer.rff.seed,
            'ism_iters': layer.ism_iters,
            'converged': layer.converged,
            'degenerate': layer.degenerate,
            'files': {
                'W': store.save_matrix(f'{base}/W.csv', layer.W),
                'omega': store.save_matrix(f'{base}/omega.csv', layer.rff.omega),
                'bias': store.save_matrix(f'{base}/bias.csv', layer.rff.bias),
            },
        })

    manifest = {
        'config': model.config.to_dict(),
        'class_names': list(model.class_names),
        'standardizer': model.standardizer.to_dict() if model.standardizer else None,
        'layers': layer_entries,
        'centers': store.save_matrix('centers.csv', model.class_centers),
        'monotone': model.monotone,
        'converged': model.converged,
    }
    store.save_manifest(manifest)


def load(model_dir: Path) -> NetworkModel:
    """Read a model directory, verifying the schema version and every checksum."""
    store = ModelStore(Path(model_dir))
    manifest = store.load_manifest()

    layers = []
    for entry in manifest['layers']:
        files = entry['files']
        W = store.load_matrix(files['W'])
        omega = store.load_matrix(files['omega'])
        bias = store.load_matrix(files['bias']).ravel()
        omega.flags.writeable = False
        bias.flags.writeable = False
        layers.append(LayerSpec(
            W=W,
            sigma=float(entry['sigma']),
            rff=RffMap(omega=omega, bias=bias, sigma=float(entry['sigma']), seed=int(entry['rff_seed'])),
            hsic_star=float(entry['hsic_star']),
            block_gap=entry.get('block_gap'),
            ism_iters=int(entry['ism_iters']),
            converged=bool(entry['converged']),
            degenerate=bool(entry['degenerate']),
        ))

    standardizer = manifest.get('standardizer')
    return NetworkModel(
        layers=layers,
        class_centers=store.load_matrix(manifest['centers']),
        config=TrainConfig.from_dict(manifest['config']),
        class_names=tuple(manifest['class_names']),
        standardizer=Standardizer.from_dict(standardizer) if standardizer else None,
    )
