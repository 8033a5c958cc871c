"""
Dataset ingestion, synthetic generators, standardization and fold plans.
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Optional, Tuple

import numpy as np
import pandas as pd
from sklearn.model_selection import StratifiedKFold
from sklearn.preprocessing import StandardScaler

from kdn.errors import EmptyClass, TooFewSamples
from kdn.utils.csv_parser import LabelColumn, load_table, write_table

logger = logging.getLogger(__name__)

SYNTHETIC_NAMES = ('spiral', 'random', 'adversarial')


def _frozen(array: np.ndarray, dtype) -> np.ndarray:
    out = np.array(array, dtype=dtype, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class DataSet:
    """Feature matrix with dense integer labels 0..C-1."""
    features: np.ndarray
    labels: np.ndarray
    class_names: Tuple[str, ...] = ()
    feature_names: Tuple[str, ...] = ()

    def __post_init__(self):
        features = _frozen(self.features, np.float64)
        if features.ndim != 2:
            raise ValueError(f"features must be n x d, got shape {features.shape}")
        labels = _frozen(self.labels, np.int64)
        if labels.shape != (features.shape[0],):
            raise ValueError(f"expected {features.shape[0]} labels, got {labels.shape}")
        if labels.size and labels.min() < 0:
            raise ValueError("labels must be non-negative")

        n_classes = max(len(self.class_names), int(labels.max()) + 1 if labels.size else 0)
        counts = np.bincount(labels, minlength=n_classes)
        if (counts == 0).any():
            empty = [int(c) for c in np.flatnonzero(counts == 0)]
            raise EmptyClass(f"classes {empty} have no samples")

        class_names = self.class_names or tuple(str(c) for c in range(n_classes))
        feature_names = self.feature_names or tuple(f'x{j}' for j in range(features.shape[1]))

        object.__setattr__(self, 'features', features)
        object.__setattr__(self, 'labels', labels)
        object.__setattr__(self, 'class_names', tuple(class_names))
        object.__setattr__(self, 'feature_names', tuple(feature_names))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    @property
    def n_per_class(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)

    @property
    def one_hot(self) -> np.ndarray:
        return np.eye(self.n_classes)[self.labels]

    def subset(self, index: np.ndarray) -> 'DataSet':
        """Rows selected by index; class names are kept so label ids stay stable."""
        return DataSet(self.features[index], self.labels[index], self.class_names, self.feature_names)

    def with_features(self, features: np.ndarray) -> 'DataSet':
        return DataSet(features, self.labels, self.class_names, self.feature_names)


@dataclass(frozen=True)
class Standardizer:
    """Per-feature (x - mean) / scale record fitted on a training split."""
    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, features: np.ndarray) -> 'Standardizer':
        scaler = StandardScaler().fit(np.asarray(features, dtype=np.float64))
        # scale_ is 1 for constant features, which maps them to zeros
        return cls(mean=_frozen(scaler.mean_, np.float64), scale=_frozen(scaler.scale_, np.float64))

    def apply(self, features: np.ndarray) -> np.ndarray:
        return (np.asarray(features, dtype=np.float64) - self.mean) / self.scale

    def to_dict(self) -> dict:
        return {'mean': self.mean.tolist(), 'scale': self.scale.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> 'Standardizer':
        return cls(mean=_frozen(data['mean'], np.float64), scale=_frozen(data['scale'], np.float64))


@dataclass(frozen=True)
class FoldPlan:
    """Stratified assignment of every sample to one of k folds."""
    k: int
    assignment: np.ndarray
    seed: int

    def split(self, fold: int) -> Tuple[np.ndarray, np.ndarray]:
        """(train indices, test indices) for one fold."""
        test = np.flatnonzero(self.assignment == fold)
        train = np.flatnonzero(self.assignment != fold)
        return train, test

    def __iter__(self) -> Iterator[Tuple[np.ndarray, np.ndarray]]:
        for fold in range(self.k):
            yield self.split(fold)


# ============== Ingestion ==============

def load_csv(path: Path, label_column: LabelColumn) -> DataSet:
    """
    Load a labelled CSV dataset.

    Labels are re-encoded densely as 0..C-1 in order of first appearance.

    Args:
        path: CSV file with a header row
        label_column: Label column name or 0-based index

    Returns:
        DataSet with d = columns - 1
    """
    features, raw_labels = load_table(Path(path), label_column)

    codes, uniques = pd.factorize(raw_labels, sort=False)
    class_names = tuple(str(u) for u in uniques)

    ds = DataSet(
        features=features.to_numpy(dtype=np.float64),
        labels=codes,
        class_names=class_names,
        feature_names=tuple(features.columns),
    )
    logger.info("Loaded %s: n=%d, d=%d, C=%d", path, ds.n, ds.d, ds.n_classes)
    return ds


def write_csv(ds: DataSet, path: Path, label_name: str = 'label') -> None:
    """Write a DataSet back as CSV with the original class names."""
    names = [ds.class_names[c] for c in ds.labels]
    write_table(Path(path), ds.features, names, list(ds.feature_names), label_name)


def standardize(ds: DataSet) -> Tuple[DataSet, Standardizer]:
    """
    Center every feature to mean 0 and scale to standard deviation 1.

    Args:
        ds: Training data (n >= 2)

    Returns:
        (standardized DataSet, transform record for held-out rows)
    """
    if ds.n < 2:
        raise TooFewSamples(f"standardize needs at least 2 samples, got {ds.n}")
    transform = Standardizer.fit(ds.features)
    return ds.with_features(transform.apply(ds.features)), transform


# ============== Synthetic data ==============

def gen_random(n: int, d: int = 2, seed: int = 0) -> DataSet:
    """Standard normal features with a random half/half binary labelling."""
    if n % 2 or n < 2:
        raise ValueError(f"gen_random needs an even n >= 2, got {n}")
    if d < 1:
        raise ValueError(f"gen_random needs d >= 1, got {d}")

    rng = np.random.default_rng(seed)
    features = rng.standard_normal((n, d))
    labels = rng.permutation(np.repeat([0, 1], n // 2))
    return DataSet(features, labels, ('0', '1'))


def gen_adversarial(n_pairs: int, noise: float = 0.01, seed: int = 0) -> DataSet:
    """
    Near-duplicate pairs with opposite labels.

    X1 is uniform on the unit square, X2 = X1 + noise * N(0, I); class 0 holds
    X1 and class 1 holds X2, so cross-class neighbours are far closer than
    same-class ones.
    """
    if n_pairs < 1:
        raise ValueError(f"gen_adversarial needs n_pairs >= 1, got {n_pairs}")

    rng = np.random.default_rng(seed)
    x1 = rng.random((n_pairs, 2))
    x2 = x1 + noise * rng.standard_normal((n_pairs, 2))
    features = np.vstack((x1, x2))
    labels = np.concatenate((np.zeros(n_pairs, dtype=np.int64), np.ones(n_pairs, dtype=np.int64)))
    return DataSet(features, labels, ('0', '1'))


def gen_spiral(n_per_class: int, classes: int = 3, noise: float = 0.1, seed: int = 0) -> DataSet:
    """
    Interleaved spiral arms.

    Class c sits at radius t and angle 2t + 2*pi*c/classes with t uniform on
    [0.5, 3.0], plus isotropic Gaussian noise.
    """
    if n_per_class < 10:
        raise ValueError(f"gen_spiral needs n_per_class >= 10, got {n_per_class}")

    rng = np.random.default_rng(seed)
    blocks = []
    for c in range(classes):
        t = rng.uniform(0.5, 3.0, n_per_class)
        angle = 2.0 * t + 2.0 * np.pi * c / classes
        arm = np.column_stack((t * np.cos(angle), t * np.sin(angle)))
        blocks.append(arm + noise * rng.standard_normal((n_per_class, 2)))

    features = np.vstack(blocks)
    labels = np.repeat(np.arange(classes), n_per_class)
    return DataSet(features, labels, tuple(str(c) for c in range(classes)))


def make_synthetic(name: str, n: Optional[int] = None, seed: int = 0, noise: Optional[float] = None) -> DataSet:
    """
    Build one of the named synthetic datasets.

    Args:
        name: spiral, random or adversarial
        n: Total sample count (defaults: spiral 300, others 80)
        seed: Generator seed
        noise: Optional noise override

    Returns:
        DataSet
    """
    name = name.strip().lower()
    if name == 'spiral':
        total = n or 300
        return gen_spiral(total // 3, noise=0.1 if noise is None else noise, seed=seed)
    if name == 'random':
        return gen_random(n or 80, 2, seed=seed)
    if name == 'adversarial':
        return gen_adversarial((n or 80) // 2, noise=0.01 if noise is None else noise, seed=seed)
    raise ValueError(f"Unknown synthetic dataset '{name}', expected one of {SYNTHETIC_NAMES}")


# ============== Folds ==============

def make_folds(ds: DataSet, k: int = 10, seed: int = 0) -> FoldPlan:
    """
    Stratified k-fold assignment.

    Args:
        ds: Dataset to split
        k: Fold count (>= 2)
        seed: Shuffle seed

    Returns:
        FoldPlan where each fold's per-class counts are within 1 of proportional
    """
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    small = [int(c) for c in np.flatnonzero(ds.n_per_class < k)]
    if small:
        raise TooFewSamples(f"classes {small} have fewer than k={k} samples")

    splitter = StratifiedKFold(n_splits=k, shuffle=True, random_state=int(seed) % (2 ** 32))
    assignment = np.empty(ds.n, dtype=np.int64)
    for fold, (_, test) in enumerate(splitter.split(ds.features, ds.labels)):
        assignment[test] = fold

    return FoldPlan(k=k, assignment=_frozen(assignment, np.int64), seed=int(seed))
