"""
Shared fixtures.
"""
import numpy as np
import pytest

from kdn.services.dataio import DataSet


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def balanced_labels():
    """Two classes of two samples."""
    return np.array([0, 0, 1, 1])


def make_blobs(n_per_class=20, separation=10.0, noise=0.3, seed=0):
    """Two Gaussian blobs centered at (-separation/2, 0) and (separation/2, 0)."""
    rng = np.random.default_rng(seed)
    left = rng.normal(0.0, noise, (n_per_class, 2)) + [-separation / 2, 0.0]
    right = rng.normal(0.0, noise, (n_per_class, 2)) + [separation / 2, 0.0]
    labels = np.repeat([0, 1], n_per_class)
    return DataSet(np.vstack((left, right)), labels, ('left', 'right'))


@pytest.fixture
def blobs():
    return make_blobs()


@pytest.fixture
def toy_csv(tmp_path):
    path = tmp_path / 'toy.csv'
    path.write_text("x1,x2,label\n1,2,a\n3,4,a\n5,6,b\n7,8,b\n")
    return path
