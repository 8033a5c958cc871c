"""
Plain-text PGM (P2) writer for kernel heat maps.
"""
from pathlib import Path

import numpy as np

MAX_GRAY = 255


def kernel_to_pixels(values: np.ndarray) -> np.ndarray:
    """Kernel value 0 -> 255 (white), 1 -> 0 (dark); clipped to [0, 1]."""
    clipped = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)
    return np.rint(MAX_GRAY * (1.0 - clipped)).astype(np.int64)


def write_pgm(path: Path, values: np.ndarray) -> None:
    """
    Write a matrix of kernel values as a grayscale P2 image.

    Args:
        path: Destination file
        values: 2-D matrix with entries expected in [0, 1]
    """
    pixels = kernel_to_pixels(values)
    if pixels.ndim != 2:
        raise ValueError(f"PGM needs a 2-D matrix, got shape {pixels.shape}")

    height, width = pixels.shape
    lines = ['P2', f'{width} {height}', str(MAX_GRAY)]
    lines.extend(' '.join(str(p) for p in row) for row in pixels)
    Path(path).write_text('\n'.join(lines) + '\n')


def read_pgm(path: Path) -> np.ndarray:
    """Read a P2 image written by write_pgm."""
    tokens = Path(path).read_text().split()
    if not tokens or tokens[0] != 'P2':
        raise ValueError(f"{path} is not a plain PGM file")
    width, height = int(tokens[1]), int(tokens[2])
    return np.array(tokens[4:4 + width * height], dtype=np.int64).reshape(height, width)
