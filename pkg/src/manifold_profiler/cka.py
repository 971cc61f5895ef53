"""Linear centered kernel alignment."""

from __future__ import annotations

import numpy as np

from .errors import MismatchedN
from .tensor_io import PointCloud


def _centered(cloud):
    x = cloud.data
    return x - x.mean(axis=0)


def _cka_centered(x, y):
    n = x.shape[0]
    if n <= max(x.shape[1], y.shape[1]):
        # N x N route
        kx, ky = x @ x.T, y @ y.T
        cross = float(np.sum(kx * ky))
        nx, ny = np.linalg.norm(kx), np.linalg.norm(ky)
    else:
        cross = float(np.linalg.norm(y.T @ x) ** 2)
        nx, ny = np.linalg.norm(x.T @ x), np.linalg.norm(y.T @ y)
    if nx == 0 or ny == 0:
        return 0.0
    return cross / (nx * ny)


def linear_cka(a: PointCloud, b: PointCloud) -> float:
    """||Y^T X||_F^2 / (||X^T X||_F ||Y^T Y||_F) on column-centred X, Y.

    Uses whichever of the D x D or N x N Gram forms is smaller. Returns 0 when
    either centred matrix is identically zero.
    """
    if a.n_points != b.n_points:
        raise MismatchedN(f"N differs: {a.n_points} vs {b.n_points}")
    return _cka_centered(_centered(a), _centered(b))


def cka_grid(layers_a, layers_b) -> np.ndarray:
    layers_a, layers_b = list(layers_a), list(layers_b)
    ns = {c.n_points for c in layers_a + layers_b}
    if len(ns) > 1:
        raise MismatchedN(f"point counts differ: {sorted(ns)}")
    ca = [_centered(c) for c in layers_a]
    cb = [_centered(c) for c in layers_b]
    return np.array([[_cka_centered(x, y) for y in cb] for x in ca])
