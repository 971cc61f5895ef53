"""Exact Euclidean nearest neighbours and cross-space ranks.

Distances are *defined* as ``np.sum((x_j - x_i) ** 2)`` over the raw
coordinates, reduced row-wise in numpy's fixed pairwise order. Evaluating
that for all pairs is too slow at D ~ 4096, so candidates are first
screened with a Gram-matrix expansion on mean-centred data (one BLAS call
per block of query rows) and then recomputed exactly. The screen carries a
worst-case rounding bound, so it can only over-select; the final table is
identical to a full pairwise sort regardless of BLAS threading or the
number of workers.

Ties in distance are broken by ascending point index everywhere.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DuplicatePoints, IndexOutOfRange, KTooLarge, ValidationError
from .tensor_io import PointCloud

THREADS_ENV = "MANIFOLD_PROFILER_THREADS"
_EPS = np.finfo(np.float64).eps
# budget (in float64 elements) for one temporary block
_BLOCK_ELEMS = 1 << 22


def resolve_workers(workers=None) -> int:
    """Worker count: explicit argument, then $MANIFOLD_PROFILER_THREADS, then cpu count."""
    if workers is None:
        env = os.environ.get(THREADS_ENV)
        workers = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(workers))


def _map_blocks(fn, blocks, workers):
    """Run ``fn`` over a fixed partition of row blocks; output order is block order."""
    workers = resolve_workers(workers)
    if workers == 1 or len(blocks) == 1:
        return [fn(b) for b in blocks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, blocks))


def _row_blocks(n, width):
    step = max(1, min(n, _BLOCK_ELEMS // max(width, 1)))
    return [np.arange(s, min(n, s + step)) for s in range(0, n, step)]


def exact_sq_dists(X, rows, cols):
    """Exact squared distances between ``X[rows[b]]`` and ``X[cols[b, w]]``.

    ``cols`` is a (B, W) index array; returns a (B, W) array. Every value is
    reduced over a contiguous length-D row, so results do not depend on how
    the pairs are batched.
    """
    rows = np.asarray(rows)
    cols = np.asarray(cols)
    b, w = cols.shape
    d = X.shape[1]
    out = np.empty((b, w))
    step = max(1, _BLOCK_ELEMS // max(w * d, 1))
    for s in range(0, b, step):
        sl = slice(s, s + step)
        diff = (X[cols[sl]] - X[rows[sl]][:, None, :]).reshape(-1, d)
        out[sl] = np.sum(diff * diff, axis=1).reshape(-1, w)
    return out


class _Screen:
    """Approximate squared distances from a Gram expansion, with an error bound.

    ``tol(rows)[b]`` bounds |approx - exact| for every column of row ``rows[b]``
    (Gram rounding, centring rounding, and the rounding of the exact
    reduction itself), using a generous constant on the gamma_D bound.
    """

    def __init__(self, X):
        self.X = X
        c = X - X.mean(axis=0)
        self.c = c
        self.norms = np.einsum("ij,ij->i", c, c)
        self.nmax = float(self.norms.max())
        self.slack = (8 * X.shape[1] + 64) * _EPS

    def block(self, rows):
        g = self.c[rows] @ self.c.T
        g *= -2.0
        g += self.norms[rows, None]
        g += self.norms[None, :]
        return g

    def tol(self, rows):
        return self.slack * (self.norms[rows] + self.nmax) + 1e-300


@dataclass(frozen=True, eq=False)
class NeighborTable:
    """Per point, ascending neighbour distances ``dist`` and indices ``idx``.

    ``dist[i, j]`` is the distance from point i to its (j+1)-th nearest
    neighbour; the point itself is never listed.
    """

    dist: np.ndarray
    idx: np.ndarray

    @property
    def order(self) -> int:
        return self.dist.shape[1]

    @property
    def n_points(self) -> int:
        return self.dist.shape[0]


def build_neighbor_table(cloud: PointCloud, k_max: int, allow_duplicates=False, workers=None) -> NeighborTable:
    X = cloud.data
    n = X.shape[0]
    if n < 2:
        raise ValidationError("need at least 2 points")
    if k_max < 1 or k_max > n - 1:
        raise KTooLarge(f"k_max={k_max} must lie in [1, N-1={n - 1}]")

    screen = _Screen(X)
    blocks = _row_blocks(n, n)

    def run(rows):
        g = screen.block(rows)
        local = np.arange(len(rows))
        g[local, rows] = np.inf
        kth = np.partition(g, k_max - 1, axis=1)[:, k_max - 1]
        # any true top-k point has approx <= kth + 2 tol
        thr = kth + 2.0 * screen.tol(rows)
        width = int((g <= thr[:, None]).sum(axis=1).max())
        width = min(max(width, k_max), n - 1)
        if width < n - 1:
            cand = np.argpartition(g, width - 1, axis=1)[:, :width]
        else:
            cand = np.argsort(g, axis=1, kind="stable")[:, : n - 1]
        exact = exact_sq_dists(X, rows, cand)
        order = np.lexsort((cand, exact), axis=-1)[:, :k_max]
        return (
            np.take_along_axis(exact, order, axis=1),
            np.take_along_axis(cand, order, axis=1),
        )

    parts = _map_blocks(run, blocks, workers)
    sq = np.concatenate([p[0] for p in parts])
    idx = np.concatenate([p[1] for p in parts]).astype(np.int64)

    if not allow_duplicates:
        zero_rows, zero_cols = np.nonzero(sq == 0.0)
        if len(zero_rows):
            pairs = sorted({(min(i, j), max(i, j)) for i, j in zip(zero_rows, idx[zero_rows, zero_cols])})
            raise DuplicatePoints([(int(i), int(j)) for i, j in pairs])
    dist = np.sqrt(sq)
    dist.setflags(write=False)
    idx.setflags(write=False)
    return NeighborTable(dist, idx)


def first_neighbors(cloud: PointCloud, allow_duplicates=False, workers=None) -> np.ndarray:
    return build_neighbor_table(cloud, 1, allow_duplicates, workers).idx[:, 0]


def _rank_from_exact(d_row, anchor, target):
    others = np.ones(len(d_row), dtype=bool)
    others[[anchor, target]] = False
    thr = d_row[target]
    closer = (d_row < thr) | ((d_row == thr) & (np.arange(len(d_row)) < target))
    return 1 + int(np.count_nonzero(closer & others))


def cross_rank(anchor: int, target: int, cloud_b: PointCloud) -> int:
    """Rank of ``target`` among the neighbours of ``anchor`` in ``cloud_b`` (1 = nearest)."""
    n = cloud_b.n_points
    for name, v in (("anchor", anchor), ("target", target)):
        if not 0 <= v < n:
            raise IndexOutOfRange(f"{name}={v} outside [0, {n})")
    if anchor == target:
        raise IndexOutOfRange("anchor and target must differ")
    X = cloud_b.data
    d_row = exact_sq_dists(X, [anchor], np.arange(n)[None, :])[0]
    return _rank_from_exact(d_row, anchor, target)


def cross_ranks(cloud_b: PointCloud, targets, workers=None) -> np.ndarray:
    """Ranks in ``cloud_b`` of ``targets[i]`` with respect to anchor ``i``, for every i."""
    return cross_ranks_many(cloud_b, [targets], workers)[0]


def cross_ranks_many(cloud_b: PointCloud, targets_list, workers=None) -> list[np.ndarray]:
    """Vectorised ``cross_rank`` for several target assignments sharing one space.

    The Gram screen of ``cloud_b`` is computed once per row block and reused
    for every target vector, which is what makes a full layer-by-layer
    imbalance matrix affordable.
    """
    X = cloud_b.data
    n = X.shape[0]
    targets_list = [np.asarray(t, dtype=np.int64) for t in targets_list]
    for t in targets_list:
        if t.shape != (n,):
            raise ValidationError(f"targets must have length {n}")
        if (t < 0).any() or (t >= n).any():
            raise IndexOutOfRange("target index out of range")
        if (t == np.arange(n)).any():
            raise IndexOutOfRange("anchor and target must differ")

    screen = _Screen(X)
    blocks = _row_blocks(n, n)

    def run(rows):
        g = screen.block(rows)
        local = np.arange(len(rows))
        g[local, rows] = np.inf
        tol = screen.tol(rows)[:, None]
        out = []
        for t in targets_list:
            tr = t[rows]
            thr = exact_sq_dists(X, rows, tr[:, None])[:, 0][:, None]
            gg = g.copy()
            gg[local, tr] = np.inf
            sure = np.count_nonzero(gg < thr - tol, axis=1)
            bi, bj = np.nonzero(np.abs(gg - thr) <= tol)
            extra = np.zeros(len(rows), dtype=np.int64)
            if len(bi):
                e = exact_sq_dists(X, rows[bi], bj[:, None])[:, 0]
                th = thr[bi, 0]
                closer = (e < th) | ((e == th) & (bj < tr[bi]))
                np.add.at(extra, bi[closer], 1)
            out.append(1 + sure + extra)
        return out

    parts = _map_blocks(run, blocks, workers)
    return [np.concatenate([p[m] for p in parts]) for m in range(len(targets_list))]
