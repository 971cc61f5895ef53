"""Information Imbalance between representation spaces.

    delta(A -> B) = 2 / N^2 * sum_i rank_B(i, nn_A(i))

where nn_A(i) is i's nearest neighbour in A and rank_B(i, j) is the rank of
j among i's neighbours in B (1 = nearest). Values near 2/N mean A's
neighbourhoods predict B's exactly; values near 1 mean they carry no
information about B. The statistic is deliberately not symmetrised.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import MismatchedN, MTooLarge, ValidationError
from .neighbors import cross_ranks, cross_ranks_many, first_neighbors, resolve_workers
from .tensor_io import PointCloud

DEFAULT_THRESHOLD = 0.1
# display levels of the cross-model grid; anything above the last is "hidden"
DISPLAY_BINS = (0.033, 0.066, 0.1)


@dataclass(frozen=True)
class ImbalanceResult:
    delta_ab: float
    delta_ba: float
    n: int
    subsample_seed: int | None = None


@dataclass(frozen=True, eq=False)
class ScopeProfile:
    scope: np.ndarray
    threshold: float = DEFAULT_THRESHOLD


def _check_same_n(clouds):
    ns = {c.n_points for c in clouds}
    if len(ns) != 1:
        raise MismatchedN(f"point counts differ: {sorted(ns)}")
    n = ns.pop()
    if n < 2:
        raise ValidationError("need at least 2 points")
    return n


def _from_ranks(ranks, n):
    return 2.0 * float(np.sum(ranks)) / (n * n)


def delta(a: PointCloud, b: PointCloud, workers=None) -> float:
    n = _check_same_n([a, b])
    return _from_ranks(cross_ranks(b, first_neighbors(a, workers=workers), workers), n)


def imbalance_pair(a: PointCloud, b: PointCloud, workers=None, subsample_seed=None) -> ImbalanceResult:
    n = _check_same_n([a, b])
    return ImbalanceResult(delta(a, b, workers), delta(b, a, workers), n, subsample_seed)


def delta_matrix(layers, workers=None) -> np.ndarray:
    """Full directional matrix M[i, j] = delta(layer_i -> layer_j), diagonal 2/N."""
    return cross_delta(layers, layers, workers, _same=True)


def cross_delta(sources, targets, workers=None, _same=False) -> np.ndarray:
    """M[i, j] = delta(sources[i] -> targets[j]) for every pair.

    Each target's screen is built once and shared by all sources; per-cell
    values are identical to calling :func:`delta` on the pair.
    """
    sources, targets = list(sources), list(targets)
    if not sources or not targets:
        raise ValidationError("need at least one layer on each side")
    n = _check_same_n(sources + targets)
    workers = resolve_workers(workers)
    nn = [first_neighbors(s, workers=workers) for s in sources]

    def column(j):
        # inner work single-threaded; parallelism is over columns
        ranks = cross_ranks_many(targets[j], nn, workers=1)
        return [_from_ranks(r, n) for r in ranks]

    if workers == 1:
        cols = [column(j) for j in range(len(targets))]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            cols = list(pool.map(column, range(len(targets))))
    m = np.array(cols).T
    if _same:
        np.fill_diagonal(m, 2.0 / n)
    return m


def profile_first_last(matrix) -> dict[str, np.ndarray]:
    """Per-layer imbalances against the first and last layer.

    Returns ``to_first`` = delta(l_i -> l_first), ``to_last`` = delta(l_i -> l_last)
    and ``from_first`` = delta(l_first -> l_i). (from_first, to_last) is the
    information-plane trajectory.
    """
    m = np.asarray(matrix)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 2:
        raise ValidationError("need a square matrix with at least 2 layers")
    return {"to_first": m[:, 0].copy(), "to_last": m[:, -1].copy(), "from_first": m[0, :].copy()}


def forward_scope(matrix, threshold: float = DEFAULT_THRESHOLD) -> ScopeProfile:
    """For each layer n, how many contiguous following layers it predicts within ``threshold``."""
    m = np.asarray(matrix)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValidationError("need a square matrix")
    L = m.shape[0]
    scope = np.zeros(L, dtype=np.int64)
    for i in range(L):
        c = 0
        while i + c + 1 < L and m[i, i + c + 1] <= threshold:
            c += 1
        scope[i] = c
    return ScopeProfile(scope, float(threshold))


def display_bin(values) -> np.ndarray:
    """Index of the display level: 0 (<=0.033), 1 (<=0.066), 2 (<=0.1), 3 (>0.1)."""
    return np.searchsorted(np.array(DISPLAY_BINS), np.asarray(values), side="left")


def cross_model_grid(layers_a, layers_b, workers=None) -> dict[str, np.ndarray]:
    """Both directions for every (a_i, b_j) pair, plus their display bins."""
    ab = cross_delta(layers_a, layers_b, workers)
    ba = cross_delta(layers_b, layers_a, workers).T
    return {"ab": ab, "ba": ba, "bin_ab": display_bin(ab), "bin_ba": display_bin(ba)}


def subsample_indices(n: int, m: int, seed) -> np.ndarray:
    if m > n:
        raise MTooLarge(f"m={m} exceeds N={n}")
    if m < 2:
        raise ValidationError("m must be at least 2")
    if m == n:
        return np.arange(n)
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(n, size=m, replace=False))


def subsample(layers, m: int, seed) -> list[PointCloud]:
    """Apply one seeded index subset to every layer so items stay aligned."""
    layers = list(layers)
    n = _check_same_n(layers)
    if m == n:
        return layers
    rows = subsample_indices(n, m, seed)
    return [c.take(rows) for c in layers]
