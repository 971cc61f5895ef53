"""GRIDE intrinsic-dimension estimation and scale analysis.

For each point the ratio mu = r_2k / r_k of its 2k-th to k-th neighbour
distance follows, under local uniformity, the density

    f(mu | d) = d (mu^d - 1)^(k-1) / (B(k, k) mu^(d(2k-1)+1)),   mu > 1

and the ID is the maximiser in d of the summed log-density. k = 1 is the
TwoNN estimator, whose maximiser has the closed form n / sum(ln mu).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateSample,
    EmptySample,
    NoInteriorMaximum,
    NonPositiveD,
    OrderTooSmall,
    ScanTooShort,
    ValidationError,
    WrongScale,
)
from .neighbors import NeighborTable, resolve_workers

DEGENERATE_EPS = 1e-12
MAX_DROP_FRACTION = 0.01
D_MIN = 1e-3
D_TOL = 1e-6
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True, eq=False)
class RatioSample:
    k: int
    mu: np.ndarray
    n_dropped: int = 0

    @property
    def n(self) -> int:
        return len(self.mu)


@dataclass(frozen=True)
class IdEstimate:
    d_hat: float
    k: int
    n_used: int
    loglik: float
    n_dropped: int = 0


@dataclass
class IdProfile:
    model: str = ""
    corpus: str = ""
    entries: list[tuple[int, IdEstimate]] = field(default_factory=list)

    @property
    def layers(self) -> list[int]:
        return [layer for layer, _ in self.entries]

    @property
    def values(self) -> np.ndarray:
        return np.array([e.d_hat for _, e in self.entries])


def compute_ratios(table: NeighborTable, k: int, max_drop_fraction: float = MAX_DROP_FRACTION) -> RatioSample:
    if k < 1:
        raise ValidationError("k must be a positive integer")
    if table.order < 2 * k:
        raise OrderTooSmall(f"table order {table.order} < 2k = {2 * k}")
    with np.errstate(divide="ignore", invalid="ignore"):
        mu = table.dist[:, 2 * k - 1] / table.dist[:, k - 1]
    keep = mu > 1.0 + DEGENERATE_EPS
    n_dropped = int(len(mu) - np.count_nonzero(keep))
    if n_dropped > max_drop_fraction * len(mu):
        raise DegenerateSample(f"k={k}: {n_dropped} of {len(mu)} points have r_2k == r_k")
    return RatioSample(k, mu[keep], n_dropped)


def _log_mu_pow_minus_one(d, log_mu):
    """ln(mu^d - 1) with mu^d = exp(d ln mu), without overflow for large d ln mu."""
    t = d * log_mu
    out = np.empty_like(t)
    small = t <= 1.0
    out[small] = np.log(np.expm1(t[small]))
    big = ~small
    out[big] = t[big] + np.log1p(-np.exp(-t[big]))
    return out


def _loglik(d, k, log_mu):
    terms = math.log(d) - (d * (2 * k - 1) + 1) * log_mu
    if k > 1:
        terms = terms + (k - 1) * _log_mu_pow_minus_one(d, log_mu)
    log_beta = 2.0 * math.lgamma(k) - math.lgamma(2 * k)
    return float(np.sum(terms)) - len(log_mu) * log_beta


def gride_loglik(sample: RatioSample, d: float) -> float:
    if not d > 0:
        raise NonPositiveD(f"d={d} must be positive")
    return _loglik(float(d), sample.k, np.log(sample.mu))


def gride_mle(sample: RatioSample, d_max: float) -> IdEstimate:
    """Maximum-likelihood dimension on [1e-3, d_max].

    A geometric grid 1e-3 * 2^j brackets the maximum, then golden-section
    search narrows the bracket to 1e-6. A maximum sitting on the boundary of
    the search range raises NoInteriorMaximum instead of being clamped.
    """
    if sample.n == 0:
        raise EmptySample("no ratios to fit")
    if d_max < 1:
        raise ValidationError("d_max must be >= 1")
    log_mu = np.log(sample.mu)
    k = sample.k

    def f(d):
        return _loglik(d, k, log_mu)

    grid = [D_MIN]
    while grid[-1] * 2.0 < d_max:
        grid.append(grid[-1] * 2.0)
    grid.append(float(d_max))
    vals = [f(g) for g in grid]
    j = int(np.argmax(vals))
    lo, hi = grid[max(j - 1, 0)], grid[min(j + 1, len(grid) - 1)]
    x1 = hi - _INVPHI * (hi - lo)
    x2 = lo + _INVPHI * (hi - lo)
    f1, f2 = f(x1), f(x2)
    while hi - lo > D_TOL:
        if f1 < f2:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _INVPHI * (hi - lo)
            f2 = f(x2)
        else:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _INVPHI * (hi - lo)
            f1 = f(x1)
    d_hat = 0.5 * (lo + hi)
    if d_hat - D_MIN <= 2 * D_TOL:
        raise NoInteriorMaximum(f"likelihood maximum at lower bound d={D_MIN}")
    if d_max - d_hat <= 2 * D_TOL:
        raise NoInteriorMaximum(f"likelihood maximum at upper bound d_max={d_max}")
    return IdEstimate(d_hat, k, sample.n, f(d_hat), sample.n_dropped)


def twonn_closed_form(sample: RatioSample) -> IdEstimate:
    if sample.k != 1:
        raise WrongScale(f"TwoNN needs k=1, got k={sample.k}")
    if sample.n == 0:
        raise EmptySample("no ratios to fit")
    d_hat = sample.n / float(np.sum(np.log(sample.mu)))
    return IdEstimate(d_hat, 1, sample.n, gride_loglik(sample, d_hat), sample.n_dropped)


def estimate_id(table: NeighborTable, k: int, d_max: float, estimator: str = "gride") -> IdEstimate:
    sample = compute_ratios(table, k)
    if estimator == "twonn":
        return twonn_closed_form(sample)
    if estimator != "gride":
        raise ValidationError(f"unknown estimator {estimator!r}")
    return gride_mle(sample, d_max)


def default_scales(n_points: int, order: int | None = None) -> list[int]:
    """Powers of two up to 2^floor(log2((N-1)/2)), further capped by the table order."""
    cap = (n_points - 1) // 2
    if order is not None:
        cap = min(cap, order // 2)
    if cap < 1:
        return []
    return [2**j for j in range(int(math.log2(cap)) + 1)]


def scale_scan(table: NeighborTable, k_values=None, d_max: float | None = None, workers=None) -> list[tuple[int, IdEstimate]]:
    if k_values is None:
        k_values = default_scales(table.n_points, table.order)
    k_values = [int(k) for k in k_values]
    if not k_values:
        raise ScanTooShort("no scales to scan")
    if 2 * max(k_values) > table.order:
        raise OrderTooSmall(f"table order {table.order} < 2 * max(k) = {2 * max(k_values)}")
    if d_max is None:
        raise ValidationError("d_max is required (use the ambient dimension)")

    def one(k):
        return k, gride_mle(compute_ratios(table, k), d_max)

    workers = resolve_workers(workers)
    if workers == 1:
        return [one(k) for k in k_values]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, k_values))


def relative_changes(scan) -> np.ndarray:
    d = np.array([est.d_hat for _, est in scan])
    return np.abs(d[1:] - d[:-1]) / d[:-1]


def _argmin_last(values):
    values = np.asarray(values)
    return int(len(values) - 1 - np.argmin(values[::-1]))


def select_scale(scan) -> int:
    """Plateau heuristic: the k whose step to the next scale changes d_hat least.

    Ties go to the larger k. Only the left end of each consecutive pair is a
    candidate, so the largest scanned k is never chosen (it has no successor
    to confirm stability).
    """
    if len(scan) < 3:
        raise ScanTooShort(f"need >= 3 scales, got {len(scan)}")
    return scan[_argmin_last(relative_changes(scan))][0]


def select_common_scale(scans) -> int:
    """One k for a whole stack of layers: the plateau rule on layer-averaged relative change."""
    scans = list(scans)
    if not scans:
        raise ScanTooShort("no scans")
    ks = [k for k, _ in scans[0]]
    for s in scans:
        if [k for k, _ in s] != ks:
            raise ValidationError("scans use different scales")
    if len(ks) < 3:
        raise ScanTooShort(f"need >= 3 scales, got {len(ks)}")
    mean_change = np.mean([relative_changes(s) for s in scans], axis=0)
    return ks[_argmin_last(mean_change)]
