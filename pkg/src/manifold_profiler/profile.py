"""ID-peak delimitation and rank correlation with model quality."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import DegenerateVariance, LengthMismatch, MissingSurprisal, NoInflection, TooShort, ValidationError

SEARCH_FRACTION = 2.0 / 3.0
MIN_LAYERS = 4
EXACT_PERMUTATION_MAX_N = 8


@dataclass(frozen=True)
class PeakSpan:
    onset: int
    argmax: int
    end: int
    max_value: float
    relative_onset: float
    # True when no inflection was found and ``end`` fell back to the last layer
    flagged: bool = False


def smooth3(curve) -> np.ndarray:
    """3-point moving average; the two end points are left as they are."""
    f = np.asarray(curve, dtype=float)
    out = f.copy()
    if len(f) >= 3:
        out[1:-1] = (f[:-2] + f[1:-1] + f[2:]) / 3.0
    return out


def second_differences(f) -> np.ndarray:
    """s[i] = f[i+1] - 2 f[i] + f[i-1]; entries 0 and L-1 are undefined (nan)."""
    f = np.asarray(f, dtype=float)
    s = np.full(len(f), np.nan)
    s[1:-1] = f[2:] - 2.0 * f[1:-1] + f[:-2]
    return s


def detect_peak(curve, search_fraction: float = SEARCH_FRACTION, smooth: bool = False) -> PeakSpan:
    """Delimit the first ID peak of a per-layer curve.

    * argmax: global maximum within the first ``search_fraction`` of layers
      (earliest index on ties).
    * end: first layer after the maximum where the second difference changes
      sign relative to the curvature just after the maximum (zero curvature
      does not count as a sign). Falls back to the last layer, flagged, when
      the tail has no such change. If the end layer sits higher than the
      maximum (the curve climbs past it later), no span is returned.
    * onset: start of the contiguous run, ending at the maximum, of layers
      whose value is >= the value at the end.
    """
    f = np.asarray(curve, dtype=float)
    if f.ndim != 1 or len(f) < MIN_LAYERS:
        raise TooShort(f"need >= {MIN_LAYERS} layers, got {len(f)}")
    if not np.isfinite(f).all():
        raise ValidationError("curve has non-finite values")
    if np.all(f == f[0]):
        raise NoInflection("constant curve has no peak")
    if smooth:
        f = smooth3(f)
    L = len(f)
    span = max(1, min(L, math.ceil(search_fraction * L)))
    m = int(np.argmax(f[:span]))

    s = second_differences(f)
    ref = 0.0
    end = None
    for i in range(m + 1, L - 1):
        sign = np.sign(s[i])
        if sign == 0:
            continue
        if ref == 0:
            ref = sign
        elif sign != ref:
            end = i
            break
    flagged = end is None
    if flagged:
        end = L - 1
    if f[end] > f[m]:
        raise NoInflection("curve rises above the searched maximum before the peak ends")

    onset = m
    while onset > 0 and f[onset - 1] >= f[end]:
        onset -= 1
    return PeakSpan(onset, m, end, float(f[m]), onset / (L - 1), flagged)


def midranks(x) -> np.ndarray:
    """Ranks starting at 1; tied values share the mean of their positions."""
    x = np.asarray(x, dtype=float)
    order = np.argsort(x, kind="stable")
    xs = x[order]
    ranks = np.empty(len(x))
    start = 0
    for stop in range(1, len(x) + 1):
        if stop == len(x) or xs[stop] != xs[start]:
            ranks[order[start:stop]] = 0.5 * (start + 1 + stop)
            start = stop
    return ranks


def _pearson(a, b):
    a = a - a.mean()
    b = b - b.mean()
    return float(np.sum(a * b) / math.sqrt(np.sum(a * a) * np.sum(b * b)))


def spearman(x, y, method: str = "t", n_resamples: int = 20000, seed: int = 0) -> tuple[float, float]:
    """Spearman rho with a two-sided p-value.

    ``method="t"`` uses t = rho sqrt((n-2)/(1-rho^2)) with n-2 degrees of
    freedom. ``method="permutation"`` enumerates all permutations for
    n <= 8 and otherwise draws ``n_resamples`` seeded permutations.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise LengthMismatch(f"lengths differ: {x.shape} vs {y.shape}")
    n = len(x)
    if n < 3:
        raise LengthMismatch(f"need >= 3 pairs, got {n}")
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise DegenerateVariance("an input has zero variance")
    rx, ry = midranks(x), midranks(y)
    rho = max(-1.0, min(1.0, _pearson(rx, ry)))

    if method == "t":
        if abs(rho) == 1.0:
            return rho, 0.0
        t = rho * math.sqrt((n - 2) / (1.0 - rho * rho))
        return rho, float(2.0 * stats.t.sf(abs(t), n - 2))
    if method != "permutation":
        raise ValidationError(f"unknown method {method!r}")
    if n <= EXACT_PERMUTATION_MAX_N:
        null = np.array([_pearson(rx, ry[list(p)]) for p in itertools.permutations(range(n))])
    else:
        rng = np.random.default_rng(seed)
        null = np.array([_pearson(rx, rng.permutation(ry)) for _ in range(n_resamples)])
    p = float(np.mean(np.abs(null) >= abs(rho) - 1e-12))
    return rho, p


@dataclass(frozen=True)
class QualityCorrelation:
    rho_max: float
    p_max: float
    rho_onset: float
    p_onset: float
    n: int


def correlate_quality(runs, method: str = "t") -> QualityCorrelation:
    """Spearman of surprisal against peak height and against relative peak onset.

    ``runs`` is a sequence of (PeakSpan, curve, surprisal) triples.
    """
    runs = list(runs)
    if len(runs) < 3:
        raise ValidationError(f"need >= 3 runs, got {len(runs)}")
    if any(r[2] is None for r in runs):
        raise MissingSurprisal("every run needs a surprisal value")
    surprisal = [float(r[2]) for r in runs]
    rho_m, p_m = spearman(surprisal, [r[0].max_value for r in runs], method)
    rho_o, p_o = spearman(surprisal, [r[0].relative_onset for r in runs], method)
    return QualityCorrelation(rho_m, p_m, rho_o, p_o, len(runs))
