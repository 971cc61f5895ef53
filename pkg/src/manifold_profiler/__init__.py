"""Geometric analysis of layerwise representation point clouds.

Intrinsic dimension (GRIDE / TwoNN) with scale analysis, information
imbalance, linear CKA, ID-peak delimitation and rank correlation with model
quality, plus synthetic manifolds of known dimension to check all of it.
"""

__version__ = "0.1.0"

from .cka import cka_grid, linear_cka
from .gride import (
    IdEstimate,
    IdProfile,
    RatioSample,
    compute_ratios,
    gride_loglik,
    gride_mle,
    scale_scan,
    select_scale,
    twonn_closed_form,
)
from .imbalance import (
    ImbalanceResult,
    ScopeProfile,
    cross_model_grid,
    delta,
    delta_matrix,
    forward_scope,
    profile_first_last,
    subsample,
)
from .neighbors import NeighborTable, build_neighbor_table, cross_rank
from .profile import PeakSpan, correlate_quality, detect_peak, spearman
from .synth import ManifoldSpec, embed_orthonormal, generate
from .tensor_io import Manifest, PointCloud, read_csv, read_manifest, read_pointcloud, write_pointcloud
