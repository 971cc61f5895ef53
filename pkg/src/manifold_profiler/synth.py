"""Manifolds of known intrinsic dimension, embedded in a larger ambient space."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .errors import DimensionTooSmall, InvalidSpec
from .tensor_io import PointCloud

KINDS = ("hypercube", "gaussian", "swiss_roll")


@dataclass(frozen=True)
class ManifoldSpec:
    kind: str
    intrinsic_d: int
    ambient_d: int
    n: int
    noise_sigma: float = 0.0
    seed: int = 0

    def validate(self):
        if self.kind not in KINDS:
            raise InvalidSpec(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.kind == "swiss_roll":
            if self.intrinsic_d != 2:
                raise InvalidSpec("swiss_roll has intrinsic_d = 2")
            if self.ambient_d < 3:
                raise InvalidSpec("swiss_roll needs ambient_d >= 3")
        if self.intrinsic_d < 1:
            raise InvalidSpec("intrinsic_d must be positive")
        if self.ambient_d < self.intrinsic_d:
            raise InvalidSpec("ambient_d must be >= intrinsic_d")
        if self.n < 1:
            raise InvalidSpec("n must be positive")
        if not self.noise_sigma >= 0:
            raise InvalidSpec("noise_sigma must be >= 0")
        return self

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"


def orthonormal_frame(rows: int, cols: int, rng) -> np.ndarray:
    """A rows x cols matrix with orthonormal columns.

    Columns are standard-normal draws orthogonalised one at a time by
    modified Gram-Schmidt, with a second projection pass for stability.
    """
    if cols > rows:
        raise DimensionTooSmall(f"cannot fit {cols} orthonormal columns in {rows} dimensions")
    q = np.empty((rows, cols))
    for j in range(cols):
        v = rng.standard_normal(rows)
        for _ in range(2):
            for i in range(j):
                v -= (q[:, i] @ v) * q[:, i]
        q[:, j] = v / np.linalg.norm(v)
    return q


def _intrinsic_sample(spec, rng):
    if spec.kind == "hypercube":
        return rng.uniform(0.0, 1.0, size=(spec.n, spec.intrinsic_d))
    if spec.kind == "gaussian":
        return rng.standard_normal((spec.n, spec.intrinsic_d))
    t = rng.uniform(1.5 * np.pi, 4.5 * np.pi, size=spec.n)
    h = rng.uniform(0.0, 21.0, size=spec.n)
    return np.column_stack([t * np.cos(t), h, t * np.sin(t)])


def generate(spec: ManifoldSpec) -> PointCloud:
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    base = _intrinsic_sample(spec, rng)
    if spec.ambient_d == base.shape[1]:
        # no room to embed; keep the canonical coordinates
        data = base
    else:
        frame = orthonormal_frame(spec.ambient_d, base.shape[1], rng)
        data = base @ frame.T
    if spec.noise_sigma > 0:
        data = data + spec.noise_sigma * rng.standard_normal(data.shape)
    label = f"{spec.kind}/d{spec.intrinsic_d}/D{spec.ambient_d}/seed{spec.seed}"
    return PointCloud(data, label=label)


def embed_orthonormal(cloud: PointCloud, ambient_d: int, seed: int) -> PointCloud:
    if ambient_d < cloud.dim:
        raise DimensionTooSmall(f"ambient_d={ambient_d} < cloud dim {cloud.dim}")
    frame = orthonormal_frame(ambient_d, cloud.dim, np.random.default_rng(seed))
    return PointCloud(cloud.data @ frame.T, label=cloud.label)
