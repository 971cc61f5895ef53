"""Timing for the two heavy kernels: exact kNN and the full layer-by-layer Delta matrix.

    python scripts/benchmark.py --n 10000 --dim 4096 --k-max 256
    python scripts/benchmark.py --delta-only --layers 33 --delta-n 2000
"""

import argparse
import time

import numpy as np

from manifold_profiler.imbalance import delta_matrix
from manifold_profiler.neighbors import build_neighbor_table, resolve_workers
from manifold_profiler.synth import ManifoldSpec, generate
from manifold_profiler.tensor_io import PointCloud


def main():
    p = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    p.add_argument("--n", type=int, default=10000)
    p.add_argument("--dim", type=int, default=4096)
    p.add_argument("--k-max", type=int, default=256)
    p.add_argument("--layers", type=int, default=33)
    p.add_argument("--delta-n", type=int, default=2000)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--delta-only", action="store_true")
    p.add_argument("--knn-only", action="store_true")
    args = p.parse_args()
    print(f"workers: {resolve_workers(args.workers)}")

    if not args.delta_only:
        cloud = generate(ManifoldSpec("hypercube", 10, args.dim, args.n, 0.0, 0))
        t0 = time.perf_counter()
        build_neighbor_table(cloud, args.k_max, workers=args.workers)
        print(f"kNN N={args.n} D={args.dim} k_max={args.k_max}: {time.perf_counter() - t0:.1f}s")

    if not args.knn_only:
        r = np.random.default_rng(0)
        X = r.standard_normal((args.delta_n, args.dim))
        layers = []
        for _ in range(args.layers):
            X = X + 0.3 * r.standard_normal(X.shape)
            layers.append(PointCloud(X))
        t0 = time.perf_counter()
        delta_matrix(layers, workers=args.workers)
        print(f"{args.layers}x{args.layers} Delta N={args.delta_n} D={args.dim}: {time.perf_counter() - t0:.1f}s")


if __name__ == "__main__":
    main()
