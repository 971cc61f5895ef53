"""Command-line front end.

Every command reads input files and writes CSV/SVG/IDPC to ``--out`` paths;
only logs go to stderr. Exit codes: 0 ok, 2 usage/validation, 3 data error,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .cka import cka_grid
from .errors import ProfilerError, ValidationError
from .gride import compute_ratios, gride_mle, scale_scan, select_common_scale, twonn_closed_form
from .imbalance import (
    DEFAULT_THRESHOLD,
    cross_model_grid,
    delta_matrix,
    forward_scope,
    profile_first_last,
    subsample,
)
from .neighbors import build_neighbor_table, resolve_workers
from .profile import correlate_quality, detect_peak
from .render import grid_svg, profile_svg, scatter_svg
from .reports import (
    CKA_COLUMNS,
    CORRELATION_COLUMNS,
    ID_PROFILE_COLUMNS,
    IMBALANCE_COLUMNS,
    INFO_PLANE_COLUMNS,
    PEAK_COLUMNS,
    SCOPE_COLUMNS,
    column,
    id_profile_rows,
    read_table,
    write_csv,
)
from .synth import ManifoldSpec, generate
from .tensor_io import read_manifest, write_manifest, write_pointcloud

log = logging.getLogger("manifold_profiler")

DEFAULT_SCAN_K_MAX = 128


class UsageError(ValidationError):
    pass


# ---------------------------------------------------------------- helpers


def _powers_of_two(k_min, k_max):
    ks = []
    k = k_min
    while k <= k_max:
        ks.append(k)
        k *= 2
    return ks


def _parse_layer_k(items):
    out = {}
    for item in items or []:
        try:
            layer, k = item.split("=")
            out[int(layer)] = int(k)
        except ValueError:
            raise UsageError(f"--layer-k expects LAYER=K, got {item!r}") from None
    return out


def _estimate(table, k, d_max, estimator):
    sample = compute_ratios(table, k)
    return twonn_closed_form(sample) if estimator == "twonn" else gride_mle(sample, d_max)


def _id_profile(manifest, k=None, estimator="gride", k_max=DEFAULT_SCAN_K_MAX, layer_k=None, workers=None):
    """Per-layer estimates; returns (entries, chosen_k, scans or None)."""
    layer_k = layer_k or {}
    unknown = set(layer_k) - set(manifest.indices)
    if unknown:
        raise UsageError(f"--layer-k names layers not in manifest: {sorted(unknown)}")
    clouds = {}
    scans = None
    if k is None:
        first = manifest.load(manifest.indices[0])
        cap = (first.n_points - 1) // 2
        ks = _powers_of_two(1, min(k_max, cap))
        if len(ks) < 3:
            raise UsageError(f"N={first.n_points} too small for a scale scan")
        scans = []
        for e in manifest.layers:
            cloud = manifest.load(e.index)
            table = build_neighbor_table(cloud, 2 * ks[-1], workers=workers)
            scans.append(scale_scan(table, ks, d_max=cloud.dim, workers=workers))
            clouds[e.index] = (cloud.dim, table)
        k = select_common_scale(scans)
        log.info("%s/%s: selected k=%d", manifest.model, manifest.corpus, k)
    entries = []
    for e in manifest.layers:
        kk = layer_k.get(e.index, k)
        cached = clouds.get(e.index)
        if cached is not None and cached[1].order >= 2 * kk:
            dim, table = cached
        else:
            cloud = manifest.load(e.index)
            if 2 * kk > cloud.n_points - 1:
                raise UsageError(f"k={kk} needs N > {2 * kk}, have N={cloud.n_points}")
            dim, table = cloud.dim, build_neighbor_table(cloud, 2 * kk, workers=workers)
        entries.append((e.index, _estimate(table, kk, dim, estimator)))
    return entries, k, scans


def _load_layers(manifest, m=None, seed=None):
    layers = manifest.load_all()
    if m is not None:
        layers = subsample(layers, m, seed)
    return layers


def _write_svg(path, text):
    Path(path).write_text(text, encoding="utf-8")


def _stem_path(out, suffix):
    out = Path(out)
    return out.with_name(out.stem + suffix)


# ---------------------------------------------------------------- commands


def cmd_synth(args):
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    dims = [int(x) for x in args.d.split(",")]
    files = []
    for pos, d in enumerate(dims):
        spec = ManifoldSpec(args.kind, d, args.ambient_d, args.n, args.noise, args.seed + pos).validate()
        name = f"layer_{pos:03d}.idpc"
        write_pointcloud(generate(spec), out_dir / name, args.precision)
        (out_dir / (name + ".json")).write_text(spec.to_json(), encoding="utf-8")
        files.append((pos, name))
    write_manifest(out_dir / "manifest.json", args.model, args.corpus, files, args.surprisal)
    return 0


def cmd_id(args):
    if args.estimator == "twonn":
        if args.k is not None and args.k != 1:
            raise UsageError("--estimator twonn requires k = 1")
        if args.layer_k:
            raise UsageError("--layer-k is not available with --estimator twonn")
        args.k = 1
    manifest = read_manifest(args.manifest)
    entries, k, scans = _id_profile(
        manifest, args.k, args.estimator, args.k_max, _parse_layer_k(args.layer_k), args.workers
    )
    write_csv(args.out, ID_PROFILE_COLUMNS, id_profile_rows(entries))
    if scans is not None:
        rows = []
        for (layer, _), scan in zip(entries, scans):
            rows.extend(id_profile_rows([(layer, est) for _, est in scan]))
        write_csv(_stem_path(args.out, ".scan.csv"), ID_PROFILE_COLUMNS, rows)
    if args.svg:
        _write_svg(
            args.svg,
            profile_svg([l for l, _ in entries], [e.d_hat for _, e in entries],
                        title=f"{manifest.model} / {manifest.corpus} (k={k})"),
        )
    return 0


def cmd_scale_scan(args):
    manifest = read_manifest(args.manifest)
    layers = manifest.indices if args.layer is None else [args.layer]
    if args.layer is not None and args.layer not in manifest.indices:
        raise UsageError(f"layer {args.layer} not in manifest")
    if args.k_min < 1:
        raise UsageError("--k-min must be >= 1")
    if args.k_max is not None and args.k_min > args.k_max:
        raise UsageError("--k-min exceeds --k-max")
    rows = []
    for layer in layers:
        cloud = manifest.load(layer)
        cap = (cloud.n_points - 1) // 2
        if cap < 1:
            raise UsageError("too few points for a scale scan")
        k_max = args.k_max if args.k_max is not None else 2 ** int(math.log2(cap))
        if k_max > cap:
            log.warning("--k-max %d exceeds (N-1)/2 = %d; clipped", k_max, cap)
            k_max = cap
        ks = _powers_of_two(args.k_min, k_max)
        if not ks:
            raise UsageError(f"no scales in [{args.k_min}, {k_max}]")
        table = build_neighbor_table(cloud, 2 * ks[-1], workers=args.workers)
        scan = scale_scan(table, ks, d_max=cloud.dim, workers=args.workers)
        rows.extend(id_profile_rows([(layer, est) for _, est in scan]))
    write_csv(args.out, ID_PROFILE_COLUMNS, rows)
    return 0


def cmd_imbalance(args):
    if args.subsample is not None and args.seed is None:
        raise UsageError("--subsample requires an explicit --seed")
    if len(args.manifests) > 2:
        raise UsageError("at most two manifests")
    man_a = read_manifest(args.manifests[0])
    seed = args.seed if args.subsample is not None else None
    if args.mode == "cross":
        if len(args.manifests) != 2:
            raise UsageError("--mode cross needs two manifests")
        man_b = read_manifest(args.manifests[1])
        layers_a = man_a.load_all()
        layers_b = man_b.load_all()
        if args.subsample is not None:
            both = subsample(layers_a + layers_b, args.subsample, args.seed)
            layers_a, layers_b = both[: len(layers_a)], both[len(layers_a):]
        grid = cross_model_grid(layers_a, layers_b, args.workers)
        n = layers_a[0].n_points
        rows = []
        for i, la in enumerate(man_a.indices):
            for j, lb in enumerate(man_b.indices):
                rows.append([la, lb, grid["ab"][i, j], grid["ba"][i, j], n, seed,
                             grid["bin_ab"][i, j], grid["bin_ba"][i, j]])
        write_csv(args.out, IMBALANCE_COLUMNS + ["bin_ab", "bin_ba"], rows)
        return 0

    if len(args.manifests) != 1:
        raise UsageError(f"--mode {args.mode} takes one manifest")
    layers = _load_layers(man_a, args.subsample, args.seed)
    n = layers[0].n_points
    m = delta_matrix(layers, args.workers)
    idx = man_a.indices
    if args.mode == "matrix":
        rows = [[idx[i], idx[j], m[i, j], m[j, i], n, seed] for i in range(len(idx)) for j in range(len(idx))]
        write_csv(args.out, IMBALANCE_COLUMNS, rows)
    elif args.mode == "first-last":
        prof = profile_first_last(m)
        rows = [[idx[i], prof["to_first"][i], prof["to_last"][i], prof["from_first"][i]] for i in range(len(idx))]
        write_csv(args.out, INFO_PLANE_COLUMNS, rows)
    else:
        scope = forward_scope(m, args.threshold)
        write_csv(args.out, SCOPE_COLUMNS, [[idx[i], int(s), scope.threshold] for i, s in enumerate(scope.scope)])
    return 0


def _peak_layers(profile_csv):
    rows = read_table(profile_csv)
    layers = column(rows, "layer", int)
    values = column(rows, "id")
    span = detect_peak(values)
    return {l for l in layers[span.onset: span.end + 1]}


def cmd_cka(args):
    if args.subsample is not None and args.seed is None:
        raise UsageError("--subsample requires an explicit --seed")
    man_a, man_b = read_manifest(args.manifest_a), read_manifest(args.manifest_b)
    layers_a, layers_b = man_a.load_all(), man_b.load_all()
    if args.subsample is not None:
        both = subsample(layers_a + layers_b, args.subsample, args.seed)
        layers_a, layers_b = both[: len(layers_a)], both[len(layers_a):]
    if args.partitions < 1:
        raise UsageError("--partitions must be >= 1")
    grid = cka_grid(layers_a, layers_b)
    n = layers_a[0].n_points
    if args.partitions > 1:
        # average of per-partition CKA over contiguous item blocks
        bounds = np.linspace(0, n, args.partitions + 1).astype(int)
        grids = []
        for lo, hi in zip(bounds[:-1], bounds[1:]):
            rows_ = np.arange(lo, hi)
            grids.append(cka_grid([c.take(rows_) for c in layers_a], [c.take(rows_) for c in layers_b]))
        grid = np.mean(grids, axis=0)
    header = CKA_COLUMNS + ["n", "partitions"]
    peaks_a = _peak_layers(args.profile_a) if args.profile_a else None
    peaks_b = _peak_layers(args.profile_b) if args.profile_b else None
    if peaks_a is not None or peaks_b is not None:
        header = header + ["in_peak_a", "in_peak_b"]
    rows = []
    for i, la in enumerate(man_a.indices):
        for j, lb in enumerate(man_b.indices):
            row = [la, lb, grid[i, j], n, args.partitions]
            if len(header) > 5:
                row += [
                    "" if peaks_a is None else la in peaks_a,
                    "" if peaks_b is None else lb in peaks_b,
                ]
            rows.append(row)
    write_csv(args.out, header, rows)
    return 0


def cmd_peak(args):
    rows = read_table(args.profile_csv)
    layers = column(rows, "layer", int)
    values = column(rows, "id")
    model, corpus, surprisal = args.model, args.corpus, args.surprisal
    if args.manifest:
        man = read_manifest(args.manifest)
        model = model or man.model
        corpus = corpus or man.corpus
        surprisal = surprisal if surprisal is not None else man.surprisal
    span = detect_peak(values, search_fraction=args.search_fraction, smooth=args.smooth)
    if span.flagged:
        log.warning("no inflection after the maximum; peak end set to the last layer")
    write_csv(
        args.out,
        PEAK_COLUMNS + ["flagged", "surprisal"],
        [[model or "", corpus or "", layers[span.onset], layers[span.argmax], layers[span.end],
          span.max_value, span.relative_onset, span.flagged, surprisal]],
    )
    return 0


def cmd_correlate(args):
    from .profile import PeakSpan

    runs, meta = [], []
    for path in args.peak_csvs:
        for r in read_table(path):
            s = r.get("surprisal", "")
            span = PeakSpan(int(r["onset"]), int(r["argmax"]), int(r["end"]),
                            float(r["max_id"]), float(r["relative_onset"]))
            runs.append((span, None, float(s) if s not in ("", None) else None))
            meta.append((r.get("model", ""), r.get("corpus", "")))
    if len(runs) < 3:
        raise UsageError(f"need >= 3 runs, got {len(runs)}")
    res = correlate_quality(runs, method=args.method)
    write_csv(args.out, CORRELATION_COLUMNS, [
        ["max_id", res.rho_max, res.p_max, res.n],
        ["relative_onset", res.rho_onset, res.p_onset, res.n],
    ])
    if args.scatter_out:
        write_csv(args.scatter_out, ["model", "corpus", "surprisal", "max_id", "relative_onset"],
                  [[m, c, s, sp.max_value, sp.relative_onset] for (sp, _, s), (m, c) in zip(runs, meta)])
    return 0


def _pick_value_column(rows, preferred):
    for name in preferred:
        if name in rows[0]:
            return name
    raise ValidationError(f"none of the columns {preferred} present")


def cmd_render(args):
    try:
        rows = read_table(args.csv)
    except ValidationError:
        raise UsageError(f"{args.csv}: empty CSV") from None
    if args.kind == "profile":
        ycol = args.y or _pick_value_column(rows, ["id", "value", "scope", "delta_to_last"])
        sd = np.array(column(rows, "id_sd")) if "id_sd" in rows[0] and ycol == "id" else None
        svg = profile_svg(column(rows, "layer"), column(rows, ycol), sd=sd, ylabel=ycol,
                          title=args.title or Path(args.csv).stem, smooth=args.smooth)
    elif args.kind == "scatter":
        if args.x and args.y:
            xcol, ycol = args.x, args.y
        elif "delta_from_first" in rows[0]:
            xcol, ycol = "delta_from_first", "delta_to_last"
        elif "surprisal" in rows[0]:
            xcol, ycol = "max_id", "surprisal"
        else:
            numeric = [c for c in rows[0] if _numeric_column(rows, c)]
            if len(numeric) < 2:
                raise UsageError("scatter needs two numeric columns")
            xcol, ycol = numeric[:2]
        labels = column(rows, "layer", str) if "layer" in rows[0] else None
        svg = scatter_svg(column(rows, xcol), column(rows, ycol), xcol, ycol,
                          title=args.title or Path(args.csv).stem, labels=labels)
    else:
        vcol = args.y or _pick_value_column(rows, ["cka", "delta_ab", "value"])
        svg = grid_svg(column(rows, "layer_a", int), column(rows, "layer_b", int), column(rows, vcol),
                       title=args.title or f"{Path(args.csv).stem}: {vcol}")
    _write_svg(args.out, svg)
    return 0


def _numeric_column(rows, name):
    try:
        [float(r[name]) for r in rows]
    except (TypeError, ValueError):
        return False
    return True


def cmd_report(args):
    """id -> peak -> imbalance -> render for one or more partitions of one (model, corpus)."""
    if args.subsample is not None and args.seed is None:
        raise UsageError("--subsample requires an explicit --seed")
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifests = [read_manifest(p) for p in args.manifests]
    idx = manifests[0].indices
    if any(m.indices != idx for m in manifests):
        raise UsageError("all manifests must list the same layers")

    profiles, matrices, ks = [], [], []
    k = args.k
    for pos, man in enumerate(manifests):
        entries, k_used, _ = _id_profile(man, k, "gride", args.k_max, None, args.workers)
        ks.append(k_used)
        profiles.append([e.d_hat for _, e in entries])
        write_csv(out / f"id_profile_{pos}.csv", ID_PROFILE_COLUMNS, id_profile_rows(entries))
        layers = _load_layers(man, args.subsample, args.seed)
        matrices.append(delta_matrix(layers, args.workers))
    n = layers[0].n_points
    seed = args.seed if args.subsample is not None else None

    ids = np.array(profiles)
    mean, sd = ids.mean(axis=0), ids.std(axis=0, ddof=1) if len(ids) > 1 else np.zeros(ids.shape[1])
    write_csv(out / "id_mean.csv", ["layer", "id", "id_sd", "runs", "k"],
              [[l, mean[i], sd[i], len(ids), ";".join(str(x) for x in ks)] for i, l in enumerate(idx)])

    span = detect_peak(mean, smooth=args.smooth)
    man0 = manifests[0]
    write_csv(out / "peak.csv", PEAK_COLUMNS + ["flagged", "surprisal"],
              [[man0.model, man0.corpus, idx[span.onset], idx[span.argmax], idx[span.end],
                span.max_value, span.relative_onset, span.flagged, man0.surprisal]])

    mats = np.array(matrices)
    mm = mats.mean(axis=0)
    msd = mats.std(axis=0, ddof=1) if len(mats) > 1 else np.zeros_like(mm)
    L = len(idx)
    write_csv(out / "imbalance_matrix.csv", IMBALANCE_COLUMNS + ["delta_ab_sd", "delta_ba_sd"],
              [[idx[i], idx[j], mm[i, j], mm[j, i], n, seed, msd[i, j], msd[j, i]]
               for i in range(L) for j in range(L)])
    prof = profile_first_last(mm)
    write_csv(out / "information_plane.csv", INFO_PLANE_COLUMNS,
              [[idx[i], prof["to_first"][i], prof["to_last"][i], prof["from_first"][i]] for i in range(L)])
    scope = forward_scope(mm, args.threshold)
    write_csv(out / "scope.csv", SCOPE_COLUMNS, [[idx[i], int(s), scope.threshold] for i, s in enumerate(scope.scope)])

    _write_svg(out / "id_profile.svg",
               profile_svg(idx, mean, sd=sd if len(ids) > 1 else None,
                           title=f"{man0.model} / {man0.corpus}", smooth=args.smooth))
    _write_svg(out / "information_plane.svg",
               scatter_svg(prof["from_first"], prof["to_last"], "delta(first -> l)", "delta(l -> last)",
                           title="information plane", labels=[str(i) for i in idx]))
    _write_svg(out / "imbalance_matrix.svg",
               grid_svg([idx[i] for i in range(L) for _ in range(L)], [idx[j] for _ in range(L) for j in range(L)],
                        mm.ravel(), title="delta(layer_a -> layer_b)"))
    return 0


# ---------------------------------------------------------------- parser


def build_parser():
    p = argparse.ArgumentParser(prog="manifold-profiler", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("--workers", type=int, default=None,
                   help="worker threads (default: $MANIFOLD_PROFILER_THREADS or cpu count)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="write synthetic manifolds as IDPC layers plus a manifest")
    s.add_argument("--kind", choices=["hypercube", "gaussian", "swiss_roll"], default="hypercube")
    s.add_argument("--d", default="2", help="intrinsic dimension, or comma list for one layer per value")
    s.add_argument("--ambient-d", type=int, required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--noise", type=float, default=0.0)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--precision", choices=["f32", "f64"], default="f64")
    s.add_argument("--model", default="synthetic")
    s.add_argument("--corpus", default="synthetic")
    s.add_argument("--surprisal", type=float, default=None)
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("id", help="per-layer ID profile")
    s.add_argument("manifest")
    s.add_argument("--k", type=int, default=None, help="scale; omitted = scan and pick a plateau")
    s.add_argument("--estimator", choices=["gride", "twonn"], default="gride")
    s.add_argument("--k-max", type=int, default=DEFAULT_SCAN_K_MAX, help="largest scale of the automatic scan")
    s.add_argument("--layer-k", action="append", metavar="LAYER=K", help="per-layer scale override")
    s.add_argument("--svg", default=None)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_id)

    s = sub.add_parser("scale-scan", help="ID at powers-of-two scales")
    s.add_argument("manifest")
    s.add_argument("--layer", type=int, default=None)
    s.add_argument("--k-min", type=int, default=1)
    s.add_argument("--k-max", type=int, default=None)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_scale_scan)

    s = sub.add_parser("imbalance", help="information imbalance reports")
    s.add_argument("manifests", nargs="+", metavar="MANIFEST")
    s.add_argument("--mode", choices=["matrix", "first-last", "scope", "cross"], default="matrix")
    s.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    s.add_argument("--subsample", type=int, default=None)
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_imbalance)

    s = sub.add_parser("cka", help="linear CKA grid between two manifests")
    s.add_argument("manifest_a")
    s.add_argument("manifest_b")
    s.add_argument("--partitions", type=int, default=1, help="average CKA over this many item partitions")
    s.add_argument("--subsample", type=int, default=None)
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--profile-a", default=None, help="ID profile CSV used to annotate peak layers")
    s.add_argument("--profile-b", default=None)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_cka)

    s = sub.add_parser("peak", help="delimit the ID peak of a profile CSV")
    s.add_argument("profile_csv")
    s.add_argument("--smooth", action="store_true")
    s.add_argument("--search-fraction", type=float, default=2.0 / 3.0)
    s.add_argument("--manifest", default=None, help="take model, corpus and surprisal from this manifest")
    s.add_argument("--model", default=None)
    s.add_argument("--corpus", default=None)
    s.add_argument("--surprisal", type=float, default=None)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_peak)

    s = sub.add_parser("correlate", help="Spearman of surprisal vs peak statistics")
    s.add_argument("peak_csvs", nargs="+")
    s.add_argument("--method", choices=["t", "permutation"], default="t")
    s.add_argument("--scatter-out", default=None)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_correlate)

    s = sub.add_parser("render", help="SVG chart from a CSV")
    s.add_argument("csv")
    s.add_argument("--kind", choices=["profile", "scatter", "grid"], required=True)
    s.add_argument("--x", default=None)
    s.add_argument("--y", default=None)
    s.add_argument("--title", default=None)
    s.add_argument("--smooth", action="store_true")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_render)

    s = sub.add_parser("report", help="id, peak, imbalance and charts; averages over partition manifests")
    s.add_argument("manifests", nargs="+", metavar="MANIFEST")
    s.add_argument("--k", type=int, default=None)
    s.add_argument("--k-max", type=int, default=DEFAULT_SCAN_K_MAX)
    s.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    s.add_argument("--subsample", type=int, default=None)
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--smooth", action="store_true")
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if args.workers is not None:
        if args.workers < 1:
            parser.error("--workers must be >= 1")
    args.workers = resolve_workers(args.workers)
    try:
        return args.func(args)
    except ProfilerError as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
