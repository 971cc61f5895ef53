"""CSV reading/writing for every report the CLI emits.

Floats are written with ``repr`` (shortest round-trip form), so a rerun on
identical inputs gives identical bytes.
"""

from __future__ import annotations

import csv
import math

import numpy as np

from .errors import IoFailure, ValidationError

ID_PROFILE_COLUMNS = ["layer", "k", "id", "loglik", "n_used", "n_dropped"]
SCAN_COLUMNS = ID_PROFILE_COLUMNS
IMBALANCE_COLUMNS = ["layer_a", "layer_b", "delta_ab", "delta_ba", "n", "seed"]
INFO_PLANE_COLUMNS = ["layer", "delta_to_first", "delta_to_last", "delta_from_first"]
SCOPE_COLUMNS = ["layer", "scope", "threshold"]
CKA_COLUMNS = ["layer_a", "layer_b", "cka"]
PEAK_COLUMNS = ["model", "corpus", "onset", "argmax", "end", "max_id", "relative_onset"]
CORRELATION_COLUMNS = ["metric", "rho", "p", "n"]


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        return repr(v)
    return str(value)


def write_csv(path, header, rows) -> None:
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([fmt(v) for v in row])
    except OSError as exc:
        raise IoFailure(f"{path}: {exc}") from exc


def read_table(path) -> list[dict[str, str]]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise IoFailure(f"{path}: {exc}") from exc
    if not rows:
        raise ValidationError(f"{path}: no data rows")
    return rows


def column(rows, name, cast=float):
    try:
        return [cast(r[name]) for r in rows]
    except KeyError:
        raise ValidationError(f"missing column {name!r}") from None
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"column {name!r}: {exc}") from None


def id_profile_rows(entries):
    """Rows for (layer, IdEstimate) pairs."""
    return [[layer, e.k, e.d_hat, e.loglik, e.n_used, e.n_dropped] for layer, e in entries]
