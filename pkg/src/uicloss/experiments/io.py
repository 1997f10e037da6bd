"""CSV datasets, plot-data files and run manifests.

All files are UTF-8 with LF line endings.  Floats are written with ``repr``
(shortest round-trip form, '.' decimal separator) so identical inputs give
identical bytes.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
from dataclasses import dataclass

import numpy as np

from ..gaussmix import Samples


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class CsvSchema:
    features: tuple | None = None  # None: every column except the label
    label: str = "y"


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if not np.isfinite(v):
            raise ValueError(f"non-finite value {v!r}")
        return repr(v)
    if isinstance(v, (np.integer, int)) and not isinstance(v, bool):
        return str(int(v))
    return str(v)


def _write_text(path, text: str):
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"{path}: {exc.strerror}") from exc


def write_csv(path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    _write_text(path, buf.getvalue())


def write_samples(samples: Samples, path, feature_names=None):
    d = samples.X.shape[1]
    names = list(feature_names or [f"x{i + 1}" for i in range(d)])
    write_csv(path, names + ["y"], (list(x) + [int(y)] for x, y in zip(samples.X, samples.y)))


def load_csv_dataset(path, schema: CsvSchema = CsvSchema()) -> Samples:
    """Read a labelled table; the label column must hold 0/1."""
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DatasetError(f"{path}: {exc.strerror}") from exc
    if not rows:
        raise DatasetError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if schema.label not in header:
        raise DatasetError(f"{path}: no label column {schema.label!r}")
    feats = schema.features or tuple(h for h in header if h != schema.label)
    missing = [f for f in feats if f not in header]
    if missing:
        raise DatasetError(f"{path}: missing feature columns {missing}")
    cols = [header.index(f) for f in feats]
    lab = header.index(schema.label)
    body = [r for r in rows[1:] if r]
    if not body:
        raise DatasetError(f"{path}: dataset has a header but no rows")
    X = np.empty((len(body), len(cols)))
    y = np.empty(len(body), dtype=int)
    for i, r in enumerate(body, start=2):
        if len(r) != len(header):
            raise DatasetError(f"{path}:{i}: expected {len(header)} fields, got {len(r)}")
        for j, c in enumerate(cols):
            try:
                X[i - 2, j] = float(r[c])
            except ValueError:
                raise DatasetError(f"{path}:{i}: column {header[c]!r}: cannot parse {r[c]!r} as a number") from None
        if r[lab].strip() not in ("0", "1"):
            raise DatasetError(f"{path}:{i}: label {r[lab]!r} is not 0 or 1")
        y[i - 2] = int(r[lab])
    return Samples(X, y)


def write_plot_data(data, path):
    """Write a sweep curve or a boundary.

    ``data`` is either a mapping ``{x: [per-seed values]}`` (columns x, mean,
    std, n_seeds; std uses ddof=0) or an (n, 2) array of boundary points
    (columns x1, x2).
    """
    if isinstance(data, dict):
        rows = []
        for x in sorted(data):
            v = np.asarray(data[x], dtype=float)
            rows.append([float(x), float(v.mean()), float(v.std()), v.size])
        write_csv(path, ["x", "mean", "std", "n_seeds"], rows)
    else:
        pts = np.asarray(data, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError("boundary data must be an (n, 2) array")
        write_csv(path, ["x1", "x2"], pts.tolist())


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir, files, meta: dict, name="manifest.json"):
    entries = [{"path": os.path.relpath(f, out_dir), "sha256": sha256_file(f)} for f in sorted(files)]
    doc = {**meta, "files": entries}
    _write_text(os.path.join(out_dir, name), json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return doc
