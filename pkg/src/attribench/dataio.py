"""Dataset files (CSV plus JSON sidecar) and ingestion of external tabular CSVs."""
from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Optional

import numpy as np

from .symfunc import TabularDataset, split_mask

DATASET_FORMAT_VERSION = 1


class MissingAnnotationError(FileNotFoundError):
    pass


class DatasetFormatError(ValueError):
    pass


def sidecar_path(csv_path) -> Path:
    p = Path(csv_path)
    return p.with_suffix(".json")


def save_dataset(data: TabularDataset, path) -> Path:
    """Write ``x0..x{n-1},y`` rows plus a sidecar with annotations and the split."""
    path = Path(path)
    header = [f"x{i}" for i in range(data.n_features)] + ["y"]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row, y in zip(data.features, data.targets):
            w.writerow([repr(float(v)) for v in row] + [repr(float(y))])
    meta = dict(data.meta)
    sidecar = {
        "format_version": DATASET_FORMAT_VERSION,
        "function_id": meta.pop("function_id", None),
        "m": meta.pop("m", len(data.predictive_indices)),
        "predictive_indices": list(data.predictive_indices),
        "noise_spec": meta.pop("noise_spec", None),
        "seed": meta.pop("seed", None),
        "split_ratio": meta.pop("split_ratio", None),
        "validation_rows": np.flatnonzero(~data.is_train).tolist(),
        "feature_names": data.feature_names,
        "extra": meta,
    }
    sidecar_path(path).write_text(json.dumps(sidecar, indent=1))
    return path


def _read_numeric_csv(path):
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DatasetFormatError(f"{path}: empty file")
    header, body = rows[0], rows[1:]
    values = np.empty((len(body), len(header)))
    for r, row in enumerate(body):
        if len(row) != len(header):
            raise DatasetFormatError(f"{path}: row {r + 2} has {len(row)} cells, expected {len(header)}")
        for c, cell in enumerate(row):
            try:
                values[r, c] = float(cell)
            except ValueError:
                raise DatasetFormatError(
                    f"{path}: non-numeric cell {cell!r} at row {r + 2}, column {header[c]!r}") from None
    return header, values


def load_dataset(path, require_annotation: bool = True, split_ratio: float = 0.8,
                 seed: int = 0) -> TabularDataset:
    """Inverse of :func:`save_dataset`.

    Without a sidecar this raises :class:`MissingAnnotationError`, unless
    ``require_annotation`` is false, in which case the last column is the
    target, nothing is annotated and the split is drawn from ``seed``.
    """
    header, values = _read_numeric_csv(path)
    side = sidecar_path(path)
    x, y = values[:, :-1], values[:, -1]
    if not side.exists():
        if require_annotation:
            raise MissingAnnotationError(f"no annotation sidecar at {side}")
        is_train = split_mask(len(values), split_ratio, np.random.default_rng(seed))
        return TabularDataset(x, y, (), is_train, header[:-1], {})
    meta = json.loads(side.read_text())
    if meta.get("format_version") != DATASET_FORMAT_VERSION:
        raise DatasetFormatError(f"unsupported dataset format version {meta.get('format_version')!r}")
    expected = [f"x{i}" for i in range(len(header) - 1)] + ["y"]
    if header != expected:
        raise DatasetFormatError(f"unexpected columns {header[:3]}...; expected x0..x{len(header) - 2},y")
    is_train = np.ones(len(values), dtype=bool)
    is_train[meta["validation_rows"]] = False
    extra = dict(meta.get("extra") or {})
    for key in ("function_id", "m", "noise_spec", "seed", "split_ratio"):
        if meta.get(key) is not None:
            extra[key] = meta[key]
    return TabularDataset(x, y, tuple(meta["predictive_indices"]), is_train,
                          meta.get("feature_names"), extra)


def load_tabular_csv(path, label_column: str, scaling: str = "minmax", balance: str = "none",
                     split_ratio: float = 0.8, seed: int = 0) -> TabularDataset:
    """Load a real-world numeric CSV for RFE.

    Undersampling (if requested) is applied to the whole file before the
    split; min-max statistics come from the training rows only, and constant
    columns map to 0.
    """
    header, values = _read_numeric_csv(path)
    if label_column not in header:
        raise DatasetFormatError(f"label column {label_column!r} not in {path}")
    li = header.index(label_column)
    names = [h for i, h in enumerate(header) if i != li]
    y = values[:, li]
    x = np.delete(values, li, axis=1)
    balance_ss, split_ss = np.random.SeedSequence(seed).spawn(2)
    if balance == "undersample":
        rng = np.random.default_rng(balance_ss)
        classes, counts = np.unique(y, return_counts=True)
        n_min = counts.min()
        keep = np.sort(np.concatenate([
            rng.choice(np.flatnonzero(y == c), size=n_min, replace=False) for c in classes]))
        x, y = x[keep], y[keep]
    elif balance != "none":
        raise ValueError(f"unknown balance mode {balance!r}")
    is_train = split_mask(len(y), split_ratio, np.random.default_rng(split_ss))
    if scaling == "minmax":
        lo = x[is_train].min(axis=0)
        span = x[is_train].max(axis=0) - lo
        safe = np.where(span > 0, span, 1.0)
        x = np.where(span > 0, (x - lo) / safe, 0.0)
    elif scaling != "none":
        raise ValueError(f"unknown scaling {scaling!r}")
    meta = {"source": str(path), "label_column": label_column, "scaling": scaling,
            "balance": balance, "split_ratio": split_ratio, "seed": seed}
    return TabularDataset(x, y, (), is_train, names, meta)


def write_attribution_dump(path, attributions: dict, sample_ids=None) -> Path:
    """Long-form CSV ``sample_id,method,feature_index,value`` from ``{method: (N, n) array}``."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sample_id", "method", "feature_index", "value"])
        for method, a in attributions.items():
            a = np.atleast_2d(np.asarray(a, dtype=np.float64))
            ids = range(len(a)) if sample_ids is None else sample_ids
            for sid, row in zip(ids, a):
                for j, v in enumerate(row):
                    w.writerow([sid, method, j, repr(float(v))])
    return path
