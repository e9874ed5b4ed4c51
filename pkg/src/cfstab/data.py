"""Tabular dataset ingestion, transforms, splitting and 2-D synthetic data.

Datasets are immutable: float64 feature matrix (post-transform), int64 class
labels, the column schema that produced the features, and the fitted
transform parameters needed for exact inverse mapping. A sha256 fingerprint
over the canonical serialization identifies the exact content and ordering.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .rng import stream

NUMERIC_TRANSFORMS = ("standardize", "minmax", "none")


@dataclass(frozen=True)
class ColumnSchema:
    name: str
    kind: str        # "numeric" | "categorical"
    transform: str   # standardize | minmax | none | onehot
    categories: tuple | None = None  # categorical only: pin the vocabulary

    def __post_init__(self):
        if self.kind == "categorical":
            if self.transform != "onehot":
                raise DataError(f"categorical column {self.name!r} must use onehot")
            if self.categories is not None:
                object.__setattr__(self, "categories", tuple(self.categories))
        elif self.kind == "numeric":
            if self.transform not in NUMERIC_TRANSFORMS:
                raise DataError(f"numeric column {self.name!r} cannot use {self.transform!r}")
            if self.categories is not None:
                raise DataError(f"numeric column {self.name!r} cannot carry categories")
        else:
            raise DataError(f"unknown column kind {self.kind!r}")


class Dataset:
    __slots__ = ("features", "labels", "schema", "transform_params",
                 "feature_names", "label_name", "_fingerprint")

    def __init__(self, features, labels, schema, transform_params,
                 feature_names, label_name="label"):
        features = np.ascontiguousarray(features, dtype=np.float64)
        labels = np.ascontiguousarray(labels, dtype=np.int64)
        if features.ndim != 2 or labels.ndim != 1 or features.shape[0] != labels.shape[0]:
            raise DataError("features must be (n, d) with one label per row")
        features.setflags(write=False)
        labels.setflags(write=False)
        self.features = features
        self.labels = labels
        self.schema = tuple(schema)
        self.transform_params = transform_params
        self.feature_names = tuple(feature_names)
        self.label_name = label_name
        self._fingerprint = None

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def fingerprint(self) -> str:
        if self._fingerprint is None:
            h = hashlib.sha256()
            meta = {
                "schema": [[c.name, c.kind, c.transform, list(c.categories or ())]
                           for c in self.schema],
                "feature_names": list(self.feature_names),
                "label_name": self.label_name,
                "transform_params": self.transform_params,
                "shape": list(self.features.shape),
            }
            h.update(json.dumps(meta, sort_keys=True).encode())
            h.update(self.features.tobytes())
            h.update(self.labels.tobytes())
            self._fingerprint = h.hexdigest()
        return self._fingerprint

    def take(self, idx) -> "Dataset":
        """Row subset (same schema and fitted transforms)."""
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(self.features[idx], self.labels[idx], self.schema,
                       self.transform_params, self.feature_names, self.label_name)


def _parse_float(cell: str, col: str, row: int) -> float:
    try:
        return float(cell)
    except ValueError:
        raise DataError(f"row {row}: non-numeric value {cell!r} in numeric column {col!r}") from None


def load_csv(path, schema, label: str) -> Dataset:
    """Load and transform a CSV table (header required, UTF-8, comma separated).

    Transforms are fitted on the full loaded table (before any split) so every
    retraining variant sees identical preprocessing. Rows with empty cells in
    schema or label columns are dropped. standardize uses the population std.
    """
    schema = tuple(schema)
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise DataError(f"cannot open dataset file {path}: {exc}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file, header row required") from None
        col_idx = {name: i for i, name in enumerate(header)}
        for col in [c.name for c in schema] + [label]:
            if col not in col_idx:
                raise DataError(f"{path}: missing column {col!r}")
        raw_rows = []
        wanted = [col_idx[c.name] for c in schema] + [col_idx[label]]
        for rix, row in enumerate(reader):
            if len(row) != len(header):
                raise DataError(f"row {rix}: expected {len(header)} cells, got {len(row)}")
            cells = [row[i].strip() for i in wanted]
            if any(c == "" for c in cells):
                continue  # missing value: drop the row
            raw_rows.append(cells)
    if not raw_rows:
        raise DataError(f"{path}: no usable rows")

    n = len(raw_rows)
    columns = []           # per schema column: float array or list of strings
    for j, col in enumerate(schema):
        if col.kind == "numeric":
            columns.append(np.array([_parse_float(r[j], col.name, i) for i, r in enumerate(raw_rows)]))
        else:
            columns.append([r[j] for r in raw_rows])

    transform_params: dict = {}
    blocks = []
    feature_names = []
    for j, col in enumerate(schema):
        vals = columns[j]
        if col.kind == "categorical":
            vocab = list(col.categories) if col.categories else sorted(set(vals))
            transform_params[col.name] = {"categories": vocab}
            pos = {v: k for k, v in enumerate(vocab)}
            block = np.zeros((n, len(vocab)))
            for i, v in enumerate(vals):
                if v not in pos:
                    raise DataError(f"row {i}: unseen category {v!r} in column {col.name!r}")
                block[i, pos[v]] = 1.0
            blocks.append(block)
            feature_names.extend(f"{col.name}={v}" for v in vocab)
            continue
        if col.transform == "standardize":
            mean = float(vals.mean())
            std = float(vals.std())
            if std == 0.0:
                raise DataError(f"column {col.name!r} has zero variance, cannot standardize")
            transform_params[col.name] = {"mean": mean, "std": std}
            blocks.append(((vals - mean) / std)[:, None])
        elif col.transform == "minmax":
            lo, hi = float(vals.min()), float(vals.max())
            if hi == lo:
                raise DataError(f"column {col.name!r} is constant, cannot minmax-scale")
            transform_params[col.name] = {"min": lo, "max": hi}
            blocks.append(((vals - lo) / (hi - lo))[:, None])
        else:
            transform_params[col.name] = {}
            blocks.append(vals[:, None])
        feature_names.append(col.name)

    raw_labels = [r[-1] for r in raw_rows]
    try:
        ids = [int(v) for v in raw_labels]
        if min(ids) < 0:
            raise ValueError
        label_vocab = None
    except ValueError:
        label_vocab = sorted(set(raw_labels))
        pos = {v: k for k, v in enumerate(label_vocab)}
        ids = [pos[v] for v in raw_labels]
    if label_vocab is not None:
        transform_params["__label__"] = {"categories": label_vocab}

    return Dataset(np.hstack(blocks), np.array(ids), schema, transform_params,
                   feature_names, label_name=label)


def inverse_transform(ds: Dataset) -> list:
    """Original-scale cells, one list per schema column (floats or category strings)."""
    out = []
    j = 0
    for col in ds.schema:
        if col.kind == "categorical":
            cats = ds.transform_params[col.name]["categories"]
            block = ds.features[:, j:j + len(cats)]
            out.append([cats[int(k)] for k in np.argmax(block, axis=1)])
            j += len(cats)
            continue
        vals = ds.features[:, j]
        p = ds.transform_params.get(col.name, {})
        if col.transform == "standardize":
            out.append(list(vals * p["std"] + p["mean"]))
        elif col.transform == "minmax":
            out.append(list(vals * (p["max"] - p["min"]) + p["min"]))
        else:
            out.append(list(vals))
        j += 1
    return out


def split(ds: Dataset, train_frac: float, seed: int):
    """Seeded permutation split into (train, test); disjoint and exhaustive."""
    if not 0.0 < train_frac < 1.0:
        raise DataError(f"train_frac must be in (0,1), got {train_frac}")
    k = int(round(train_frac * ds.n))
    if k == 0 or k == ds.n:
        raise DataError(f"degenerate split: {k}/{ds.n - k} rows")
    perm = stream(seed).permutation(ds.n)
    return ds.take(perm[:k]), ds.take(perm[k:])


def synth_2d(kind: str, n: int, noise: float, seed: int) -> Dataset:
    """Two balanced classes in R^2: gaussian blobs at (-1,-1)/(1,1) or rings."""
    if n < 4:
        raise DataError("synthetic datasets need n >= 4")
    rng = stream(seed)
    n0 = n // 2
    n1 = n - n0
    if kind == "blobs":
        c0 = np.array([-1.0, -1.0])
        c1 = np.array([1.0, 1.0])
        x0 = c0 + noise * rng.standard_normal((n0, 2))
        x1 = c1 + noise * rng.standard_normal((n1, 2))
    elif kind == "rings":
        def ring(count, radius):
            phi = rng.uniform(0.0, 2.0 * math.pi, count)
            r = radius + noise * rng.standard_normal(count)
            return np.column_stack([r * np.cos(phi), r * np.sin(phi)])
        x0 = ring(n0, 1.0)
        x1 = ring(n1, 2.0)
    else:
        raise DataError(f"unknown synthetic kind {kind!r}")
    features = np.vstack([x0, x1])
    labels = np.concatenate([np.zeros(n0, dtype=np.int64), np.ones(n1, dtype=np.int64)])
    schema = (ColumnSchema("x0", "numeric", "none"), ColumnSchema("x1", "numeric", "none"))
    return Dataset(features, labels, schema, {"x0": {}, "x1": {}}, ("x0", "x1"))


def leave_one_out_variants(train: Dataset, pool_size: int, seed: int):
    """[(removed_row_index, train-minus-that-row), ...] for a seeded pool.

    The pool is drawn without replacement from the training set; variant order
    follows the draw order and is deterministic in the seed.
    """
    if pool_size > train.n:
        raise DataError(f"pool_size {pool_size} exceeds training size {train.n}")
    pool = stream(seed).permutation(train.n)[:pool_size]
    keep_all = np.arange(train.n)
    out = []
    for removed in pool:
        mask = keep_all != removed
        out.append((int(removed), train.take(keep_all[mask])))
    return out


def schema_from_json(doc) -> tuple:
    """Schema-file decoding: {"columns": [{name, kind, transform, categories?}], "label": str}."""
    try:
        cols = tuple(ColumnSchema(c["name"], c["kind"], c["transform"],
                                  categories=c.get("categories"))
                     for c in doc["columns"])
        return cols, doc["label"]
    except (KeyError, TypeError) as exc:
        raise DataError(f"bad schema document: {exc}") from None
