"""Loading, cleaning, normalizing and splitting the UCI breast cancer tables."""
from __future__ import annotations

import dataclasses
import json
import math
import os
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

BENIGN, MALIGNANT = 0, 1
SPLITS = ("train", "validation", "test")

# label token -> class id, per layout
LABEL_TOKENS = {
    "wbc": {"2": BENIGN, "4": MALIGNANT},
    "wdbc": {"B": BENIGN, "M": MALIGNANT},
    "generic": {
        "0": BENIGN, "1": MALIGNANT,
        "2": BENIGN, "4": MALIGNANT,
        "B": BENIGN, "M": MALIGNANT,
        "benign": BENIGN, "malignant": MALIGNANT,
    },
}

WBC_FEATURES = [
    "clump_thickness", "cell_size_uniformity", "cell_shape_uniformity",
    "marginal_adhesion", "single_epithelial_cell_size", "bare_nuclei",
    "bland_chromatin", "normal_nucleoli", "mitoses",
]
_WDBC_BASE = [
    "radius", "texture", "perimeter", "area", "smoothness", "compactness",
    "concavity", "concave_points", "symmetry", "fractal_dimension",
]
WDBC_FEATURES = [f"{b}_{s}" for s in ("mean", "se", "worst") for b in _WDBC_BASE]


class IngestError(ValueError):
    """Raised for unreadable or malformed input tables."""


@dataclass(frozen=True)
class IngestConfig:
    layout: str = "generic"
    id_column: Optional[int] = None
    label_column: int = -1
    missing_token: str = "?"
    imputation: str = "drop_row"
    seed: int = 0
    stratified: bool = True
    header: bool = False

    def __post_init__(self):
        if self.layout not in LABEL_TOKENS:
            raise IngestError(f"unknown layout {self.layout!r}")
        if self.imputation not in ("drop_row", "column_mean"):
            raise IngestError(f"unknown imputation {self.imputation!r}")
        if self.id_column is not None and self.id_column == self.label_column:
            raise IngestError("label_column must differ from id_column")

    @classmethod
    def wbc(cls, **kw) -> "IngestConfig":
        return cls(layout="wbc", id_column=0, label_column=10, **kw)

    @classmethod
    def wdbc(cls, **kw) -> "IngestConfig":
        return cls(layout="wdbc", id_column=0, label_column=1, **kw)


@dataclass(frozen=True)
class TabularDataset:
    """N records of d features with binary labels.

    ``split_tags`` is ``None`` until :func:`split` has been applied.
    ``dropped_rows`` and ``imputed_cells`` record what cleaning did, using
    0-based line numbers of the source file.
    """

    features: np.ndarray
    labels: np.ndarray
    feature_names: tuple
    split_tags: Optional[np.ndarray] = None
    source: str = ""
    dropped_rows: tuple = ()
    imputed_cells: tuple = ()
    normalized: bool = False

    def __post_init__(self):
        self.features.setflags(write=False)
        self.labels.setflags(write=False)
        if self.split_tags is not None:
            self.split_tags.setflags(write=False)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def replace(self, **changes) -> "TabularDataset":
        return dataclasses.replace(self, **changes)

    def subset(self, tag: str) -> np.ndarray:
        """Indices of the records carrying split tag ``tag``."""
        if self.split_tags is None:
            raise ValueError("dataset has not been split")
        return np.flatnonzero(self.split_tags == tag)


def load_csv(path: str | os.PathLike, config: IngestConfig) -> TabularDataset:
    """Read a UCI-layout CSV and separate ID, label and feature columns.

    Missing cells are handled per ``config.imputation``; the result is not
    normalized.
    """
    try:
        with open(path, "r") as fh:
            text = fh.read()
    except OSError as exc:
        raise IngestError(f"cannot read {path}: {exc}") from exc

    rows = []
    lineno = []
    for i, line in enumerate(text.splitlines()):
        if not line.strip():
            continue
        rows.append([c.strip() for c in line.split(",")])
        lineno.append(i)
    header = None
    if config.header and rows:
        header, rows, lineno = rows[0], rows[1:], lineno[1:]
    if not rows:
        raise IngestError(f"{path}: no records")

    width = len(rows[0])
    for row, ln in zip(rows, lineno):
        if len(row) != width:
            raise IngestError(
                f"{path}:{ln + 1}: expected {width} columns, found {len(row)}")

    label_col = config.label_column % width
    id_col = None if config.id_column is None else config.id_column % width
    if not 0 <= label_col < width or (id_col is not None and not 0 <= id_col < width):
        raise IngestError(f"{path}: column index out of range for {width} columns")
    feat_cols = [c for c in range(width) if c != label_col and c != id_col]

    tokens = LABEL_TOKENS[config.layout]
    labels = []
    for row, ln in zip(rows, lineno):
        tok = row[label_col]
        if tok not in tokens:
            raise IngestError(f"{path}:{ln + 1}: unknown label token {tok!r}")
        labels.append(tokens[tok])

    values = np.empty((len(rows), len(feat_cols)))
    missing = np.zeros(values.shape, dtype=bool)
    for r, (row, ln) in enumerate(zip(rows, lineno)):
        for k, c in enumerate(feat_cols):
            cell = row[c]
            if cell == config.missing_token or cell == "":
                missing[r, k] = True
                values[r, k] = np.nan
                continue
            try:
                values[r, k] = float(cell)
            except ValueError:
                raise IngestError(
                    f"{path}:{ln + 1}: non-numeric cell {cell!r} in column {c}") from None

    if config.layout == "wbc" and len(feat_cols) == len(WBC_FEATURES):
        names = tuple(WBC_FEATURES)
    elif config.layout == "wdbc" and len(feat_cols) == len(WDBC_FEATURES):
        names = tuple(WDBC_FEATURES)
    elif header is not None:
        names = tuple(header[c] for c in feat_cols)
    else:
        names = tuple(f"f{k + 1}" for k in range(len(feat_cols)))

    labels = np.asarray(labels, dtype=np.int64)
    dropped: tuple = ()
    imputed: tuple = ()
    if missing.any():
        if config.imputation == "drop_row":
            bad = missing.any(axis=1)
            dropped = tuple(int(lineno[r]) for r in np.flatnonzero(bad))
            values, labels = values[~bad], labels[~bad]
        else:
            means = np.nanmean(values, axis=0)
            rr, kk = np.nonzero(missing)
            if np.isnan(means[kk]).any():
                raise IngestError(f"{path}: a column has no observed values")
            values[rr, kk] = means[kk]
            imputed = tuple((int(lineno[r]), int(k)) for r, k in zip(rr, kk))
    if values.shape[0] == 0:
        raise IngestError(f"{path}: no records left after cleaning")

    return TabularDataset(
        features=values, labels=labels, feature_names=names, source=str(path),
        dropped_rows=dropped, imputed_cells=imputed)


def normalize(dataset: TabularDataset) -> TabularDataset:
    """Per-column min-max scaling to [0, 1]; constant columns become zeros."""
    x = dataset.features
    if np.isnan(x).any():
        raise ValueError("normalize requires a dataset without missing values")
    lo = x.min(axis=0)
    span = x.max(axis=0) - lo
    safe = np.where(span > 0, span, 1.0)
    out = np.where(span > 0, (x - lo) / safe, 0.0)
    # exact endpoints, not lo + span roundoff
    out = np.clip(out, 0.0, 1.0)
    return dataset.replace(features=out, normalized=True)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _apportion(total: int, sizes: Sequence[int]) -> list:
    """Split ``total`` across groups proportionally to ``sizes`` (largest remainder)."""
    n = sum(sizes)
    quotas = [total * s / n for s in sizes]
    counts = [int(math.floor(q)) for q in quotas]
    order = sorted(range(len(sizes)), key=lambda i: (-(quotas[i] - counts[i]), i))
    for i in order[: total - sum(counts)]:
        counts[i] += 1
    return counts


def split(dataset: TabularDataset, seed: int, stratified: bool = True,
          test_fraction: float = 0.2, validation_fraction: float = 0.2) -> TabularDataset:
    """Assign train/validation/test tags.

    The test set takes ``round(test_fraction * N)`` records and validation
    takes ``round(validation_fraction * |rest|)``; stratification apportions
    both counts across classes by largest remainder.
    """
    n = dataset.n
    if n < 10:
        raise ValueError(f"need at least 10 records to split, got {n}")
    n_test = _round_half_up(test_fraction * n)
    n_val = _round_half_up(validation_fraction * (n - n_test))
    rng = np.random.default_rng(seed)
    tags = np.empty(n, dtype=object)

    if stratified:
        classes = np.unique(dataset.labels)
        if len(classes) < 2:
            raise ValueError("both classes must be present to split")
        members = [np.flatnonzero(dataset.labels == c) for c in classes]
        for c, m in zip(classes, members):
            if len(m) < 3:
                raise ValueError(f"class {c} has only {len(m)} members; need at least 3")
        test_counts = _apportion(n_test, [len(m) for m in members])
        val_counts = _apportion(n_val, [len(m) - t for m, t in zip(members, test_counts)])
        groups = zip(members, test_counts, val_counts)
    else:
        groups = [(np.arange(n), n_test, n_val)]

    for idx, t, v in groups:
        idx = rng.permutation(idx)
        tags[idx[:t]] = "test"
        tags[idx[t:t + v]] = "validation"
        tags[idx[t + v:]] = "train"
    return dataset.replace(split_tags=tags.astype(str))


def load_dataset(path, config: IngestConfig) -> TabularDataset:
    """load_csv + normalize + split in one call."""
    ds = normalize(load_csv(path, config))
    return split(ds, config.seed, stratified=config.stratified)


def write_manifest(dataset: TabularDataset, path) -> None:
    """One JSON object per record: index, label, split."""
    if dataset.split_tags is None:
        raise ValueError("dataset has not been split")
    with open(path, "w") as fh:
        for i, (y, tag) in enumerate(zip(dataset.labels, dataset.split_tags)):
            fh.write(json.dumps({"index": i, "label": int(y), "split": str(tag)}) + "\n")


def read_manifest(path) -> list:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def write_features(dataset: TabularDataset, path) -> None:
    """Normalized feature table as CSV with a header; floats in repr form."""
    with open(path, "w") as fh:
        fh.write(",".join(dataset.feature_names) + "\n")
        for row in dataset.features:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def read_features(path) -> tuple:
    with open(path) as fh:
        names = tuple(fh.readline().strip().split(","))
        rows = [[float(v) for v in line.split(",")] for line in fh if line.strip()]
    return names, np.asarray(rows, dtype=np.float64).reshape(len(rows), len(names))
