"""Pipeline stages behind the CLI subcommands.

Output directory layout (``out``)::

    dataset/manifest.jsonl       one record per line: index, label, split
    dataset/features.csv         normalized features (header = field names)
    dataset/raw_features.csv     cleaned, unnormalized features
    dataset/meta.json
    ordering/ordering.txt        1-based comma-separated field order
    ordering/trace.txt           generation, best cost
    ordering/ranks.txt           rank matrix, one row per line
    images/t{T}_px{P}/NNNNN_t{T}_px{P}.pgm|ppm
    images/t{T}_px{P}/manifest.jsonl
    train/t{T}_px{P}/reports.csv
    train/t{T}_px{P}/attempt_NN.ckpt, attempt_NN.trace.txt
    report/report.txt, report/aggregate.json

Each stage validates all of its inputs before it writes anything.
"""
from __future__ import annotations

import concurrent.futures
import csv
import json
import logging
import os
import time
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from . import ingest, metrics, ordering, transform
from .config import ConfigError, ExperimentConfig
from .nn import checkpoint, network, training

log = logging.getLogger(__name__)

REPORT_FIELDS = ["dataset", "transform", "px", "attempt", "split", "accuracy",
                 "sensitivity", "specificity", "f1", "seconds"]
DIVERGED = "diverged"


def _require(path: str, what: str) -> str:
    if not os.path.exists(path):
        raise ConfigError(f"{what} not found: {path}")
    return path


def _dirs(cfg: ExperimentConfig, kind=None, px=None) -> dict:
    base = cfg.out
    tag = f"t{int(kind)}_px{int(px)}" if kind is not None else None
    return {
        "dataset": os.path.join(base, "dataset"),
        "ordering": os.path.join(base, "ordering"),
        "images": os.path.join(base, "images", tag) if tag else None,
        "train": os.path.join(base, "train", tag) if tag else None,
        "report": os.path.join(base, "report"),
    }


# --- ingest --------------------------------------------------------------------

def cmd_ingest(cfg: ExperimentConfig) -> ingest.TabularDataset:
    path = _require(cfg.dataset_path, "dataset file")
    icfg = cfg.ingest_config()
    try:
        raw = ingest.load_csv(path, icfg)
        ds = ingest.split(ingest.normalize(raw), icfg.seed, stratified=icfg.stratified)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    out = _dirs(cfg)["dataset"]
    os.makedirs(out, exist_ok=True)
    ingest.write_manifest(ds, os.path.join(out, "manifest.jsonl"))
    ingest.write_features(ds, os.path.join(out, "features.csv"))
    ingest.write_features(raw, os.path.join(out, "raw_features.csv"))
    meta = {
        "dataset": cfg.dataset_name, "source": os.path.basename(path), "layout": icfg.layout,
        "n": ds.n, "d": ds.d, "feature_names": list(ds.feature_names),
        "imputation": icfg.imputation, "dropped_rows": list(ds.dropped_rows),
        "imputed_cells": [list(c) for c in ds.imputed_cells], "seed": icfg.seed,
        "stratified": icfg.stratified,
        "class_counts": {"benign": int(np.sum(ds.labels == 0)),
                         "malignant": int(np.sum(ds.labels == 1))},
        "split_counts": {t: int(np.sum(ds.split_tags == t)) for t in ingest.SPLITS},
    }
    with open(os.path.join(out, "meta.json"), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return ds


def load_ingested(cfg: ExperimentConfig, which: str = "features") -> ingest.TabularDataset:
    out = _dirs(cfg)["dataset"]
    man = ingest.read_manifest(_require(os.path.join(out, "manifest.jsonl"), "dataset manifest"))
    names, x = ingest.read_features(_require(os.path.join(out, f"{which}.csv"), "feature table"))
    if x.shape[0] != len(man):
        raise ConfigError("feature table and manifest disagree on the record count")
    return ingest.TabularDataset(
        features=x, labels=np.array([m["label"] for m in man], dtype=np.int64),
        feature_names=names, split_tags=np.array([m["split"] for m in man]),
        normalized=(which == "features"))


def _dataset_name(cfg: ExperimentConfig) -> str:
    """Configured name, else the one recorded at ingest time."""
    if cfg.raw["dataset"]["name"] or cfg.raw["dataset"]["path"]:
        return cfg.dataset_name
    meta = os.path.join(_dirs(cfg)["dataset"], "meta.json")
    with open(_require(meta, "dataset metadata")) as fh:
        return json.load(fh)["dataset"]


# --- ordering ------------------------------------------------------------------

def _explicit_ordering(cfg: ExperimentConfig, d: int) -> tuple:
    o = cfg.raw["ordering"]
    if o["list"] is not None:
        perm = tuple(int(v) - 1 for v in o["list"])
    elif o["file"]:
        with open(_require(o["file"], "ordering file")) as fh:
            perm = ordering.parse_ordering(fh.read())
    else:
        raise ConfigError("ordering.method=file needs ordering.file or ordering.list")
    if len(perm) != d:
        raise ConfigError(f"explicit ordering has {len(perm)} fields, dataset has {d}")
    if sorted(perm) != list(range(d)):
        raise ConfigError("explicit ordering is not a permutation of 1..d")
    return perm


def cmd_order(cfg: ExperimentConfig) -> ordering.FieldOrdering:
    method = cfg.ordering_method
    which = "raw_features" if cfg.raw["ordering"]["covariance"] == "raw" else "features"
    ds = load_ingested(cfg, which)
    if method == "file":
        perm = _explicit_ordering(cfg, ds.d)
    ga_cfg = cfg.ga_config() if method == "ga" else None
    if ds.d < 2:
        raise ConfigError("ordering needs at least 2 fields")

    ranks = ordering.rank_adjacency(ds)
    if method == "none":
        result = ordering.identity_ordering(ranks)
    elif method == "ga":
        result = ordering.ga_optimize(ranks, ga_cfg)
    else:
        result = ordering.FieldOrdering(perm, ordering.path_cost(ranks, perm))

    out = _dirs(cfg)["ordering"]
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "ordering.txt"), "w") as fh:
        fh.write(ordering.format_ordering(result) + "\n")
    with open(os.path.join(out, "trace.txt"), "w") as fh:
        fh.write(ordering.format_trace(result.trace or (result.cost,)))
    with open(os.path.join(out, "ranks.txt"), "w") as fh:
        for row in ranks.ranks:
            fh.write(" ".join(str(int(v)) for v in row) + "\n")
    return result


def current_ordering(cfg: ExperimentConfig, d: int) -> Optional[tuple]:
    """Field order to apply before transforming, or None for the file order."""
    method = cfg.ordering_method
    if method == "none":
        return None
    if method == "file":
        return _explicit_ordering(cfg, d)
    path = os.path.join(_dirs(cfg)["ordering"], "ordering.txt")
    if not os.path.exists(path):
        raise ConfigError("ordering.method=ga but no ordering has been computed; run `order` first")
    with open(path) as fh:
        perm = ordering.parse_ordering(fh.read())
    if len(perm) != d:
        raise ConfigError(f"stored ordering has {len(perm)} fields, dataset has {d}")
    return perm


# --- transform -----------------------------------------------------------------

def image_name(index: int, kind: int, px: int) -> str:
    ext = "ppm" if int(kind) == transform.Kind.COMBINED else "pgm"
    return f"{index:05d}_t{int(kind)}_px{int(px)}.{ext}"


def cmd_transform(cfg: ExperimentConfig) -> str:
    spec = cfg.transform_spec()
    ds = load_ingested(cfg)
    perm = current_ordering(cfg, ds.d)
    if perm is not None:
        ds = ordering.reorder_fields(ds, perm)
    out = _dirs(cfg, spec.kind, spec.px_scale)["images"]
    os.makedirs(out, exist_ok=True)
    h, w, c = spec.image_shape(ds.d)
    lines = []
    for i, (x, y, tag) in enumerate(zip(ds.features, ds.labels, ds.split_tags)):
        img = transform.transform(x, spec, source_index=i, label=int(y))
        name = image_name(i, spec.kind, spec.px_scale)
        transform.export_image(img, os.path.join(out, name))
        lines.append({"path": name, "index": i, "label": int(y), "split": str(tag),
                      "transform": int(spec.kind), "px": spec.px_scale})
    header = {
        "transform": int(spec.kind), "px": spec.px_scale, "psi": spec.psi, "gamma": spec.gamma,
        "expansion": list(spec.expansion), "distance_mode": spec.distance_mode,
        "height": h, "width": w, "channels": c, "d": ds.d,
        "ordering": None if perm is None else [p + 1 for p in perm],
    }
    if spec.kind == transform.Kind.COMBINED:
        header["sizing"] = ("side = psi*d + gamma*(d+1); distance and value channels "
                            "nearest-neighbour replicated, bar channel padded at the bottom")
    with open(os.path.join(out, "manifest.jsonl"), "w") as fh:
        fh.write(json.dumps({"header": header}, sort_keys=True) + "\n")
        for line in lines:
            fh.write(json.dumps(line) + "\n")
    return out


def read_image_manifest(path) -> tuple:
    with open(path) as fh:
        rows = [json.loads(line) for line in fh if line.strip()]
    if not rows or "header" not in rows[0]:
        raise ConfigError(f"{path}: missing manifest header")
    return rows[0]["header"], rows[1:]


def load_images(cfg: ExperimentConfig):
    spec = cfg.transform_spec()
    folder = _dirs(cfg, spec.kind, spec.px_scale)["images"]
    header, rows = read_image_manifest(
        _require(os.path.join(folder, "manifest.jsonl"), "image manifest"))
    shape = (header["height"], header["width"], header["channels"])
    x = np.empty((len(rows),) + shape, dtype=np.float32)
    for k, row in enumerate(rows):
        data = transform.read_image(_require(os.path.join(folder, row["path"]), "image file"))
        if data.shape != shape:
            raise ConfigError(f"{row['path']}: shape {data.shape}, manifest says {shape}")
        x[k] = data / np.float32(255.0)
    labels = np.array([r["label"] for r in rows], dtype=np.int64)
    tags = np.array([r["split"] for r in rows])
    return x, labels, tags, header


# --- train ---------------------------------------------------------------------

@dataclass
class AttemptResult:
    attempt: int
    rows: list
    model: Optional[network.TrainedModel]
    error: Optional[str] = None


def _attempt_tags(cfg: ExperimentConfig, labels, tags, seed: int):
    if cfg.fix_split:
        return tags
    dummy = ingest.TabularDataset(features=np.zeros((labels.size, 0)), labels=labels,
                                  feature_names=())
    return ingest.split(dummy, seed, stratified=bool(cfg.raw["dataset"]["stratified"])).split_tags


def run_attempt(cfg: ExperimentConfig, x, labels, tags, attempt: int, meta: dict) -> AttemptResult:
    seed = cfg.seed + attempt
    tcfg = cfg.train_config(seed)
    start = time.perf_counter()
    split_tags = _attempt_tags(cfg, labels, tags, seed)
    sets = {t: np.flatnonzero(split_tags == t) for t in ingest.SPLITS}
    model = network.build(cfg.network_spec(), x.shape[1:], seed=seed, dtype=tcfg.dtype)
    xs = x.astype(tcfg.dtype, copy=False)
    try:
        model = training.train(model, xs[sets["train"]], labels[sets["train"]], tcfg,
                               xs[sets["validation"]], labels[sets["validation"]])
    except training.TrainingDiverged as exc:
        seconds = time.perf_counter() - start
        log.warning("attempt %d diverged: %s", attempt, exc)
        rows = [dict(meta, attempt=attempt, split=s, accuracy=DIVERGED, sensitivity=DIVERGED,
                     specificity=DIVERGED, f1=DIVERGED, seconds=f"{seconds:.3f}")
                for s in ("validation", "test")]
        return AttemptResult(attempt, rows, None, str(exc))
    reports = {}
    for s in ("validation", "test"):
        idx = sets[s]
        if idx.size == 0:
            continue
        pred = network.predict(model, xs[idx])
        reports[s] = metrics.scores(metrics.confusion(pred, labels[idx]), attempt=attempt, split=s)
    seconds = time.perf_counter() - start
    rows = [dict(meta, attempt=attempt, split=s, accuracy=metrics.fmt_score(r.accuracy),
                 sensitivity=metrics.fmt_score(r.sensitivity),
                 specificity=metrics.fmt_score(r.specificity),
                 f1=metrics.fmt_score(r.f1), seconds=f"{seconds:.3f}")
            for s, r in reports.items()]
    return AttemptResult(attempt, rows, model)


def _attempt_worker(args):
    raw, x, labels, tags, attempt, meta = args
    return run_attempt(ExperimentConfig(raw), x, labels, tags, attempt, meta)


def cmd_train(cfg: ExperimentConfig) -> str:
    spec = cfg.transform_spec()
    tcfg = cfg.train_config()
    workers = cfg.workers
    x, labels, tags, header = load_images(cfg)
    if tcfg.batch_size > np.sum(tags == "train"):
        raise ConfigError("batch size exceeds the training set")
    network.build(cfg.network_spec(), x.shape[1:], seed=0)  # shape guard before any output
    out = _dirs(cfg, spec.kind, spec.px_scale)["train"]
    os.makedirs(out, exist_ok=True)
    meta = {"dataset": _dataset_name(cfg), "transform": int(spec.kind), "px": spec.px_scale}
    jobs = [(cfg.raw, x, labels, tags, a, meta) for a in range(tcfg.attempts)]
    if workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_attempt_worker, jobs))
    else:
        results = [_attempt_worker(j) for j in jobs]
    results.sort(key=lambda r: r.attempt)

    with open(os.path.join(out, "reports.csv"), "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=REPORT_FIELDS, lineterminator="\n")
        writer.writeheader()
        for r in results:
            writer.writerows(r.rows)
    for r in results:
        if r.model is None:
            continue
        checkpoint.save(r.model, os.path.join(out, f"attempt_{r.attempt:02d}.ckpt"))
        with open(os.path.join(out, f"attempt_{r.attempt:02d}.trace.txt"), "w") as fh:
            fh.write(training.format_trace(r.model))
    return os.path.join(out, "reports.csv")


# --- report --------------------------------------------------------------------

def read_report_rows(paths: Iterable[str]) -> list:
    rows = []
    for p in paths:
        with open(_require(p, "report file"), newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != REPORT_FIELDS:
                raise ConfigError(f"{p}: unexpected columns {reader.fieldnames}")
            rows.extend(reader)
    return rows


def _mean(values):
    vals = [v for v in values if v is not None]
    return sum(vals) / len(vals) if vals else None


def aggregate(rows: list) -> list:
    """Best/mean scores per (dataset, transform, px) cell."""
    cells: dict = {}
    for row in rows:
        key = (row["dataset"], int(row["transform"]), int(row["px"]))
        cells.setdefault(key, []).append(row)
    out = []
    for key in sorted(cells):
        group = cells[key]
        attempts = sorted({int(r["attempt"]) for r in group})
        ok = [r for r in group if r["accuracy"] != DIVERGED]
        diverged = sorted({int(r["attempt"]) for r in group if r["accuracy"] == DIVERGED})

        def col(split, name):
            return [metrics.parse_score(r[name]) for r in ok if r["split"] == split]

        val, test = col("validation", "accuracy"), col("test", "accuracy")
        seconds = {}
        for r in group:
            seconds[int(r["attempt"])] = float(r["seconds"])
        out.append({
            "dataset": key[0], "transform": key[1], "px": key[2],
            "attempts": len(attempts), "diverged": len(diverged),
            "best_val_accuracy": max(val) if val else None,
            "mean_val_accuracy": _mean(val),
            "best_test_accuracy": max(test) if test else None,
            "mean_test_accuracy": _mean(test),
            "mean_test_sensitivity": _mean(col("test", "sensitivity")),
            "mean_test_specificity": _mean(col("test", "specificity")),
            "mean_test_f1": _mean(col("test", "f1")),
            "mean_seconds": _mean(list(seconds.values())),
        })
    return out


def _pct(v):
    return "-" if v is None else f"{100 * v:.2f}"


def _num(v, digits=2):
    return "-" if v is None else f"{v:.{digits}f}"


def _table(headers, body) -> str:
    widths = [max(len(str(x)) for x in col) for col in zip(headers, *body)]
    line = lambda cells: "  ".join(str(c).rjust(w) for c, w in zip(cells, widths))
    rule = "  ".join("-" * w for w in widths)
    return "\n".join([line(headers), rule] + [line(r) for r in body])


def render_report(cells: list) -> str:
    pxs = sorted({c["px"] for c in cells})
    by_key = {(c["dataset"], c["transform"], c["px"]): c for c in cells}
    groups = sorted({(c["dataset"], c["transform"]) for c in cells})
    headers = ["Dataset", "Type"] + [f"px{p} {s}" for p in pxs for s in ("Val", "Test")]
    parts = []
    for title, prefix in (("Best classification accuracy (%)", "best"),
                          ("Average classification accuracy (%)", "mean")):
        body = []
        for ds, t in groups:
            row = [ds, t]
            for p in pxs:
                c = by_key.get((ds, t, p))
                row += [_pct(c and c[f"{prefix}_val_accuracy"]),
                        _pct(c and c[f"{prefix}_test_accuracy"])]
            body.append(row)
        parts.append(title + "\n" + _table(headers, body))
    body = [[c["dataset"], c["transform"], f"px{c['px']}", _num(c["mean_test_sensitivity"]),
             _num(c["mean_test_specificity"]), _num(c["mean_test_f1"]),
             _num(c["mean_seconds"], 1), c["attempts"], c["diverged"]] for c in cells]
    parts.append("Average test scores\n" + _table(
        ["Dataset", "Type", "Size", "Sensitivity", "Specificity", "F1", "Run time (s)",
         "Attempts", "Diverged"], body))
    return "\n\n".join(parts) + "\n"


def cmd_report(cfg: ExperimentConfig, paths: Optional[list] = None) -> str:
    if not paths:
        spec = cfg.transform_spec()
        paths = [os.path.join(_dirs(cfg, spec.kind, spec.px_scale)["train"], "reports.csv")]
    rows = read_report_rows(paths)
    if not rows:
        raise ConfigError("no report rows to aggregate")
    cells = aggregate(rows)
    text = render_report(cells)
    out = _dirs(cfg)["report"]
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "report.txt"), "w") as fh:
        fh.write(text)
    with open(os.path.join(out, "aggregate.json"), "w") as fh:
        json.dump(cells, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return text
