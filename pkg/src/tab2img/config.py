"""Experiment configuration: a YAML document plus command-line overrides.

The defaults are the reference protocol: SGD with momentum 0.88, learning
rate 0.02, L2 9.4e-7, batch 8, 30 attempts, and an 80/20 split with 20% of
the training part held out for validation.
"""
from __future__ import annotations

import copy
import dataclasses
import os
from dataclasses import dataclass, field
from typing import Any, Optional

import yaml

from .ingest import IngestConfig
from .nn.network import NetworkSpec
from .nn.training import TrainConfig
from .ordering import GAConfig
from .transform import Kind, TransformSpec


class ConfigError(ValueError):
    """Invalid experiment configuration or missing inputs."""


DEFAULTS: dict = {
    "dataset": {
        "path": None,
        "name": None,
        "layout": None,              # wbc | wdbc | generic; inferred from the file name
        "id_column": None,
        "label_column": None,
        "missing_token": "?",
        "imputation": "drop_row",
        "stratified": True,
        "header": False,
    },
    "seed": 0,
    "ordering": {
        "method": "none",            # none | ga | file
        "file": None,                # 1-based comma-separated indices (method=file)
        "list": None,                # explicit 1-based list (method=file, inline)
        "covariance": "normalized",  # normalized | raw
        "ga": {"population": 50, "generations": 100, "crossover_rate": 0.9,
               "mutation_rate": 0.2, "tournament": 3},
    },
    "transform": {"type": 1, "px": 1, "distance_mode": "signed"},
    "network": {"hidden": 64, "filter_scale": 0.5, "filters": None},
    "train": {
        "learning_rate": 0.02, "momentum": 0.88, "l2": 9.4e-7, "batch_size": 8,
        "max_iterations": 1000, "eval_every": 50, "attempts": 30,
        "precision": "float32", "fix_split": False,
    },
    "workers": 1,
    "out": "runs",
}


def _merge(base: dict, over: dict, where: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in over.items():
        if key not in base:
            raise ConfigError(f"unknown config key {where + key!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config key {where + key!r} must be a mapping")
            out[key] = _merge(base[key], value, f"{where}{key}.")
        else:
            out[key] = value
    return out


@dataclass
class ExperimentConfig:
    raw: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS))

    @classmethod
    def from_dict(cls, data: Optional[dict]) -> "ExperimentConfig":
        return cls(_merge(DEFAULTS, data or {}))

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                data = yaml.safe_load(fh) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        return cls.from_dict(data)

    def override(self, **flags) -> "ExperimentConfig":
        """Apply command-line flags; ``None`` means "not given"."""
        r = copy.deepcopy(self.raw)
        mapping = {
            "dataset": ("dataset", "path"), "transform": ("transform", "type"),
            "px": ("transform", "px"), "ordering": ("ordering", "method"),
            "attempts": ("train", "attempts"), "seed": ("seed",),
            "workers": ("workers",), "out": ("out",),
            "max_iterations": ("train", "max_iterations"),
        }
        for flag, value in flags.items():
            if value is None:
                continue
            node = r
            keys = mapping[flag]
            for k in keys[:-1]:
                node = node[k]
            node[keys[-1]] = value
        return ExperimentConfig(r)

    def dump(self) -> str:
        return yaml.safe_dump(self.raw, sort_keys=True)

    # --- typed views -------------------------------------------------------

    @property
    def seed(self) -> int:
        return int(self.raw["seed"])

    @property
    def out(self) -> str:
        return str(self.raw["out"])

    @property
    def workers(self) -> int:
        w = int(self.raw["workers"])
        if w < 1:
            raise ConfigError("workers must be >= 1")
        return w

    @property
    def dataset_path(self) -> str:
        path = self.raw["dataset"]["path"]
        if not path:
            raise ConfigError("no dataset path given (--dataset or dataset.path)")
        return str(path)

    @property
    def layout(self) -> str:
        ds = self.raw["dataset"]
        if ds["layout"]:
            return ds["layout"]
        base = os.path.basename(self.dataset_path).lower()
        if base.startswith("wdbc"):
            return "wdbc"
        if base.startswith("breast-cancer-wisconsin") or base.startswith("wbc"):
            return "wbc"
        return "generic"

    @property
    def dataset_name(self) -> str:
        ds = self.raw["dataset"]
        if ds["name"]:
            return str(ds["name"])
        if self.layout in ("wbc", "wdbc"):
            return self.layout.upper()
        return os.path.splitext(os.path.basename(self.dataset_path))[0]

    def ingest_config(self) -> IngestConfig:
        ds = self.raw["dataset"]
        kw = dict(missing_token=str(ds["missing_token"]), imputation=ds["imputation"],
                  seed=self.seed, stratified=bool(ds["stratified"]), header=bool(ds["header"]))
        try:
            if self.layout == "wbc":
                cfg = IngestConfig.wbc(**kw)
            elif self.layout == "wdbc":
                cfg = IngestConfig.wdbc(**kw)
            else:
                cfg = IngestConfig(layout="generic", label_column=-1, **kw)
            over = {k: ds[k] for k in ("id_column", "label_column") if ds[k] is not None}
            if over:
                cfg = dataclasses.replace(cfg, **over)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return cfg

    @property
    def ordering_method(self) -> str:
        m = self.raw["ordering"]["method"]
        if m not in ("none", "ga", "file"):
            raise ConfigError(f"ordering.method must be none, ga or file, got {m!r}")
        return m

    def ga_config(self) -> GAConfig:
        try:
            return GAConfig(seed=self.seed, **self.raw["ordering"]["ga"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"ordering.ga: {exc}") from exc

    def transform_spec(self) -> TransformSpec:
        t = self.raw["transform"]
        try:
            return TransformSpec.for_scale(Kind(int(t["type"])), int(t["px"]), t["distance_mode"])
        except ValueError as exc:
            raise ConfigError(f"transform: {exc}") from exc

    def network_spec(self) -> NetworkSpec:
        n = self.raw["network"]
        filters = tuple(n["filters"]) if n["filters"] else None
        return NetworkSpec(hidden=int(n["hidden"]), filter_scale=float(n["filter_scale"]),
                           filters=filters)

    def train_config(self, seed: Optional[int] = None) -> TrainConfig:
        t = {k: v for k, v in self.raw["train"].items() if k != "fix_split"}
        try:
            return TrainConfig(seed=self.seed if seed is None else seed, **t)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"train: {exc}") from exc

    @property
    def fix_split(self) -> bool:
        return bool(self.raw["train"]["fix_split"])
