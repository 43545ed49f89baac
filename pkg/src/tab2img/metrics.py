"""Confusion-matrix accounting with malignant as the positive class.

Scores whose denominator is zero are ``None`` ("undefined"), never 0 or 1.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

UNDEFINED = "undefined"


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class MetricsReport:
    accuracy: Optional[float]
    sensitivity: Optional[float]
    specificity: Optional[float]
    precision: Optional[float]
    f1: Optional[float]
    attempt: Optional[int] = None
    split: Optional[str] = None
    seconds: Optional[float] = None


def confusion(predictions, labels) -> ConfusionMatrix:
    p = np.asarray(predictions).astype(np.int64).ravel()
    y = np.asarray(labels).astype(np.int64).ravel()
    if p.size == 0:
        raise ValueError("confusion of an empty prediction set")
    if p.shape != y.shape:
        raise ValueError(f"{p.size} predictions for {y.size} labels")
    if not (np.isin(p, (0, 1)).all() and np.isin(y, (0, 1)).all()):
        raise ValueError("predictions and labels must be binary (0 benign, 1 malignant)")
    return ConfusionMatrix(
        tp=int(np.sum((p == 1) & (y == 1))),
        fp=int(np.sum((p == 1) & (y == 0))),
        tn=int(np.sum((p == 0) & (y == 0))),
        fn=int(np.sum((p == 0) & (y == 1))),
    )


def _ratio(num: int, den: int) -> Optional[float]:
    return num / den if den else None


def scores(cm: ConfusionMatrix, attempt=None, split=None, seconds=None) -> MetricsReport:
    if cm.total <= 0:
        raise ValueError("scores of an empty confusion matrix")
    sens = _ratio(cm.tp, cm.tp + cm.fn)
    prec = _ratio(cm.tp, cm.tp + cm.fp)
    if sens is None or prec is None:
        f1 = None
    elif prec + sens == 0:
        f1 = 0.0  # TP = 0 with both rates defined: 2TP/(2TP+FP+FN) = 0
    else:
        f1 = 2 * prec * sens / (prec + sens)
    return MetricsReport(
        accuracy=(cm.tp + cm.tn) / cm.total,
        sensitivity=sens,
        specificity=_ratio(cm.tn, cm.tn + cm.fp),
        precision=prec,
        f1=f1,
        attempt=attempt,
        split=split,
        seconds=seconds,
    )


def fmt_score(v: Optional[float], digits: int = 6) -> str:
    return UNDEFINED if v is None else f"{v:.{digits}f}"


def parse_score(text: str) -> Optional[float]:
    return None if text == UNDEFINED else float(text)
