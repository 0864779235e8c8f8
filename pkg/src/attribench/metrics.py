"""Prediction and attribution scores."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .attribution import AttributionVector, mean_abs_importance, topk_features

USCORE_EPS = 1e-8


@dataclass
class MetricRecord:
    name: str
    value: float
    context: dict = field(default_factory=dict)

    def __post_init__(self):
        self.value = float(self.value)
        if not np.isfinite(self.value):
            raise ValueError(f"metric {self.name!r} is not finite: {self.value}")


def _pair(preds, targets):
    p = np.asarray(preds, dtype=np.float64).ravel()
    t = np.asarray(targets, dtype=np.float64).ravel()
    if p.shape != t.shape:
        raise ValueError(f"length mismatch: {p.size} predictions vs {t.size} targets")
    if p.size == 0:
        raise ValueError("need at least one prediction")
    return p, t


def uscore(preds, targets, eps: float = USCORE_EPS) -> float:
    """Mean of 1 - |p - y| / (|p| + |y| + eps); lies in (0, 1]."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    p, t = _pair(preds, targets)
    return float(np.mean(1.0 - np.abs(p - t) / (np.abs(p) + np.abs(t) + eps)))


def fprec(topk: Sequence[int], annotated: Sequence[int]) -> float:
    """Fraction of the k annotated features found among the model's top k."""
    top, ann = set(int(i) for i in topk), set(int(i) for i in annotated)
    if len(top) != len(ann) or not ann:
        raise ValueError(f"fprec needs equal, nonempty sets (got {len(top)} and {len(ann)})")
    return len(top & ann) / len(ann)


def consistency(per_sample_attribs, k: int) -> float:
    """Mean overlap of each sample's top-k with the top-k of the mean |attribution|."""
    rows = [a.values if isinstance(a, AttributionVector) else a for a in per_sample_attribs]
    if len(rows) == 0:
        raise ValueError("need at least one attribution")
    a = np.asarray(rows, dtype=np.float64)
    reference = set(topk_features(mean_abs_importance(a), k))
    return float(np.mean([len(reference & set(topk_features(r, k))) / k for r in a]))


def convergence_auc(curve) -> float:
    """Trapezoidal area under a per-epoch curve, scaled to the unit interval."""
    c = np.asarray(curve, dtype=np.float64)
    if c.ndim != 1 or c.size < 2:
        raise ValueError("need a curve with at least two points")
    return float(np.trapezoid(c) / (c.size - 1))


def mae(preds, targets) -> float:
    p, t = _pair(preds, targets)
    return float(np.mean(np.abs(p - t)))


def accuracy(probs, targets, threshold: float = 0.5) -> float:
    p, t = _pair(probs, targets)
    return float(np.mean((p >= threshold) == (t >= 0.5)))


def basic_metrics(preds, targets, task: str = "regression", **context) -> list:
    """MAE for regression; accuracy for binary classification (``preds`` are
    sigmoid probabilities)."""
    if task == "regression":
        return [MetricRecord("mae", mae(preds, targets), dict(context))]
    if task == "classification":
        return [MetricRecord("accuracy", accuracy(preds, targets), dict(context))]
    raise ValueError(f"unknown task {task!r}")
