"""Recursive feature elimination driven by neural-network attributions
(RFEwNA), with a linear-coefficient RFE baseline and the bi-module evaluation
where a fresh network is trained on a given selection.
"""
from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .attribution import METHODS, attribute, mean_abs_importance
from .metrics import MetricRecord, accuracy, fprec, mae, uscore
from .nn import MLP, EmptyDataError, TrainConfig, fit, sigmoid
from .seeding import derive_seed
from .symfunc import TabularDataset


@dataclass
class RfeConfig:
    drop_rate: float = 0.5
    target_k: int = 3
    explainer: str = "sa"
    strategy: str = "uni"
    inner_train: TrainConfig = field(default_factory=TrainConfig)
    hidden: tuple = (100, 100, 100)
    dropout_rate: float = 0.0
    ig_steps: int = 10
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.drop_rate < 1.0:
            raise ValueError("drop_rate must be in (0, 1)")
        if self.target_k < 1:
            raise ValueError("target_k must be >= 1")
        if self.explainer not in METHODS + ("coef",):
            raise ValueError(f"unknown explainer {self.explainer!r}")
        if self.strategy not in ("uni", "bi"):
            raise ValueError(f"unknown strategy {self.strategy!r}")


@dataclass
class RfeIteration:
    selected: list
    importance: list
    metrics: list


@dataclass
class RfeResult:
    iterations: list
    final_selected: list
    final_model_metrics: list
    wall_time_s: float = 0.0
    explainer: str = ""

    def sizes(self) -> list:
        return [len(it.selected) for it in self.iterations] + [len(self.final_selected)]

    def trajectory(self) -> list:
        rows = [{"size": len(it.selected), "selected": it.selected,
                 "importance": it.importance,
                 "metrics": {m.name: m.value for m in it.metrics}} for it in self.iterations]
        rows.append({"size": len(self.final_selected), "selected": self.final_selected,
                     "importance": None,
                     "metrics": {m.name: m.value for m in self.final_model_metrics}})
        return rows

    def save_trajectory(self, path) -> None:
        Path(path).write_text(json.dumps(self.trajectory(), indent=1))


def n_to_drop(n_current: int, drop_rate: float, target_k: int) -> int:
    return min(math.ceil(drop_rate * n_current), n_current - target_k)


def elimination_schedule(n: int, drop_rate: float, target_k: int) -> list:
    """Sizes of the selected set, from ``n`` down to ``target_k``."""
    sizes = [n]
    while sizes[-1] > target_k:
        sizes.append(sizes[-1] - n_to_drop(sizes[-1], drop_rate, target_k))
    return sizes


def eliminate(selected: Sequence[int], importance, n_drop: int) -> list:
    """Drop the ``n_drop`` least important features; on ties the higher position goes first."""
    importance = np.asarray(importance, dtype=np.float64)
    order = np.lexsort((np.arange(len(importance)), -importance))
    keep = sorted(order[:len(selected) - n_drop])
    return [int(selected[i]) for i in keep]


def validation_metrics(model: MLP, data: TabularDataset, loss: str) -> list:
    x_val, y_val = data.validation_arrays()
    if len(x_val) == 0:
        return []
    out = model.forward(x_val, mode="eval")[:, 0]
    if loss == "bce":
        return [MetricRecord("accuracy", accuracy(sigmoid(out), y_val))]
    return [MetricRecord("mae", mae(out, y_val)), MetricRecord("uscore", uscore(out, y_val))]


def fit_subset(data: TabularDataset, columns: Sequence[int], hidden: Sequence[int],
               train_cfg: TrainConfig, dropout_rate: float = 0.0, init_seed: int = 0):
    """Fresh MLP trained on ``columns`` of ``data``; returns (model, restricted data)."""
    sub = data.select_columns(columns)
    model = MLP([sub.n_features, *hidden, 1], dropout_rate, seed=init_seed)
    x, y = sub.train_arrays()
    fit(model, x, y, train_cfg)
    return model, sub


def _importance(model: MLP, sub: TabularDataset, explainer: str, ig_steps: int) -> np.ndarray:
    if explainer == "coef":
        return np.abs(model.weights[0][0])
    x_val, _ = sub.validation_arrays()
    if len(x_val) == 0:
        x_val, _ = sub.train_arrays()
    return mean_abs_importance(attribute(model, x_val, explainer, steps=ig_steps))


def _run(data: TabularDataset, cfg: RfeConfig, hidden: Sequence[int]) -> RfeResult:
    n = data.n_features
    if cfg.target_k > n:
        raise ValueError(f"target_k={cfg.target_k} exceeds the {n} available features")
    start = time.perf_counter()
    selected = list(range(n))
    iterations = []
    step = 0
    while len(selected) > cfg.target_k:
        seed = derive_seed(cfg.seed, f"iter={step}")
        train_cfg = replace(cfg.inner_train, seed=seed)
        model, sub = fit_subset(data, selected, hidden, train_cfg, cfg.dropout_rate, init_seed=seed)
        imp = _importance(model, sub, cfg.explainer, cfg.ig_steps)
        iterations.append(RfeIteration(list(selected), imp.tolist(),
                                       validation_metrics(model, sub, train_cfg.loss)))
        selected = eliminate(selected, imp, n_to_drop(len(selected), cfg.drop_rate, cfg.target_k))
        step += 1
    final_cfg = replace(cfg.inner_train, seed=derive_seed(cfg.seed, "final"))
    if cfg.strategy == "bi" or cfg.explainer != "coef":
        final_metrics = bi_module_eval(selected, data, final_cfg, cfg.hidden, cfg.dropout_rate)
    else:
        model, sub = fit_subset(data, selected, hidden, final_cfg, init_seed=final_cfg.seed)
        final_metrics = validation_metrics(model, sub, final_cfg.loss)
    if data.predictive_indices and len(data.predictive_indices) == len(selected):
        final_metrics.append(MetricRecord("fprec", fprec(selected, data.predictive_indices)))
    return RfeResult(iterations, selected, final_metrics, time.perf_counter() - start, cfg.explainer)


def rfewna(data: TabularDataset, cfg: RfeConfig) -> RfeResult:
    """Recursive elimination using mean |attribution| of a freshly trained MLP."""
    if cfg.explainer not in METHODS:
        raise ValueError(f"rfewna needs an attribution explainer, got {cfg.explainer!r}")
    return _run(data, cfg, cfg.hidden)


def rfe_linear(data: TabularDataset, cfg: RfeConfig) -> RfeResult:
    """Classic RFE ranking features by |coefficient| of a linear model trained
    with the same loss. With ``strategy='bi'`` the final score comes from an MLP
    trained on the selection; otherwise from the linear model itself."""
    if cfg.explainer != "coef":
        cfg = replace(cfg, explainer="coef")
    return _run(data, cfg, ())


def bi_module_eval(selected: Sequence[int], data: TabularDataset, inner_train: TrainConfig,
                   hidden: Sequence[int] = (100, 100, 100), dropout_rate: float = 0.0) -> list:
    """Validation metrics of a fresh MLP trained on the selected columns only."""
    if len(selected) == 0:
        raise EmptyDataError("empty feature selection")
    model, sub = fit_subset(data, selected, hidden, inner_train, dropout_rate,
                            init_seed=inner_train.seed)
    return validation_metrics(model, sub, inner_train.loss)
