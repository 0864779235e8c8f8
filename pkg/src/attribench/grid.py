"""Grid runner over (model x attribution x noise condition) cells.

Each (model cell, replicate seed) pair is an independent job: generate data,
train, attribute the validation rows, score. Results are long-form CSV with
one metric per row, sorted by the cell's position in the cartesian product
so serial, parallel and reordered runs produce identical files. Timings live
in a separate ``timings.csv`` because they are not reproducible.
"""
from __future__ import annotations

import csv
import io
import itertools
import json
import math
import time
import tracemalloc
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, asdict
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .attribution import METHODS, attribute, dataset_topk
from .metrics import consistency, convergence_auc, fprec, mae, uscore
from .nn import MLP, TrainConfig, train
from .seeding import derive_seed
from .symfunc import FUNCTIONS, NoiseSpec, generate_dataset

RESULTS_SCHEMA = "# attribench-results v1"
METRIC_NAMES = ("uscore", "mae", "fprec", "consistency", "convergence_auc")
COLUMNS = ["cell", "function_id", "feature_dist", "n_noise", "label_noise_std", "noise_seed",
           "n_samples", "split_ratio", "width", "depth", "learning_rate", "dropout_rate",
           "optimizer", "epochs", "batch_size", "ig_steps", "method", "metric", "seed",
           "value", "status", "message"]


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass
class GridConfig:
    function_ids: list = field(default_factory=lambda: [2])
    noise_specs: list = field(default_factory=lambda: [NoiseSpec()])
    widths: list = field(default_factory=lambda: [100])
    depths: list = field(default_factory=lambda: [3])
    learning_rates: list = field(default_factory=lambda: [1e-3])
    dropout_rates: list = field(default_factory=lambda: [0.0])
    attribution_methods: list = field(default_factory=lambda: list(METHODS))
    metrics: list = field(default_factory=lambda: ["uscore", "fprec"])
    seeds: list = field(default_factory=lambda: [0])
    output_dir: str = "results"
    n_samples: int = 10_000
    split_ratio: float = 0.8
    epochs: int = 1000
    optimizer: str = "adam"
    batch_size: int = 128
    ig_steps: int = 10
    record_every: int = 10
    max_eval_samples: int = 2000
    workers: int = 1

    def __post_init__(self):
        self.noise_specs = [n if isinstance(n, NoiseSpec) else _noise_from_dict(n)
                            for n in self.noise_specs]
        self.validate()

    def validate(self):
        for name in ("function_ids", "noise_specs", "widths", "depths", "learning_rates",
                     "dropout_rates", "attribution_methods", "metrics", "seeds"):
            if not getattr(self, name):
                raise ConfigError(name, "sweep axis must be nonempty")
        for fid in self.function_ids:
            if fid not in FUNCTIONS:
                raise ConfigError("function_ids", f"unknown function id {fid!r}")
        for m in self.attribution_methods:
            if m not in METHODS:
                raise ConfigError("attribution_methods", f"unknown method {m!r}")
        for m in self.metrics:
            if m not in METRIC_NAMES:
                raise ConfigError("metrics", f"unknown metric {m!r}")
        if any(w < 1 for w in self.widths):
            raise ConfigError("widths", "widths must be >= 1")
        if any(d < 0 for d in self.depths):
            raise ConfigError("depths", "depths must be >= 0")
        if any(lr <= 0 for lr in self.learning_rates):
            raise ConfigError("learning_rates", "learning rates must be positive")
        if any(not 0 <= p < 1 for p in self.dropout_rates):
            raise ConfigError("dropout_rates", "dropout rates must be in [0, 1)")
        if self.n_samples < 2:
            raise ConfigError("n_samples", "need at least two samples")
        if not 0 < self.split_ratio < 1:
            raise ConfigError("split_ratio", "must be in (0, 1)")
        if self.epochs < 0:
            raise ConfigError("epochs", "must be >= 0")
        if self.optimizer not in ("sgd", "adam"):
            raise ConfigError("optimizer", f"unknown optimizer {self.optimizer!r}")
        if "convergence_auc" in self.metrics and (self.record_every < 1 or self.epochs < 2 * self.record_every):
            raise ConfigError("record_every", "convergence_auc needs at least two recorded epochs")

    @classmethod
    def from_dict(cls, d: dict) -> "GridConfig":
        known = {f.name for f in fields(cls)}
        for key in d:
            if key not in known:
                raise ConfigError(key, "unknown config field")
        try:
            return cls(**d)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError("noise_specs", str(exc)) from None

    @classmethod
    def from_json(cls, path) -> "GridConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        d = asdict(self)
        return d


def _noise_from_dict(d) -> NoiseSpec:
    if not isinstance(d, dict):
        raise ConfigError("noise_specs", f"expected an object, got {d!r}")
    try:
        return NoiseSpec(**d)
    except TypeError as exc:
        raise ConfigError("noise_specs", str(exc)) from None


@dataclass(frozen=True)
class Cell:
    index: int
    function_id: int
    noise: NoiseSpec
    width: int
    depth: int
    learning_rate: float
    dropout_rate: float

    @property
    def key(self) -> str:
        n = self.noise
        return (f"f={self.function_id}|dist={n.feature_dist}|noise={n.n_noise}|"
                f"label_noise={n.label_noise_std!r}|noise_seed={n.seed}|w={self.width}|"
                f"d={self.depth}|lr={self.learning_rate!r}|p={self.dropout_rate!r}")

    @property
    def data_key(self) -> str:
        n = self.noise
        return (f"data|f={self.function_id}|dist={n.feature_dist}|noise={n.n_noise}|"
                f"label_noise={n.label_noise_std!r}|noise_seed={n.seed}")


def cells(cfg: GridConfig) -> list:
    product = itertools.product(cfg.function_ids, cfg.noise_specs, cfg.widths, cfg.depths,
                                cfg.learning_rates, cfg.dropout_rates)
    return [Cell(i, *combo) for i, combo in enumerate(product)]


def grid_size(cfg: GridConfig) -> int:
    """Number of (cell, seed) executions, counting each attribution method as its own cell."""
    return len(cells(cfg)) * len(cfg.attribution_methods) * len(cfg.seeds)


def _row(cfg: GridConfig, cell: Cell, seed: int, method: str, metric: str, value,
         status: str = "ok", message: str = "") -> dict:
    n = cell.noise
    return {
        "cell": cell.index, "function_id": cell.function_id, "feature_dist": n.feature_dist,
        "n_noise": n.n_noise, "label_noise_std": n.label_noise_std, "noise_seed": n.seed,
        "n_samples": cfg.n_samples, "split_ratio": cfg.split_ratio, "width": cell.width,
        "depth": cell.depth, "learning_rate": cell.learning_rate,
        "dropout_rate": cell.dropout_rate, "optimizer": cfg.optimizer, "epochs": cfg.epochs,
        "batch_size": cfg.batch_size, "ig_steps": cfg.ig_steps, "method": method,
        "metric": metric, "seed": seed, "value": value, "status": status, "message": message,
    }


def run_cell(cfg: GridConfig, cell: Cell, seed: int):
    """One job. Returns (result rows, timing rows); failures become a status=failed row."""
    t0 = time.perf_counter()
    timings = []
    try:
        noise = NoiseSpec(cell.noise.n_noise, cell.noise.feature_dist, cell.noise.label_noise_std,
                          derive_seed(seed, cell.data_key))
        data = generate_dataset(cell.function_id, noise, cfg.n_samples, cfg.split_ratio)
        model_seed = derive_seed(seed, cell.key)
        model = MLP([data.n_features] + [cell.width] * cell.depth + [1], cell.dropout_rate,
                    seed=model_seed)
        want_curve = "convergence_auc" in cfg.metrics
        tcfg = TrainConfig(cfg.optimizer, cell.learning_rate, cfg.epochs, cfg.batch_size, "mse",
                           seed=derive_seed(model_seed, "train"),
                           record_attribution_every=cfg.record_every if want_curve else None,
                           record_methods=tuple(cfg.attribution_methods))
        report = train(model, data, tcfg)
        x_val, y_val = data.validation_arrays()
        pred = model.forward(x_val, mode="eval")[:, 0]
        rows = []
        if "uscore" in cfg.metrics:
            rows.append(_row(cfg, cell, seed, "-", "uscore", uscore(pred, y_val)))
        if "mae" in cfg.metrics:
            rows.append(_row(cfg, cell, seed, "-", "mae", mae(pred, y_val)))
        x_eval = x_val[:cfg.max_eval_samples]
        k = len(data.predictive_indices)
        for method in cfg.attribution_methods:
            tracemalloc.start()
            ta = time.perf_counter()
            a = attribute(model, x_eval, method, steps=cfg.ig_steps)
            elapsed = time.perf_counter() - ta
            _, peak = tracemalloc.get_traced_memory()
            tracemalloc.stop()
            timings.append((cell, seed, method, "attribution_time_s", elapsed))
            timings.append((cell, seed, method, "attribution_peak_bytes", peak))
            if "fprec" in cfg.metrics:
                rows.append(_row(cfg, cell, seed, method, "fprec",
                                 fprec(dataset_topk(a, k), data.predictive_indices)))
            if "consistency" in cfg.metrics:
                rows.append(_row(cfg, cell, seed, method, "consistency", consistency(a, k)))
            if want_curve:
                rows.append(_row(cfg, cell, seed, method, "convergence_auc",
                                 convergence_auc(report.per_epoch_fprec[method])))
        timings.append((cell, seed, "-", "train_time_s", report.wall_time_s))
    except Exception as exc:  # noqa: BLE001 - one bad cell must not sink the grid
        rows = [_row(cfg, cell, seed, "-", "error", "", "failed", f"{type(exc).__name__}: {exc}")]
    timings.append((cell, seed, "-", "wall_time_s", time.perf_counter() - t0))
    return rows, [(c.index, c.key, s, m, name, v) for c, s, m, name, v in timings]


def _job(args):
    cfg, cell, seed = args
    return run_cell(cfg, cell, seed)


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def format_results(rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    buf.write(RESULTS_SCHEMA + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in COLUMNS])
    return buf.getvalue()


def run_grid(cfg: GridConfig, output_dir=None, workers: Optional[int] = None,
             job_order: Optional[Sequence[int]] = None, log=None) -> Path:
    """Execute every (cell, seed) job and write ``results.csv``; returns its path.

    ``job_order`` permutes the execution order (used to check order independence).
    """
    out = Path(output_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    workers = workers or cfg.workers
    jobs = [(cfg, cell, seed) for cell in cells(cfg) for seed in cfg.seeds]
    if log:
        log(f"{len(cells(cfg))} model cells x {len(cfg.attribution_methods)} methods x "
            f"{len(cfg.seeds)} seeds = {grid_size(cfg)} executions ({len(jobs)} training jobs)")
    positions = list(range(len(jobs)))
    if job_order is not None:
        positions = [positions[i] for i in job_order]
        if sorted(positions) != list(range(len(jobs))):
            raise ValueError("job_order must be a permutation of the job indices")
    ordered = [jobs[i] for i in positions]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outputs = list(pool.map(_job, ordered))
    else:
        outputs = [_job(j) for j in ordered]
    by_pos = dict(zip(positions, outputs))
    rows, timing_rows = [], []
    for pos in range(len(jobs)):
        r, t = by_pos[pos]
        rows.extend(r)
        timing_rows.extend(t)
    results = out / "results.csv"
    results.write_text(format_results(rows))
    with (out / "timings.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cell", "cell_key", "seed", "method", "measure", "value"])
        for row in timing_rows:
            w.writerow([_fmt(v) for v in row])
    (out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=1, sort_keys=True))
    return results


def read_results(path) -> list:
    with Path(path).open(newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def summarize(rows: Sequence[dict], metric: str) -> dict:
    """Mean and std of ``metric`` per (cell, method) across seeds, skipping failed rows."""
    groups: dict = {}
    for r in rows:
        if r["metric"] != metric or r["status"] != "ok":
            continue
        groups.setdefault((int(r["cell"]), r["method"]), []).append(float(r["value"]))
    return {k: (float(np.mean(v)), float(np.std(v)), len(v)) for k, v in sorted(groups.items())}


def relative_to_saliency(rows: Sequence[dict], metric: str) -> dict:
    """Per-cell method scores divided by the SA score of the same cell."""
    stats = summarize(rows, metric)
    out = {}
    for (cell, method), (mean, _, _) in stats.items():
        ref = stats.get((cell, "sa"))
        if ref and ref[0] != 0 and not math.isnan(ref[0]):
            out[(cell, method)] = mean / ref[0]
    return out
