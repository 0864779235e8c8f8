"""The fifteen symbolic generator functions, noisy dataset synthesis and
analytic ground-truth attributions.

Each function takes an ``(N, m)`` array of predictive features and returns
``(N,)`` values; gradients come back as ``(N, m)``. Single 1-D points are
accepted too.
"""
from __future__ import annotations

from dataclasses import dataclass, field, asdict
from typing import Callable, Optional, Sequence

import numpy as np

from .nn import EmptyDataError


class DomainError(ValueError):
    pass


@dataclass(frozen=True)
class SymbolicFunction:
    id: int
    arity: int
    formula: str
    f: Callable[[np.ndarray], np.ndarray]
    grad: Callable[[np.ndarray], np.ndarray]


def _cols(x):
    return [x[:, j] for j in range(x.shape[1])]


def _stack(*cols):
    return np.stack(np.broadcast_arrays(*cols), axis=1)


def _f1(x):
    (a,) = _cols(x)
    return a.copy()


def _g1(x):
    return np.ones_like(x)


def _f2(x):
    (a,) = _cols(x)
    return a ** 2


def _g2(x):
    return 2.0 * x


def _f3(x):
    (a,) = _cols(x)
    return 2.0 / (a ** 2 + 1.0) - 1.0


def _g3(x):
    return -4.0 * x / (x ** 2 + 1.0) ** 2


def _f4(x):
    return np.sin(x[:, 0])


def _g4(x):
    return np.cos(x)


def _f5(x):
    return np.exp(x[:, 0]) - 1.5


def _g5(x):
    return np.exp(x)


def _f6(x):
    return 2.0 * np.log(x[:, 0] ** 2 + 1.0) - 1.0


def _g6(x):
    return 4.0 * x / (x ** 2 + 1.0)


def _f7(x):
    a, b = _cols(x)
    return 0.25 * a ** 3 + 0.75 * b ** 2


def _g7(x):
    a, b = _cols(x)
    return _stack(0.75 * a ** 2, 1.5 * b)


def _f8(x):
    a, b, c = _cols(x)
    return 0.5 * a ** 3 + 0.75 * b ** 2 + a * c


def _g8(x):
    a, b, c = _cols(x)
    return _stack(1.5 * a ** 2 + c, 1.5 * b, a)


def _f9(x):
    a, b, c, d = _cols(x)
    return 0.5 * np.exp(a) * np.sin(b) - 0.25 * np.cos(d) ** 5 / (c ** 2 + 1.0)


def _g9(x):
    a, b, c, d = _cols(x)
    q = c ** 2 + 1.0
    return _stack(
        0.5 * np.exp(a) * np.sin(b),
        0.5 * np.exp(a) * np.cos(b),
        0.5 * np.cos(d) ** 5 * c / q ** 2,
        1.25 * np.cos(d) ** 4 * np.sin(d) / q,
    )


def _f10(x):
    a, b, c, d, e = _cols(x)
    return 0.5 * (a - b) ** 2 + 0.2 * (c + d * e) ** 3 - 0.5


def _g10(x):
    a, b, c, d, e = _cols(x)
    s = 0.6 * (c + d * e) ** 2
    return _stack(a - b, b - a, s, s * e, s * d)


def _f11(x):
    a, b, c, d, e, f = _cols(x)
    return 0.5 * np.cos(a) * np.tan(b) - np.log((c - d) ** 2 + 1.0) / ((e + f + 1.0) ** 2 + 1.0)


def _g11(x):
    a, b, c, d, e, f = _cols(x)
    num = np.log((c - d) ** 2 + 1.0)
    den = (e + f + 1.0) ** 2 + 1.0
    dnum = 2.0 * (c - d) / ((c - d) ** 2 + 1.0)
    dden = num * 2.0 * (e + f + 1.0) / den ** 2
    return _stack(
        -0.5 * np.sin(a) * np.tan(b),
        0.5 * np.cos(a) / np.cos(b) ** 2,
        -dnum / den,
        dnum / den,
        dden,
        dden,
    )


def _f12(x):
    a, b, c, d, e, f, g = _cols(x)
    return (0.5 * (b - c) ** 2 / (a ** 2 + 1.0) + np.tan(d) * np.log(e ** 2 + 1.0)
            + 0.5 * np.cos(f) * np.sin(g))


def _g12(x):
    a, b, c, d, e, f, g = _cols(x)
    q = a ** 2 + 1.0
    return _stack(
        -(b - c) ** 2 * a / q ** 2,
        (b - c) / q,
        -(b - c) / q,
        np.log(e ** 2 + 1.0) / np.cos(d) ** 2,
        np.tan(d) * 2.0 * e / (e ** 2 + 1.0),
        -0.5 * np.sin(f) * np.sin(g),
        0.5 * np.cos(f) * np.cos(g),
    )


# Monomial sum x_j**j / j over eight distinct variables. The original listing
# reuses one symbol and garbles the 3rd coefficient; this is the reading kept.
def _f13(x):
    powers = np.arange(1, 9)
    return np.sum(x ** powers / powers, axis=1)


def _g13(x):
    powers = np.arange(1, 9)
    return x ** (powers - 1)


def _f14(x):
    a, b, c, d, e, f, g, h, i = _cols(x)
    return (0.5 * (a - 1.0) / (b ** 2 + 1.0) - 0.5 * c ** 3 / (d ** 2 + 1.0)
            + 0.5 * e ** 5 / (f ** 2 + 1.0) - 0.5 * g ** 7 / (h ** 2 + 1.0)
            + 0.5 * np.tan(i) + 0.5)


def _g14(x):
    a, b, c, d, e, f, g, h, i = _cols(x)
    qb, qd, qf, qh = b ** 2 + 1.0, d ** 2 + 1.0, f ** 2 + 1.0, h ** 2 + 1.0
    return _stack(
        0.5 / qb,
        -(a - 1.0) * b / qb ** 2,
        -1.5 * c ** 2 / qd,
        c ** 3 * d / qd ** 2,
        2.5 * e ** 4 / qf,
        -e ** 5 * f / qf ** 2,
        -3.5 * g ** 6 / qh,
        g ** 7 * h / qh ** 2,
        0.5 / np.cos(i) ** 2,
    )


def _f15(x):
    a, b, c, d, e, f, g, h, i, j = _cols(x)
    return (0.5 * np.sin(a) - 0.5 * b ** 3 - np.log(c ** 2 + 1.0)
            + 0.5 * np.sqrt((d + e) ** 2 + 1.0) - 0.5 * np.cos(f) * g
            + h * i ** 2 / ((1.0 - j) ** 2 + 1.0) - 0.5)


def _g15(x):
    a, b, c, d, e, f, g, h, i, j = _cols(x)
    r = 0.5 * (d + e) / np.sqrt((d + e) ** 2 + 1.0)
    q = (1.0 - j) ** 2 + 1.0
    return _stack(
        0.5 * np.cos(a),
        -1.5 * b ** 2,
        -2.0 * c / (c ** 2 + 1.0),
        r,
        r,
        0.5 * np.sin(f) * g,
        -0.5 * np.cos(f),
        i ** 2 / q,
        2.0 * h * i / q,
        2.0 * h * i ** 2 * (1.0 - j) / q ** 2,
    )


FUNCTIONS: dict[int, SymbolicFunction] = {
    s.id: s for s in [
        SymbolicFunction(1, 1, "a", _f1, _g1),
        SymbolicFunction(2, 1, "a^2", _f2, _g2),
        SymbolicFunction(3, 1, "2/(a^2+1)-1", _f3, _g3),
        SymbolicFunction(4, 1, "sin(a)", _f4, _g4),
        SymbolicFunction(5, 1, "exp(a)-1.5", _f5, _g5),
        SymbolicFunction(6, 1, "2log(a^2+1)-1", _f6, _g6),
        SymbolicFunction(7, 2, "0.25a^3+0.75b^2", _f7, _g7),
        SymbolicFunction(8, 3, "0.5a^3+0.75b^2+ac", _f8, _g8),
        SymbolicFunction(9, 4, "0.5exp(a)sin(b)-0.25cos(d)^5/(c^2+1)", _f9, _g9),
        SymbolicFunction(10, 5, "0.5(a-b)^2+0.2(c+de)^3-0.5", _f10, _g10),
        SymbolicFunction(11, 6, "0.5cos(a)tan(b)-log((c-d)^2+1)/((e+f+1)^2+1)", _f11, _g11),
        SymbolicFunction(12, 7, "0.5(b-c)^2/(a^2+1)+tan(d)log(e^2+1)+0.5cos(f)sin(g)", _f12, _g12),
        SymbolicFunction(13, 8, "sum_j x_j^j/j, j=1..8", _f13, _g13),
        SymbolicFunction(14, 9, "0.5(a-1)/(b^2+1)-0.5c^3/(d^2+1)+0.5e^5/(f^2+1)"
                                "-0.5g^7/(h^2+1)+0.5tan(i)+0.5", _f14, _g14),
        SymbolicFunction(15, 10, "0.5sin(a)-0.5b^3-log(c^2+1)+0.5sqrt((d+e)^2+1)"
                                 "-0.5cos(f)g+hi^2/((1-j)^2+1)-0.5", _f15, _g15),
    ]
}


def get_function(fid: int) -> SymbolicFunction:
    try:
        return FUNCTIONS[int(fid)]
    except (KeyError, TypeError, ValueError):
        raise DomainError(f"unknown function id {fid!r}") from None


def arity(fid: int) -> int:
    return get_function(fid).arity


def _as_points(fn: SymbolicFunction, x):
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    pts = x[None, :] if single else x
    if pts.ndim != 2 or pts.shape[1] != fn.arity:
        raise DomainError(f"function {fn.id} takes {fn.arity} features, got shape {x.shape}")
    return pts, single


def eval_function(fid: int, x):
    fn = get_function(fid)
    pts, single = _as_points(fn, x)
    y = fn.f(pts)
    return float(y[0]) if single else y


def eval_gradient(fid: int, x) -> np.ndarray:
    fn = get_function(fid)
    pts, single = _as_points(fn, x)
    g = fn.grad(pts)
    return g[0] if single else g


def _baseline_like(pts, baseline):
    if baseline is None:
        return np.zeros_like(pts)
    base = np.broadcast_to(np.asarray(baseline, dtype=np.float64), pts.shape)
    return base


def ground_truth_fa(fid: int, x, baseline=None) -> np.ndarray:
    """Per-feature ablation delta f(x) - f(x with x_i set to its baseline)."""
    fn = get_function(fid)
    pts, single = _as_points(fn, x)
    base = _baseline_like(pts, baseline)
    full = fn.f(pts)
    out = np.empty_like(pts)
    for i in range(fn.arity):
        ablated = pts.copy()
        ablated[:, i] = base[:, i]
        out[:, i] = full - fn.f(ablated)
    return out[0] if single else out


def ground_truth_ig(fid: int, x, baseline=None, steps: int = 10) -> np.ndarray:
    """Ablation deltas summed over the ``steps`` segments of the straight path
    from ``baseline`` to ``x``; each segment uses its start point as baseline."""
    if int(steps) < 1:
        raise ValueError("steps must be >= 1")
    fn = get_function(fid)
    pts, single = _as_points(fn, x)
    base = _baseline_like(pts, baseline)
    total = np.zeros_like(pts)
    for s in range(1, steps + 1):
        hi = base + (s / steps) * (pts - base)
        lo = base + ((s - 1) / steps) * (pts - base)
        total += ground_truth_fa(fid, hi, lo)
    return total[0] if single else total


class SymbolicModel:
    """Exact evaluator for one symbolic function, shaped like a one-output model
    so the attribution routines can run against it."""

    def __init__(self, fid: int):
        self.fn = get_function(fid)
        self.n_inputs = self.fn.arity
        self.n_outputs = 1

    def forward(self, x, mode=None, rng=None):
        pts, single = _as_points(self.fn, x)
        y = self.fn.f(pts)[:, None]
        return y[0] if single else y

    __call__ = forward

    def input_gradient(self, x, output_index: int = 0):
        if output_index != 0:
            raise IndexError("symbolic models have a single output")
        return eval_gradient(self.fn.id, x)


FEATURE_DISTS = ("std_normal", "clipped_normal")


@dataclass
class NoiseSpec:
    n_noise: int = 100
    feature_dist: str = "clipped_normal"
    label_noise_std: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if self.n_noise < 0:
            raise ValueError("n_noise must be >= 0")
        if self.label_noise_std < 0:
            raise ValueError("label_noise_std must be >= 0")
        if self.feature_dist not in FEATURE_DISTS:
            raise ValueError(f"feature_dist must be one of {FEATURE_DISTS}")


@dataclass
class TabularDataset:
    """Feature matrix plus targets, the annotated predictive columns and a
    per-row train/validation split (``True`` marks training rows)."""

    features: np.ndarray
    targets: np.ndarray
    predictive_indices: tuple
    is_train: np.ndarray
    feature_names: Optional[list] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.targets = np.asarray(self.targets, dtype=np.float64)
        self.is_train = np.asarray(self.is_train, dtype=bool)
        self.predictive_indices = tuple(int(i) for i in self.predictive_indices)
        n = self.n_features
        if any(not 0 <= i < n for i in self.predictive_indices):
            raise ValueError("predictive index outside feature range")
        if len(self.targets) != len(self.features) or len(self.is_train) != len(self.features):
            raise ValueError("features, targets and split must have the same number of rows")

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def train_arrays(self):
        return self.features[self.is_train], self.targets[self.is_train]

    def validation_arrays(self):
        return self.features[~self.is_train], self.targets[~self.is_train]

    def select_columns(self, columns: Sequence[int]) -> "TabularDataset":
        """Column-restricted copy; predictive indices are remapped to the new positions."""
        columns = [int(c) for c in columns]
        if not columns:
            raise EmptyDataError("no columns selected")
        pos = {c: i for i, c in enumerate(columns)}
        names = [self.feature_names[c] for c in columns] if self.feature_names else None
        return TabularDataset(
            self.features[:, columns], self.targets,
            tuple(pos[c] for c in self.predictive_indices if c in pos),
            self.is_train, names, dict(self.meta, columns=columns),
        )


def split_mask(n_samples: int, train_fraction: float, rng: np.random.Generator) -> np.ndarray:
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("split ratio must be in (0, 1)")
    n_train = int(round(n_samples * train_fraction))
    mask = np.zeros(n_samples, dtype=bool)
    mask[rng.permutation(n_samples)[:n_train]] = True
    return mask


def sample_features(rng: np.random.Generator, shape, dist: str) -> np.ndarray:
    if dist == "std_normal":
        return rng.standard_normal(shape)
    if dist == "clipped_normal":
        return np.clip(rng.normal(0.0, np.sqrt(0.33), shape), -1.0, 1.0)
    raise ValueError(f"unknown feature distribution {dist!r}")


def generate_dataset(fid: int, noise: NoiseSpec, n_samples: int = 10_000,
                     split_ratio: float = 0.8) -> TabularDataset:
    """Synthesize a regression dataset whose first m columns drive the target."""
    fn = get_function(fid)
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if not 0.0 < split_ratio < 1.0:
        raise ValueError("split_ratio must be in (0, 1)")
    feat_ss, label_ss, split_ss = np.random.SeedSequence(noise.seed).spawn(3)
    x = sample_features(np.random.default_rng(feat_ss), (n_samples, fn.arity + noise.n_noise),
                        noise.feature_dist)
    y = fn.f(x[:, :fn.arity])
    if noise.label_noise_std > 0:
        y = y + np.random.default_rng(label_ss).normal(0.0, noise.label_noise_std, n_samples)
    if not np.all(np.isfinite(y)):
        raise DomainError(f"function {fid} produced non-finite targets")
    is_train = split_mask(n_samples, split_ratio, np.random.default_rng(split_ss))
    meta = {
        "function_id": fn.id,
        "m": fn.arity,
        "noise_spec": asdict(noise),
        "seed": noise.seed,
        "split_ratio": split_ratio,
    }
    return TabularDataset(x, y, tuple(range(fn.arity)), is_train, None, meta)
