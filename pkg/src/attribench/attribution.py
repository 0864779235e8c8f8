"""Post-hoc local attributions (saliency, integrated gradients, DeepLift
rescale, feature ablation) against an all-zeros baseline.

The batched entry point is :func:`attribute`, which maps an ``(N, n)`` input
array to an ``(N, n)`` attribution array. The single-sample functions wrap it
and return :class:`AttributionVector`. Any object with ``forward`` and
``input_gradient`` works for SA, IG and FA; DeepLift needs an :class:`MLP`.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .nn import MLP

METHODS = ("sa", "ig", "dl", "fa")
DL_EPS = 1e-7


class InvalidGroupError(ValueError):
    pass


@dataclass
class AttributionVector:
    values: np.ndarray
    method: str
    target_index: int = 0
    baseline_id: str = "zeros"

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class FeatureGroup:
    name: str
    indices: tuple

    def __init__(self, name: str, indices: Sequence[int]):
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "indices", tuple(int(i) for i in indices))


def _batch(x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        return x[None, :], True
    return x, False


def _outputs(model, x, target):
    return np.asarray(model.forward(x, mode="eval"))[:, target]


def saliency_batch(model, x, target: int = 0) -> np.ndarray:
    return np.asarray(model.input_gradient(x, target))


def integrated_gradients_batch(model, x, steps: int = 10, target: int = 0) -> np.ndarray:
    """Midpoint-rule path integral of the gradient from 0 to ``x``, times ``x``."""
    if int(steps) < 1:
        raise ValueError("steps must be >= 1")
    x = np.asarray(x, dtype=np.float64)
    total = np.zeros_like(x)
    for s in range(steps):
        alpha = (s + 0.5) / steps
        total += np.asarray(model.input_gradient(alpha * x, target))
    return x * total / steps


def deeplift_batch(model: MLP, x, target: int = 0) -> np.ndarray:
    """DeepLift with the rescale rule on every ReLU, reference input 0.

    Multipliers flow backward from the chosen output; at each ReLU the
    multiplier is delta(activation) / delta(preactivation), falling back to the
    ReLU gradient at ``x`` where the preactivation barely moved.
    """
    if not isinstance(model, MLP):
        raise TypeError("DeepLift needs an MLP (it walks the layers)")
    x = np.asarray(x, dtype=np.float64)
    _, (_, z, _) = model.forward(x, mode="eval", return_cache=True)
    _, (_, z_ref, _) = model.forward(np.zeros((1, x.shape[1])), mode="eval", return_cache=True)
    mult = np.zeros((x.shape[0], model.n_outputs))
    mult[:, target] = 1.0
    for i in reversed(range(model.n_layers)):
        if i < model.n_layers - 1:
            dz = z[i] - z_ref[i]
            da = np.maximum(z[i], 0.0) - np.maximum(z_ref[i], 0.0)
            small = np.abs(dz) < DL_EPS
            ratio = np.where(small, (z[i] > 0.0).astype(np.float64), da / np.where(small, 1.0, dz))
            mult = mult * ratio
        mult = mult @ model.weights[i]
    return mult * x


def _check_groups(groups, n: int, require_cover: bool):
    seen: set = set()
    for g in groups:
        for i in g.indices:
            if not 0 <= i < n:
                raise InvalidGroupError(f"group {g.name!r} index {i} outside 0..{n - 1}")
            if i in seen:
                raise InvalidGroupError(f"index {i} appears in more than one group")
            seen.add(i)
    if require_cover and len(seen) != n:
        raise InvalidGroupError("groups must cover every feature index")


def feature_ablation_batch(model, x, groups: Optional[Sequence[FeatureGroup]] = None,
                           target: int = 0) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[1]
    if groups is None:
        groups = [FeatureGroup(str(i), (i,)) for i in range(n)]
    else:
        _check_groups(groups, n, require_cover=False)
    full = _outputs(model, x, target)
    out = np.zeros_like(x)
    for g in groups:
        if not g.indices:
            continue
        idx = list(g.indices)
        ablated = x.copy()
        ablated[:, idx] = 0.0
        out[:, idx] = (full - _outputs(model, ablated, target))[:, None]
    return out


def attribute(model, x, method: str, target: int = 0, steps: int = 10,
              groups: Optional[Sequence[FeatureGroup]] = None) -> np.ndarray:
    """Batched attribution of ``method`` for every row of ``x``."""
    x2, single = _batch(x)
    if method == "sa":
        a = saliency_batch(model, x2, target)
    elif method == "ig":
        a = integrated_gradients_batch(model, x2, steps, target)
    elif method == "dl":
        a = deeplift_batch(model, x2, target)
    elif method == "fa":
        a = feature_ablation_batch(model, x2, groups, target)
    else:
        raise ValueError(f"unknown attribution method {method!r}; expected one of {METHODS}")
    return a[0] if single else a


def _single(model, x, method, target, **kw) -> AttributionVector:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("expected a single sample (1-D input)")
    return AttributionVector(attribute(model, x, method, target, **kw), method, target)


def saliency(model, x, target: int = 0) -> AttributionVector:
    return _single(model, x, "sa", target)


def integrated_gradients(model, x, steps: int = 10, target: int = 0) -> AttributionVector:
    return _single(model, x, "ig", target, steps=steps)


def deeplift_rescale(model: MLP, x, target: int = 0) -> AttributionVector:
    return _single(model, x, "dl", target)


def feature_ablation(model, x, groups: Optional[Sequence[FeatureGroup]] = None,
                     target: int = 0) -> AttributionVector:
    return _single(model, x, "fa", target, groups=groups)


def _values(attrib) -> np.ndarray:
    return np.asarray(attrib.values if isinstance(attrib, AttributionVector) else attrib,
                      dtype=np.float64)


def aggregate_group_importance(attrib, groups: Sequence[FeatureGroup]) -> dict:
    """Share of total absolute attribution mass held by each group.

    All-zero attributions give every group 1/C.
    """
    values = np.abs(_values(attrib))
    _check_groups(groups, len(values), require_cover=True)
    mass = np.array([values[list(g.indices)].sum() for g in groups])
    total = mass.sum()
    if total > 0:
        shares = mass / total
    else:
        shares = np.full(len(groups), 1.0 / len(groups))
    return {g.name: float(s) for g, s in zip(groups, shares)}


def rank_by_magnitude(values) -> np.ndarray:
    """Indices sorted by descending |value|; ties go to the lower index."""
    values = np.abs(np.asarray(values, dtype=np.float64))
    return np.lexsort((np.arange(len(values)), -values))


def topk_features(attrib, k: int) -> list:
    values = _values(attrib)
    if not 1 <= k <= len(values):
        raise ValueError(f"k must be in 1..{len(values)}, got {k}")
    return [int(i) for i in rank_by_magnitude(values)[:k]]


def mean_abs_importance(attributions: np.ndarray) -> np.ndarray:
    return np.mean(np.abs(np.asarray(attributions, dtype=np.float64)), axis=0)


def dataset_topk(attributions: np.ndarray, k: int) -> list:
    """Top-k of the mean absolute attribution over a batch of samples."""
    return topk_features(mean_abs_importance(attributions), k)
