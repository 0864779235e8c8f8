"""Small fully-connected ReLU networks in numpy with exact reverse-mode gradients.

Everything is float64 and batched: inputs are ``(batch, n_features)`` arrays,
weights are stored ``(fan_out, fan_in)`` so a layer computes ``x @ W.T + b``.
"""
from __future__ import annotations

import json
import resource
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

CHECKPOINT_VERSION = 1


class ArchitectureError(ValueError):
    pass


class InvalidTargetError(ValueError):
    pass


class EmptyDataError(ValueError):
    pass


class MLP:
    """ReLU multilayer perceptron with identity output and inverted dropout.

    Dropout is applied to hidden activations only, and only in train mode.
    The ReLU derivative at exactly zero is taken to be 0.
    """

    def __init__(self, layer_widths: Sequence[int], dropout_rate: float = 0.0, seed: int = 0):
        widths = [int(w) for w in layer_widths]
        if len(widths) < 2 or any(w < 1 for w in widths):
            raise ArchitectureError(f"invalid layer widths {list(layer_widths)!r}")
        if not 0.0 <= dropout_rate < 1.0:
            raise ArchitectureError(f"dropout_rate must be in [0, 1), got {dropout_rate}")
        self.layer_widths = widths
        self.dropout_rate = float(dropout_rate)
        self.mode = "train"
        rng = np.random.default_rng(seed)
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for fan_in, fan_out in zip(widths[:-1], widths[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            self.weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
            self.biases.append(np.zeros(fan_out))

    @property
    def n_inputs(self) -> int:
        return self.layer_widths[0]

    @property
    def n_outputs(self) -> int:
        return self.layer_widths[-1]

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def train(self) -> "MLP":
        self.mode = "train"
        return self

    def eval(self) -> "MLP":
        self.mode = "eval"
        return self

    def parameters(self) -> list[np.ndarray]:
        return [p for pair in zip(self.weights, self.biases) for p in pair]

    def copy(self) -> "MLP":
        other = object.__new__(MLP)
        other.layer_widths = list(self.layer_widths)
        other.dropout_rate = self.dropout_rate
        other.mode = self.mode
        other.weights = [w.copy() for w in self.weights]
        other.biases = [b.copy() for b in self.biases]
        return other

    def _check_input(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.n_inputs:
            raise ValueError(f"expected input with {self.n_inputs} features, got shape {np.shape(x)}")
        return x

    def forward(self, x, mode: Optional[str] = None, rng: Optional[np.random.Generator] = None,
                return_cache: bool = False):
        """Run the network on ``x`` (one sample or a batch).

        Returns the output array (1-D for a single sample), plus a cache of
        ``(inputs, preacts, masks)`` per layer when ``return_cache`` is set.
        """
        single = np.ndim(x) == 1
        a = self._check_input(x)
        mode = mode or self.mode
        use_dropout = mode == "train" and self.dropout_rate > 0.0
        if use_dropout and rng is None:
            raise ValueError("train-mode forward with dropout needs an rng")
        keep = 1.0 - self.dropout_rate
        inputs, preacts, masks = [], [], []
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            inputs.append(a)
            z = a @ w.T + b
            preacts.append(z)
            if i == self.n_layers - 1:
                a = z
                masks.append(None)
                break
            a = np.maximum(z, 0.0)
            if use_dropout:
                mask = (rng.random(a.shape) < keep) / keep
                a = a * mask
                masks.append(mask)
            else:
                masks.append(None)
        out = a[0] if single else a
        if return_cache:
            return out, (inputs, preacts, masks)
        return out

    __call__ = forward

    def _backward(self, cache, grad_out: np.ndarray):
        """Backpropagate ``grad_out`` (batch, n_outputs); returns (input grad, weight grads, bias grads)."""
        inputs, preacts, masks = cache
        g = grad_out
        grad_w = [None] * self.n_layers
        grad_b = [None] * self.n_layers
        for i in reversed(range(self.n_layers)):
            if i < self.n_layers - 1:
                if masks[i] is not None:
                    g = g * masks[i]
                g = g * (preacts[i] > 0.0)
            grad_w[i] = g.T @ inputs[i]
            grad_b[i] = g.sum(axis=0)
            g = g @ self.weights[i]
        return g, grad_w, grad_b

    def input_gradient(self, x, output_index: int = 0) -> np.ndarray:
        """Exact d output[output_index] / d x, evaluated in eval mode."""
        if not 0 <= output_index < self.n_outputs:
            raise IndexError(f"output_index {output_index} out of range for {self.n_outputs} outputs")
        single = np.ndim(x) == 1
        out, cache = self.forward(x, mode="eval", return_cache=True)
        seed = np.zeros((cache[0][0].shape[0], self.n_outputs))
        seed[:, output_index] = 1.0
        g, _, _ = self._backward(cache, seed)
        return g[0] if single else g

    def loss_and_gradients(self, x, y, loss: str = "mse", mode: Optional[str] = None,
                           rng: Optional[np.random.Generator] = None):
        """Mean loss over the batch and its gradients w.r.t. every parameter.

        ``bce`` applies a sigmoid to the (single) output logit.
        Gradients come back in ``parameters()`` order.
        """
        x = self._check_input(x)
        y = np.asarray(y, dtype=np.float64).reshape(x.shape[0], -1)
        out, cache = self.forward(x, mode=mode, rng=rng, return_cache=True)
        value, grad_out = _loss(out, y, loss)
        _, gw, gb = self._backward(cache, grad_out)
        return value, [p for pair in zip(gw, gb) for p in pair]

    def to_dict(self) -> dict:
        return {
            "format_version": CHECKPOINT_VERSION,
            "layer_widths": list(self.layer_widths),
            "dropout_rate": self.dropout_rate,
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MLP":
        if d.get("format_version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {d.get('format_version')!r}")
        model = cls(d["layer_widths"], d["dropout_rate"], seed=0)
        model.weights = [np.asarray(w, dtype=np.float64).reshape(model.weights[i].shape)
                         for i, w in enumerate(d["weights"])]
        model.biases = [np.asarray(b, dtype=np.float64) for b in d["biases"]]
        return model

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "MLP":
        return cls.from_dict(json.loads(Path(path).read_text()))


def mlp_from_shape(n_inputs: int, hidden: Sequence[int], n_outputs: int = 1,
                   dropout_rate: float = 0.0, seed: int = 0) -> MLP:
    return MLP([n_inputs, *hidden, n_outputs], dropout_rate=dropout_rate, seed=seed)


def _loss(out: np.ndarray, y: np.ndarray, kind: str):
    n = out.shape[0]
    if kind == "mse":
        diff = out - y
        return float(np.mean(diff ** 2)), 2.0 * diff / diff.size
    if kind == "bce":
        # numerically stable sigmoid cross-entropy on logits
        value = np.mean(np.maximum(out, 0) - out * y + np.log1p(np.exp(-np.abs(out))))
        prob = 0.5 * (1.0 + np.tanh(0.5 * out))
        return float(value), (prob - y) / out.size
    raise ValueError(f"unknown loss {kind!r}")


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z, dtype=np.float64)))


@dataclass
class TrainConfig:
    optimizer: str = "adam"
    learning_rate: float = 1e-3
    epochs: int = 300
    batch_size: int = 128
    loss: str = "mse"
    seed: int = 0
    record_attribution_every: Optional[int] = None
    record_methods: tuple = ("sa", "ig", "dl", "fa")
    record_max_samples: int = 256

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.loss not in ("mse", "bce"):
            raise ValueError(f"unknown loss {self.loss!r}")


@dataclass
class TrainReport:
    per_epoch_loss: list = field(default_factory=list)
    per_epoch_fprec: Optional[dict] = None
    recorded_epochs: list = field(default_factory=list)
    wall_time_s: float = 0.0
    peak_bytes: int = 0


class Adam:
    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


class SGD:
    def __init__(self, params, lr):
        self.lr = lr

    def step(self, params, grads):
        for p, g in zip(params, grads):
            p -= self.lr * g


def _peak_rss_bytes() -> int:
    rss = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss
    return int(rss if sys.platform == "darwin" else rss * 1024)


def fit(model: MLP, x: np.ndarray, y: np.ndarray, cfg: TrainConfig, callback=None) -> TrainReport:
    """Minibatch training on raw arrays. ``callback(epoch)`` runs after each epoch."""
    x = np.asarray(x, dtype=np.float64)
    if len(x) == 0:
        raise EmptyDataError("training split is empty")
    y = np.asarray(y, dtype=np.float64).reshape(len(x), -1)
    if cfg.loss == "bce" and not np.all((y == 0) | (y == 1)):
        raise InvalidTargetError("bce loss needs targets in {0, 1}")
    shuffle_ss, dropout_ss = np.random.SeedSequence(cfg.seed).spawn(2)
    shuffle_rng = np.random.default_rng(shuffle_ss)
    dropout_rng = np.random.default_rng(dropout_ss)
    params = model.parameters()
    opt = Adam(params, cfg.learning_rate) if cfg.optimizer == "adam" else SGD(params, cfg.learning_rate)
    report = TrainReport()
    start = time.perf_counter()
    model.train()
    n = len(x)
    for epoch in range(cfg.epochs):
        order = shuffle_rng.permutation(n)
        total = 0.0
        for lo in range(0, n, cfg.batch_size):
            idx = order[lo:lo + cfg.batch_size]
            value, grads = model.loss_and_gradients(x[idx], y[idx], cfg.loss, mode="train", rng=dropout_rng)
            opt.step(params, grads)
            total += value * len(idx)
        report.per_epoch_loss.append(total / n)
        if callback is not None:
            model.eval()
            callback(epoch)
            model.train()
    model.eval()
    report.wall_time_s = time.perf_counter() - start
    report.peak_bytes = _peak_rss_bytes()
    return report


def train(model: MLP, data, cfg: TrainConfig) -> TrainReport:
    """Train ``model`` in place on the train split of a ``TabularDataset``.

    With ``cfg.record_attribution_every`` set, FPrec of each method in
    ``cfg.record_methods`` is measured on (a prefix of) the validation split
    every that many epochs, which is what convergence curves are built from.
    """
    x_train, y_train = data.train_arrays()
    callback = None
    recorded: dict = {}
    epochs_seen: list = []
    stride = cfg.record_attribution_every
    if stride:
        from .attribution import attribute, dataset_topk
        from .metrics import fprec

        x_val, _ = data.validation_arrays()
        x_val = x_val[:cfg.record_max_samples]
        k = len(data.predictive_indices)
        recorded = {m: [] for m in cfg.record_methods}

        def callback(epoch):
            if (epoch + 1) % stride:
                return
            epochs_seen.append(epoch + 1)
            for method in cfg.record_methods:
                a = attribute(model, x_val, method)
                recorded[method].append(fprec(dataset_topk(a, k), data.predictive_indices))

    report = fit(model, x_train, y_train, cfg, callback)
    if stride:
        report.per_epoch_fprec = recorded
        report.recorded_epochs = epochs_seen
    return report
