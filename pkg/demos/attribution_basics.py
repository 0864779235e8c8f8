"""
Attributions on a network trained with irrelevant inputs
=========================================================

Train a small MLP on y = x0**2 with nine noise columns, then ask the four
attribution methods which input matters.
"""

import numpy as np

from attribench import MLP, NoiseSpec, TrainConfig, attribute, generate_dataset, train
from attribench.attribution import dataset_topk
from attribench.metrics import fprec, uscore

# 2000 rows; only column 0 drives the target
data = generate_dataset(2, NoiseSpec(n_noise=9, label_noise_std=0.01, seed=0), n_samples=2000)
print("features:", data.features.shape, "predictive:", data.predictive_indices)

model = MLP([data.n_features, 64, 64, 1], seed=0)
report = train(model, data, TrainConfig(epochs=100, seed=0))
print(f"final training loss {report.per_epoch_loss[-1]:.2e} after {report.wall_time_s:.1f}s")

x_val, y_val = data.validation_arrays()
print("validation UScore", round(uscore(model.forward(x_val, mode="eval")[:, 0], y_val), 4))

# attributions for every validation row; the dataset-level top-1 is taken
# from the mean magnitude
for method in ("sa", "ig", "dl", "fa"):
    a = attribute(model, x_val, method, steps=20)
    mean_abs = np.abs(a).mean(axis=0)
    top = dataset_topk(a, 1)
    print(f"{method}: top feature {top}, FPrec {fprec(top, data.predictive_indices)}, "
          f"mean |a| col0 {mean_abs[0]:.3f} vs noise max {mean_abs[1:].max():.3f}")

# completeness: IG and DeepLift attributions sum to F(x) - F(0)
x = x_val[0]
delta = model.forward(x, mode="eval")[0] - model.forward(np.zeros_like(x), mode="eval")[0]
for method in ("ig", "dl"):
    print(f"{method} sum {attribute(model, x, method, steps=200).sum():+.5f}   F(x)-F(0) {delta:+.5f}")
