"""
Recursive feature elimination with attributions
================================================

Formula 10 uses five inputs; hide them among 45 noise columns and let
saliency-driven elimination and a linear-coefficient baseline pick five.
"""

from attribench import NoiseSpec, RfeConfig, TrainConfig, generate_dataset, rfe_linear, rfewna
from attribench.metrics import fprec

data = generate_dataset(10, NoiseSpec(n_noise=45, seed=0), n_samples=4000)
inner = TrainConfig(epochs=60, seed=0)

nn_run = rfewna(data, RfeConfig(drop_rate=0.5, target_k=5, explainer="sa", inner_train=inner, hidden=(64, 64)))
lin_run = rfe_linear(data, RfeConfig(drop_rate=0.5, target_k=5, inner_train=inner))

# the selected set halves each round until five remain
print("sizes:", nn_run.sizes())
for name, run in (("attribution RFE", nn_run), ("linear RFE", lin_run)):
    print(f"{name}: {run.final_selected}  FPrec {fprec(run.final_selected, data.predictive_indices)}"
          f"  ({run.wall_time_s:.1f}s)")
    print("   ", {m.name: round(m.value, 4) for m in run.final_model_metrics})
