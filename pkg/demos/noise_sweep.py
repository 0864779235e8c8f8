"""
A small benchmark grid
======================

Sweep the number of irrelevant features and compare how often each method
puts the predictive features on top. Results land in a long-form CSV.
"""

import tempfile

from attribench.grid import GridConfig, grid_size, read_results, relative_to_saliency, run_grid, summarize

cfg = GridConfig.from_dict({
    "function_ids": [7],
    "noise_specs": [{"n_noise": n} for n in (5, 20, 50)],
    "widths": [32], "depths": [2],
    "seeds": [0, 1, 2],
    "metrics": ["uscore", "fprec", "consistency"],
    "n_samples": 1500, "epochs": 60, "max_eval_samples": 300,
})
print("executions:", grid_size(cfg))

out = tempfile.mkdtemp()
path = run_grid(cfg, out, workers=2)
rows = read_results(path)
print("rows written:", len(rows), "->", path)

# mean FPrec per (cell, method) across seeds; cells follow the noise axis
for (cell, method), (mean, std, n) in summarize(rows, "fprec").items():
    print(f"noise cell {cell}  {method}  FPrec {mean:.2f} +- {std:.2f}  (n={n})")

# the same numbers relative to saliency in each cell
for key, ratio in relative_to_saliency(rows, "fprec").items():
    print(key, round(ratio, 3))
