"""Command line entry point: ``attribench <subcommand>``.

Every subcommand accepts ``--config file.json`` whose keys fill in any
option not given on the command line (keys use the long option names with
underscores). On failure a single JSON error line is written to stderr and
the exit status is nonzero.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import attribution, dataio, grid, rfe
from .nn import MLP, TrainConfig, train
from .symfunc import NoiseSpec, generate_dataset


def _ints(text):
    return [int(t) for t in str(text).split(",") if t.strip()] if text not in (None, "") else []


def _train_config(args, seed=None) -> TrainConfig:
    return TrainConfig(args.optimizer, args.lr, args.epochs, args.batch_size, args.loss,
                       seed=args.seed if seed is None else seed)


def cmd_generate(args):
    noise = NoiseSpec(args.n_noise, args.dist, args.label_noise, args.seed)
    data = generate_dataset(args.function, noise, args.n_samples, args.split_ratio)
    path = dataio.save_dataset(data, args.out)
    return {"dataset": str(path), "shape": list(data.features.shape),
            "predictive_indices": list(data.predictive_indices)}


def cmd_train(args):
    data = dataio.load_dataset(args.data, require_annotation=False)
    model = MLP([data.n_features, *_ints(args.hidden), 1], args.dropout, seed=args.seed)
    report = train(model, data, _train_config(args))
    model.save(args.out)
    x_val, y_val = data.validation_arrays()
    summary = {"checkpoint": str(args.out), "final_loss": report.per_epoch_loss[-1] if report.per_epoch_loss else None,
               "wall_time_s": report.wall_time_s}
    if len(x_val) and args.loss == "mse":
        from .metrics import uscore
        summary["val_uscore"] = uscore(model.forward(x_val, mode="eval")[:, 0], y_val)
    return summary


def cmd_attribute(args):
    model = MLP.load(args.model).eval()
    data = dataio.load_dataset(args.data, require_annotation=False)
    x_val, _ = data.validation_arrays()
    x_val = x_val[:args.max_samples]
    out = {}
    summary = {}
    for method in args.methods.split(","):
        a = attribution.attribute(model, x_val, method, steps=args.ig_steps)
        out[method] = a
        if data.predictive_indices:
            from .metrics import fprec
            k = len(data.predictive_indices)
            summary[method] = fprec(attribution.dataset_topk(a, k), data.predictive_indices)
    dataio.write_attribution_dump(args.out, out, sample_ids=np.flatnonzero(~data.is_train)[:args.max_samples])
    return {"dump": str(args.out), "fprec": summary}


def cmd_grid(args):
    if not args.config:
        raise grid.ConfigError("config", "grid needs --config")
    raw = json.loads(Path(args.config).read_text())
    if args.seed is not None:
        raw["seeds"] = [args.seed]
    cfg = grid.GridConfig.from_dict(raw)
    path = grid.run_grid(cfg, output_dir=args.out or cfg.output_dir, workers=args.workers,
                         log=lambda msg: print(msg, file=sys.stderr))
    return {"results": str(path), "executions": grid.grid_size(cfg)}


def cmd_rfe(args):
    data = dataio.load_dataset(args.data, require_annotation=False)
    cfg = rfe.RfeConfig(args.drop_rate, args.k, args.explainer, args.strategy,
                        _train_config(args), tuple(_ints(args.hidden)), args.dropout,
                        args.ig_steps, args.seed)
    result = rfe.rfe_linear(data, cfg) if args.explainer == "coef" else rfe.rfewna(data, cfg)
    result.save_trajectory(args.out)
    return {"trajectory": str(args.out), "final_selected": result.final_selected,
            "metrics": {m.name: m.value for m in result.final_model_metrics},
            "wall_time_s": result.wall_time_s}


def cmd_ingest(args):
    data = dataio.load_tabular_csv(args.csv, args.label, args.scaling, args.balance,
                                   args.split_ratio, args.seed)
    path = dataio.save_dataset(data, args.out)
    return {"dataset": str(path), "shape": list(data.features.shape)}


def _add_train_opts(p):
    p.add_argument("--hidden", default="100,100,100")
    p.add_argument("--dropout", type=float, default=0.0)
    p.add_argument("--optimizer", default="adam", choices=["adam", "sgd"])
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--epochs", type=int, default=300)
    p.add_argument("--batch-size", type=int, default=128)
    p.add_argument("--loss", default="mse", choices=["mse", "bce"])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="attribench")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(func=func)
        p.add_argument("--config")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out")
        p.add_argument("--workers", type=int, default=1)
        return p

    p = add("generate", cmd_generate, "synthesize a symbolic dataset")
    p.add_argument("--function", type=int, default=2)
    p.add_argument("--n-noise", type=int, default=100)
    p.add_argument("--dist", default="clipped_normal", choices=["clipped_normal", "std_normal"])
    p.add_argument("--label-noise", type=float, default=0.01)
    p.add_argument("--n-samples", type=int, default=10_000)
    p.add_argument("--split-ratio", type=float, default=0.8)

    p = add("train", cmd_train, "train an MLP on a dataset file")
    p.add_argument("--data")
    _add_train_opts(p)

    p = add("attribute", cmd_attribute, "attribute validation rows with a checkpoint")
    p.add_argument("--model")
    p.add_argument("--data")
    p.add_argument("--methods", default="sa,ig,dl,fa")
    p.add_argument("--ig-steps", type=int, default=10)
    p.add_argument("--max-samples", type=int, default=1000)

    add("grid", cmd_grid, "run a benchmark grid from a JSON config")

    p = add("rfe", cmd_rfe, "recursive feature elimination")
    p.add_argument("--data")
    p.add_argument("--explainer", default="sa", choices=["sa", "ig", "dl", "fa", "coef"])
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--drop-rate", type=float, default=0.5)
    p.add_argument("--strategy", default="uni", choices=["uni", "bi"])
    p.add_argument("--ig-steps", type=int, default=10)
    _add_train_opts(p)

    p = add("ingest", cmd_ingest, "load an external CSV into the dataset format")
    p.add_argument("--csv")
    p.add_argument("--label")
    p.add_argument("--scaling", default="minmax", choices=["minmax", "none"])
    p.add_argument("--balance", default="none", choices=["undersample", "none"])
    p.add_argument("--split-ratio", type=float, default=0.8)
    return parser


def _apply_config(parser, args, argv):
    """Fill options from ``--config`` unless they were given explicitly."""
    if not args.config or args.command == "grid":
        return args
    cfg = json.loads(Path(args.config).read_text())
    given = {a.split("=")[0].lstrip("-").replace("-", "_") for a in argv if a.startswith("--")}
    for key, value in cfg.items():
        if not hasattr(args, key):
            raise grid.ConfigError(key, "unknown option for this subcommand")
        if key not in given:
            setattr(args, key, ",".join(map(str, value)) if isinstance(value, list) else value)
    return args


REQUIRED = {"generate": ["out"], "train": ["data", "out"], "attribute": ["model", "data", "out"],
            "rfe": ["data", "out"], "ingest": ["csv", "label", "out"]}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args = _apply_config(parser, args, argv)
        if args.seed is None and args.command != "grid":
            args.seed = 0
        missing = [name for name in REQUIRED.get(args.command, []) if getattr(args, name) in (None, "")]
        if missing:
            raise grid.ConfigError(missing[0], "required option missing")
        result = args.func(args)
    except Exception as exc:  # noqa: BLE001 - report every failure as one machine-readable line
        err = {"error": type(exc).__name__, "message": str(exc)}
        if isinstance(exc, grid.ConfigError):
            err["field"] = exc.field
        print(json.dumps(err), file=sys.stderr)
        return 1
    print(json.dumps(result, default=str))
    return 0


if __name__ == "__main__":
    sys.exit(main())
