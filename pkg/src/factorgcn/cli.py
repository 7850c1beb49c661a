"""Command-line interface: generate, train, eval, correlate, sweep.

Exit codes: 0 on success, 1 on runtime failure, 2 on usage or validation
errors.  Every command is deterministic given its --seed and never mutates
its input files.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import models, plots
from .graphs import (
    CATALOG_ORDER,
    DatasetFormatError,
    generate_synthetic,
    load_dataset,
    save_dataset,
)
from .metrics import feature_correlation, load_correlation_csv, save_correlation_csv

USAGE_ERROR = 2
RUNTIME_ERROR = 1


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _fig_path(out) -> Path:
    return Path(out).with_suffix(".png")


def _load_data(path):
    try:
        return load_dataset(path)
    except FileNotFoundError as exc:
        raise CliError(f"dataset not found: {exc}", RUNTIME_ERROR) from exc
    except DatasetFormatError as exc:
        raise CliError(f"bad dataset file: {exc}", USAGE_ERROR) from exc


def cmd_generate(args) -> int:
    if not 2 <= args.factors <= len(CATALOG_ORDER):
        raise CliError(f"--factors must be in [2, {len(CATALOG_ORDER)}]", USAGE_ERROR)
    if args.samples <= 0:
        raise CliError("--samples must be positive", USAGE_ERROR)
    dataset = generate_synthetic(args.factors, args.samples, args.seed)
    save_dataset(dataset, args.out)
    kinds = CATALOG_ORDER[: args.factors]
    print(f"wrote {args.out}")
    print(f"  samples      {len(dataset.samples)}")
    print(f"  factor kinds {', '.join(kinds)}")
    sizes = {name: len(idx) for name, idx in dataset.splits.items()}
    print(f"  splits       train {sizes['train']} / val {sizes['val']} / test {sizes['test']}")
    return 0


def _config_from_args(args, dataset) -> models.ModelConfig:
    overrides = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                overrides.update(json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise CliError(f"bad --config file: {exc}", USAGE_ERROR) from exc
    if args.model is not None:
        overrides["model"] = args.model
    if args.disc_weight is not None:
        overrides["disc_weight"] = args.disc_weight
    if args.factors_per_layer is not None:
        overrides["factors_per_layer"] = tuple(args.factors_per_layer)
    if args.epochs is not None:
        overrides["epochs"] = args.epochs
    if args.hidden is not None:
        overrides["hidden_dim"] = args.hidden
    if args.seed is not None:
        overrides["seed"] = args.seed
    try:
        return models.default_config(dataset, **overrides)
    except (TypeError, ValueError) as exc:
        raise CliError(f"bad model configuration: {exc}", USAGE_ERROR) from exc


def cmd_train(args) -> int:
    dataset = _load_data(args.data)
    config = _config_from_args(args, dataset)
    try:
        model, report = models.train(dataset, config, log=print if args.verbose else None)
    except models.TrainingDivergedError as exc:
        raise CliError(f"training diverged: {exc}", RUNTIME_ERROR) from exc
    models.save_model(model, args.out)
    report_path = args.report or f"{args.out}.report.json"
    report.save(report_path)
    fig = plots.save_training_curves(report, _fig_path(report_path))
    print(f"wrote model   {args.out}")
    print(f"wrote report  {report_path}")
    print(f"wrote figure  {fig}")
    print(f"  best epoch  {report.best_epoch + 1}/{config.epochs}")
    for name, value in report.final_metrics.items():
        print(f"  {name:<18} {value:.4f}")
    return 0


def _load_model_arg(args, dataset):
    if args.model == "random":
        return models.RandomBaseline(dataset.n_factors, dataset.n_factors, seed=args.seed or 0)
    try:
        model = models.load_model(args.model)
    except FileNotFoundError as exc:
        raise CliError(f"model not found: {exc}", RUNTIME_ERROR) from exc
    except models.ModelFormatError as exc:
        raise CliError(f"bad model file: {exc}", USAGE_ERROR) from exc
    try:
        models.check_compatible(model.config, dataset)
    except models.IncompatibleModelError as exc:
        raise CliError(f"model/dataset mismatch on {exc}", USAGE_ERROR) from exc
    return model


def cmd_eval(args) -> int:
    dataset = _load_data(args.data)
    model = _load_model_arg(args, dataset)
    report = models.evaluate(model, dataset, split=args.split)
    report.save(args.out)
    print(f"wrote report  {args.out}")
    if report.histograms:
        fig = plots.save_match_histograms(report.histograms, _fig_path(args.out))
        print(f"wrote figure  {fig}")
    def fmt(v):
        return "-" if v is None else f"{v:.4f}"
    print(f"  micro_f1    {fmt(report.micro_f1)}")
    print(f"  ged_e       {fmt(report.ged_mean)} +/- {fmt(report.ged_std)}")
    print(f"  c_score     {fmt(report.c_score)}")
    return 0


def cmd_correlate(args) -> int:
    dataset = _load_data(args.data)
    model = _load_model_arg(args, dataset)
    if not hasattr(model, "embed"):
        raise CliError("model exposes no features to correlate", USAGE_ERROR)
    feats = models.split_features(model, dataset, split=args.split)
    matrix = feature_correlation(feats)
    save_correlation_csv(matrix, args.out)
    block = None
    config = getattr(model, "config", None)
    if config is not None and config.model == "factorgcn":
        block = config.hidden_dim
    fig = plots.save_correlation_heatmap(matrix, _fig_path(args.out), block=block)
    print(f"wrote matrix  {args.out}  ({matrix.shape[0]}x{matrix.shape[1]})")
    print(f"wrote figure  {fig}")
    return 0


def cmd_sweep(args) -> int:
    dataset = _load_data(args.data)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.lambdas is not None:
        settings = [("lambda", v) for v in sorted(args.lambdas)]
    else:
        settings = [("factors", int(v)) for v in sorted(args.factor_counts)]

    rows = []
    failed = False
    for kind, value in settings:
        overrides = {"seed": args.seed if args.seed is not None else 0}
        if args.epochs is not None:
            overrides["epochs"] = args.epochs
        if kind == "lambda":
            overrides["disc_weight"] = value
            tag = f"lambda_{value:g}"
        else:
            overrides["factors_per_layer"] = (value, value)
            tag = f"factors_{value}"
        row = {"setting": value, "kind": kind, "status": "ok"}
        try:
            config = models.default_config(dataset, **overrides)
            model, report = models.train(dataset, config)
            models.save_model(model, out_dir / f"model_{tag}.json")
            eval_report = models.evaluate(model, dataset, split="test")
            eval_report.save(out_dir / f"eval_{tag}.json")
            row.update(
                micro_f1=eval_report.micro_f1,
                ged_mean=eval_report.ged_mean,
                ged_std=eval_report.ged_std,
                c_score=eval_report.c_score,
                best_epoch=report.best_epoch,
            )
        except (ValueError, RuntimeError) as exc:
            row.update(status="failed", error=str(exc))
            failed = True
        rows.append(row)

    table_path = out_dir / "sweep.csv"
    columns = ["setting", "status", "micro_f1", "ged_mean", "ged_std", "c_score"]
    with open(table_path, "w", encoding="utf-8") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            cells = []
            for c in columns:
                v = row.get(c)
                cells.append("" if v is None else (f"{v:.6f}" if isinstance(v, float) else str(v)))
            fh.write(",".join(cells) + "\n")
    fig = plots.save_sweep_curves(rows, settings[0][0], out_dir / "sweep.png")
    print(f"wrote table   {table_path}")
    print(f"wrote figure  {fig}")
    header = f"  {'setting':>8}  {'status':<7} {'micro_f1':>9} {'ged_e':>8} {'c_score':>8}"
    print(header)
    for row in rows:
        def cell(key):
            v = row.get(key)
            return "-" if v is None else f"{v:.4f}"
        print(
            f"  {row['setting']:>8}  {row['status']:<7} "
            f"{cell('micro_f1'):>9} {cell('ged_mean'):>8} {cell('c_score'):>8}"
        )
    return RUNTIME_ERROR if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="factorgcn",
        description="Graph-level disentanglement: synthetic benchmark, training, metrics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a synthetic multi-factor dataset")
    p.add_argument("--factors", type=int, required=True, help="number of factor kinds (2..6)")
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    def add_train_flags(p):
        p.add_argument("--data", required=True)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--epochs", type=int, default=None)

    p = sub.add_parser("train", help="train a model with paper-default hyper-parameters")
    add_train_flags(p)
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--model", choices=list(models.MODEL_KINDS), default=None)
    p.add_argument("--lambda", dest="disc_weight", type=float, default=None,
                   help="discriminator loss weight")
    p.add_argument("--factors-per-layer", type=int, nargs="+", default=None)
    p.add_argument("--hidden", type=int, default=None, help="per-factor hidden width")
    p.add_argument("--config", default=None, help="JSON file of config overrides")
    p.add_argument("--report", default=None, help="training report path (default <out>.report.json)")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a trained model (or the random baseline)")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True, help="model file, or 'random'")
    p.add_argument("--out", required=True, help="metrics report to write")
    p.add_argument("--split", choices=["train", "val", "test"], default="test")
    p.add_argument("--seed", type=int, default=0, help="seed for the random baseline")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("correlate", help="export the feature correlation matrix")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True, help="CSV to write")
    p.add_argument("--split", choices=["train", "val", "test"], default="test")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("sweep", help="train one model per setting and tabulate metrics")
    add_train_flags(p)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--lambdas", type=float, nargs="+", default=None)
    group.add_argument("--factor-counts", type=int, nargs="+", default=None)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_ERROR


if __name__ == "__main__":
    sys.exit(main())
