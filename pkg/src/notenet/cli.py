"""Command-line entry point: ``notenet {generate,train,evaluate,compare}``.

Exit codes: 0 success, 2 usage/config error, 3 data error, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

from . import experiment as X
from .errors import ConfigError, DataError, NumericalError

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 2, 3, 4

# flag dest -> config key, for flags shared by train and compare
_TRAIN_FLAGS = {
    "seed_init": int,
    "seed_stochastic": int,
    "max_epochs": int,
    "batch_size": int,
    "learning_rate": float,
    "stop_delta": float,
    "stop_patience": int,
    "percentile": float,
    "max_len": int,
    "embedding_dim": int,
    "hidden_size": int,
    "conv_filters": int,
    "kernel_width": int,
    "dropout": float,
    "dense_units": int,
    "pool_width": int,
    "pool_stride": int,
    "baseline_l2": float,
    "baseline_epochs": int,
}


def _add_data_flags(p, need_model: bool):
    if need_model:
        p.add_argument("--model", help="a..l or baseline")
    p.add_argument("--train", help="training JSONL file")
    p.add_argument("--test", help="test JSONL file")
    p.add_argument("--validation", help="optional validation JSONL file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--config", help="JSON document of settings; flags override it")
    for name, typ in _TRAIN_FLAGS.items():
        default = X.DEFAULTS[name]
        p.add_argument("--" + name.replace("_", "-"), type=typ, default=None,
                       help=f"default: {default}" if default is not None else "default: derived")
    p.add_argument("--dtype", choices=("float32", "float64"), default=None)
    p.add_argument("--no-shuffle", dest="shuffle", action="store_const", const=False, default=None)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="notenet", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true", help="log per-epoch progress")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write synthetic train/test/validation JSONL files")
    g.add_argument("--out", required=True)
    g.add_argument("--n-train", type=int, default=1000)
    g.add_argument("--n-test", type=int, default=1000)
    g.add_argument("--n-validation", type=int, default=1000)
    g.add_argument("--vocab-size", type=int, default=2000)
    g.add_argument("--n-markers", type=int, default=20)
    g.add_argument("--lift", type=float, default=10.0,
                   help="marker probability as a multiple of the background rate")
    g.add_argument("--marker-probability", type=float, default=None, help="overrides --lift")
    g.add_argument("--mean-length", type=int, default=200)
    g.add_argument("--length-jitter", type=int, default=100)
    g.add_argument("--positive-fraction", type=float, default=0.5)
    g.add_argument("--shift", type=float, default=0.5,
                   help="fraction of marker words swapped out in the validation split")
    g.add_argument("--seed", type=int, default=0)

    t = sub.add_parser("train", help="train one model and write a run directory")
    _add_data_flags(t, need_model=True)

    e = sub.add_parser("evaluate", help="score a checkpoint on a dataset")
    e.add_argument("--run", help="run directory (default: inferred from --checkpoint)")
    e.add_argument("--checkpoint", help="checkpoint file (default: the run's selected epoch)")
    e.add_argument("--data", required=True, help="JSONL dataset to score")
    e.add_argument("--out", help="output directory for metrics.json and roc.csv")

    c = sub.add_parser("compare", help="train a grid of models and tabulate AUCs")
    c.add_argument("--models", required=True, help="comma-separated list, e.g. a,f,g,baseline")
    c.add_argument("--seeds", default="1", help="comma-separated init seeds; rows report medians")
    c.add_argument("--parallel", type=int, default=1, help="worker processes (default serial)")
    _add_data_flags(c, need_model=False)
    return ap


def _overrides(args) -> dict:
    keys = [*_TRAIN_FLAGS, "dtype", "shuffle", "train", "test", "validation", "out"]
    if hasattr(args, "model"):
        keys.append("model")
    return {k: getattr(args, k) for k in keys if getattr(args, k, None) is not None}


def _file_config(path) -> dict:
    if not path:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    return cfg


def _int_list(text: str, what: str) -> list[int]:
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise ConfigError(f"{what} must be comma-separated integers") from None


def cmd_generate(args) -> int:
    fields = {
        "vocab_size": args.vocab_size,
        "n_marker_words": args.n_markers,
        "marker_probability": args.marker_probability
        if args.marker_probability is not None else args.lift / args.vocab_size,
        "mean_length": args.mean_length,
        "length_jitter": args.length_jitter,
        "positive_fraction": args.positive_fraction,
    }
    manifest = X.generate_datasets(args.out, args.n_train, args.n_test, args.n_validation,
                                   args.shift, args.seed, **fields)
    print(json.dumps(manifest["counts"]))
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = X.resolve_config(_file_config(args.config), _overrides(args))
    rep = X.train_run(cfg)
    summary = {
        "model": rep.model_id,
        "test_auc": rep.test_auc,
        "validation_auc": rep.validation_auc,
        "stop_epoch": rep.stop_epoch,
        "selected_epoch": rep.selected_epoch,
        "out": cfg["out"],
    }
    print(json.dumps(summary))
    return EXIT_OK


def cmd_evaluate(args) -> int:
    if not args.run and not args.checkpoint:
        raise ConfigError("evaluate needs --run or --checkpoint")
    run_dir = args.run or X.find_run_dir(args.checkpoint)
    print(json.dumps(X.evaluate_run(run_dir, args.data, args.checkpoint, args.out)))
    return EXIT_OK


def cmd_compare(args) -> int:
    models = [m.strip() for m in args.models.split(",") if m.strip()]
    if not models:
        raise ConfigError("empty model grid")
    for m in models:
        if m not in X.MODEL_CHOICES:
            raise ConfigError(f"unknown model {m!r}")
    base = dict(_file_config(args.config), **_overrides(args))
    base.pop("model", None)
    rows = X.compare(models, base, args.out, _int_list(args.seeds, "--seeds"), args.parallel)
    print(X.format_table(rows))
    return EXIT_OK


COMMANDS = {"generate": cmd_generate, "train": cmd_train, "evaluate": cmd_evaluate, "compare": cmd_compare}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"notenet {args.command}: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, FileNotFoundError, PermissionError, IsADirectoryError) as exc:
        print(f"notenet {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"notenet {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
