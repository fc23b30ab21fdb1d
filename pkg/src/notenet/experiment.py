"""Run directories: resolve a config, train, persist, evaluate, compare.

A run directory holds everything needed to re-run or re-score it::

    config.json        fully resolved run configuration
    vocab.tsv          training-split word index
    model_spec.json    resolved architecture and hyperparameters
    checkpoints/       epoch_NNN.ckpt per epoch (or baseline.ckpt)
    report.json        RunReport
    curve.csv          epoch, loss, accuracy, seconds
    roc_test.csv       threshold, fpr, tpr  (roc_validation.csv if given)
"""
from __future__ import annotations

import csv
import json
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import _kernels
from .baseline import BagOfWordsClassifier
from .corpus import (
    SyntheticSpec,
    Vocabulary,
    build_vocabulary,
    compute_max_len,
    document_lengths,
    encode,
    generate_synthetic,
    load_jsonl,
    save_jsonl,
    stratified_split,
)
from .errors import ConfigError, DataError, NotenetError
from .metrics import accuracy, roc, write_roc_csv
from .train import RunReport, TrainConfig, run
from .zoo import MODEL_IDS, MODEL_NAMES, Model, ModelSpec

DEFAULTS = {
    "model": None,
    "train": None,
    "test": None,
    "validation": None,
    "out": None,
    "seed_init": 1,
    "seed_stochastic": 2,
    "max_epochs": 50,
    "batch_size": 32,
    "learning_rate": 1e-3,
    "stop_delta": 0.01,
    "stop_patience": 2,
    "shuffle": True,
    "dtype": "float32",
    "percentile": 0.99,
    "max_len": None,
    "embedding_dim": None,
    "hidden_size": 32,
    "conv_filters": 64,
    "kernel_width": 5,
    "dropout": 0.2,
    "dense_units": 64,
    "pool_width": 2,
    "pool_stride": 2,
    "baseline_l2": 1e-4,
    "baseline_epochs": 50,
    "baseline_learning_rate": 0.1,
}
REQUIRED = ("model", "train", "test")
MODEL_CHOICES = (*MODEL_IDS, "baseline")


def resolve_config(*layers: dict) -> dict:
    """Merge defaults with successive override dicts (``None`` values skip)."""
    cfg = dict(DEFAULTS)
    for layer in layers:
        for k, v in (layer or {}).items():
            if k not in DEFAULTS:
                raise ConfigError(f"unknown config key {k!r}")
            if v is not None:
                cfg[k] = v
    missing = [k for k in REQUIRED if cfg[k] is None]
    if missing:
        raise ConfigError(f"missing required setting(s): {', '.join(missing)}")
    if cfg["model"] not in MODEL_CHOICES:
        raise ConfigError(f"unknown model {cfg['model']!r}; choose from {', '.join(MODEL_CHOICES)}")
    return cfg


def train_config(cfg: dict) -> TrainConfig:
    tc = TrainConfig(
        batch_size=int(cfg["batch_size"]),
        learning_rate=float(cfg["learning_rate"]),
        max_epochs=int(cfg["max_epochs"]),
        stop_min_delta=float(cfg["stop_delta"]),
        stop_patience=int(cfg["stop_patience"]),
        seed_init=int(cfg["seed_init"]),
        seed_stochastic=int(cfg["seed_stochastic"]),
        shuffle=bool(cfg["shuffle"]),
        dtype=cfg["dtype"],
    )
    tc.validate()
    return tc


def model_spec(cfg: dict, vocab: Vocabulary, max_len: int) -> ModelSpec:
    return ModelSpec.create(
        cfg["model"],
        vocab.size,
        max_len,
        embedding_dim=cfg["embedding_dim"],
        hidden_size=int(cfg["hidden_size"]),
        conv_filters=int(cfg["conv_filters"]),
        conv_kernel_width=int(cfg["kernel_width"]),
        dropout_rate=float(cfg["dropout"]),
        dense_units=int(cfg["dense_units"]),
        pool_width=int(cfg["pool_width"]),
        pool_stride=int(cfg["pool_stride"]),
    )


def _write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _write_curve(report: RunReport, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "loss", "accuracy", "seconds"])
        for r in report.epochs:
            w.writerow([r.epoch, repr(r.loss), repr(r.accuracy), f"{r.seconds:.4f}"])


def train_run(cfg: dict) -> RunReport:
    """Execute one resolved config into ``cfg['out']``."""
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    train_docs = load_jsonl(cfg["train"])
    test_docs = load_jsonl(cfg["test"])
    val_docs = load_jsonl(cfg["validation"]) if cfg["validation"] else None
    if not train_docs or not test_docs:
        raise DataError("train and test files must contain documents")

    # the index map sees training text only
    vocab = build_vocabulary(train_docs)
    max_len = int(cfg["max_len"] or compute_max_len(document_lengths(train_docs), cfg["percentile"]))
    resolved = dict(cfg, max_len=max_len)
    _write_json(resolved, out / "config.json")
    vocab.save(out / "vocab.tsv")
    ckpt_dir = out / "checkpoints"
    ckpt_dir.mkdir(exist_ok=True)

    if cfg["model"] == "baseline":
        report = _baseline_run(resolved, vocab, train_docs, test_docs, val_docs, ckpt_dir)
    else:
        spec = model_spec(resolved, vocab, max_len)
        spec.save(out / "model_spec.json")
        test = encode(test_docs, vocab, max_len)
        val = encode(val_docs, vocab, max_len) if val_docs else None
        report, model = run(
            spec,
            encode(train_docs, vocab, max_len),
            test,
            train_config(resolved),
            val,
            checkpoint_dir=ckpt_dir,
        )
        report.selected_checkpoint = f"checkpoints/{report.selected_checkpoint}"
        write_roc_csv(roc(model.predict(test), test.labels), out / "roc_test.csv")
        if val is not None:
            write_roc_csv(roc(model.predict(val), val.labels), out / "roc_validation.csv")
    report.save(out / "report.json")
    _write_curve(report, out / "curve.csv")
    return report


def _baseline_spec(cfg) -> dict:
    return {
        "model_id": "baseline",
        "name": MODEL_NAMES["baseline"],
        "l2": float(cfg["baseline_l2"]),
        "epochs": int(cfg["baseline_epochs"]),
        "learning_rate": float(cfg["baseline_learning_rate"]),
        "batch_size": int(cfg["batch_size"]),
        "seed": int(cfg["seed_stochastic"]),
        "features": "binary term presence",
    }


def _baseline(cfg, vocab) -> BagOfWordsClassifier:
    spec = _baseline_spec(cfg)
    return BagOfWordsClassifier(vocab, spec["l2"], spec["epochs"], spec["learning_rate"],
                                spec["batch_size"], spec["seed"])


def _baseline_run(cfg, vocab, train_docs, test_docs, val_docs, ckpt_dir) -> RunReport:
    t0 = time.perf_counter()
    clf = _baseline(cfg, vocab).fit(train_docs)
    seconds = time.perf_counter() - t0
    clf.save(ckpt_dir / "baseline.ckpt")
    _write_json(_baseline_spec(cfg), Path(cfg["out"]) / "model_spec.json")
    s = clf.decision_function(test_docs)
    y = [d.label for d in test_docs]
    curve = roc(s, y)
    write_roc_csv(curve, Path(cfg["out"]) / "roc_test.csv")
    report = RunReport(
        model_id="baseline", epochs=[], stop_epoch=None, selected_epoch=None,
        patience_rule_epoch=None, stopped_early=False,
        selected_checkpoint="checkpoints/baseline.ckpt",
        test_auc=curve.auc, test_accuracy=accuracy(s, y, 0.0), test_roc=curve.points(),
        seconds_to_stop=seconds, total_seconds=0.0, model_spec=_baseline_spec(cfg),
        config={}, parameter_count=vocab.n_rows + 1, kernel_backend=_kernels.BACKEND,
    )
    if val_docs:
        sv = clf.decision_function(val_docs)
        yv = [d.label for d in val_docs]
        vc = roc(sv, yv)
        report.validation_auc, report.validation_accuracy = vc.auc, accuracy(sv, yv, 0.0)
        report.validation_roc = vc.points()
        write_roc_csv(vc, Path(cfg["out"]) / "roc_validation.csv")
    report.total_seconds = time.perf_counter() - t0
    return report


# ------------------------------------------------------------------ generate


def generate_datasets(out, n_train=1000, n_test=1000, n_validation=1000, shift=0.5,
                      seed=0, **spec_fields) -> dict:
    """Write train/test/validation JSONL files plus a manifest.

    Train and test come from one draw split by class; validation is drawn
    separately with ``shift`` of the marker words swapped out.
    """
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    site = SyntheticSpec(n_docs=n_train + n_test, seed=seed, shift=0.0, **spec_fields)
    shifted = SyntheticSpec(n_docs=max(n_validation, 1), seed=seed + 1, shift=shift, **spec_fields)
    site.validate()
    shifted.validate()
    train_docs, test_docs = stratified_split(generate_synthetic(site), n_train / (n_train + n_test), seed)
    files = {"train": train_docs, "test": test_docs}
    if n_validation:
        files["validation"] = generate_synthetic(shifted)
    for name, docs in files.items():
        save_jsonl(docs, out / f"{name}.jsonl")
    manifest = {
        "site_spec": asdict(site),
        "validation_spec": asdict(shifted) if n_validation else None,
        "split_seed": seed,
        "counts": {k: len(v) for k, v in files.items()},
        "positives": {k: sum(d.label for d in v) for k, v in files.items()},
    }
    _write_json(manifest, out / "manifest.json")
    return manifest


# ------------------------------------------------------------------ evaluate


def load_run_model(run_dir, checkpoint=None):
    """Rebuild the model of a run directory and load a checkpoint into it.

    Returns ``(model_or_classifier, vocab, config, checkpoint_path)``.
    """
    run_dir = Path(run_dir)
    for name in ("config.json", "vocab.tsv", "model_spec.json"):
        if not (run_dir / name).is_file():
            raise DataError(f"{run_dir} is not a run directory (missing {name})")
    cfg = json.loads((run_dir / "config.json").read_text())
    vocab = Vocabulary.load(run_dir / "vocab.tsv")
    if checkpoint is None:
        report = json.loads((run_dir / "report.json").read_text())
        checkpoint = run_dir / report["selected_checkpoint"]
    checkpoint = Path(checkpoint)
    if not checkpoint.is_file():
        raise DataError(f"checkpoint {checkpoint} not found")
    if cfg["model"] == "baseline":
        model = _baseline(cfg, vocab)
    else:
        spec = ModelSpec.load(run_dir / "model_spec.json")
        if spec.vocab_size != vocab.size:
            raise DataError(f"model spec expects {spec.vocab_size} words, vocabulary has {vocab.size}")
        model = Model(spec, dtype=np.dtype(cfg["dtype"]))
    model.load(checkpoint)
    return model, vocab, cfg, checkpoint


def find_run_dir(checkpoint) -> Path:
    p = Path(checkpoint).resolve().parent
    for cand in (p, p.parent):
        if (cand / "config.json").is_file():
            return cand
    raise DataError(f"cannot locate the run directory of {checkpoint}")


def evaluate_run(run_dir, data_path, checkpoint=None, out=None) -> dict:
    model, vocab, cfg, ckpt = load_run_model(run_dir, checkpoint)
    docs = load_jsonl(data_path)
    if not docs:
        raise DataError(f"{data_path} holds no documents")
    labels = [d.label for d in docs]
    if cfg["model"] == "baseline":
        scores, threshold = model.decision_function(docs), 0.0
    else:
        scores, threshold = model.predict(encode(docs, vocab, model.spec.max_len)), 0.5
    curve = roc(scores, labels)
    out = Path(out) if out else Path(run_dir) / "evaluations" / f"{Path(data_path).stem}-{ckpt.stem}"
    out.mkdir(parents=True, exist_ok=True)
    metrics = {
        "run_dir": str(run_dir),
        "checkpoint": str(ckpt),
        "dataset": str(data_path),
        "n_docs": len(docs),
        "auc": curve.auc,
        "accuracy": accuracy(scores, labels, threshold),
        "threshold": threshold,
    }
    _write_json(metrics, out / "metrics.json")
    write_roc_csv(curve, out / "roc.csv")
    metrics["out"] = str(out)
    return metrics


# ------------------------------------------------------------------ compare

COMPARE_COLUMNS = ("model", "name", "test_auc", "validation_auc", "stop_epoch",
                   "selected_epoch", "seconds_to_stop", "seeds", "status")


def _cell(cfg: dict) -> dict:
    try:
        rep = train_run(cfg)
    except NotenetError as exc:
        return {"status": f"failed: {exc}"}
    return {
        "status": "ok",
        "test_auc": rep.test_auc,
        "validation_auc": rep.validation_auc,
        "stop_epoch": rep.stop_epoch,
        "selected_epoch": rep.selected_epoch,
        "seconds_to_stop": rep.seconds_to_stop,
    }


def _median(values):
    values = [v for v in values if v is not None]
    return statistics.median(values) if values else None


def compare(models, base: dict, out, seeds=(1,), parallel: int = 1) -> list[dict]:
    """Train every model for every seed and summarize one row per model (medians).

    Seed ``s`` runs with ``seed_init=s`` and ``seed_stochastic=s+1``.
    """
    if not models:
        raise ConfigError("compare needs at least one model")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    cells = []
    for m in models:
        for s in seeds:
            cells.append((m, s, resolve_config(base, {
                "model": m, "seed_init": s, "seed_stochastic": s + 1,
                "out": str(out / f"{m}_seed{s}"),
            })))
    if parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            results = list(pool.map(_cell, [c for _, _, c in cells]))
    else:
        results = [_cell(c) for _, _, c in cells]

    rows = []
    for m in models:
        res = [r for (mm, _, _), r in zip(cells, results) if mm == m]
        ok = [r for r in res if r["status"] == "ok"]
        row = {"model": m, "name": MODEL_NAMES[m], "seeds": len(ok)}
        for key in ("test_auc", "validation_auc", "stop_epoch", "selected_epoch", "seconds_to_stop"):
            row[key] = _median([r[key] for r in ok])
        row["status"] = "ok" if len(ok) == len(res) else next(r["status"] for r in res if r["status"] != "ok")
        rows.append(row)
    write_comparison(rows, out)
    return rows


def _fmt(v):
    if v is None:
        return "NA"
    if isinstance(v, float):
        return f"{v:.4f}"
    return str(v)


def write_comparison(rows, out) -> None:
    out = Path(out)
    with open(out / "comparison.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=COMPARE_COLUMNS)
        w.writeheader()
        for r in rows:
            w.writerow({k: "" if r.get(k) is None else r.get(k) for k in COMPARE_COLUMNS})
    (out / "comparison.txt").write_text(format_table(rows) + "\n")


def format_table(rows) -> str:
    table = [list(COMPARE_COLUMNS)] + [[_fmt(r.get(k)) for k in COMPARE_COLUMNS] for r in rows]
    widths = [max(len(row[i]) for row in table) for i in range(len(COMPARE_COLUMNS))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in table]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)
