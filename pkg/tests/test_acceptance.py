"""Acceptance gate: one test per criterion, each printing a pass/fail line.

Criteria 4-6 share training runs on the standard synthetic corpus, cached
for the session. Seed ``s`` means ``seed_init=s``, ``seed_stochastic=s+1``.
"""
import statistics
import time
from pathlib import Path

import numpy as np
import pytest

from notenet.corpus import build_vocabulary, compute_max_len, document_lengths, encode, load_jsonl
from notenet.experiment import generate_datasets, resolve_config, train_run
from notenet.layers import SeparableConv1D, Conv1D, embedding_dim
from notenet.metrics import auc_pairwise, roc
from notenet.tensor import Tensor, grad_check
from notenet.train import select_epoch, should_stop
from notenet.zoo import MODEL_IDS, ModelSpec, build

import gradcases as G
from oracles import loop_conv1d, loop_lstm

pytestmark = pytest.mark.slow

SEEDS = (1, 2, 3, 4, 5)
TRIALS = 20


def report_and_assert(record, number, checks, extra=""):
    """``checks`` maps a label to (passed, detail)."""
    passed = all(ok for ok, _ in checks.values())
    detail = "; ".join(f"{k}: {d}{'' if ok else ' (FAIL)'}" for k, (ok, d) in checks.items())
    record(number, passed, detail + (f"; {extra}" if extra else ""))
    assert passed, detail


# ------------------------------------------------------------------ fixtures


@pytest.fixture(scope="session")
def corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("standard_corpus")
    generate_datasets(out, 1000, 1000, 1000, shift=0.5, seed=0, vocab_size=2000,
                      n_marker_words=20, marker_probability=10 / 2000, mean_length=200,
                      length_jitter=100)
    return out


class Runs:
    """Session cache of full training runs on the standard corpus."""

    def __init__(self, corpus, root):
        self.corpus, self.root = corpus, Path(root)
        self.cache = {}
        self.seconds = 0.0

    def config(self, model, seed, tag=""):
        return resolve_config({
            "model": model,
            "train": str(self.corpus / "train.jsonl"),
            "test": str(self.corpus / "test.jsonl"),
            "validation": str(self.corpus / "validation.jsonl"),
            "seed_init": seed,
            "seed_stochastic": seed + 1,
            "out": str(self.root / f"{model}_seed{seed}{tag}"),
        })

    def get(self, model, seed):
        key = (model, seed)
        if key not in self.cache:
            t0 = time.perf_counter()
            self.cache[key] = train_run(self.config(model, seed))
            self.seconds += time.perf_counter() - t0
        return self.cache[key]

    def out(self, model, seed):
        self.get(model, seed)
        return Path(self.config(model, seed)["out"])


@pytest.fixture(scope="session")
def runs(corpus, tmp_path_factory):
    return Runs(corpus, tmp_path_factory.mktemp("runs"))


# ------------------------------------------------------------------ 1


def test_criterion_1_gradient_suite(record_criterion):
    t0 = time.perf_counter()
    checks = {}
    layer_names = ["embedding", "dense", "conv1d", "separable_conv1d", "maxpool1d",
                   "global_maxpool1d", "dropout", "lstm", "bidirectional", "bce_loss"]
    for name in layer_names:
        rng = np.random.default_rng(1000 + layer_names.index(name))
        worst, n = 0.0, 0
        for _ in range(TRIALS):
            f, inputs = G.LAYER_CASES[name](rng)
            rep = grad_check(f, inputs)
            worst, n = max(worst, rep.max_rel_error), n + rep.n_checked
        checks[name] = (worst < 1e-4, f"{worst:.1e}/{n}")
    literal = 0.0
    for model_id in MODEL_IDS:
        rng = np.random.default_rng(2000 + MODEL_IDS.index(model_id))
        worst, n = 0.0, 0
        for _ in range(TRIALS):
            f, inputs = G.model_case(model_id, rng)
            rep = grad_check(f, inputs, floor=G.MODEL_FLOOR)
            worst, n = max(worst, rep.max_rel_error), n + rep.n_checked
            literal = max(literal, rep.max_error_at(1e-8))
        checks[f"model {model_id}"] = (worst < 1e-4, f"{worst:.1e}/{n}")
    seconds = time.perf_counter() - t0
    checks["runtime"] = (seconds < 120, f"{seconds:.0f}s")
    report_and_assert(record_criterion, 1, checks,
                      f"models judged with floor {G.MODEL_FLOOR:g}; max error at floor 1e-8 was {literal:.1e}")


# ------------------------------------------------------------------ 2


def test_criterion_2_oracle_equivalence(record_criterion):
    rng = np.random.default_rng(7)
    conv_err = lstm_err = sep_err = 0.0
    from notenet import layers as Lyr

    def T(a):
        return Tensor(a)

    for _ in range(50):
        n, c, f, k = (int(v) for v in rng.integers(1, 5, size=4))
        L = int(rng.integers(k, 10))
        x, K, b = rng.normal(size=(n, L, c)), rng.normal(size=(k, c, f)), rng.normal(size=f)
        conv_err = max(conv_err, np.abs(Lyr.conv1d(T(x), T(K), T(b), "linear").data - loop_conv1d(x, K, b)).max())
        D, P = rng.normal(size=(k, c)), rng.normal(size=(c, f))
        sep = Lyr.separable_conv1d(T(x), T(D), T(P), T(b), "linear").data
        full = Lyr.conv1d(T(x), T(D[:, :, None] * P[None]), T(b), "linear").data
        sep_err = max(sep_err, np.abs(sep - full).max())
        h = int(rng.integers(1, 5))
        W, U, bb = rng.normal(size=(c, 4 * h)), rng.normal(size=(h, 4 * h)), rng.normal(size=4 * h)
        got = Lyr.lstm_forward(T(x), T(W), T(U), T(bb), return_sequences=True).data
        lstm_err = max(lstm_err, np.abs(got - loop_lstm(x, W, U, bb)).max())
    auc_err, cases = 0.0, 0
    while cases < 1000:
        size = int(rng.integers(2, 60))
        y = rng.integers(0, 2, size=size)
        if y.min() == y.max():
            continue
        s = rng.integers(0, int(rng.integers(1, 6)), size=size).astype(float)
        auc_err = max(auc_err, abs(roc(s, y).auc - auc_pairwise(s, y)))
        cases += 1
    report_and_assert(record_criterion, 2, {
        "conv1d": (conv_err <= 1e-12, f"{conv_err:.1e}"),
        "lstm": (lstm_err <= 1e-12, f"{lstm_err:.1e}"),
        "separable": (sep_err <= 1e-12, f"{sep_err:.1e}"),
        f"auc over {cases} tie-heavy cases": (auc_err <= 1e-12, f"{auc_err:.1e}"),
    })


# ------------------------------------------------------------------ 3


def test_criterion_3_early_stop_semantics(record_criterion):
    seq = [1.0, 0.5, 0.495, 0.51]
    stop_at = next(i for i in range(1, len(seq) + 1) if should_stop(seq[:i], 0.01, 2))
    report_and_assert(record_criterion, 3, {
        "[1.0,0.7,0.695,0.69] stops": (should_stop([1.0, 0.7, 0.695, 0.69], 0.01, 2), "True"),
        "[1.0,0.7,0.5] continues": (not should_stop([1.0, 0.7, 0.5], 0.01, 2), "False"),
        "stop epoch": (stop_at == 4, str(stop_at)),
        "selected epoch": (select_epoch(seq) == 3, str(select_epoch(seq))),
        "monotone -> last": (select_epoch([3.0, 2.0, 1.0]) == 3, "3"),
        "tie -> earliest": (select_epoch([1.0, 0.5, 0.5]) == 2, "2"),
    })


# ------------------------------------------------------------------ 4


def _checkpoint_bytes(run_dir):
    return {p.name: p.read_bytes() for p in sorted((run_dir / "checkpoints").glob("*.ckpt"))}


def test_criterion_4_determinism(runs, record_criterion):
    first = runs.get("g", 1)
    cfg = runs.config("g", 1, tag="_repeat")
    again = train_run(cfg)
    cfg_other = dict(runs.config("g", 1, tag="_stochastic"), seed_stochastic=3)
    other = train_run(cfg_other)
    a = _checkpoint_bytes(runs.out("g", 1))
    b = _checkpoint_bytes(Path(cfg["out"]))
    c = _checkpoint_bytes(Path(cfg_other["out"]))
    slowest = max(r.total_seconds for r in (first, again, other))
    report_and_assert(record_criterion, 4, {
        "identical checkpoints": (a == b and len(a) > 0, f"{len(a)} files"),
        "identical AUC": (first.test_auc == again.test_auc, f"{first.test_auc:.6f}"),
        "identical report": (first.without_timing() == again.without_timing(), ""),
        "other stochastic seed differs": (a != c and other.epochs[0].loss != first.epochs[0].loss, ""),
        "runtime per run": (slowest < 300, f"{slowest:.1f}s"),
    })


# ------------------------------------------------------------------ 5


def _untrained_auc(corpus, model_id, seed):
    train_docs = load_jsonl(corpus / "train.jsonl")
    vocab = build_vocabulary(train_docs)
    L = compute_max_len(document_lengths(train_docs), 0.99)
    test = encode(load_jsonl(corpus / "test.jsonl"), vocab, L)
    model = build(ModelSpec.create(model_id, vocab.size, L), seed, seed + 1)
    return roc(model.predict(test), test.labels).auc


def test_criterion_5_synthetic_end_to_end(corpus, runs, record_criterion):
    t0 = time.perf_counter()
    med = {}
    for m in ("g", "f", "baseline"):
        med[m] = statistics.median(runs.get(m, s).test_auc for s in SEEDS)
    g_val = statistics.median(runs.get("g", s).validation_auc for s in SEEDS)
    untrained = {m: statistics.median(_untrained_auc(corpus, m, s) for s in SEEDS) for m in MODEL_IDS}
    lo, hi = min(untrained.values()), max(untrained.values())
    elapsed = runs.seconds + time.perf_counter() - t0
    report_and_assert(record_criterion, 5, {
        "(i) g test AUC": (med["g"] >= 0.95, f"{med['g']:.4f}"),
        "(ii) f test AUC": (med["f"] >= 0.95, f"{med['f']:.4f}"),
        "(iii) untrained a-l": (0.35 <= lo and hi <= 0.65, f"[{lo:.3f}, {hi:.3f}]"),
        "(iv) g validation < test": (g_val < med["g"], f"{g_val:.4f} < {med['g']:.4f}"),
        "(v) baseline AUC": (med["baseline"] >= 0.90, f"{med['baseline']:.4f}"),
        "runtime": (elapsed < 3600, f"{elapsed:.0f}s"),
    })


# ------------------------------------------------------------------ 6


def test_criterion_6_efficiency(runs, record_criterion):
    g = statistics.median(runs.get("g", s).seconds_to_stop for s in SEEDS)
    h = statistics.median(runs.get("h", s).seconds_to_stop for s in SEEDS)
    filters = {runs.get(m, 1).model_spec["conv_filters"] for m in "gh"}
    rng = np.random.default_rng(0)
    sep, reg = SeparableConv1D(5, 7, 64, rng).param_count(), Conv1D(5, 7, 64, rng).param_count()
    report_and_assert(record_criterion, 6, {
        "equal filters": (len(filters) == 1, str(filters.pop())),
        "g faster than h to stop": (g < h, f"{g:.1f}s vs {h:.1f}s"),
        "separable params < regular": (sep < reg, f"{sep} vs {reg}"),
    })


# ------------------------------------------------------------------ 7


def test_criterion_7_embedding_rule(record_criterion):
    got = {v: embedding_dim(v) for v in (20218, 16, 4096)}
    report_and_assert(record_criterion, 7, {
        str(v): (got[v] == want, str(got[v])) for v, want in ((20218, 12), (16, 2), (4096, 8))
    })


# ------------------------------------------------------------------ 8


def test_criterion_8_pipeline_contracts(corpus, runs, record_criterion):
    train_docs = load_jsonl(corpus / "train.jsonl")
    test_docs = load_jsonl(corpus / "test.jsonl")
    vocab = build_vocabulary(train_docs)
    L = compute_max_len(document_lengths(train_docs), 0.99)
    batch = encode(test_docs, vocab, L)
    from notenet.corpus import Vocabulary
    run_vocab = Vocabulary.load(runs.out("g", 1) / "vocab.tsv")
    leaky = build_vocabulary(train_docs + test_docs)
    leak_changes = bool((encode(test_docs, leaky, L).sequences != batch.sequences).any())
    report_and_assert(record_criterion, 8, {
        "shape": (batch.sequences.shape == (len(test_docs), L), str(batch.sequences.shape)),
        "range": (batch.sequences.min() >= 0 and batch.sequences.max() <= vocab.size + 1,
                  f"[{batch.sequences.min()}, {batch.sequences.max()}] of V+1={vocab.size + 1}"),
        "run vocabulary is train-only": (run_vocab == vocab, f"V={run_vocab.size}"),
        "train+test vocabulary would change encoding": (leak_changes, str(leak_changes)),
    })
