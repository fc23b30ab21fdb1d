"""Notes in, fixed-length integer matrices out.

Tokenization, the training-only word index, percentile length capping,
pre-padded encoding, JSON-lines I/O and a synthetic corpus generator that
stands in for private clinical notes.
"""
from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, DataError

PAD_INDEX = 0
OOV_INDEX = 1
FIRST_WORD_INDEX = 2

# runs of letters/digits; "_" and every other symbol act as separators
_TOKEN_RE = re.compile(r"[^\W_]+")


@dataclass(frozen=True)
class Document:
    text: str
    label: int

    def __post_init__(self):
        if not isinstance(self.text, str) or not self.text.strip():
            raise DataError("document text must be a non-empty string")
        if isinstance(self.label, bool) or self.label not in (0, 1):
            raise DataError(f"label must be 0 or 1, got {self.label!r}")


def tokenize(text: str) -> list[str]:
    """Lowercase and split on anything that is not a letter or digit.

    >>> tokenize("Type 2 Diabetes, well-controlled.")
    ['type', '2', 'diabetes', 'well', 'controlled']
    """
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class Vocabulary:
    """Word index built from training text.

    Index 0 is padding, 1 is out-of-vocabulary, words occupy 2..V+1.
    """

    index: dict[str, int]
    pad_index: int = PAD_INDEX
    oov_index: int = OOV_INDEX

    def __post_init__(self):
        expected = set(range(FIRST_WORD_INDEX, FIRST_WORD_INDEX + len(self.index)))
        if set(self.index.values()) != expected or len(set(self.index.values())) != len(self.index):
            raise DataError("vocabulary indices must be the contiguous range 2..V+1")

    @property
    def size(self) -> int:
        return len(self.index)

    @property
    def n_rows(self) -> int:
        """Rows an embedding table needs: V words plus pad and OOV."""
        return self.size + FIRST_WORD_INDEX

    def lookup(self, word: str) -> int:
        return self.index.get(word, self.oov_index)

    def words(self) -> list[str]:
        """Words ordered by index."""
        return sorted(self.index, key=self.index.__getitem__)

    def encode_tokens(self, tokens: Iterable[str]) -> list[int]:
        get = self.index.get
        return [get(t, self.oov_index) for t in tokens]

    def save(self, path) -> None:
        lines = [f"{w}\t{self.index[w]}\n" for w in self.words()]
        Path(path).write_text("".join(lines), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        index = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.rstrip("\n")
                if not line:
                    continue
                try:
                    word, idx = line.split("\t")
                    index[word] = int(idx)
                except ValueError:
                    raise DataError(f"{path}:{lineno}: expected 'word<TAB>index'") from None
        return cls(index)

    def __eq__(self, other):
        if not isinstance(other, Vocabulary):
            return NotImplemented
        return self.index == other.index

    __hash__ = None


def build_vocabulary(training_docs: Sequence[Document]) -> Vocabulary:
    """Index every distinct training token, most frequent first.

    Frequency ties are broken lexicographically so the map is reproducible.
    """
    if not training_docs:
        raise DataError("at least one training document is required")
    counts: Counter[str] = Counter()
    for doc in training_docs:
        counts.update(tokenize(doc.text))
    if not counts:
        raise DataError("empty vocabulary")
    ordered = sorted(counts, key=lambda w: (-counts[w], w))
    return Vocabulary({w: i for i, w in enumerate(ordered, FIRST_WORD_INDEX)})


def compute_max_len(lengths: Sequence[int], percentile: float = 0.99) -> int:
    """Nearest-rank percentile of the document lengths."""
    if len(lengths) == 0:
        raise DataError("cannot take a percentile of an empty length list")
    if not 0.0 < percentile <= 1.0:
        raise ConfigError(f"percentile must lie in (0, 1], got {percentile}")
    ordered = sorted(int(x) for x in lengths)
    # tolerate representation error in products like 0.29 * 100
    rank = max(1, math.ceil(percentile * len(ordered) - 1e-9))
    return ordered[rank - 1]


@dataclass(frozen=True)
class EncodedBatch:
    sequences: np.ndarray  # (n_docs, max_len) int64
    labels: np.ndarray  # (n_docs,) int64
    max_len: int

    def __post_init__(self):
        if self.sequences.ndim != 2 or self.sequences.shape[1] != self.max_len:
            raise DataError(
                f"sequences must have shape (n, {self.max_len}), got {self.sequences.shape}"
            )
        if self.labels.shape != (self.sequences.shape[0],):
            raise DataError("one label per sequence is required")

    def __len__(self) -> int:
        return self.sequences.shape[0]

    def subset(self, rows) -> "EncodedBatch":
        return EncodedBatch(self.sequences[rows], self.labels[rows], self.max_len)


def pad_or_truncate(ids: Sequence[int], max_len: int, pad_index: int = PAD_INDEX) -> list[int]:
    """Pre-pad short sequences; keep the head of long ones."""
    ids = list(ids[:max_len])
    return [pad_index] * (max_len - len(ids)) + ids


def encode(docs: Sequence[Document], vocab: Vocabulary, max_len: int) -> EncodedBatch:
    if max_len < 1:
        raise ConfigError(f"max_len must be >= 1, got {max_len}")
    seqs = np.full((len(docs), max_len), vocab.pad_index, dtype=np.int64)
    for row, doc in enumerate(docs):
        ids = vocab.encode_tokens(tokenize(doc.text))[:max_len]
        if ids:
            seqs[row, max_len - len(ids):] = ids
    labels = np.fromiter((d.label for d in docs), dtype=np.int64, count=len(docs))
    return EncodedBatch(seqs, labels, max_len)


def document_lengths(docs: Iterable[Document]) -> list[int]:
    return [len(tokenize(d.text)) for d in docs]


# ---------------------------------------------------------------- JSON lines


def load_jsonl(path) -> list[Document]:
    docs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from None
            if not isinstance(rec, dict) or "text" not in rec or "label" not in rec:
                raise DataError(f"{path}:{lineno}: record needs 'text' and 'label' fields")
            try:
                docs.append(Document(rec["text"], rec["label"]))
            except DataError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
    return docs


def save_jsonl(docs: Iterable[Document], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for doc in docs:
            fh.write(json.dumps({"text": doc.text, "label": doc.label}, ensure_ascii=False))
            fh.write("\n")


# ---------------------------------------------------------------- synthetic


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of the synthetic two-class corpus.

    Positive documents draw each of the first ``n_marker_words`` words with
    probability ``marker_probability`` per token slot; every other slot,
    and every slot of a negative document, is uniform over the vocabulary.
    ``shift`` replaces that fraction of the markers with substitute words in
    positive documents, emulating a second site that writes differently.
    """

    n_docs: int = 1000
    positive_fraction: float = 0.5
    vocab_size: int = 2000
    n_marker_words: int = 20
    marker_probability: float = 0.005
    mean_length: int = 200
    length_jitter: int = 100
    seed: int = 0
    shift: float = 0.0

    @property
    def background_probability(self) -> float:
        return 1.0 / self.vocab_size

    def validate(self) -> None:
        for name in ("n_docs", "vocab_size", "n_marker_words", "mean_length"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.length_jitter < 0 or self.mean_length - self.length_jitter < 1:
            raise ConfigError("length_jitter must keep every document at least one token long")
        if not 0.0 < self.positive_fraction < 1.0:
            raise ConfigError("positive_fraction must lie in (0, 1)")
        if not 0.0 < self.marker_probability <= 1.0:
            raise ConfigError("marker_probability must lie in (0, 1]")
        if self.marker_probability < self.background_probability:
            raise ConfigError("marker_probability must not fall below the background rate")
        if self.n_marker_words * self.marker_probability > 1.0:
            raise ConfigError("marker words cannot take more than the whole slot mass")
        if not 0.0 <= self.shift <= 1.0:
            raise ConfigError("shift must lie in [0, 1]")
        if 2 * self.n_marker_words > self.vocab_size:
            raise ConfigError("vocab_size must be at least twice n_marker_words")

    def words(self) -> list[str]:
        width = len(str(self.vocab_size - 1))
        return [f"w{i:0{width}d}" for i in range(self.vocab_size)]

    def n_shifted(self) -> int:
        return int(round(self.shift * self.n_marker_words))

    def positive_distribution(self) -> np.ndarray:
        v, m = self.vocab_size, self.n_marker_words
        active = np.arange(m)
        k = self.n_shifted()
        if k:
            # shifted markers hand their lift to substitutes right after the marker block
            active = np.concatenate([np.arange(k, m), np.arange(m, m + k)])
        rest = (1.0 - m * self.marker_probability) / (v - m)
        probs = np.full(v, rest)
        probs[active] = self.marker_probability
        return probs / probs.sum()


def generate_synthetic(spec: SyntheticSpec) -> list[Document]:
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    words = np.array(spec.words())
    n_pos = int(round(spec.n_docs * spec.positive_fraction))
    labels = np.zeros(spec.n_docs, dtype=np.int64)
    labels[:n_pos] = 1
    labels = rng.permutation(labels)
    lengths = rng.integers(
        spec.mean_length - spec.length_jitter,
        spec.mean_length + spec.length_jitter + 1,
        size=spec.n_docs,
    )
    cdf = {
        1: np.cumsum(spec.positive_distribution()),
        0: np.cumsum(np.full(spec.vocab_size, spec.background_probability)),
    }
    docs = []
    for label, length in zip(labels, lengths):
        c = cdf[int(label)]
        idx = np.searchsorted(c, rng.random(length) * c[-1], side="right")
        idx = np.minimum(idx, spec.vocab_size - 1)
        docs.append(Document(" ".join(words[idx]), int(label)))
    return docs


def marker_words(spec: SyntheticSpec) -> list[str]:
    return spec.words()[: spec.n_marker_words]


def stratified_split(docs: Sequence[Document], fraction: float, seed: int = 0):
    """Random split taking ``fraction`` of each class into the first part."""
    rng = np.random.default_rng(seed)
    labels = np.array([d.label for d in docs])
    first = []
    for cls in (0, 1):
        idx = rng.permutation(np.flatnonzero(labels == cls))
        first.extend(idx[: int(round(fraction * len(idx)))].tolist())
    chosen = set(first)
    return (
        [d for i, d in enumerate(docs) if i in chosen],
        [d for i, d in enumerate(docs) if i not in chosen],
    )
