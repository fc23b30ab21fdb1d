"""Bag-of-words linear classifier trained with hinge loss and L2 penalty.

A comparison stand-in for an SVM over term presence: binary features,
mini-batch subgradient descent, decaying step size.
"""
from __future__ import annotations

import numpy as np

from .corpus import Document, Vocabulary, build_vocabulary, tokenize
from .errors import DataError
from .tensor import assign_checkpoint, load_checkpoint, save_checkpoint, Tensor


class BagOfWordsClassifier:
    def __init__(self, vocab: Vocabulary | None = None, l2: float = 1e-4, epochs: int = 50,
                 learning_rate: float = 0.1, batch_size: int = 32, seed: int = 0):
        self.vocab = vocab
        self.l2 = l2
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.seed = seed
        self.weights: np.ndarray | None = None
        self.bias = 0.0

    def features(self, docs) -> np.ndarray:
        """Binary term-presence matrix with one column per vocabulary row."""
        X = np.zeros((len(docs), self.vocab.n_rows))
        for r, doc in enumerate(docs):
            X[r, self.vocab.encode_tokens(set(tokenize(doc.text)))] = 1.0
        return X

    def fit(self, docs) -> "BagOfWordsClassifier":
        if not docs:
            raise DataError("baseline needs at least one training document")
        if self.vocab is None:
            self.vocab = build_vocabulary(docs)
        X = self.features(docs)
        y = np.array([1.0 if d.label else -1.0 for d in docs])
        rng = np.random.default_rng(self.seed)
        w = np.zeros(X.shape[1])
        b = 0.0
        step = 0
        for _ in range(self.epochs):
            order = rng.permutation(len(docs))
            for start in range(0, len(order), self.batch_size):
                idx = order[start:start + self.batch_size]
                step += 1
                lr = self.learning_rate / (1.0 + self.learning_rate * self.l2 * step)
                margin = y[idx] * (X[idx] @ w + b)
                active = margin < 1.0
                # subgradient of mean hinge + (l2/2)|w|^2
                gw = self.l2 * w - (y[idx, None] * X[idx] * active[:, None]).sum(0) / len(idx)
                gb = -(y[idx] * active).sum() / len(idx)
                w -= lr * gw
                b -= lr * gb
        self.weights, self.bias = w, b
        return self

    def decision_function(self, docs) -> np.ndarray:
        if self.weights is None:
            raise RuntimeError("classifier is not fitted")
        return self.features(docs) @ self.weights + self.bias

    def parameters(self) -> list[tuple[str, Tensor]]:
        w = self.weights if self.weights is not None else np.zeros(self.vocab.n_rows)
        return [("baseline.weights", Tensor(w)), ("baseline.bias", Tensor(np.array([self.bias])))]

    def save(self, path) -> None:
        save_checkpoint([(n, t.data) for n, t in self.parameters()], path)

    def load(self, path) -> None:
        params = self.parameters()
        assign_checkpoint(params, load_checkpoint(path))
        self.weights = params[0][1].data
        self.bias = float(params[1][1].data[0])


def baseline_scores(train_docs: list[Document], test_docs: list[Document], **kwargs) -> np.ndarray:
    return BagOfWordsClassifier(**kwargs).fit(train_docs).decision_function(test_docs)
