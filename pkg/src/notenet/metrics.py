"""ROC curves, AUC and thresholded accuracy."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class RocCurve:
    thresholds: np.ndarray  # starts at +inf, then distinct scores in decreasing order
    fpr: np.ndarray
    tpr: np.ndarray
    auc: float

    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.fpr.tolist(), self.tpr.tolist()))


def _check(scores, labels):
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    labels = np.asarray(labels).reshape(-1)
    if scores.shape != labels.shape:
        raise DataError(f"{scores.size} scores but {labels.size} labels")
    if not np.isin(labels, (0, 1)).all():
        raise DataError("labels must be 0 or 1")
    labels = labels.astype(np.int64)
    n_pos = int(labels.sum())
    if n_pos == 0 or n_pos == labels.size:
        raise DataError("AUC undefined: labels contain a single class")
    return scores, labels, n_pos, labels.size - n_pos


def roc(scores, labels) -> RocCurve:
    """Sweep thresholds over distinct scores, highest first.

    Tied scores move the curve in one diagonal step, which makes the
    trapezoidal area equal the pairwise concordance with ties worth 1/2.
    """
    scores, labels, n_pos, n_neg = _check(scores, labels)
    order = np.argsort(-scores, kind="mergesort")
    s, y = scores[order], labels[order]
    # last index of each run of equal scores
    ends = np.flatnonzero(np.r_[s[1:] != s[:-1], True])
    tp = np.r_[0, np.cumsum(y)[ends]]
    fp = np.r_[0, np.cumsum(1 - y)[ends]]
    # trapezoids in integer counts, one division at the end
    area = np.sum(np.diff(fp) * (tp[1:] + tp[:-1])) / 2.0
    return RocCurve(
        thresholds=np.r_[np.inf, s[ends]],
        fpr=fp / n_neg,
        tpr=tp / n_pos,
        auc=float(area / (n_pos * n_neg)),
    )


def auc_pairwise(scores, labels) -> float:
    """Probability that a random positive outscores a random negative (ties 1/2).

    Brute force over all pairs; an independent check on :func:`roc`.
    """
    scores, labels, n_pos, n_neg = _check(scores, labels)
    pos = scores[labels == 1][:, None]
    neg = scores[labels == 0][None, :]
    wins = np.count_nonzero(pos > neg)
    ties = np.count_nonzero(pos == neg)
    return (wins + 0.5 * ties) / (n_pos * n_neg)


def accuracy(scores, labels, threshold: float = 0.5) -> float:
    """Share of correct calls; a score equal to the threshold is called positive."""
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    labels = np.asarray(labels).reshape(-1)
    if scores.size == 0:
        return float("nan")
    return float(np.mean((scores >= threshold).astype(np.int64) == labels))


def write_roc_csv(curve: RocCurve, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["threshold", "fpr", "tpr"])
        for t, f, p in zip(curve.thresholds, curve.fpr, curve.tpr):
            w.writerow([repr(float(t)), repr(float(f)), repr(float(p))])


def read_roc_csv(path) -> RocCurve:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    t = np.array([float(r["threshold"]) for r in rows])
    f = np.array([float(r["fpr"]) for r in rows])
    p = np.array([float(r["tpr"]) for r in rows])
    return RocCurve(t, f, p, float(np.sum(np.diff(f) * (p[1:] + p[:-1])) / 2.0))
