import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from notenet.errors import DataError
from notenet.metrics import accuracy, auc_pairwise, read_roc_csv, roc, write_roc_csv


def loop_auc(scores, labels):
    """Plain double loop over positive/negative pairs."""
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    total = 0.0
    for p in pos:
        for n in neg:
            total += 1.0 if p > n else 0.5 if p == n else 0.0
    return total / (len(pos) * len(neg))


CASES = [
    ([0.9, 0.8, 0.3, 0.2], [1, 1, 0, 0], 1.0),
    ([0.5, 0.5], [1, 0], 0.5),
    ([0.8, 0.7, 0.4, 0.3], [1, 0, 1, 0], 0.75),
]


@pytest.mark.parametrize("scores,labels,expected", CASES)
def test_roc_examples(scores, labels, expected):
    assert roc(scores, labels).auc == expected
    assert auc_pairwise(scores, labels) == expected
    assert loop_auc(scores, labels) == expected


def test_curve_shape():
    c = roc([0.8, 0.7, 0.4, 0.3], [1, 0, 1, 0])
    assert c.points() == [(0, 0), (0, 0.5), (0.5, 0.5), (0.5, 1), (1, 1)]
    assert np.isinf(c.thresholds[0]) and c.thresholds[1:].tolist() == [0.8, 0.7, 0.4, 0.3]


def test_ties_collapse_to_one_step():
    c = roc([0.5, 0.5, 0.5], [1, 0, 1])
    assert c.points() == [(0, 0), (1, 1)]
    assert c.auc == 0.5


def test_single_class_undefined():
    with pytest.raises(DataError, match="AUC undefined"):
        roc([0.1, 0.2], [1, 1])
    with pytest.raises(DataError, match="AUC undefined"):
        auc_pairwise([0.1, 0.2], [0, 0])


def test_reversed_scores():
    s = np.array([0.9, 0.1, 0.4, 0.35, 0.8])
    y = [1, 0, 0, 1, 1]
    assert roc(-s, y).auc == pytest.approx(1 - roc(s, y).auc, abs=1e-15)


def test_all_equal_scores():
    assert auc_pairwise([3.0] * 6, [0, 1, 0, 1, 1, 0]) == 0.5


class TestAccuracy:
    def test_cases(self):
        assert accuracy([0.9, 0.1], [1, 0]) == 1.0
        assert accuracy([0.1, 0.9], [1, 0]) == 0.0
        assert accuracy([0.6, 0.4, 0.6, 0.4], [1, 0, 0, 1]) == 0.5

    def test_boundary_is_positive(self):
        assert accuracy([0.5], [1]) == 1.0
        assert accuracy([0.0], [1], threshold=0.0) == 1.0


def tie_heavy(rng, n=None):
    n = n or int(rng.integers(2, 40))
    labels = rng.integers(0, 2, size=n)
    labels[0], labels[1] = 0, 1
    scores = rng.integers(0, int(rng.integers(1, 6)), size=n).astype(float)
    return scores, labels


def test_roc_matches_pairwise_oracle_1000_cases():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(1000):
        s, y = tie_heavy(rng)
        worst = max(worst, abs(roc(s, y).auc - auc_pairwise(s, y)))
    assert worst <= 1e-12


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 8), st.integers(0, 1)), min_size=2, max_size=50))
def test_trapezoid_equals_pairwise(pairs):
    s = [p[0] for p in pairs]
    y = [p[1] for p in pairs]
    if len(set(y)) < 2:
        return
    c = roc(s, y)
    assert abs(c.auc - loop_auc(s, y)) <= 1e-12
    # monotone staircase from (0,0) to (1,1)
    assert c.points()[0] == (0, 0) and c.points()[-1] == (1, 1)
    assert (np.diff(c.fpr) >= 0).all() and (np.diff(c.tpr) >= 0).all()


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(-50, 50), st.integers(0, 1)), min_size=2, max_size=40))
def test_invariant_under_increasing_transform(pairs):
    s = np.array([p[0] / 10 for p in pairs])
    y = [p[1] for p in pairs]
    if len(set(y)) < 2:
        return
    assert roc(np.exp(s) * 3 + 1, y).auc == pytest.approx(roc(s, y).auc, abs=1e-12)


def test_label_swap_without_cross_ties(rng):
    for _ in range(50):
        s = rng.permutation(30).astype(float)
        y = rng.integers(0, 2, 30)
        y[:2] = [0, 1]
        assert roc(s, 1 - y).auc == pytest.approx(1 - roc(s, y).auc, abs=1e-12)


def test_csv_round_trip(tmp_path):
    c = roc([0.9, 0.2, 0.7, 0.7, 0.1], [1, 0, 1, 0, 0])
    write_roc_csv(c, tmp_path / "roc.csv")
    assert (tmp_path / "roc.csv").read_text().splitlines()[0] == "threshold,fpr,tpr"
    back = read_roc_csv(tmp_path / "roc.csv")
    assert back.auc == pytest.approx(c.auc, abs=1e-15)
    assert np.array_equal(back.fpr, c.fpr) and np.isinf(back.thresholds[0])
