"""Exact ranking metrics against brute-force oracles."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tsfuse.metrics import UndefinedMetricError, auc, average_precision


def brute_force_auc(scores, labels):
    """O(P*N) pair count: wins 1, ties 0.5."""
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    total = 0.0
    for p in pos:
        for n in neg:
            if p > n:
                total += 1.0
            elif p == n:
                total += 0.5
    return total / (len(pos) * len(neg))


def brute_force_ap(scores, labels):
    """Rank walk over stable descending order."""
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    hits = 0
    total = 0.0
    for rank, i in enumerate(order, start=1):
        if labels[i] == 1:
            hits += 1
            total += hits / rank
    return total / sum(labels)


# -- documented examples -------------------------------------------------------


def test_auc_perfect_separation():
    assert auc([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]) == 1.0


def test_auc_documented_example():
    assert auc([0.9, 0.8, 0.7, 0.6], [1, 0, 1, 0]) == 0.75


def test_auc_all_ties():
    assert auc([0.5] * 6, [1, 0, 1, 0, 1, 0]) == 0.5


def test_ap_perfect_ranking():
    assert average_precision([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]) == 1.0


def test_ap_documented_example():
    got = average_precision([0.9, 0.8, 0.7, 0.6], [1, 0, 1, 0])
    assert abs(got - 5.0 / 6.0) <= 1e-15


def test_ap_single_positive_last():
    n = 8
    scores = list(np.linspace(1.0, 0.1, n))
    labels = [0] * (n - 1) + [1]
    assert abs(average_precision(scores, labels) - 1.0 / n) <= 1e-15


# -- errors ----------------------------------------------------------------------


def test_auc_single_class_error():
    with pytest.raises(UndefinedMetricError):
        auc([0.1, 0.2], [1, 1])
    with pytest.raises(UndefinedMetricError):
        auc([0.1, 0.2], [0, 0])


def test_ap_no_positive_error():
    with pytest.raises(UndefinedMetricError):
        average_precision([0.1, 0.2], [0, 0])


def test_bad_labels_rejected():
    with pytest.raises(ValueError):
        auc([0.1, 0.2], [0, 2])
    with pytest.raises(ValueError):
        auc([0.1], [0, 1])


# -- oracle equality (ties included) ---------------------------------------------


def test_oracle_equality_random_instances():
    rng = np.random.default_rng(123)
    for _ in range(300):
        n = int(rng.integers(2, 51))
        # coarse grid forces frequent ties
        scores = rng.integers(0, 6, n).astype(float) / 5.0
        labels = rng.integers(0, 2, n)
        if labels.sum() in (0, n):
            labels[0] = 1 - labels[0]
        assert auc(scores, labels) == brute_force_auc(scores, labels)
        assert average_precision(scores, labels) == brute_force_ap(scores, labels)


@settings(max_examples=100, deadline=None)
@given(data=st.lists(
    st.tuples(st.floats(min_value=-10, max_value=10, allow_nan=False),
              st.sampled_from([0, 1])),
    min_size=2, max_size=30))
def test_monotone_transform_invariance(data):
    scores = [s for s, _ in data]
    labels = [y for _, y in data]
    if sum(labels) in (0, len(labels)):
        labels[0] = 1 - labels[0]
    # doubling is strictly increasing and exact in binary floating point,
    # so it preserves the tie structure exactly
    transformed = [2.0 * s for s in scores]
    assert auc(scores, labels) == auc(transformed, labels)
    assert average_precision(scores, labels) == \
        average_precision(transformed, labels)
