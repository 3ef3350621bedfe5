"""Exact AUC and average precision for binary scored labels.

AUC follows the Mann-Whitney definition (ties count half); AP walks the
precision-recall curve over a stable descending-score ranking. Both depend
only on score ranks, so any strictly monotone transform of the scores
leaves them unchanged.
"""

from __future__ import annotations

import numpy as np


class UndefinedMetricError(ValueError):
    """Metric undefined for the given label composition."""


def _check(scores, labels):
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.shape != y.shape or s.ndim != 1:
        raise ValueError(f"scores {s.shape} and labels {y.shape} must be "
                         "parallel 1-D arrays")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be 0 or 1")
    return s, y.astype(np.intp)


def auc(scores, labels) -> float:
    """Fraction of (positive, negative) pairs ranked correctly, ties at 0.5."""
    s, y = _check(scores, labels)
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError(
            f"AUC needs both classes (got {n_pos} positives, {n_neg} negatives)")
    order = np.argsort(s, kind="stable")
    ranks = np.empty(len(s), dtype=np.float64)
    # average ranks within tie groups (1-based midranks)
    sorted_s = s[order]
    i = 0
    while i < len(s):
        j = i
        while j + 1 < len(s) and sorted_s[j + 1] == sorted_s[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    rank_sum = ranks[y == 1].sum()
    u = rank_sum - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def average_precision(scores, labels) -> float:
    """Sum over ranks of (recall step) * precision, descending stable order."""
    s, y = _check(scores, labels)
    n_pos = int(y.sum())
    if n_pos == 0:
        raise UndefinedMetricError("AP needs at least one positive")
    # stable sort by descending score: negate via mergesort on -s keeps
    # input order among ties
    order = np.argsort(-s, kind="stable")
    hits = 0
    total = 0.0
    for rank, idx in enumerate(order, start=1):
        if y[idx] == 1:
            hits += 1
            total += hits / rank
    return float(total / n_pos)
