"""Clustering evaluation: best-map accuracy, macro P/R/F, NMI, ARI.

Accuracy, precision, recall and F-score are classification metrics, so the
predicted labels are first remapped through the assignment that maximizes
the matched count (Kuhn-Munkres on the confusion matrix). NMI normalizes
mutual information by the arithmetic mean of the two entropies (natural
log); ARI is the pair-counting Rand index adjusted for chance. All metrics
are invariant to relabeling either side.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

__all__ = [
    "MetricsReport",
    "hungarian_match",
    "classification_metrics",
    "nmi",
    "ari",
    "evaluate_clustering",
]


def _as_labels(y, name):
    y = np.asarray(y)
    if y.ndim != 1:
        raise ValueError(f"{name} must be a 1-D label array")
    if y.size == 0:
        raise ValueError(f"{name} is empty")
    if not np.issubdtype(y.dtype, np.integer):
        rounded = np.rint(y)
        if not np.array_equal(rounded, y):
            raise ValueError(f"{name} must hold integer labels")
        y = rounded.astype(np.intp)
    if y.min() < 0:
        raise ValueError(f"{name} must be 0-based")
    return y.astype(np.intp)


def _check_pair(y_true, y_pred):
    y_true = _as_labels(y_true, "y_true")
    y_pred = _as_labels(y_pred, "y_pred")
    if y_true.shape != y_pred.shape:
        raise ValueError(
            f"length mismatch: {y_true.size} true labels vs {y_pred.size} predicted"
        )
    return y_true, y_pred


def confusion_counts(y_pred, y_true):
    """Counts[i, j] = number of samples with predicted label i and true label j."""
    k_pred = int(y_pred.max()) + 1
    k_true = int(y_true.max()) + 1
    counts = np.zeros((k_pred, k_true), dtype=np.int64)
    np.add.at(counts, (y_pred, y_true), 1)
    return counts


def _max_trace(mat):
    if mat.size == 0:
        return 0
    rows, cols = linear_sum_assignment(-mat)
    return int(mat[rows, cols].sum())


def hungarian_match(confusion):
    """Assignment of predicted to true labels maximizing the matched count.

    ``confusion`` holds nonnegative integer counts; rectangular input is
    padded with zeros to square. Among all maximizing assignments the
    lexicographically smallest one is returned, scanning predicted-label
    indices from lowest. Returns a permutation array ``perm`` with
    ``perm[i]`` the (padded) true label assigned to predicted label ``i``.
    """
    confusion = np.asarray(confusion)
    if confusion.ndim != 2:
        raise ValueError("confusion must be a matrix of counts")
    if confusion.size and confusion.min() < 0:
        raise ValueError("confusion counts must be nonnegative")
    if not np.array_equal(confusion, np.rint(confusion)):
        raise ValueError("confusion counts must be integers")
    n = max(confusion.shape)
    padded = np.zeros((n, n), dtype=np.int64)
    padded[: confusion.shape[0], : confusion.shape[1]] = confusion
    best_total = _max_trace(padded)
    perm = np.full(n, -1, dtype=np.intp)
    avail = list(range(n))
    fixed = 0
    for i in range(n):
        rest_rows = np.arange(i + 1, n)
        for j in avail:
            others = [c for c in avail if c != j]
            tail = _max_trace(padded[np.ix_(rest_rows, others)])
            if fixed + padded[i, j] + tail == best_total:
                perm[i] = j
                fixed += padded[i, j]
                avail.remove(j)
                break
    return perm


def classification_metrics(y_true, y_pred):
    """Best-map accuracy plus macro-averaged precision, recall and F-score.

    Per-class values are one-vs-rest on the remapped predictions, averaged
    over the classes present in ``y_true``; a class with no predicted
    positives contributes precision 0, and F is the per-class harmonic mean.
    """
    y_true, y_pred = _check_pair(y_true, y_pred)
    counts = confusion_counts(y_pred, y_true)
    perm = hungarian_match(counts)
    mapped = perm[y_pred]
    n = y_true.size
    acc = float(np.sum(mapped == y_true)) / n
    precisions, recalls, fscores = [], [], []
    for c in np.unique(y_true):
        tp = float(np.sum((mapped == c) & (y_true == c)))
        pp = float(np.sum(mapped == c))
        ap = float(np.sum(y_true == c))
        p = tp / pp if pp > 0 else 0.0
        r = tp / ap
        f = 2.0 * p * r / (p + r) if p + r > 0 else 0.0
        precisions.append(p)
        recalls.append(r)
        fscores.append(f)
    return acc, float(np.mean(precisions)), float(np.mean(recalls)), float(np.mean(fscores))


def nmi(y_true, y_pred):
    """Mutual information normalized by the mean entropy, in [0, 1].

    Natural logarithms; identical partitions score exactly 1.0, including
    the single-cluster-versus-itself case (0/0 is defined as 1).
    """
    y_true, y_pred = _check_pair(y_true, y_pred)
    counts = confusion_counts(y_pred, y_true).astype(np.float64)
    n = float(y_true.size)
    a = counts.sum(axis=1)  # predicted-cluster sizes
    b = counts.sum(axis=0)  # true-cluster sizes
    nz = counts > 0
    joint = counts[nz]
    outer = (a[:, None] * b[None, :])[nz]
    mi = float(np.sum((joint / n) * np.log(n * joint / outer)))
    h_pred = float(np.sum((a[a > 0] / n) * np.log(n / a[a > 0])))
    h_true = float(np.sum((b[b > 0] / n) * np.log(n / b[b > 0])))
    denom = (h_pred + h_true) / 2.0
    if denom == 0.0:
        return 1.0
    return mi / denom


def _comb2(x):
    return x * (x - 1.0) / 2.0


def ari(y_true, y_pred):
    """Adjusted Rand index from the contingency table, in [-1, 1].

    Pairs in agreement adjusted for chance; identical partitions (up to
    relabeling) score exactly 1.0, and degenerate 0/0 is defined as 1.0.
    """
    y_true, y_pred = _check_pair(y_true, y_pred)
    if y_true.size < 2:
        raise ValueError("ari needs at least two samples")
    counts = confusion_counts(y_pred, y_true).astype(np.float64)
    n = float(y_true.size)
    index = float(_comb2(counts).sum())
    sum_a = float(_comb2(counts.sum(axis=1)).sum())
    sum_b = float(_comb2(counts.sum(axis=0)).sum())
    expected = sum_a * sum_b / _comb2(n)
    max_index = (sum_a + sum_b) / 2.0
    if max_index == expected:
        return 1.0
    return (index - expected) / (max_index - expected)


@dataclass
class MetricsReport:
    """The six-metric report plus run metadata."""

    acc: float
    nmi: float
    ari: float
    precision: float
    recall: float
    f_score: float
    n_samples: int
    k_true: int
    k_pred: int
    matching: list

    METRIC_FIELDS = ("acc", "nmi", "ari", "precision", "recall", "f_score")

    def to_text(self):
        lines = [f"{name}={getattr(self, name):.6f}" for name in self.METRIC_FIELDS]
        lines.append(f"n_samples={self.n_samples}")
        lines.append(f"k_true={self.k_true}")
        lines.append(f"k_pred={self.k_pred}")
        lines.append("matching=" + ",".join(str(int(i)) for i in self.matching))
        return "\n".join(lines) + "\n"


def evaluate_clustering(y_true, y_pred):
    """Compute every metric at once and return a :class:`MetricsReport`."""
    y_true, y_pred = _check_pair(y_true, y_pred)
    counts = confusion_counts(y_pred, y_true)
    perm = hungarian_match(counts)
    acc, precision, recall, f_score = classification_metrics(y_true, y_pred)
    return MetricsReport(
        acc=acc,
        nmi=nmi(y_true, y_pred),
        ari=ari(y_true, y_pred),
        precision=precision,
        recall=recall,
        f_score=f_score,
        n_samples=int(y_true.size),
        k_true=int(y_true.max()) + 1,
        k_pred=int(y_pred.max()) + 1,
        matching=[int(i) for i in perm],
    )
