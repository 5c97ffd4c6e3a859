"""External clustering indices computed from a contingency table."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .exceptions import ParameterError


@dataclass(frozen=True)
class ContingencyTable:
    counts: np.ndarray  # rows: predicted clusters, columns: true classes

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    @classmethod
    def from_labels(cls, pred, truth):
        pred = np.asarray(pred).ravel()
        truth = np.asarray(truth).ravel()
        if pred.shape != truth.shape:
            raise ParameterError(f"label vectors differ in length: {pred.size} vs {truth.size}")
        if pred.size < 1:
            raise ParameterError("label vectors are empty")
        _, p = np.unique(pred, return_inverse=True)
        _, t = np.unique(truth, return_inverse=True)
        counts = np.zeros((p.max() + 1, t.max() + 1), dtype=np.int64)
        np.add.at(counts, (p, t), 1)
        return cls(counts)


def _pairs(x):
    x = np.asarray(x, dtype=float)
    return x * (x - 1) / 2


def _same_partition(table):
    # identical up to relabeling iff every row and every column has one nonzero cell
    nz = table.counts > 0
    return bool(np.all(nz.sum(axis=0) == 1) and np.all(nz.sum(axis=1) == 1))


def _table(pred, truth, min_n=2):
    table = ContingencyTable.from_labels(pred, truth)
    if table.n < min_n:
        raise ParameterError(f"need at least {min_n} points, got {table.n}")
    return table


def fmi(pred, truth) -> float:
    """Fowlkes-Mallows index ``TP / sqrt((TP + FP)(TP + FN))`` over point pairs."""
    table = _table(pred, truth)
    tp = _pairs(table.counts).sum()
    pred_pairs = _pairs(table.counts.sum(axis=1)).sum()
    true_pairs = _pairs(table.counts.sum(axis=0)).sum()
    if pred_pairs == 0 or true_pairs == 0:
        return 0.0
    return float(tp / np.sqrt(pred_pairs * true_pairs))


def ari(pred, truth) -> float:
    """Adjusted Rand index (Hubert-Arabie)."""
    table = _table(pred, truth)
    index = _pairs(table.counts).sum()
    a = _pairs(table.counts.sum(axis=1)).sum()
    b = _pairs(table.counts.sum(axis=0)).sum()
    expected = a * b / _pairs(table.n)
    max_index = (a + b) / 2
    denom = max_index - expected
    if denom == 0:
        return 1.0 if _same_partition(table) else 0.0
    return float((index - expected) / denom)


def _entropy(counts, n):
    p = counts[counts > 0] / n
    return float(-np.sum(p * np.log(p)))


def nmi(pred, truth) -> float:
    """Mutual information normalized by the geometric mean of the entropies (nats)."""
    table = _table(pred, truth)
    n = table.n
    c = table.counts.astype(float)
    h_pred = _entropy(c.sum(axis=1), n)
    h_true = _entropy(c.sum(axis=0), n)
    if h_pred == 0 or h_true == 0:
        return 1.0 if _same_partition(table) else 0.0
    outer = np.outer(c.sum(axis=1), c.sum(axis=0))
    nz = c > 0
    mi = np.sum(c[nz] / n * np.log(c[nz] * n / outer[nz]))
    return float(np.clip(mi / np.sqrt(h_pred * h_true), 0.0, 1.0))


def acc(pred, truth) -> float:
    """Best accuracy over one-to-one maps from predicted clusters to classes."""
    table = _table(pred, truth, min_n=1)
    counts = table.counts
    size = max(counts.shape)
    square = np.zeros((size, size), dtype=np.int64)
    square[: counts.shape[0], : counts.shape[1]] = counts
    rows, cols = linear_sum_assignment(square, maximize=True)
    return float(square[rows, cols].sum() / table.n)


METRICS = {"fmi": fmi, "ari": ari, "nmi": nmi, "acc": acc}


def evaluate(pred, truth, names=("fmi", "ari", "nmi", "acc")) -> dict:
    """Dictionary of the requested indices."""
    unknown = set(names) - set(METRICS)
    if unknown:
        raise ParameterError(f"unknown metrics {sorted(unknown)}")
    return {name: METRICS[name](pred, truth) for name in names}
