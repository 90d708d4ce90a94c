"""Mutual-information feature ranking (MIM and JMI) and top-k re-evaluation."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Sequence, TextIO

import numpy as np

from .evaluation import best_common_threshold, cross_validate

DEFAULT_BINS = 8
JOINT_CELL_CAP = 64


def discretize(values, bins: int = DEFAULT_BINS) -> np.ndarray:
    """Equal-frequency binning on linear-interpolated quantile edges."""
    if bins < 2:
        raise ValueError("bins must be >= 2")
    x = np.asarray(values, dtype=np.float64).ravel()
    if x.size == 0 or x.min() == x.max():
        return np.zeros(x.size, dtype=np.int64)
    edges = np.quantile(x, np.arange(1, bins) / bins)
    return np.searchsorted(edges, x, side="right").astype(np.int64)


def _codes(x) -> tuple[np.ndarray, int]:
    _, inv = np.unique(np.asarray(x), return_inverse=True)
    inv = inv.ravel()
    return inv, int(inv.max()) + 1 if inv.size else 0


def mutual_information(x, y) -> float:
    """Plug-in estimate of I(X;Y) in nats from paired symbol vectors."""
    x = np.asarray(x)
    y = np.asarray(y)
    if x.shape[0] != y.shape[0] or x.shape[0] == 0:
        raise ValueError("x and y must be non-empty and of equal length")
    xc, nx = _codes(x)
    yc, ny = _codes(y)
    n = xc.size
    joint = np.bincount(xc * ny + yc, minlength=nx * ny).reshape(nx, ny).astype(np.float64)
    px = joint.sum(axis=1)
    py = joint.sum(axis=0)
    nz = joint > 0
    # sum p(x,y) ln[p(x,y) / (p(x) p(y))] with counts: p = c / n
    expected = np.outer(px, py)[nz]
    mi = float(np.sum(joint[nz] * np.log(joint[nz] * n / expected)) / n)
    return max(mi, 0.0)


def entropy(x) -> float:
    xc, _ = _codes(x)
    p = np.bincount(xc) / xc.size
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)))


def joint_symbols(a: np.ndarray, b: np.ndarray, cap: int = JOINT_CELL_CAP) -> np.ndarray:
    """Pair two discrete vectors into one symbol, coarsening so the product of
    arities stays within ``cap`` cells."""
    a, na = _codes(a)
    b, nb = _codes(b)
    side = max(int(math.isqrt(cap)), 1)
    if na * nb > cap:
        if na > side:
            a = a * side // na
            na = side
        if nb > max(cap // na, 1):
            per = max(cap // na, 1)
            b = b * per // nb
            nb = per
    return a * nb + b


@dataclass(frozen=True)
class RankedFeatures:
    ordering: np.ndarray  # permutation of feature indices, best first
    scores: np.ndarray  # I(feature; label) per feature index
    method: str
    bins: int
    selection_scores: np.ndarray | None = None  # criterion value at each greedy pick

    def top(self, k: int) -> np.ndarray:
        return self.ordering[:k]


def _mim_order(relevance: np.ndarray) -> np.ndarray:
    idx = np.arange(relevance.size)
    return np.lexsort((idx, -relevance))


def rank_features(features, labels, method: str = "mim", bins: int = DEFAULT_BINS,
                  k: int | None = None) -> RankedFeatures:
    """Rank features by relevance to the labels.

    ``mim`` sorts by I(f; y). ``jmi`` starts from the most relevant feature and
    greedily adds the feature maximizing ``sum_s I((f, f_s); y)`` over the
    already selected ``s``; after ``k`` picks the rest follow in MIM order.
    Ties go to the lower feature index.
    """
    X = np.asarray(features, dtype=np.float64)
    d = X.shape[1]
    k = d if k is None else k
    if not 0 <= k <= d:
        raise ValueError(f"k must lie in [0, {d}]")
    method = method.lower()
    y = np.asarray(labels)
    D = np.column_stack([discretize(X[:, i], bins) for i in range(d)]) if d else X.astype(np.int64)
    relevance = np.array([mutual_information(D[:, i], y) for i in range(d)])
    mim = _mim_order(relevance)
    if method == "mim":
        return RankedFeatures(mim, relevance, "mim", bins, relevance[mim])
    if method != "jmi":
        raise ValueError(f"unknown method {method!r}")

    selected: list[int] = []
    picked_scores: list[float] = []
    acc = np.zeros(d)
    remaining = np.ones(d, dtype=bool)
    for step in range(k):
        if step == 0:
            best = int(mim[0])
            picked_scores.append(float(relevance[best]))
        else:
            last = selected[-1]
            for i in np.flatnonzero(remaining):
                acc[i] += mutual_information(joint_symbols(D[:, i], D[:, last]), y)
            cand = np.flatnonzero(remaining)
            best = int(cand[np.argmax(acc[cand])])  # argmax returns the first, i.e. lowest index
            picked_scores.append(float(acc[best]))
        selected.append(best)
        remaining[best] = False
    rest = [i for i in mim if remaining[i]]
    ordering = np.array(selected + rest, dtype=np.int64)
    return RankedFeatures(ordering, relevance, "jmi", bins, np.array(picked_scores))


@dataclass(frozen=True)
class TopKRow:
    k: int
    threshold: float
    tpr: float
    fpr: float | None


def evaluate_top_k(features, labels, ranked: RankedFeatures | Sequence[int], k_values: Sequence[int],
                   *, fpr_cap: float = 0.01, folds: int = 10, seed: int = 0,
                   **svm_params) -> list[TopKRow]:
    """Cross-validate on the first ``k`` ranked features for each ``k``."""
    X = np.asarray(features, dtype=np.float64)
    ordering = ranked.ordering if isinstance(ranked, RankedFeatures) else np.asarray(ranked)
    rows = []
    for k in k_values:
        if not 1 <= k <= min(X.shape[1], len(ordering)):
            raise ValueError(f"k={k} outside [1, {min(X.shape[1], len(ordering))}]")
        cols = np.asarray(ordering[:k])
        matrix = cross_validate(X[:, cols], labels, folds, seed=seed, **svm_params)
        thr, report = best_common_threshold(matrix, fpr_cap)
        rows.append(TopKRow(int(k), thr, report.tpr, report.fpr))
    return rows


def write_top_k_table(stream: TextIO, rows: Sequence[TopKRow]) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["k", "threshold", "tpr", "fpr"])
    for row in rows:
        writer.writerow([row.k, repr(row.threshold), repr(row.tpr),
                         "NotApplicable" if row.fpr is None else repr(row.fpr)])


def write_ranking(stream: TextIO, ranked: RankedFeatures, k: int | None = None,
                  names: Sequence[str] | None = None) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["rank", "feature", "name", "relevance"])
    for r, i in enumerate(ranked.ordering[: k if k is not None else len(ranked.ordering)]):
        writer.writerow([r, int(i), names[i] if names is not None else "", repr(float(ranked.scores[i]))])


def read_ranking(stream: TextIO) -> np.ndarray:
    reader = csv.DictReader(stream)
    return np.array([int(row["feature"]) for row in reader], dtype=np.int64)
