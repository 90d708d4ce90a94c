"""Per-class cross-validation, score matrices and threshold selection.

Every class gets its own one-class model per fold. All test samples of a
fold, whatever their class, are scored against every class model of that
fold, so each sample ends up with one score per class.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass
from typing import Mapping, Sequence, TextIO

import numpy as np
from scipy import stats

from .errors import TooFewSamples
from .ocsvm import DEFAULT_NU, DEFAULT_TOL, OneClassModel, Verdict, decide, score, train
from .rng import SplitMix64

NOT_APPLICABLE = "NotApplicable"


def kfold_split(sample_count_per_class: Mapping[str, int] | Sequence[int], k: int,
                seed: int) -> dict:
    """Shuffled k-fold splits, independently per class.

    Returns ``{class: [(train_idx, test_idx), ...]}`` with indices local to the
    class. Class ``c`` (by position) is shuffled with the stream
    ``SplitMix64(seed).spawn(c)``.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    if isinstance(sample_count_per_class, Mapping):
        items = list(sample_count_per_class.items())
    else:
        items = list(enumerate(sample_count_per_class))
    root = SplitMix64(seed)
    out = {}
    for position, (label, n) in enumerate(items):
        if n < k:
            raise TooFewSamples(f"class {label!r} has {n} samples, fewer than k={k}")
        perm = root.spawn(position).permutation(n)
        folds = []
        for test in np.array_split(perm, k):
            test = np.sort(test)
            train_idx = np.setdiff1d(np.arange(n), test)
            folds.append((train_idx, test))
        out[label] = folds
    return out


@dataclass(frozen=True, eq=False)
class ScoreMatrix:
    sample_ids: tuple[str, ...]
    true_labels: tuple[str, ...]
    class_labels: tuple[str, ...]
    scores: np.ndarray  # (samples, classes)
    folds: np.ndarray  # fold in which each sample was tested

    @property
    def shape(self) -> tuple[int, int]:
        return self.scores.shape

    def positive_mask(self) -> np.ndarray:
        truth = np.asarray(self.true_labels, dtype=object)[:, None]
        return truth == np.asarray(self.class_labels, dtype=object)[None, :]

    def column(self, class_label: str) -> tuple[np.ndarray, np.ndarray]:
        """Own-class and other-class scores of one model column."""
        j = self.class_labels.index(class_label)
        pos = self.positive_mask()[:, j]
        col = self.scores[:, j]
        return col[pos], col[~pos]

    def restrict(self, class_label: str) -> "ScoreMatrix":
        j = self.class_labels.index(class_label)
        return ScoreMatrix(self.sample_ids, self.true_labels, (class_label,),
                           self.scores[:, j:j + 1], self.folds)


def cross_validate(features, labels: Sequence[str], k: int = 10, *, nu: float = DEFAULT_NU,
                   gamma: float | None = None, tol: float = DEFAULT_TOL, seed: int = 0,
                   sample_ids: Sequence[str] | None = None,
                   max_iter: int | None = None) -> ScoreMatrix:
    X = np.asarray(features, dtype=np.float64)
    labels = [str(y) for y in labels]
    if X.shape[0] != len(labels):
        raise ValueError("features and labels differ in length")
    if sample_ids is None:
        sample_ids = [str(i) for i in range(len(labels))]
    classes = sorted(set(labels))
    members = {c: np.array([i for i, y in enumerate(labels) if y == c]) for c in classes}
    splits = kfold_split({c: len(members[c]) for c in classes}, k, seed)

    scores = np.full((len(labels), len(classes)), np.nan)
    fold_of = np.full(len(labels), -1, dtype=np.int64)
    for f in range(k):
        test_rows = np.sort(np.concatenate([members[c][splits[c][f][1]] for c in classes]))
        fold_of[test_rows] = f
        for j, c in enumerate(classes):
            train_rows = members[c][splits[c][f][0]]
            if np.intersect1d(train_rows, test_rows).size:
                raise AssertionError(f"fold {f}: class {c!r} training rows overlap the test set")
            model = train(X[train_rows], nu=nu, gamma=gamma, tol=tol, max_iter=max_iter,
                          class_label=c)
            scores[test_rows, j] = model.decision_function(X[test_rows])
    scores.flags.writeable = False
    return ScoreMatrix(tuple(sample_ids), tuple(labels), tuple(classes), scores, fold_of)


def loo_scores(features, *, nu: float = DEFAULT_NU, gamma: float | None = None,
               tol: float = DEFAULT_TOL) -> np.ndarray:
    """Score of each training row under a model fitted on all the other rows."""
    X = np.asarray(features, dtype=np.float64)
    if X.shape[0] < 3:
        raise TooFewSamples(f"leave-one-out needs >= 3 samples, got {X.shape[0]}")
    out = np.empty(X.shape[0])
    for i in range(X.shape[0]):
        model = train(np.delete(X, i, axis=0), nu=nu, gamma=gamma, tol=tol)
        out[i] = model.decision_function(X[i:i + 1])[0]
    return out


def calibrate_threshold(features, *, nu: float = DEFAULT_NU, gamma: float | None = None,
                        tol: float = DEFAULT_TOL, quantile: float | None = None) -> float:
    """Acceptance threshold from held-out scores of the training rows.

    The ``quantile`` (default ``nu``) of the leave-one-out scores: roughly that
    fraction of fresh genuine recordings is expected to fall below it.
    """
    q = nu if quantile is None else quantile
    if not 0 <= q <= 1:
        raise ValueError("quantile must lie in [0, 1]")
    return float(np.quantile(loo_scores(features, nu=nu, gamma=gamma, tol=tol), q))


@dataclass
class LatencyReport:
    mean_ms: float
    ci_low_ms: float
    ci_high_ms: float
    n: int
    degenerate: bool = False


@dataclass
class EvaluationReport:
    tpr: float
    fpr: float | None  # None when there are no negatives
    threshold: float | dict
    positives: int
    negatives: int
    true_positives: int
    false_positives: int
    fold_count: int | None = None
    seed: int | None = None
    timing: LatencyReport | None = None

    def summary(self) -> dict[str, str]:
        thr = self.threshold
        out = {
            "tpr": repr(self.tpr),
            "fpr": NOT_APPLICABLE if self.fpr is None else repr(self.fpr),
            "threshold": "per-class" if isinstance(thr, dict) else repr(float(thr)),
            "k": "" if self.fold_count is None else str(self.fold_count),
            "seed": "" if self.seed is None else str(self.seed),
        }
        if self.timing is not None:
            out.update(mean_ms=repr(self.timing.mean_ms), ci_low_ms=repr(self.timing.ci_low_ms),
                       ci_high_ms=repr(self.timing.ci_high_ms))
        return out


def _threshold_row(matrix: ScoreMatrix, threshold) -> np.ndarray:
    if isinstance(threshold, Mapping):
        return np.array([float(threshold[c]) for c in matrix.class_labels])
    return np.full(len(matrix.class_labels), float(threshold))


def tpr_fpr(matrix: ScoreMatrix, threshold: float | Mapping[str, float]) -> EvaluationReport:
    if matrix.scores.size == 0:
        raise ValueError("score matrix is empty")
    pos = matrix.positive_mask()
    accepted = matrix.scores >= _threshold_row(matrix, threshold)[None, :]
    P = int(pos.sum())
    N = int((~pos).sum())
    tp = int((accepted & pos).sum())
    fp = int((accepted & ~pos).sum())
    return EvaluationReport(
        tpr=tp / P if P else math.nan,
        fpr=fp / N if N else None,
        threshold=dict(threshold) if isinstance(threshold, Mapping) else float(threshold),
        positives=P,
        negatives=N,
        true_positives=tp,
        false_positives=fp,
    )


def threshold_candidates(values: np.ndarray) -> np.ndarray:
    """Distinct scores, midpoints between neighbours, and one value above the max."""
    u = np.unique(values)
    mids = 0.5 * (u[:-1] + u[1:])
    return np.unique(np.concatenate([u, mids, [np.nextafter(u[-1], np.inf)]]))


def sweep(pos: np.ndarray, neg: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """TPR and FPR (NaN without negatives) at every candidate threshold."""
    cand = threshold_candidates(np.concatenate([pos, neg]))
    ps = np.sort(pos)
    ns = np.sort(neg)
    tpr = (len(ps) - np.searchsorted(ps, cand, side="left")) / len(ps)
    if len(ns):
        fpr = (len(ns) - np.searchsorted(ns, cand, side="left")) / len(ns)
    else:
        fpr = np.full(len(cand), np.nan)
    return cand, tpr, fpr


def _select(pos: np.ndarray, neg: np.ndarray, fpr_cap: float) -> float:
    if len(pos) == 0:
        raise ValueError("no positive entries to threshold")
    cand, tpr, fpr = sweep(pos, neg)
    feasible = np.isnan(fpr) | (fpr <= fpr_cap)
    # The candidate above every score always has FPR 0, so feasible is non-empty.
    best = tpr[feasible].max()
    return float(cand[feasible & (tpr == best)].max())


def best_common_threshold(matrix: ScoreMatrix, fpr_cap: float) -> tuple[float, EvaluationReport]:
    """Threshold shared by all classes that maximizes TPR with FPR <= fpr_cap.

    Ties go to the higher threshold.
    """
    pos = matrix.positive_mask()
    thr = _select(matrix.scores[pos], matrix.scores[~pos], fpr_cap)
    return thr, tpr_fpr(matrix, thr)


def per_class_threshold(matrix: ScoreMatrix, class_label: str, fpr_cap: float) -> float:
    own, other = matrix.column(class_label)
    return _select(own, other, fpr_cap)


def per_class_thresholds(matrix: ScoreMatrix, fpr_cap: float) -> dict[str, float]:
    return {c: per_class_threshold(matrix, c, fpr_cap) for c in matrix.class_labels}


def measure_decision_latency(models: Sequence[OneClassModel], probes, threshold: float = 0.0,
                             warmup: int = 5, confidence: float = 0.95) -> LatencyReport:
    """Wall-clock time of one full decision: score every model, compare, OR."""
    probes = [np.asarray(p, dtype=np.float64) for p in probes]
    if len(probes) < 30:
        raise ValueError(f"need >= 30 probes, got {len(probes)}")
    if not models:
        return LatencyReport(0.0, 0.0, 0.0, len(probes), degenerate=True)

    def decision(x):
        return any(decide(score(m, x), threshold) is Verdict.AUTHORIZED for m in models)

    for i in range(warmup):
        decision(probes[i % len(probes)])
    elapsed = np.empty(len(probes))
    for i, x in enumerate(probes):
        t0 = time.perf_counter_ns()
        decision(x)
        elapsed[i] = (time.perf_counter_ns() - t0) / 1e6
    n = len(elapsed)
    mean = float(elapsed.mean())
    half = float(stats.t.ppf(0.5 + confidence / 2, n - 1) * elapsed.std(ddof=1) / math.sqrt(n))
    return LatencyReport(mean, mean - half, mean + half, n)


def write_score_matrix(stream: TextIO, matrix: ScoreMatrix) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["sample_id", "true_label", *matrix.class_labels])
    for sid, label, row in zip(matrix.sample_ids, matrix.true_labels, matrix.scores.tolist()):
        writer.writerow([sid, label, *(repr(v) for v in row)])


def format_summary(values: Mapping[str, str]) -> str:
    return "".join(f"{k}={v}\n" for k, v in values.items())
