"""Confusion-matrix metrics, cross-validation aggregation, and the
Wilcoxon signed-rank test.

Precision/recall/F are computed one-vs-rest per class and macro-averaged
(unweighted class mean), for binary data as well. A class with a zero
denominator contributes 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .classifiers import ClassifierSpec, predict, train
from .data import Dataset, FoldPlan, project
from .errors import ValidationError

__all__ = [
    "ConfusionMatrix",
    "MetricReport",
    "CvSummary",
    "WilcoxonResult",
    "confusion",
    "metrics",
    "cross_validate",
    "score_split",
    "wilcoxon_signed_rank",
]

METRIC_NAMES = ("accuracy", "macro_precision", "macro_recall", "macro_f_score")
EXACT_LIMIT = 25


@dataclass(frozen=True)
class ConfusionMatrix:
    counts: np.ndarray  # (C, C), rows = actual, cols = predicted

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class MetricReport:
    accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f_score: float

    def as_dict(self) -> dict:
        return {name: getattr(self, name) for name in METRIC_NAMES}


@dataclass(frozen=True)
class CvSummary:
    fold_results: tuple          # MetricReport per scored fold
    means: dict                  # metric name -> mean over folds
    stds: dict                   # metric name -> population std
    skipped_folds: tuple = ()    # (round, fold) pairs lacking a class in train

    def as_dict(self) -> dict:
        return {
            "means": self.means,
            "stds": self.stds,
            "fold_results": [r.as_dict() for r in self.fold_results],
            "skipped_folds": [list(p) for p in self.skipped_folds],
        }

    @staticmethod
    def from_dict(d: dict) -> "CvSummary":
        return CvSummary(
            fold_results=tuple(MetricReport(**r) for r in d["fold_results"]),
            means=d["means"],
            stds=d["stds"],
            skipped_folds=tuple(tuple(p) for p in d["skipped_folds"]),
        )


@dataclass(frozen=True)
class WilcoxonResult:
    w_statistic: float
    p_value: float
    n_effective: int
    method: str       # "exact" or "normal_approx"
    zero_policy: str  # "discard" or "pratt"
    alpha: float
    significant: bool
    degenerate: bool = False


def confusion(actual, predicted, n_classes: int) -> ConfusionMatrix:
    actual = np.asarray(actual, dtype=np.int64)
    predicted = np.asarray(predicted, dtype=np.int64)
    if actual.shape != predicted.shape:
        raise ValidationError("actual and predicted lengths differ")
    if actual.size and (max(actual.max(), predicted.max()) >= n_classes
                        or min(actual.min(), predicted.min()) < 0):
        raise ValidationError("class index out of range")
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(counts, (actual, predicted), 1)
    return ConfusionMatrix(counts)


def metrics(cm: ConfusionMatrix) -> MetricReport:
    counts = cm.counts
    total = counts.sum()
    if total == 0:
        raise ValidationError("empty confusion matrix")
    accuracy = float(np.trace(counts) / total)
    precisions, recalls, f_scores = [], [], []
    for k in range(counts.shape[0]):
        tp = counts[k, k]
        fp = counts[:, k].sum() - tp
        fn = counts[k, :].sum() - tp
        p = tp / (tp + fp) if tp + fp > 0 else 0.0
        r = tp / (tp + fn) if tp + fn > 0 else 0.0
        f = 2.0 * p * r / (p + r) if p + r > 0 else 0.0
        precisions.append(p)
        recalls.append(r)
        f_scores.append(f)
    return MetricReport(
        accuracy=accuracy,
        macro_precision=float(np.mean(precisions)),
        macro_recall=float(np.mean(recalls)),
        macro_f_score=float(np.mean(f_scores)),
    )


def score_split(train_ds: Dataset, test_ds: Dataset,
                spec: ClassifierSpec) -> MetricReport:
    """Train on one split, score the other."""
    model = train(spec, train_ds)
    predicted = predict(model, test_ds)
    return metrics(confusion(test_ds.labels, predicted, train_ds.n_classes))


def _slice_rows(ds: Dataset, rows: np.ndarray, require_all_classes: bool):
    labels = ds.labels[rows]
    if require_all_classes and np.unique(labels).size != ds.n_classes:
        return None
    return Dataset(ds.values[rows], labels, ds.gene_ids, ds.class_names, ds.name)


def cross_validate(gene_subset, ds: Dataset, spec: ClassifierSpec,
                   plan: FoldPlan) -> CvSummary:
    """Repeated stratified CV of one classifier on a projected gene subset.

    Folds whose training partition misses a class are skipped and
    recorded, never silently dropped.
    """
    sub = project(ds, gene_subset)
    results, skipped = [], []
    for r, f, train_idx, test_idx in plan.splits():
        train_ds = _slice_rows(sub, train_idx, require_all_classes=True)
        if train_ds is None:
            skipped.append((r, f))
            continue
        # the held-out fold may legitimately miss classes, so score it as
        # an unlabeled query set rather than a full Dataset
        model = train(spec, train_ds)
        query = Dataset(sub.values[test_idx],
                        np.zeros(test_idx.size, dtype=np.int64),
                        sub.gene_ids, ("query",), sub.name)
        predicted = predict(model, query)
        results.append(metrics(confusion(sub.labels[test_idx], predicted,
                                         sub.n_classes)))
    if not results:
        raise ValidationError("every fold was skipped; cannot summarize")
    means = {name: float(np.mean([getattr(r, name) for r in results]))
             for name in METRIC_NAMES}
    stds = {name: float(np.std([getattr(r, name) for r in results]))
            for name in METRIC_NAMES}
    return CvSummary(fold_results=tuple(results), means=means, stds=stds,
                     skipped_folds=tuple(skipped))


def _midranks(values: np.ndarray) -> np.ndarray:
    """Average ranks (1-based) with ties sharing their midrank."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.size)
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def _exact_two_sided_p(ranks: np.ndarray, w: float) -> float:
    """Two-sided tail probability of W+ by enumerating the 2^n equally
    likely sign assignments over the given (mid)ranks.

    Counting runs over the distribution of 2*W+ (integral since midranks
    are multiples of 0.5), which tallies the same assignments as direct
    enumeration.
    """
    doubled = np.rint(2.0 * ranks).astype(np.int64)
    total = int(doubled.sum())
    counts = np.zeros(total + 1, dtype=np.float64)
    counts[0] = 1.0
    for r in doubled:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[:counts.size - r]
        counts = counts + shifted
    n_assignments = 2.0 ** len(doubled)
    w2 = int(math.floor(2.0 * w + 1e-9))
    lower = counts[:w2 + 1].sum()
    upper = counts[total - w2:].sum() if w2 <= total else n_assignments
    return min(1.0, (lower + upper) / n_assignments)


def wilcoxon_signed_rank(x, y, zero_policy: str = "discard",
                         alpha: float = 0.05) -> WilcoxonResult:
    """Paired two-sided Wilcoxon signed-rank test.

    W = min(W+, W-). Exact enumeration whenever the number of nonzero
    differences is <= 25, else a normal approximation with tie-aware
    variance and continuity correction.
    """
    if zero_policy not in ("discard", "pratt"):
        raise ValidationError(f"unknown zero_policy {zero_policy!r}")
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValidationError("paired samples must have equal length")
    d = x - y

    if zero_policy == "discard":
        d = d[d != 0.0]
        ranks_all = _midranks(np.abs(d))
        nonzero_ranks = ranks_all
        signs = np.sign(d)
    else:
        ranks_all = _midranks(np.abs(d))
        keep = d != 0.0
        nonzero_ranks = ranks_all[keep]
        signs = np.sign(d[keep])

    n_eff = int(signs.size)
    if n_eff == 0:
        return WilcoxonResult(w_statistic=0.0, p_value=1.0, n_effective=0,
                              method="exact", zero_policy=zero_policy,
                              alpha=alpha, significant=False, degenerate=True)

    w_plus = float(nonzero_ranks[signs > 0].sum())
    w_minus = float(nonzero_ranks[signs < 0].sum())
    w = min(w_plus, w_minus)

    if n_eff <= EXACT_LIMIT:
        p = float(_exact_two_sided_p(nonzero_ranks, w))
        method = "exact"
    else:
        mean = float(nonzero_ranks.sum()) / 2.0
        var = float((nonzero_ranks ** 2).sum()) / 4.0
        z = (w - mean + 0.5) / math.sqrt(var)
        p = min(1.0, 2.0 * 0.5 * math.erfc(-z / math.sqrt(2.0)))
        method = "normal_approx"

    return WilcoxonResult(w_statistic=w, p_value=p, n_effective=n_eff,
                          method=method, zero_policy=zero_policy, alpha=alpha,
                          significant=bool(p < alpha), degenerate=False)
