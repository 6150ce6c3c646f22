"""Gradient-boosted regression trees with a second-order regularized
objective, used both as a predictor and as the stage-1 gene ranker.

Split search is exact greedy over every feature and every midpoint
between consecutive distinct values. Per-gene importance is the total
accepted split gain, which drives the nonzero-importance gene filter.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .data import Dataset
from .errors import ConfigError, ValidationError

__all__ = [
    "BoostParams",
    "TreeNode",
    "BoostedEnsemble",
    "ImportanceReport",
    "grad_hess",
    "leaf_weight",
    "split_gain",
    "fit",
    "predict",
    "predict_raw",
    "importances",
    "select_nonzero",
    "model_to_json",
    "model_from_json",
]

HESS_FLOOR = 1e-16


@dataclass(frozen=True)
class BoostParams:
    n_estimators: int = 100
    max_depth: int = 3
    subsample: float = 0.75
    learning_rate: float = 0.3
    lam: float = 1.0         # l2 leaf-weight regularizer
    gamma: float = 0.0       # split-difficulty penalty
    loss: str = "logistic"   # or "squared"
    seed: int = 0

    def __post_init__(self):
        if self.n_estimators < 1:
            raise ConfigError("n_estimators must be >= 1")
        if self.max_depth < 1:
            raise ConfigError("max_depth must be >= 1")
        if not 0.0 < self.subsample <= 1.0:
            raise ConfigError("subsample must be in (0, 1]")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be > 0")
        if self.lam < 0 or self.gamma < 0:
            raise ConfigError("lam and gamma must be >= 0")
        if self.loss not in ("squared", "logistic"):
            raise ConfigError(f"unknown loss {self.loss!r}")


@dataclass
class TreeNode:
    """Internal node (feature/threshold/children/gain) or leaf (weight)."""

    feature: int = -1
    threshold: float = 0.0
    gain: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    weight: float = 0.0

    @property
    def is_leaf(self) -> bool:
        return self.feature < 0


@dataclass
class BoostedEnsemble:
    """Additive tree model: one tree list per output head.

    Binary and regression models have a single head; multiclass models
    have one one-vs-rest logistic head per class.
    """

    trees: list            # [output][round] -> TreeNode
    base_score: np.ndarray  # per output
    params: BoostParams
    n_genes: int
    n_classes: int         # 0 for regression

    @property
    def task(self) -> str:
        if self.n_classes == 0:
            return "regression"
        return "binary" if len(self.trees) == 1 else "multiclass"


@dataclass(frozen=True)
class ImportanceReport:
    total_gain: np.ndarray   # per gene
    split_count: np.ndarray  # per gene
    ranking: np.ndarray      # genes by total_gain desc, index asc


def grad_hess(loss: str, y: float, y_hat_raw: float) -> tuple[float, float]:
    """First/second derivatives of the loss at a raw prediction.

    Squared loss is L = 0.5*(y - yhat)^2; logistic operates on the raw
    score with p = sigmoid(raw). The hessian is floored to keep leaf
    weights finite.
    """
    if loss == "squared":
        return y_hat_raw - y, 1.0
    if loss == "logistic":
        p = 1.0 / (1.0 + math.exp(-y_hat_raw))
        return p - y, max(p * (1.0 - p), HESS_FLOOR)
    raise ConfigError(f"unknown loss {loss!r}")


def leaf_weight(g_sum: float, h_sum: float, lam: float) -> float:
    """Minimizer -G/(H+lam) of the per-leaf quadratic G*w + 0.5*(H+lam)*w^2."""
    if h_sum + lam <= 0:
        raise ValidationError("degenerate leaf: H + lambda must be > 0")
    return -g_sum / (h_sum + lam)


def split_gain(gl: float, hl: float, gr: float, hr: float,
               lam: float, gamma: float) -> float:
    """Objective decrease of splitting one leaf into two, minus gamma."""
    return 0.5 * (gl * gl / (hl + lam)
                  + gr * gr / (hr + lam)
                  - (gl + gr) ** 2 / (hl + hr + lam)) - gamma


def _grow(x: np.ndarray, g: np.ndarray, h: np.ndarray, rows: np.ndarray,
          depth: int, params: BoostParams) -> TreeNode:
    g_sum = float(g[rows].sum())
    h_sum = float(h[rows].sum())
    if depth >= params.max_depth or rows.size < 2:
        return TreeNode(weight=leaf_weight(g_sum, h_sum, params.lam))
    feat, thr, gain = _kernels.best_split(
        x[rows], g[rows], h[rows], params.lam, params.gamma)
    if feat < 0 or gain <= 0.0:
        return TreeNode(weight=leaf_weight(g_sum, h_sum, params.lam))
    go_left = x[rows, feat] <= thr
    left = _grow(x, g, h, rows[go_left], depth + 1, params)
    right = _grow(x, g, h, rows[~go_left], depth + 1, params)
    return TreeNode(feature=int(feat), threshold=float(thr), gain=float(gain),
                    left=left, right=right)


def _tree_values(node: TreeNode, x: np.ndarray) -> np.ndarray:
    out = np.empty(x.shape[0])
    stack = [(node, np.arange(x.shape[0]))]
    while stack:
        nd, idx = stack.pop()
        if nd.is_leaf:
            out[idx] = nd.weight
        else:
            mask = x[idx, nd.feature] <= nd.threshold
            stack.append((nd.left, idx[mask]))
            stack.append((nd.right, idx[~mask]))
    return out


def _log_odds(p: float) -> float:
    p = min(max(p, 1e-12), 1 - 1e-12)
    return math.log(p / (1.0 - p))


def fit(ds: Dataset, targets, params: BoostParams) -> BoostedEnsemble:
    """Train the additive model round by round.

    Squared loss regresses a real target vector with one head; logistic
    loss takes class indices and trains one head for binary data or C
    one-vs-rest heads for multiclass, all sharing the per-round row
    subsamples.
    """
    x = ds.values
    if not np.isfinite(x).all():
        raise ValidationError("expression matrix contains non-finite values")
    targets = np.asarray(targets)
    if targets.shape[0] != ds.n_samples:
        raise ValidationError("targets must align with samples")
    m = ds.n_samples

    if params.loss == "squared":
        y_heads = [targets.astype(np.float64)]
        base = np.array([float(y_heads[0].mean())])
        n_classes = 0
    else:
        labels = targets.astype(np.int64)
        n_classes = int(labels.max()) + 1
        if n_classes <= 2:
            n_classes = 2
            y_heads = [(labels == 1).astype(np.float64)]
            base = np.array([_log_odds(float(y_heads[0].mean()))])
        else:
            y_heads = [(labels == c).astype(np.float64)
                       for c in range(n_classes)]
            base = np.array([_log_odds(float(y.mean())) for y in y_heads])

    raw = [np.full(m, b) for b in base]
    trees: list[list[TreeNode]] = [[] for _ in y_heads]
    rng = np.random.default_rng(params.seed)
    n_sub = max(1, int(round(params.subsample * m)))

    for _ in range(params.n_estimators):
        if params.subsample < 1.0:
            rows = np.sort(rng.choice(m, size=n_sub, replace=False))
        else:
            rows = np.arange(m)
        for head, y in enumerate(y_heads):
            g = np.empty(m)
            h = np.empty(m)
            for i in rows:
                g[i], h[i] = grad_hess(params.loss, y[i], raw[head][i])
            tree = _grow(x, g, h, rows, 0, params)
            trees[head].append(tree)
            raw[head] += params.learning_rate * _tree_values(tree, x)

    return BoostedEnsemble(trees=trees, base_score=base, params=params,
                           n_genes=ds.n_genes, n_classes=n_classes)


def predict_raw(model: BoostedEnsemble, ds: Dataset) -> np.ndarray:
    """Raw additive scores, one row per sample, one column per head."""
    if ds.n_genes != model.n_genes:
        raise ValidationError(
            f"model expects {model.n_genes} genes, dataset has {ds.n_genes}")
    x = ds.values
    out = np.empty((x.shape[0], len(model.trees)))
    for head, head_trees in enumerate(model.trees):
        raw = np.full(x.shape[0], model.base_score[head])
        for tree in head_trees:
            raw += model.params.learning_rate * _tree_values(tree, x)
        out[:, head] = raw
    return out


def predict(model: BoostedEnsemble, ds: Dataset) -> np.ndarray:
    """Class indices for classification heads, raw scores for regression.

    Binary: class 1 only when the raw score is strictly positive, so the
    p = 0.5 tie goes to class 0. Multiclass: argmax over one-vs-rest
    scores, ties to the lowest class index.
    """
    raw = predict_raw(model, ds)
    if model.n_classes == 0:
        return raw[:, 0]
    if raw.shape[1] == 1:
        return (raw[:, 0] > 0.0).astype(np.int64)
    return np.argmax(raw, axis=1).astype(np.int64)


def importances(model: BoostedEnsemble) -> ImportanceReport:
    """Total accepted split gain and split count per gene, over all heads."""
    total = np.zeros(model.n_genes)
    count = np.zeros(model.n_genes, dtype=np.int64)
    stack = [t for head in model.trees for t in head]
    while stack:
        node = stack.pop()
        if not node.is_leaf:
            total[node.feature] += node.gain
            count[node.feature] += 1
            stack.extend((node.left, node.right))
    ranking = np.lexsort((np.arange(model.n_genes), -total))
    return ImportanceReport(total_gain=total, split_count=count,
                            ranking=ranking.astype(np.int64))


def select_nonzero(report: ImportanceReport) -> np.ndarray:
    """Ascending indices of genes with strictly positive total gain."""
    kept = np.flatnonzero(report.total_gain > 0.0)
    if kept.size == 0:
        raise ValidationError("no gene has positive importance")
    return kept.astype(np.int64)


def _node_to_dict(node: TreeNode) -> dict:
    if node.is_leaf:
        return {"weight": node.weight}
    return {
        "feature": node.feature,
        "threshold": node.threshold,
        "gain": node.gain,
        "left": _node_to_dict(node.left),
        "right": _node_to_dict(node.right),
    }


def _node_from_dict(d: dict) -> TreeNode:
    if "weight" in d:
        return TreeNode(weight=d["weight"])
    return TreeNode(feature=d["feature"], threshold=d["threshold"],
                    gain=d["gain"], left=_node_from_dict(d["left"]),
                    right=_node_from_dict(d["right"]))


def model_to_json(model: BoostedEnsemble) -> str:
    doc = {
        "params": {
            "n_estimators": model.params.n_estimators,
            "max_depth": model.params.max_depth,
            "subsample": model.params.subsample,
            "learning_rate": model.params.learning_rate,
            "lam": model.params.lam,
            "gamma": model.params.gamma,
            "loss": model.params.loss,
            "seed": model.params.seed,
        },
        "base_score": model.base_score.tolist(),
        "n_genes": model.n_genes,
        "n_classes": model.n_classes,
        "trees": [[_node_to_dict(t) for t in head] for head in model.trees],
    }
    return json.dumps(doc, sort_keys=True)


def model_from_json(text: str) -> BoostedEnsemble:
    doc = json.loads(text)
    return BoostedEnsemble(
        trees=[[_node_from_dict(t) for t in head] for head in doc["trees"]],
        base_score=np.asarray(doc["base_score"]),
        params=BoostParams(**doc["params"]),
        n_genes=doc["n_genes"],
        n_classes=doc["n_classes"],
    )
