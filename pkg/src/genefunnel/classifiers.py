"""Evaluation and fitness classifiers: KNN, Gaussian naive Bayes, and a
linear SVM trained by seeded stochastic subgradient descent on the hinge
loss. All three sit behind one train/predict interface.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .data import Dataset
from .errors import ConfigError, ValidationError

__all__ = ["ClassifierSpec", "TrainedClassifier", "train", "predict"]

KINDS = ("knn", "gaussian_nb", "linear_svm")


@dataclass(frozen=True)
class ClassifierSpec:
    kind: str = "knn"
    knn_k: int = 5
    svm_c: float = 1.0
    svm_epochs: int = 200
    nb_var_smoothing: float = 1e-9
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown classifier kind {self.kind!r}")
        if self.knn_k < 1:
            raise ConfigError("knn_k must be >= 1")
        if self.svm_c <= 0:
            raise ConfigError("svm_c must be > 0")
        if self.svm_epochs < 1:
            raise ConfigError("svm_epochs must be >= 1")
        if self.nb_var_smoothing < 0:
            raise ConfigError("nb_var_smoothing must be >= 0")


@dataclass
class TrainedClassifier:
    spec: ClassifierSpec
    n_genes: int
    n_classes: int
    # knn
    train_values: np.ndarray | None = None
    train_labels: np.ndarray | None = None
    # gaussian_nb
    log_priors: np.ndarray | None = None
    means: np.ndarray | None = None
    variances: np.ndarray | None = None
    # linear_svm (one row of weights + one bias per one-vs-rest head)
    weights: np.ndarray | None = None
    biases: np.ndarray | None = None


def _train_svm_binary(x: np.ndarray, y_pm: np.ndarray, spec: ClassifierSpec,
                      rng: np.random.Generator) -> tuple[np.ndarray, float]:
    """Pegasos-style primal hinge descent; y_pm in {-1, +1}.

    Objective (per sample): lam/2*||w||^2 + mean hinge, with
    lam = 1/(svm_c * M), i.e. hinge sum + ||w||^2/(2*svm_c) overall.
    Bias is unregularized.
    """
    m, d = x.shape
    lam = 1.0 / (spec.svm_c * m)
    w = np.zeros(d)
    b = 0.0
    t = 0
    for _ in range(spec.svm_epochs):
        for i in rng.permutation(m):
            t += 1
            eta = 1.0 / (lam * t)
            margin = y_pm[i] * (x[i] @ w + b)
            w *= 1.0 - eta * lam
            if margin < 1.0:
                w += eta * y_pm[i] * x[i]
                b += eta * y_pm[i]
    return w, b


def train(spec: ClassifierSpec, ds: Dataset) -> TrainedClassifier:
    m = ds.n_samples
    c = ds.n_classes
    if m < c:
        raise ValidationError("need at least one sample per class")
    model = TrainedClassifier(spec=spec, n_genes=ds.n_genes, n_classes=c)

    if spec.kind == "knn":
        if spec.knn_k > m:
            raise ValidationError(f"knn_k={spec.knn_k} exceeds {m} samples")
        model.train_values = ds.values
        model.train_labels = ds.labels
        return model

    if spec.kind == "gaussian_nb":
        pooled = ds.values.var(axis=0)
        floor = max(spec.nb_var_smoothing * float(pooled.max()), 1e-12)
        means = np.empty((c, ds.n_genes))
        variances = np.empty((c, ds.n_genes))
        priors = np.empty(c)
        for k in range(c):
            rows = ds.values[ds.labels == k]
            priors[k] = rows.shape[0] / m
            means[k] = rows.mean(axis=0)
            variances[k] = np.maximum(rows.var(axis=0), floor)
        model.log_priors = np.log(priors)
        model.means = means
        model.variances = variances
        return model

    # linear_svm: one head for binary, one-vs-rest heads for multiclass
    heads = 1 if c == 2 else c
    weights = np.empty((heads, ds.n_genes))
    biases = np.empty(heads)
    for head in range(heads):
        positive = 1 if c == 2 else head
        y_pm = np.where(ds.labels == positive, 1.0, -1.0)
        rng = np.random.default_rng([spec.seed, head])
        weights[head], biases[head] = _train_svm_binary(
            ds.values, y_pm, spec, rng)
    model.weights = weights
    model.biases = biases
    return model


def predict(model: TrainedClassifier, ds: Dataset) -> np.ndarray:
    if ds.n_genes != model.n_genes:
        raise ValidationError(
            f"model expects {model.n_genes} genes, dataset has {ds.n_genes}")
    spec = model.spec

    if spec.kind == "knn":
        return _kernels.knn_predict(model.train_values, model.train_labels,
                                    ds.values, spec.knn_k, model.n_classes)

    if spec.kind == "gaussian_nb":
        # log prior + sum of log Gaussian densities, argmax ties to class 0
        x = ds.values
        scores = np.empty((x.shape[0], model.n_classes))
        for k in range(model.n_classes):
            var = model.variances[k]
            log_density = (-0.5 * np.log(2.0 * np.pi * var)
                           - (x - model.means[k]) ** 2 / (2.0 * var))
            scores[:, k] = model.log_priors[k] + log_density.sum(axis=1)
        return np.argmax(scores, axis=1).astype(np.int64)

    scores = ds.values @ model.weights.T + model.biases
    if model.n_classes == 2:
        return (scores[:, 0] >= 0.0).astype(np.int64)
    return np.argmax(scores, axis=1).astype(np.int64)
