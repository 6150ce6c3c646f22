"""End-to-end orchestration: boosted ranking, GA search, CV evaluation,
synthetic benchmark generation, and report (de)serialization.

Two protocols are supported. ``paper`` selects genes on the full dataset
and cross-validates afterwards; ``nested`` repeats both selection stages
inside every outer training fold and scores only the held-out fold.
"""
from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import boosting, ga
from .classifiers import ClassifierSpec
from .data import Dataset, make_folds, project
from .errors import PipelineError, ValidationError
from .stats import (METRIC_NAMES, CvSummary, WilcoxonResult,
                    cross_validate, score_split, wilcoxon_signed_rank)

__all__ = [
    "PipelineConfig",
    "PipelineReport",
    "SynthSpec",
    "SynthResult",
    "run_pipeline",
    "compare_reports",
    "generate_synth",
    "report_to_dict",
    "report_from_dict",
    "report_to_json",
    "report_from_json",
    "report_to_markdown",
    "write_json_atomic",
]

SCHEMA_VERSION = 1


def _default_eval_classifiers():
    return (ClassifierSpec(kind="linear_svm"), ClassifierSpec(kind="gaussian_nb"))


@dataclass(frozen=True)
class PipelineConfig:
    boost: boosting.BoostParams = field(default_factory=boosting.BoostParams)
    ga: ga.GaConfig = field(default_factory=ga.GaConfig)
    eval_classifiers: tuple = field(default_factory=_default_eval_classifiers)
    cv_k: int = 10
    cv_rounds: int = 10
    protocol: str = "paper"
    impute_neighbors: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.protocol not in ("paper", "nested"):
            raise ValidationError(f"unknown protocol {self.protocol!r}")
        if self.cv_k < 2 or self.cv_rounds < 1:
            raise ValidationError("cv_k >= 2 and cv_rounds >= 1 required")


@dataclass
class PipelineReport:
    dataset_name: str
    n_samples: int
    n_genes: int
    stage1_genes: list        # original indices, ascending
    stage1_ids: list
    stage1_gains: list
    final_genes: list
    final_ids: list
    summaries: dict           # classifier kind -> CvSummary
    runtimes: dict            # stage -> seconds (ms resolution)
    config: dict
    protocol: str
    seed: int
    ga_trace: ga.GaTrace | None = None  # not serialized

    @property
    def n_stage1(self) -> int:
        return len(self.stage1_genes)


@dataclass(frozen=True)
class SynthSpec:
    m_samples: int = 60
    n_genes: int = 500
    n_informative: int = 10
    n_classes: int = 2
    noise_sigma: float = 0.5
    missing_fraction: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n_informative > self.n_genes:
            raise ValidationError("n_informative exceeds n_genes")
        if not 0.0 <= self.missing_fraction < 1.0:
            raise ValidationError("missing_fraction must be in [0, 1)")
        if self.n_classes < 2:
            raise ValidationError("need at least two classes")
        if self.m_samples < 2 * self.n_classes:
            raise ValidationError("need at least two samples per class")


@dataclass(frozen=True)
class SynthResult:
    dataset: Dataset
    mask: frozenset                 # missing cells
    informative_genes: tuple        # planted gene indices, ascending


def generate_synth(spec: SynthSpec) -> SynthResult:
    """Planted-informative-gene benchmark generator.

    Informative genes get class-conditional means spaced by
    max(1, 2*noise_sigma); the rest are standard-normal noise. Labels are
    balanced, and missing_fraction of cells is masked uniformly.
    """
    rng = np.random.default_rng(spec.seed)
    m, n, c = spec.m_samples, spec.n_genes, spec.n_classes
    labels = np.arange(m) % c
    informative = np.sort(rng.choice(n, size=spec.n_informative, replace=False))
    values = rng.normal(0.0, 1.0, size=(m, n))
    separation = max(1.0, 2.0 * spec.noise_sigma)
    for j in informative:
        values[:, j] = (labels * separation
                        + rng.normal(0.0, spec.noise_sigma, size=m))
    mask = set()
    if spec.missing_fraction > 0.0:
        cells = rng.random((m, n)) < spec.missing_fraction
        mask = {(int(i), int(j)) for i, j in zip(*np.nonzero(cells))}
    gene_ids = tuple(f"g{j:05d}" for j in range(n))
    class_names = tuple(f"class{k}" for k in range(c))
    ds = Dataset(values, labels, gene_ids, class_names,
                 name=f"synth-{spec.seed}")
    return SynthResult(dataset=ds, mask=frozenset(mask),
                       informative_genes=tuple(int(j) for j in informative))


def _select_genes(ds: Dataset, cfg: PipelineConfig, seed_offset=None):
    """Run both selection stages on ``ds``; returns (stage1, gains, final)."""
    boost_params = cfg.boost
    ga_cfg = cfg.ga
    if seed_offset is not None:
        boost_params = boosting.BoostParams(
            **{**_boost_dict(boost_params),
               "seed": _derive_seed(boost_params.seed, seed_offset)})
        ga_cfg = ga.GaConfig(
            **{**_ga_dict(ga_cfg),
               "seed": _derive_seed(ga_cfg.seed, seed_offset)})
    model = boosting.fit(ds, ds.labels, boost_params)
    report = boosting.importances(model)
    try:
        stage1 = boosting.select_nonzero(report)
    except ValidationError as exc:
        raise PipelineError(
            "stage 1 kept no genes; the labels look independent of the data"
        ) from exc
    best, trace = ga.evolve(project(ds, stage1), ga_cfg)
    final = ga.decode(best, stage1)
    gains = report.total_gain[stage1]
    return stage1, gains, final, trace


def _derive_seed(seed: int, offset: tuple) -> int:
    return int(np.random.SeedSequence([seed, *offset]).generate_state(1)[0])


def run_pipeline(ds: Dataset, cfg: PipelineConfig) -> PipelineReport:
    """Execute the two-stage selection and the CV evaluation harness.

    The input is expected to be imputed and normalized already.
    """
    runtimes = {}

    t0 = time.perf_counter()
    model = boosting.fit(ds, ds.labels, cfg.boost)
    importance = boosting.importances(model)
    try:
        stage1 = boosting.select_nonzero(importance)
    except ValidationError as exc:
        raise PipelineError(
            "stage 1 kept no genes; the labels look independent of the data"
        ) from exc
    runtimes["stage1"] = _ms(time.perf_counter() - t0)

    t1 = time.perf_counter()
    best, trace = ga.evolve(project(ds, stage1), cfg.ga)
    final = ga.decode(best, stage1)
    runtimes["stage2"] = _ms(time.perf_counter() - t1)

    t2 = time.perf_counter()
    plan = make_folds(ds.labels, cfg.cv_k, cfg.cv_rounds, cfg.seed)
    summaries = {}
    if cfg.protocol == "paper":
        for spec in cfg.eval_classifiers:
            summaries[spec.kind] = cross_validate(final, ds, spec, plan)
    else:
        summaries = _nested_evaluate(ds, cfg, plan)
    runtimes["evaluation"] = _ms(time.perf_counter() - t2)

    report = PipelineReport(
        dataset_name=ds.name,
        n_samples=ds.n_samples,
        n_genes=ds.n_genes,
        stage1_genes=[int(j) for j in stage1],
        stage1_ids=[ds.gene_ids[int(j)] for j in stage1],
        stage1_gains=[float(v) for v in importance.total_gain[stage1]],
        final_genes=[int(j) for j in final],
        final_ids=[ds.gene_ids[int(j)] for j in final],
        summaries=summaries,
        runtimes=runtimes,
        config=config_to_dict(cfg),
        protocol=cfg.protocol,
        seed=cfg.seed,
        ga_trace=trace,
    )
    return report


def _nested_evaluate(ds: Dataset, cfg: PipelineConfig, plan) -> dict:
    """Re-run both selection stages inside each outer training fold and
    score only the held-out fold."""
    results = {spec.kind: [] for spec in cfg.eval_classifiers}
    skipped = []
    for r, f, train_idx, test_idx in plan.splits():
        train_labels = ds.labels[train_idx]
        if np.unique(train_labels).size != ds.n_classes:
            skipped.append((r, f))
            continue
        train_ds = Dataset(ds.values[train_idx], train_labels,
                           ds.gene_ids, ds.class_names, ds.name)
        test_ds = Dataset(ds.values[test_idx], ds.labels[test_idx],
                          ds.gene_ids, ds.class_names, ds.name)
        _, _, final, _ = _select_genes(train_ds, cfg, seed_offset=(r, f))
        for spec in cfg.eval_classifiers:
            results[spec.kind].append(score_split(
                project(train_ds, final), project(test_ds, final), spec))
    summaries = {}
    for kind, fold_results in results.items():
        if not fold_results:
            raise PipelineError("every nested fold was skipped")
        means = {name: float(np.mean([getattr(x, name) for x in fold_results]))
                 for name in METRIC_NAMES}
        stds = {name: float(np.std([getattr(x, name) for x in fold_results]))
                for name in METRIC_NAMES}
        summaries[kind] = CvSummary(fold_results=tuple(fold_results),
                                    means=means, stds=stds,
                                    skipped_folds=tuple(skipped))
    return summaries


def compare_reports(a, b, alpha: float = 0.05,
                    metric: str = "accuracy") -> WilcoxonResult:
    """Wilcoxon signed-rank test over paired per-dataset CV means."""
    if len(a) != len(b):
        raise ValidationError("report lists must be aligned")
    if len(a) < 5:
        raise ValidationError("need at least 5 paired datasets")
    x = [s.means[metric] for s in a]
    y = [s.means[metric] for s in b]
    return wilcoxon_signed_rank(x, y, alpha=alpha)


def _ms(seconds: float) -> float:
    return round(seconds, 3)


def _boost_dict(p: boosting.BoostParams) -> dict:
    return {k: getattr(p, k) for k in
            ("n_estimators", "max_depth", "subsample", "learning_rate",
             "lam", "gamma", "loss", "seed")}


def _ga_dict(g: ga.GaConfig) -> dict:
    return {k: getattr(g, k) for k in
            ("population_size", "iterations", "crossover_prob",
             "mutation_prob", "tournament_size", "elitism_count",
             "fitness_knn_k", "fitness_folds", "seed")}


def _clf_dict(s: ClassifierSpec) -> dict:
    return {k: getattr(s, k) for k in
            ("kind", "knn_k", "svm_c", "svm_epochs", "nb_var_smoothing", "seed")}


def config_to_dict(cfg: PipelineConfig) -> dict:
    return {
        "boost": _boost_dict(cfg.boost),
        "ga": _ga_dict(cfg.ga),
        "eval_classifiers": [_clf_dict(s) for s in cfg.eval_classifiers],
        "cv_k": cfg.cv_k,
        "cv_rounds": cfg.cv_rounds,
        "protocol": cfg.protocol,
        "impute_neighbors": cfg.impute_neighbors,
        "seed": cfg.seed,
    }


def config_from_dict(d: dict) -> PipelineConfig:
    return PipelineConfig(
        boost=boosting.BoostParams(**d["boost"]),
        ga=ga.GaConfig(**d["ga"]),
        eval_classifiers=tuple(ClassifierSpec(**s)
                               for s in d["eval_classifiers"]),
        cv_k=d["cv_k"],
        cv_rounds=d["cv_rounds"],
        protocol=d["protocol"],
        impute_neighbors=d["impute_neighbors"],
        seed=d["seed"],
    )


def report_to_dict(report: PipelineReport, include_timings: bool = True) -> dict:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "dataset_name": report.dataset_name,
        "n_samples": report.n_samples,
        "n_genes": report.n_genes,
        "stage1_genes": report.stage1_genes,
        "stage1_ids": report.stage1_ids,
        "stage1_gains": report.stage1_gains,
        "n_stage1": report.n_stage1,
        "final_genes": report.final_genes,
        "final_ids": report.final_ids,
        "summaries": {k: v.as_dict() for k, v in report.summaries.items()},
        "config": report.config,
        "protocol": report.protocol,
        "seed": report.seed,
    }
    if include_timings:
        doc["runtimes"] = report.runtimes
    return doc


def report_from_dict(doc: dict) -> PipelineReport:
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ValidationError(
            f"unsupported report schema_version {doc.get('schema_version')!r}")
    return PipelineReport(
        dataset_name=doc["dataset_name"],
        n_samples=doc["n_samples"],
        n_genes=doc["n_genes"],
        stage1_genes=doc["stage1_genes"],
        stage1_ids=doc["stage1_ids"],
        stage1_gains=doc["stage1_gains"],
        final_genes=doc["final_genes"],
        final_ids=doc["final_ids"],
        summaries={k: CvSummary.from_dict(v)
                   for k, v in doc["summaries"].items()},
        runtimes=doc.get("runtimes", {}),
        config=doc["config"],
        protocol=doc["protocol"],
        seed=doc["seed"],
    )


def report_to_json(report: PipelineReport, include_timings: bool = True) -> str:
    return json.dumps(report_to_dict(report, include_timings=include_timings),
                      sort_keys=True, indent=2) + "\n"


def report_from_json(text: str) -> PipelineReport:
    return report_from_dict(json.loads(text))


def report_to_markdown(report: PipelineReport) -> str:
    """Human-readable summary table in the percent +/- std style."""
    lines = [
        f"# {report.dataset_name}",
        "",
        f"- samples: {report.n_samples}, genes: {report.n_genes}",
        f"- selection funnel: {report.n_genes} -> {report.n_stage1} -> "
        f"{len(report.final_genes)} genes ({report.protocol} protocol)",
        f"- final genes: {', '.join(report.final_ids)}",
    ]
    if report.runtimes:
        lines.append(
            "- runtimes (s): "
            + ", ".join(f"{k}={v:.3f}" for k, v in report.runtimes.items()))
    lines += ["", "| classifier | " + " | ".join(METRIC_NAMES) + " |",
              "|---" * (len(METRIC_NAMES) + 1) + "|"]
    for kind, summary in report.summaries.items():
        cells = [f"{100 * summary.means[m]:.2f} (+/- {100 * summary.stds[m]:.2f})"
                 for m in METRIC_NAMES]
        lines.append(f"| {kind} | " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def write_json_atomic(path, text: str):
    """Write via a temp file + rename so readers never see partial output."""
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)
