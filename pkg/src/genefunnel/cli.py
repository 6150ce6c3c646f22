"""Command-line interface.

Subcommands: synth (emit a benchmark CSV), rank (stage-1 importance only),
select (full pipeline report), evaluate (CV of a given gene subset),
compare (Wilcoxon over two report directories), trace (GA trace CSV).

Exit codes: 0 success, 1 validation/usage error, 2 I/O error.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import boosting, ga, pipeline
from .classifiers import ClassifierSpec
from .data import impute_knn, load_csv, make_folds, normalize_minmax
from .errors import GeneFunnelError
from .stats import cross_validate

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; the CLI contract wants 1
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(EXIT_VALIDATION)


def _add_data_flags(p):
    p.add_argument("--data", required=True, help="input CSV path")
    p.add_argument("--label-column", choices=("first", "last"), default="last")
    p.add_argument("--missing-token", default="NA")
    p.add_argument("--impute-neighbors", type=int, default=5)


def _add_boost_flags(p):
    p.add_argument("--trees", type=int, default=100)
    p.add_argument("--max-depth", type=int, default=3)
    p.add_argument("--subsample", type=float, default=0.75)
    p.add_argument("--eta", type=float, default=0.3, help="learning rate")
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--gamma", type=float, default=0.0)


def _add_ga_flags(p):
    p.add_argument("--pop", type=int, default=100)
    p.add_argument("--gens", type=int, default=50)
    p.add_argument("--cx-prob", type=float, default=0.8)
    p.add_argument("--mut-prob", type=float, default=0.01)
    p.add_argument("--tournament", type=int, default=2)
    p.add_argument("--knn-k", type=int, default=5)


def _add_eval_flags(p):
    p.add_argument("--cv-k", type=int, default=10)
    p.add_argument("--cv-rounds", type=int, default=10)
    p.add_argument("--classifiers", default="linear_svm,gaussian_nb",
                   help="comma-separated: knn, gaussian_nb, linear_svm")


def build_parser() -> _Parser:
    parser = _Parser(prog="genefunnel",
                     description="Two-stage gene selection and evaluation")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[], help="emit a synthetic benchmark CSV")
    p.add_argument("--out", required=True)
    p.add_argument("--samples", type=int, default=60)
    p.add_argument("--genes", type=int, default=500)
    p.add_argument("--informative", type=int, default=10)
    p.add_argument("--classes", type=int, default=2)
    p.add_argument("--sigma", type=float, default=0.5)
    p.add_argument("--missing-fraction", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--truth-out", help="write planted gene indices as JSON")

    p = sub.add_parser("rank", help="stage 1 only: importance report")
    _add_data_flags(p)
    _add_boost_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="JSON output path (default: stdout)")
    p.add_argument("--csv", dest="csv_out", help="also write ranking as CSV")

    p = sub.add_parser("select", help="full pipeline: report JSON + markdown")
    _add_data_flags(p)
    _add_boost_flags(p)
    _add_ga_flags(p)
    _add_eval_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--protocol", choices=("paper", "nested"), default="paper")
    p.add_argument("--config", help="JSON or key=value config file; flags win")
    p.add_argument("--out", help="report JSON path")
    p.add_argument("--markdown-out", help="markdown table path")
    p.add_argument("--trace-out", help="GA trace CSV path")
    p.add_argument("--timings", action="store_true",
                   help="include wall-clock runtimes in the JSON report "
                        "(breaks byte-for-byte reproducibility)")

    p = sub.add_parser("evaluate", help="CV of a given gene-subset file")
    _add_data_flags(p)
    _add_eval_flags(p)
    p.add_argument("--genes", required=True,
                   help="JSON list or newline-separated gene indices")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="JSON output path (default: stdout)")

    p = sub.add_parser("compare", help="Wilcoxon test over two report sets")
    p.add_argument("--a", required=True, help="directory of report JSON files")
    p.add_argument("--b", required=True, help="directory of report JSON files")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--metric", default="accuracy")
    p.add_argument("--classifier", default=None,
                   help="classifier kind to compare (default: first in reports)")
    p.add_argument("--out", help="JSON output path (default: stdout)")

    p = sub.add_parser("trace", help="run selection and emit the GA trace CSV")
    _add_data_flags(p)
    _add_boost_flags(p)
    _add_ga_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trace-out", required=True)

    return parser


def _load_prepared(args):
    ds, mask = load_csv(args.data, label_column=args.label_column,
                        missing_token=args.missing_token)
    if mask:
        ds = impute_knn(ds, mask, n_neighbors=args.impute_neighbors)
    return normalize_minmax(ds)


def _boost_params(args) -> boosting.BoostParams:
    return boosting.BoostParams(
        n_estimators=args.trees, max_depth=args.max_depth,
        subsample=args.subsample, learning_rate=args.eta,
        lam=args.lam, gamma=args.gamma, seed=args.seed)


def _ga_config(args) -> ga.GaConfig:
    return ga.GaConfig(
        population_size=args.pop, iterations=args.gens,
        crossover_prob=args.cx_prob, mutation_prob=args.mut_prob,
        tournament_size=args.tournament, fitness_knn_k=args.knn_k,
        seed=args.seed)


def _eval_specs(args) -> tuple:
    kinds = [k.strip() for k in args.classifiers.split(",") if k.strip()]
    return tuple(ClassifierSpec(kind=k, seed=args.seed) for k in kinds)


def _emit(text: str, path):
    if path:
        pipeline.write_json_atomic(path, text)
    else:
        sys.stdout.write(text)


def _apply_config_file(args, parser_defaults):
    """Overlay config-file values under explicit flags: file beats
    defaults, command line beats file."""
    path = getattr(args, "config", None)
    if not path:
        return args
    text = Path(path).read_text(encoding="utf-8")
    try:
        values = json.loads(text)
    except json.JSONDecodeError:
        values = {}
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise GeneFunnelError(f"{path}: expected key=value, got {line!r}")
            key, _, val = line.partition("=")
            values[key.strip()] = val.strip()
    for key, val in values.items():
        attr = key.replace("-", "_")
        if not hasattr(args, attr):
            raise GeneFunnelError(f"{path}: unknown config key {key!r}")
        # explicit command-line flags keep priority
        if getattr(args, attr) == parser_defaults.get(attr):
            current = parser_defaults.get(attr)
            if isinstance(current, bool):
                val = str(val).lower() in ("1", "true", "yes")
            elif isinstance(current, int):
                val = int(val)
            elif isinstance(current, float):
                val = float(val)
            setattr(args, attr, val)
    return args


def _cmd_synth(args) -> int:
    spec = pipeline.SynthSpec(
        m_samples=args.samples, n_genes=args.genes,
        n_informative=args.informative, n_classes=args.classes,
        noise_sigma=args.sigma, missing_fraction=args.missing_fraction,
        seed=args.seed)
    result = pipeline.generate_synth(spec)
    ds = result.dataset
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(ds.gene_ids) + ["label"])
        for i in range(ds.n_samples):
            row = [("" if (i, j) in result.mask else repr(float(ds.values[i, j])))
                   for j in range(ds.n_genes)]
            writer.writerow(row + [ds.class_names[ds.labels[i]]])
    if args.truth_out:
        pipeline.write_json_atomic(
            args.truth_out,
            json.dumps({"informative_genes": list(result.informative_genes)},
                       sort_keys=True) + "\n")
    return EXIT_OK


def _cmd_rank(args) -> int:
    ds = _load_prepared(args)
    model = boosting.fit(ds, ds.labels, _boost_params(args))
    report = boosting.importances(model)
    doc = {
        "dataset_name": ds.name,
        "n_genes": ds.n_genes,
        "ranking": [int(j) for j in report.ranking],
        "total_gain": {ds.gene_ids[int(j)]: float(report.total_gain[j])
                       for j in np.flatnonzero(report.total_gain > 0)},
    }
    _emit(json.dumps(doc, sort_keys=True, indent=2) + "\n", args.out)
    if args.csv_out:
        with open(args.csv_out, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["gene_index", "gene_id", "total_gain", "split_count"])
            for j in report.ranking:
                writer.writerow([int(j), ds.gene_ids[int(j)],
                                 float(report.total_gain[j]),
                                 int(report.split_count[j])])
    return EXIT_OK


def _cmd_select(args, defaults) -> int:
    args = _apply_config_file(args, defaults)
    ds = _load_prepared(args)
    cfg = pipeline.PipelineConfig(
        boost=_boost_params(args), ga=_ga_config(args),
        eval_classifiers=_eval_specs(args), cv_k=args.cv_k,
        cv_rounds=args.cv_rounds, protocol=args.protocol,
        impute_neighbors=args.impute_neighbors, seed=args.seed)
    report = pipeline.run_pipeline(ds, cfg)
    text = pipeline.report_to_json(report, include_timings=args.timings)
    _emit(text, args.out)
    markdown = pipeline.report_to_markdown(report)
    if args.markdown_out:
        pipeline.write_json_atomic(args.markdown_out, markdown)
    if not args.out:
        pass  # JSON already on stdout
    else:
        sys.stdout.write(markdown)
    if args.trace_out and report.ga_trace is not None:
        ga.trace_to_csv(report.ga_trace, args.trace_out)
    print(f"runtimes (s): {report.runtimes}", file=sys.stderr)
    return EXIT_OK


def _read_gene_subset(path) -> list:
    text = Path(path).read_text(encoding="utf-8")
    try:
        parsed = json.loads(text)
        if not isinstance(parsed, list):
            raise GeneFunnelError(f"{path}: expected a JSON list of indices")
        return [int(v) for v in parsed]
    except json.JSONDecodeError:
        return [int(line) for line in text.split() if line.strip()]


def _cmd_evaluate(args) -> int:
    ds = _load_prepared(args)
    subset = sorted(set(_read_gene_subset(args.genes)))
    plan = make_folds(ds.labels, args.cv_k, args.cv_rounds, args.seed)
    doc = {"dataset_name": ds.name, "genes": subset, "summaries": {}}
    for spec in _eval_specs(args):
        doc["summaries"][spec.kind] = cross_validate(subset, ds, spec,
                                                     plan).as_dict()
    _emit(json.dumps(doc, sort_keys=True, indent=2) + "\n", args.out)
    return EXIT_OK


def _cmd_compare(args) -> int:
    def read_dir(d):
        paths = sorted(Path(d).glob("*.json"))
        if not paths:
            raise FileNotFoundError(f"no report JSON files in {d}")
        return [pipeline.report_from_json(p.read_text(encoding="utf-8"))
                for p in paths]

    reports_a = read_dir(args.a)
    reports_b = read_dir(args.b)
    kind = args.classifier
    if kind is None:
        kind = next(iter(reports_a[0].summaries))
    summaries_a = [r.summaries[kind] for r in reports_a]
    summaries_b = [r.summaries[kind] for r in reports_b]
    result = pipeline.compare_reports(summaries_a, summaries_b,
                                      alpha=args.alpha, metric=args.metric)
    doc = {
        "classifier": kind,
        "metric": args.metric,
        "n_datasets": len(summaries_a),
        "w_statistic": result.w_statistic,
        "p_value": result.p_value,
        "n_effective": result.n_effective,
        "method": result.method,
        "alpha": result.alpha,
        "verdict": "significant" if result.significant else "not significant",
    }
    _emit(json.dumps(doc, sort_keys=True, indent=2) + "\n", args.out)
    return EXIT_OK


def _cmd_trace(args) -> int:
    ds = _load_prepared(args)
    model = boosting.fit(ds, ds.labels, _boost_params(args))
    stage1 = boosting.select_nonzero(boosting.importances(model))
    from .data import project
    _, trace = ga.evolve(project(ds, stage1), _ga_config(args))
    ga.trace_to_csv(trace, args.trace_out)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    defaults = {a.dest: a.default for a in parser._actions}
    for sub_action in parser._subparsers._group_actions:
        sub = sub_action.choices.get(args.command)
        if sub is not None:
            defaults.update({a.dest: a.default for a in sub._actions})

    try:
        if args.command == "synth":
            return _cmd_synth(args)
        if args.command == "rank":
            return _cmd_rank(args)
        if args.command == "select":
            return _cmd_select(args, defaults)
        if args.command == "evaluate":
            return _cmd_evaluate(args)
        if args.command == "compare":
            return _cmd_compare(args)
        if args.command == "trace":
            return _cmd_trace(args)
        return EXIT_VALIDATION
    except (FileNotFoundError, PermissionError, IsADirectoryError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except GeneFunnelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    raise SystemExit(main())
