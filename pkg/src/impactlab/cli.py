"""``impactlab`` command line.  Exit codes: 0 ok, 1 configuration error, 2 data error."""

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import yaml

from . import collab_graph, corpus as corpus_mod, synth, topic_model
from .dataset import case_filter, label_rows, load_dataset, save_dataset
from .errors import ConfigurationError, ContractError, DataError, UnknownIdError
from .evaluation import correlate, evaluate, random_baseline
from .features import ExtractionContext, extract_all, read_features_csv, write_features_csv
from .learner import rank_factors
from .pipeline import (ABLATION_MASKS, Experiment, ExperimentConfig, ablation,
                       check_fingerprint, load_trained, predict_single, run_experiment,
                       save_trained, sweep, train_model)
from .scholar_metrics import characterize

logger = logging.getLogger("impactlab")

EXIT_OK, EXIT_CONFIG, EXIT_DATA = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def _dump_json(obj, out=None):
    text = json.dumps(obj, sort_keys=True, indent=2, allow_nan=True) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow(["" if v is None else v for v in r])


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


# --- experiment configuration --------------------------------------------------------

_EXPERIMENT_FLAGS = {
    # flag dest -> ExperimentConfig field
    "snapshot": "snapshot", "lda": "lda", "collab": "collab", "features": "features",
    "t": "t", "dt": "delta_t", "min_h": "min_h", "model": "model",
    "feature_mask": "feature_mask", "seed": "split_seed", "model_seed": "model_seed",
    "trees": "trees", "l2": "l2", "k": "k", "threshold": "threshold",
    "stratified": "stratified", "topics": "topics", "lda_iters": "lda_iterations",
    "lda_seed": "lda_seed",
}


def _add_experiment_flags(p):
    p.add_argument("--config", help="YAML or JSON file with experiment settings")
    p.add_argument("--snapshot")
    p.add_argument("--lda", help="topic model file (trained on the fly when omitted)")
    p.add_argument("--collab", help="collaboration edge list (built on the fly when omitted)")
    p.add_argument("--features", help="pre-extracted features CSV")
    p.add_argument("--t", "--year", dest="t", type=int)
    p.add_argument("--dt", type=int)
    p.add_argument("--min-h", dest="min_h", type=int)
    p.add_argument("--model", choices=("lrc", "rf", "bag", "tree"))
    p.add_argument("--feature-mask", dest="feature_mask")
    p.add_argument("--seed", type=int, help="split seed")
    p.add_argument("--model-seed", dest="model_seed", type=int)
    p.add_argument("--trees", type=int)
    p.add_argument("--l2", type=float)
    p.add_argument("--k", type=int)
    p.add_argument("--threshold", type=float)
    p.add_argument("--stratified", action="store_true", default=None)
    p.add_argument("--topics", type=int)
    p.add_argument("--lda-iters", dest="lda_iters", type=int)
    p.add_argument("--lda-seed", dest="lda_seed", type=int)


def load_config_file(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text) if str(path).endswith(".json") else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigurationError(f"cannot parse config {path}: {exc}") from exc
    if data is not None and not isinstance(data, dict):
        raise ConfigurationError(f"config {path} must be a mapping")
    return data or {}


def experiment_config(args) -> ExperimentConfig:
    data = load_config_file(args.config) if getattr(args, "config", None) else {}
    overrides = {field: getattr(args, dest) for dest, field in _EXPERIMENT_FLAGS.items()
                 if getattr(args, dest, None) is not None}
    return ExperimentConfig.from_mapping(data, **overrides).validate()


# --- subcommands ---------------------------------------------------------------------

def cmd_ingest(args):
    corpus, report = corpus_mod.load_arnetminer(args.input)
    corpus_mod.save_snapshot(corpus, report, args.out)
    _dump_json(dict(report.to_dict(), fingerprint=corpus.fingerprint))


def cmd_stats(args):
    corpus, _ = corpus_mod.load_snapshot(args.snapshot)
    ch = characterize(corpus, args.year)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "citation_histogram.csv", ("citations", "papers"),
               sorted(ch.citation_histogram.items()))
    _write_csv(out / "h_histogram.csv", ("h_index", "authors"), sorted(ch.h_histogram.items()))
    for name, rows in ch.conditional.items():
        _write_csv(out / f"{name}_by_h.csv", ("h_index", "authors", "mean", "ci95_half_width"), rows)
    _dump_json({"as_of": ch.as_of, "fingerprint": corpus.fingerprint, **ch.summary},
               out / "summary.json")


def cmd_synth(args):
    cfg = synth.SynthConfig()
    overrides = {k: getattr(args, k) for k in ("papers", "authors", "venues", "topics",
                                               "vocab_size", "mean_references",
                                               "mean_authors_per_paper", "seed")
                 if getattr(args, k) is not None}
    if args.attachment is not None:
        overrides["preferential_attachment_strength"] = args.attachment
    if args.years is not None:
        overrides["years"] = tuple(args.years)
    cfg = replace(cfg, **overrides)
    text, truth = synth.generate(cfg)
    Path(args.out).write_text(text, encoding="utf-8")
    if args.truth:
        _dump_json(truth, args.truth)


def cmd_lda(args):
    corpus, _ = corpus_mod.load_snapshot(args.snapshot)
    model = topic_model.fit_corpus_lda(corpus, args.year, K=args.topics,
                                       iterations=args.iters, seed=args.seed)
    topic_model.save_model(model, args.out)


def cmd_collab(args):
    corpus, _ = corpus_mod.load_snapshot(args.snapshot)
    collab_graph.save_edge_list(collab_graph.build_collab_net(corpus, args.year), args.out)


def _context(snapshot_corpus, year, lda_path, collab_path):
    model = topic_model.load_model(lda_path)
    net = collab_graph.load_edge_list(collab_path) if collab_path else None
    return ExtractionContext(snapshot_corpus, year, model, net)


def cmd_features(args):
    corpus, _ = corpus_mod.load_snapshot(args.snapshot)
    ctx = _context(corpus, args.year, args.lda, args.collab)
    rows, excluded = extract_all(ctx, min_h=args.min_h, threads=args.threads)
    meta = {"fingerprint": corpus.fingerprint, "t": args.year, "min_h": args.min_h,
            "excluded": json.dumps(excluded, sort_keys=True)}
    write_features_csv(rows, args.out, meta)


def cmd_dataset(args):
    corpus, _ = corpus_mod.load_snapshot(args.snapshot)
    rows, meta = read_features_csv(args.features)
    check_fingerprint(meta.get("fingerprint"), corpus, args.features)
    if meta.get("t") and int(meta["t"]) != args.t:
        raise ConfigurationError(f"{args.features} is sliced at {meta['t']}, not {args.t}")
    excluded = json.loads(meta["excluded"]) if meta.get("excluded") else {}
    ds = label_rows(corpus, rows, args.t, args.dt, args.min_h, args.seed, args.stratified,
                    excluded)
    if args.author or args.venue:
        ds = case_filter(ds, args.author, args.venue)
    save_dataset(ds, args.out)
    _dump_json({"instances": len(ds), "positive_rate": ds.positive_rate,
                "train": len(ds.train_ids), "validation": len(ds.validation_ids),
                "excluded": ds.excluded})


def cmd_train(args):
    ds = load_dataset(args.dataset)
    model = train_model(ds, args.model, args.feature_mask, args.seed, args.trees, args.l2,
                        threads=args.threads or 1)
    save_trained(model, args.out, ds, {"feature_mask": args.feature_mask,
                                       "model_seed": args.seed})


def cmd_evaluate(args):
    model, payload = load_trained(args.model)
    ds = load_dataset(args.dataset)
    if payload.get("fingerprint") and ds.fingerprint and payload["fingerprint"] != ds.fingerprint:
        raise ConfigurationError("model and dataset come from different corpus snapshots")
    report = evaluate(model, ds, k=args.k, threshold=args.threshold, split=args.split,
                      config={"model_file": str(args.model)})
    out = report.to_dict()
    if args.baseline_seeds:
        out["random_baseline"] = random_baseline(ds, seeds=args.baseline_seeds, k=args.k,
                                                 split=args.split)
    _dump_json(out, args.out)


def cmd_rank_factors(args):
    ds = load_dataset(args.dataset)
    rep = rank_factors(ds, bins=args.bins, split=args.split)
    _write_csv(args.out, ("rank", "factor", "information_gain", "intrinsic_value", "igr"),
               [(r.rank, r.factor, repr(r.ig), repr(r.iv), repr(r.igr)) for r in rep.rows])


def _sweep_field(axis):
    field = {"min-h": "min_h", "dt": "delta_t"}.get(axis)
    if field is None:
        raise ConfigurationError(f"unknown sweep axis {axis!r}; use min-h or dt")
    return field


def cmd_correlate(args):
    cfg = experiment_config(args)
    exp = Experiment.from_config(cfg, args.threads)
    field = _sweep_field(args.sweep)
    datasets = {}
    for v in args.values:
        c = replace(cfg, **{field: v})
        datasets[v] = exp.dataset(c.delta_t, c.min_h, c.split_seed, c.stratified)
    table = correlate(datasets, field, method=args.method)
    _write_csv(args.out, ("family", "factor", field, "r"),
               [(fam, f, v, None if r is None else repr(r)) for fam, f, v, r in table.rows])


def _write_points(path, points, key_cols):
    metrics = ("precision", "recall", "f1", "auc", "accuracy", "pre_at_k", "map")
    rows = []
    for p in points:
        for m in metrics:
            rows.append([p[c] for c in key_cols] + [m, p[m]])
    _write_csv(path, tuple(key_cols) + ("metric", "value"), rows)


def cmd_ablation(args):
    cfg = experiment_config(args)
    exp = Experiment.from_config(cfg, args.threads)
    masks = ABLATION_MASKS
    if args.masks:
        masks = tuple((m, m) for m in args.masks)
    points = ablation(cfg, exp, masks, threads=args.threads)
    if args.out and args.out.endswith(".csv"):
        _write_points(args.out, points, ("mask", "expression"))
    else:
        _dump_json({"config": cfg.to_dict(), "points": points}, args.out)


def cmd_sweep(args):
    cfg = experiment_config(args)
    exp = Experiment.from_config(cfg, args.threads)
    result = sweep(cfg, args.axis, args.values, exp, threads=args.threads)
    if args.out and args.out.endswith(".csv"):
        _write_points(args.out, result["points"], (result["axis"],))
    else:
        _dump_json({"config": cfg.to_dict(), **result}, args.out)


def cmd_predict(args):
    model, _ = load_trained(args.model)
    corpus, _ = corpus_mod.load_snapshot(args.snapshot)
    ctx = _context(corpus, args.year, args.lda, args.collab)
    try:
        record = json.loads(Path(args.paper).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read paper record {args.paper}: {exc}") from exc
    prob, fv = predict_single(model, ctx, record, seed=args.seed)
    _dump_json({"probability": prob, "features": dict(fv), "year": args.year,
                "fingerprint": corpus.fingerprint}, args.out)


def cmd_run(args):
    cfg = experiment_config(args)
    exp = Experiment.from_config(cfg, args.threads)
    report = run_experiment(cfg, exp)
    out = report.to_dict()
    if args.baseline_seeds:
        ds = exp.dataset(cfg.delta_t, cfg.min_h, cfg.split_seed, cfg.stratified)
        out["random_baseline"] = random_baseline(ds, seeds=args.baseline_seeds, k=cfg.k)
    _dump_json(out, args.out)


# --- parser --------------------------------------------------------------------------

def build_parser():
    p = _Parser(prog="impactlab", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--threads", type=int, default=None,
                   help="worker cap (default: IMPACTLAB_THREADS, else 1)")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("ingest", help="parse an ArnetMiner dump into a snapshot")
    s.add_argument("--input", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("stats", help="characterization tables as CSV")
    s.add_argument("--snapshot", required=True)
    s.add_argument("--year", type=int, required=True)
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_stats)

    s = sub.add_parser("synth", help="generate a synthetic corpus")
    for name, typ in (("papers", int), ("authors", int), ("venues", int), ("topics", int),
                      ("vocab-size", int), ("mean-references", float),
                      ("mean-authors-per-paper", float), ("seed", int)):
        s.add_argument(f"--{name}", dest=name.replace("-", "_"), type=typ)
    s.add_argument("--attachment", type=float, help="preferential attachment strength")
    s.add_argument("--years", type=int, nargs=2, metavar=("FIRST", "LAST"))
    s.add_argument("--out", required=True)
    s.add_argument("--truth")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("lda", help="fit a topic model on papers up to a year")
    s.add_argument("--snapshot", required=True)
    s.add_argument("--year", type=int, required=True)
    s.add_argument("--topics", type=int, default=100)
    s.add_argument("--iters", type=int, default=1000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_lda)

    s = sub.add_parser("collab", help="collaboration network edge list")
    s.add_argument("--snapshot", required=True)
    s.add_argument("--year", type=int, required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_collab)

    s = sub.add_parser("features", help="extract the 26 factors for papers of a year")
    s.add_argument("--snapshot", required=True)
    s.add_argument("--lda", required=True)
    s.add_argument("--collab")
    s.add_argument("--year", type=int, required=True)
    s.add_argument("--min-h", dest="min_h", type=int, default=1)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_features)

    s = sub.add_parser("dataset", help="label and split extracted features")
    s.add_argument("--features", required=True)
    s.add_argument("--snapshot", required=True)
    s.add_argument("--t", type=int, required=True)
    s.add_argument("--dt", type=int, required=True)
    s.add_argument("--min-h", dest="min_h", type=int, default=10)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--stratified", action="store_true")
    s.add_argument("--author", help="keep one primary author (case study)")
    s.add_argument("--venue", help="keep one venue (case study)")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_dataset)

    s = sub.add_parser("train", help="fit a classifier on the training half")
    s.add_argument("--dataset", required=True)
    s.add_argument("--model", choices=("lrc", "rf", "bag", "tree"), default="lrc")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--feature-mask", dest="feature_mask", default="all")
    s.add_argument("--trees", type=int, default=100)
    s.add_argument("--l2", type=float, default=1e-4)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("evaluate", help="score a model on a dataset split")
    s.add_argument("--model", required=True)
    s.add_argument("--dataset", required=True)
    s.add_argument("--k", type=int, default=3)
    s.add_argument("--threshold", type=float, default=0.5)
    s.add_argument("--split", choices=("validation", "train", "all"), default="validation")
    s.add_argument("--baseline-seeds", dest="baseline_seeds", type=int, default=0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("rank-factors", help="information gain ratio of every factor")
    s.add_argument("--dataset", required=True)
    s.add_argument("--bins", type=int, default=10)
    s.add_argument("--split", choices=("validation", "train", "all"), default="all")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_rank_factors)

    s = sub.add_parser("correlate", help="factor/label correlation across a sweep")
    _add_experiment_flags(s)
    s.add_argument("--sweep", choices=("min-h", "dt"), required=True)
    s.add_argument("--values", type=_int_list, required=True)
    s.add_argument("--method", choices=("pointbiserial", "spearman"), default="pointbiserial")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_correlate)

    s = sub.add_parser("ablation", help="full, remove-one and only-one group runs")
    _add_experiment_flags(s)
    s.add_argument("--mask", dest="masks", action="append",
                   help="mask expression to run instead of the group set (repeatable; use --mask=-C)")
    s.add_argument("--out")
    s.set_defaults(func=cmd_ablation)

    s = sub.add_parser("sweep", help="metrics across min-h or delta-t values")
    _add_experiment_flags(s)
    s.add_argument("--axis", choices=("min-h", "dt"), required=True)
    s.add_argument("--values", type=_int_list, required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("predict", help="probability for one ad-hoc paper record (JSON)")
    s.add_argument("--model", required=True)
    s.add_argument("--snapshot", required=True)
    s.add_argument("--lda", required=True)
    s.add_argument("--collab")
    s.add_argument("--year", type=int, required=True, help="slice the features are taken at")
    s.add_argument("--paper", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("run", help="dataset, training and evaluation in one go")
    _add_experiment_flags(s)
    s.add_argument("--baseline-seeds", dest="baseline_seeds", type=int, default=0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_run)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (ConfigurationError, ContractError) as exc:
        print(f"impactlab: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, UnknownIdError) as exc:
        print(f"impactlab: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
