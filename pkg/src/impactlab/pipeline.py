"""End-to-end experiment orchestration: artifacts -> dataset -> model -> report."""

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import collab_graph, corpus as corpus_mod, topic_model
from .corpus import Corpus, Paper
from .dataset import Dataset, label_rows
from .errors import ConfigurationError, DataError, UnknownIdError
from .evaluation import EvalReport, evaluate, random_baseline
from .features import (FACTORS, ExtractedRow, ExtractionContext, FeatureVector,
                       extract, extract_all, parse_mask, read_features_csv, worker_count)
from .learner import ENSEMBLE_KINDS, fit_ensemble, fit_logistic, model_from_dict

logger = logging.getLogger(__name__)

MODEL_KINDS = ("lrc",) + ENSEMBLE_KINDS


@dataclass
class ExperimentConfig:
    t: int = 2007
    delta_t: int = 5
    min_h: int = 10
    model: str = "lrc"
    feature_mask: str = "all"
    split_seed: int = 0
    model_seed: int = 0
    trees: int = 100
    l2: float = 1e-4
    k: int = 3
    threshold: float = 0.5
    stratified: bool = False
    snapshot: Optional[str] = None
    lda: Optional[str] = None
    collab: Optional[str] = None
    features: Optional[str] = None
    topics: int = 100
    lda_iterations: int = 1000
    lda_seed: int = 0

    def validate(self):
        if self.model not in MODEL_KINDS:
            raise ConfigurationError(f"unknown model {self.model!r}; choose from {MODEL_KINDS}")
        parse_mask(self.feature_mask)
        if self.min_h < 1:
            raise ConfigurationError("min_h must be >= 1")
        if self.delta_t < 0:
            raise ConfigurationError("delta_t must be >= 0")
        return self

    @classmethod
    def from_mapping(cls, data: dict, **overrides) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        merged = {k.replace("-", "_"): v for k, v in (data or {}).items()}
        merged.update({k: v for k, v in overrides.items() if v is not None})
        unknown = set(merged) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        return cls(**merged)

    def to_dict(self) -> dict:
        return asdict(self)


def train_model(dataset: Dataset, kind: str = "lrc", mask: str = "all", seed: int = 0,
                trees: int = 100, l2: float = 1e-4, threads: int = 1):
    """Fit a classifier on the dataset's training half over the masked factors."""
    factors = parse_mask(mask)
    X, y = dataset.matrix("train", factors)
    if kind == "lrc":
        return fit_logistic(X, y, l2=l2, feature_names=factors)
    if kind in ENSEMBLE_KINDS:
        return fit_ensemble(X, y, kind=kind, trees=trees, seed=seed,
                            feature_names=factors, threads=threads)
    raise ConfigurationError(f"unknown model kind {kind!r}")


class Experiment:
    """Extracted factor rows for one corpus slice, shared by every run over it.

    Factors depend only on (corpus, t); delta-t, min-h, masks and seeds only
    change labels, filtering and training, so sweeps reuse the rows.
    """

    def __init__(self, corpus: Corpus, t: int, rows: Sequence[ExtractedRow],
                 context: Optional[ExtractionContext] = None, excluded=None):
        self.corpus = corpus
        self.t = t
        self.rows = list(rows)
        self.context = context
        self.excluded = dict(excluded or {})

    @classmethod
    def from_context(cls, context: ExtractionContext, min_h: int = 1,
                     threads: Optional[int] = None) -> "Experiment":
        rows, excluded = extract_all(context, min_h=min_h, threads=threads)
        return cls(context.corpus, context.t, rows, context, excluded)

    @classmethod
    def from_config(cls, config: ExperimentConfig, threads: Optional[int] = None) -> "Experiment":
        """Load (or build) snapshot, topic model, network and factor rows."""
        if not config.snapshot:
            raise ConfigurationError("experiment needs a snapshot path")
        corpus, _ = corpus_mod.load_snapshot(config.snapshot)
        if config.features:
            rows, meta = read_features_csv(config.features)
            check_fingerprint(meta.get("fingerprint"), corpus, config.features)
            if int(meta.get("t", config.t)) != config.t:
                raise ConfigurationError(f"{config.features} is sliced at {meta.get('t')}, not {config.t}")
            return cls(corpus, config.t, rows)
        if config.lda:
            model = topic_model.load_model(config.lda)
        else:
            model = topic_model.fit_corpus_lda(corpus, config.t, K=config.topics,
                                               iterations=config.lda_iterations,
                                               seed=config.lda_seed)
        net = collab_graph.load_edge_list(config.collab) if config.collab else None
        ctx = ExtractionContext(corpus, config.t, model, net)
        return cls.from_context(ctx, min_h=1, threads=threads)

    def dataset(self, delta_t: int, min_h: int, seed: int = 0,
                stratified: bool = False) -> Dataset:
        return label_rows(self.corpus, self.rows, self.t, delta_t, min_h, seed, stratified,
                          self.excluded)


def check_fingerprint(found: Optional[str], corpus: Corpus, what: str) -> None:
    if found and found != corpus.fingerprint:
        raise ConfigurationError(f"{what} was derived from a different corpus snapshot")


def run_experiment(config: ExperimentConfig, experiment: Optional[Experiment] = None,
                   threads: Optional[int] = None) -> EvalReport:
    """Build the dataset, train on its first half and report validation metrics."""
    config.validate()
    if experiment is None:
        experiment = Experiment.from_config(config, threads)
    if experiment.t != config.t:
        raise ConfigurationError(f"experiment is sliced at {experiment.t}, not {config.t}")
    ds = experiment.dataset(config.delta_t, config.min_h, config.split_seed, config.stratified)
    model = train_model(ds, config.model, config.feature_mask, config.model_seed,
                        config.trees, config.l2)
    echo = {k: v for k, v in config.to_dict().items()
            if k not in ("snapshot", "lda", "collab", "features")}
    return evaluate(model, ds, k=config.k, threshold=config.threshold,
                    config={"experiment": echo, "instances": len(ds),
                            "positive_rate": ds.positive_rate})


def _pool_map(fn, items, threads: Optional[int]):
    n = worker_count(threads)
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


ABLATION_MASKS: Tuple[Tuple[str, str], ...] = (
    (("full", "all"),)
    + tuple((f"remove-{g}", f"-{g}") for g in "ACVSRT")
    + tuple((f"only-{g}", g) for g in "ACVSRT")
)


def ablation(config: ExperimentConfig, experiment: Optional[Experiment] = None,
             masks: Sequence[Tuple[str, str]] = ABLATION_MASKS,
             threads: Optional[int] = None) -> List[dict]:
    """One run per (name, mask); all runs share the split seed."""
    config.validate()
    if experiment is None:
        experiment = Experiment.from_config(config, threads)

    def one(item):
        name, mask = item
        rep = run_experiment(replace(config, feature_mask=mask), experiment)
        return {"mask": name, "expression": mask, "factors": len(parse_mask(mask)),
                **rep.metrics()}

    return _pool_map(one, list(masks), threads)


def _trend(values: Sequence[float], scores: Sequence[Optional[float]]) -> Optional[str]:
    pts = [(v, s) for v, s in zip(values, scores) if s is not None]
    if len(pts) < 2:
        return None
    diffs = np.diff([s for _, s in pts])
    if (diffs >= 0).all():
        return "non-decreasing"
    if (diffs <= 0).all():
        return "non-increasing"
    slope = np.polyfit([v for v, _ in pts], [s for _, s in pts], 1)[0]
    return "rising" if slope > 0 else "falling"


def sweep(config: ExperimentConfig, axis: str, values: Sequence[int],
          experiment: Optional[Experiment] = None,
          threads: Optional[int] = None) -> Dict:
    """Run one experiment per value of ``min_h`` or ``delta_t``.

    Returns ``{"axis", "points": [...], "trend": {metric: summary}}``.
    """
    field_name = {"min-h": "min_h", "min_h": "min_h", "dt": "delta_t",
                  "delta-t": "delta_t", "delta_t": "delta_t"}.get(axis)
    if field_name is None:
        raise ConfigurationError(f"unknown sweep axis {axis!r}")
    config.validate()
    if experiment is None:
        experiment = Experiment.from_config(config, threads)
    values = list(values)

    def one(v):
        rep = run_experiment(replace(config, **{field_name: int(v)}), experiment)
        return {field_name: int(v), "instances": rep.config["instances"],
                "positive_rate": rep.config["positive_rate"], **rep.metrics()}

    points = _pool_map(one, values, threads)
    trend = {m: _trend(values, [p[m] for p in points])
             for m in ("precision", "recall", "f1", "auc", "accuracy")}
    return {"axis": field_name, "points": points, "trend": trend}


def baseline_report(config: ExperimentConfig, experiment: Experiment, seeds: int = 1000) -> dict:
    ds = experiment.dataset(config.delta_t, config.min_h, config.split_seed, config.stratified)
    return random_baseline(ds, seeds=seeds, k=config.k)


def predict_single(model, context: ExtractionContext, record: dict,
                   seed: int = 0, fold_in_iterations: int = 100) -> Tuple[float, FeatureVector]:
    """Probability that an ad-hoc paper reaches its primary author's h-index.

    ``record`` carries title, abstract, authors, venue and references; it is
    placed at ``context.t`` and its topic mixture is inferred by fold-in.
    """
    authors = tuple(record.get("authors", ()))
    missing = [a for a in authors if not context.corpus.has_author(a)]
    if missing:
        raise UnknownIdError(f"authors not found in snapshot: {missing}")
    pid = str(record.get("id") or "__adhoc__")
    while pid in context.corpus:
        pid = "_" + pid
    paper = Paper(id=pid, title=record.get("title", ""), authors=authors, year=context.t,
                  venue=corpus_mod.normalize_venue(record.get("venue")),
                  abstract=record.get("abstract", "") or "",
                  references=tuple(str(r) for r in record.get("references", ())))
    theta = context.model.infer(paper.tokens(), iterations=fold_in_iterations, seed=seed)
    fv, _, _ = extract(context, paper, theta=theta)
    factors = tuple(getattr(model, "feature_names", FACTORS))
    return float(model.predict_proba(fv.select(factors))), fv


# --- model artifacts -------------------------------------------------------------------

def save_trained(model, path, dataset: Optional[Dataset] = None, extra: Optional[dict] = None):
    payload = {"model": model.to_dict(),
               "fingerprint": dataset.fingerprint if dataset else None,
               "dataset_config": dataset.config if dataset else None,
               "split_seed": dataset.split_seed if dataset else None}
    payload.update(extra or {})
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True)
        fh.write("\n")


def load_trained(path):
    try:
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read model {path}: {exc}") from exc
    return model_from_dict(payload["model"]), payload
