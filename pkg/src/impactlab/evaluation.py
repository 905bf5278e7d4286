"""Classification, ranking and correlation metrics."""

import logging
import math
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import rankdata

from .dataset import Dataset
from .errors import ContractError
from .features import FACTORS, GROUPS

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ConfusionMetrics:
    precision: float
    recall: float
    f1: float
    accuracy: float
    tp: int
    fp: int
    fn: int
    tn: int
    no_positive_predictions: bool = False


def _as_arrays(probabilities, labels):
    p = np.asarray(probabilities, dtype=float).ravel()
    y = np.asarray(labels).astype(bool).ravel()
    if p.size != y.size:
        raise ContractError(f"{p.size} scores vs {y.size} labels")
    return p, y


def f1_score(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def confusion_metrics(probabilities, labels, threshold: float = 0.5) -> ConfusionMetrics:
    """Precision, recall, F1 and accuracy with ``p >= threshold`` predicted positive."""
    p, y = _as_arrays(probabilities, labels)
    if p.size == 0:
        raise ContractError("no predictions to score")
    pred = p >= threshold
    tp = int(np.sum(pred & y))
    fp = int(np.sum(pred & ~y))
    fn = int(np.sum(~pred & y))
    tn = int(np.sum(~pred & ~y))
    no_pos = tp + fp == 0
    precision = tp / (tp + fp) if not no_pos else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    return ConfusionMetrics(precision, recall, f1_score(precision, recall),
                            (tp + tn) / p.size, tp, fp, fn, tn, no_pos)


def auc(probabilities, labels) -> float:
    """Mann-Whitney AUC with midranks for tied scores."""
    p, y = _as_arrays(probabilities, labels)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ContractError("AUC needs both classes")
    ranks = rankdata(p, method="average")
    u = ranks[y].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def average_precision(ranked_labels: Sequence[bool]) -> float:
    hits = 0
    total = 0.0
    for i, lab in enumerate(ranked_labels, start=1):
        if lab:
            hits += 1
            total += hits / i
    return total / hits if hits else 0.0


@dataclass(frozen=True)
class RankMetrics:
    pre_at_k: Optional[float]
    map: Optional[float]
    k: int
    authors_at_k: int
    authors_with_positive: int


def _rank_groups(groups, scores, labels, ids):
    by_group = defaultdict(list)
    for g, s, lab, i in zip(groups, scores, labels, ids):
        by_group[g].append((-float(s), str(i), bool(lab)))
    return {g: [lab for _, _, lab in sorted(rows)] for g, rows in by_group.items()}


def rank_metrics(groups: Sequence, scores, labels, ids: Sequence, k: int = 3) -> RankMetrics:
    """Pre@k and MAP over per-group rankings (group = primary author).

    Each group is ranked by descending score, ties by id.  Pre@k averages
    over groups with at least k instances; MAP over groups with a positive.
    Empty populations yield None.
    """
    ranked = _rank_groups(groups, scores, labels, ids)
    pre = [sum(r[:k]) / k for r in ranked.values() if len(r) >= k]
    aps = [average_precision(r) for r in ranked.values() if any(r)]
    if not pre:
        logger.warning("Pre@%d: no author has %d ranked instances", k, k)
    if not aps:
        logger.warning("MAP: no author has a positive instance")
    return RankMetrics(float(np.mean(pre)) if pre else None,
                       float(np.mean(aps)) if aps else None, k, len(pre), len(aps))


@dataclass
class EvalReport:
    precision: float
    recall: float
    f1: float
    auc: Optional[float]
    accuracy: float
    pre_at_k: Optional[float]
    k: int
    map: Optional[float]
    n_validation: int
    threshold: float
    positives: int = 0
    per_author: List[Dict] = field(default_factory=list)
    flags: List[str] = field(default_factory=list)
    config: Dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def metrics(self) -> Dict[str, Optional[float]]:
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1,
                "auc": self.auc, "accuracy": self.accuracy, "pre_at_k": self.pre_at_k,
                "map": self.map}


def score_predictions(probabilities, labels, groups, ids, k: int = 3,
                      threshold: float = 0.5, config: Optional[dict] = None) -> EvalReport:
    p, y = _as_arrays(probabilities, labels)
    cm = confusion_metrics(p, y, threshold)
    flags = []
    if cm.no_positive_predictions:
        flags.append("no_positive_predictions")
    try:
        a = auc(p, y)
    except ContractError:
        a = None
        flags.append("auc_single_class")
    rm = rank_metrics(groups, p, y, ids, k)
    if rm.pre_at_k is None:
        flags.append("pre_at_k_empty")
    if rm.map is None:
        flags.append("map_empty")
    per_author = []
    ranked = _rank_groups(groups, p, y, ids)
    for g in sorted(ranked, key=str):
        r = ranked[g]
        per_author.append({"author": g, "n": len(r), "positives": int(sum(r)),
                           "pre_at_k": sum(r[:k]) / k if len(r) >= k else None,
                           "average_precision": average_precision(r) if any(r) else None})
    return EvalReport(cm.precision, cm.recall, cm.f1, a, cm.accuracy, rm.pre_at_k, k, rm.map,
                      int(p.size), threshold, int(y.sum()), per_author, flags, dict(config or {}))


def evaluate(model, dataset: Dataset, k: int = 3, threshold: float = 0.5,
             split: str = "validation", config: Optional[dict] = None) -> EvalReport:
    """Score ``model`` on a dataset split (the validation half by default)."""
    factors = tuple(getattr(model, "feature_names", FACTORS))
    X, y = dataset.matrix(split, factors)
    inst = dataset.select(split)
    if not inst:
        raise ContractError(f"split {split!r} is empty")
    p = model.predict_proba(X)
    cfg = dict(dataset.config)
    cfg.update({"split": split, "split_seed": dataset.split_seed,
                "fingerprint": dataset.fingerprint, "model": getattr(model, "kind", None),
                "factors": list(factors)})
    cfg.update(config or {})
    return score_predictions(p, y, [i.primary_author for i in inst],
                             [i.paper_id for i in inst], k, threshold, cfg)


def random_baseline(dataset: Dataset, seeds: int = 1000, k: int = 3,
                    split: str = "validation") -> Dict[str, Optional[float]]:
    """Mean metrics of guessing half the instances positive, uniformly at random.

    Each seed draws uniform scores; the top half (floor(n/2)) is predicted
    positive and the scores also drive AUC, Pre@k and MAP.
    """
    inst = dataset.select(split)
    y = np.array([i.label for i in inst], dtype=bool)
    groups = [i.primary_author for i in inst]
    ids = [i.paper_id for i in inst]
    n = y.size
    acc = defaultdict(list)
    for s in range(seeds):
        rng = np.random.default_rng(s)
        u = rng.random(n)
        pred = np.zeros(n, dtype=float)
        pred[np.argsort(-u, kind="stable")[: n // 2]] = 1.0
        cm = confusion_metrics(pred, y)
        acc["precision"].append(cm.precision)
        acc["recall"].append(cm.recall)
        acc["f1"].append(cm.f1)
        acc["accuracy"].append(cm.accuracy)
        if 0 < y.sum() < n:
            acc["auc"].append(auc(u, y))
        rm = rank_metrics(groups, u, y, ids, k)
        if rm.pre_at_k is not None:
            acc["pre_at_k"].append(rm.pre_at_k)
        if rm.map is not None:
            acc["map"].append(rm.map)
    keys = ("precision", "recall", "f1", "auc", "accuracy", "pre_at_k", "map")
    return {key: (float(np.mean(acc[key])) if acc[key] else None) for key in keys}


# --- correlation -------------------------------------------------------------------

def point_biserial(x, labels) -> Optional[float]:
    """Pearson correlation of ``x`` with 0/1 labels; None when undefined."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(labels).astype(float)
    if x.size < 2 or np.ptp(x) == 0 or np.ptp(y) == 0:
        return None
    xc = x - x.mean()
    yc = y - y.mean()
    r = float(xc @ yc / math.sqrt((xc @ xc) * (yc @ yc)))
    return max(-1.0, min(1.0, r))


def spearman(x, labels) -> Optional[float]:
    return point_biserial(rankdata(x), rankdata(labels))


@dataclass
class CorrelationTable:
    """Rows ``(family, factor, sweep_value, r)``; r is None for undefined cells."""
    axis: str
    method: str
    rows: List[Tuple[str, str, float, Optional[float]]] = field(default_factory=list)

    def flagged(self) -> List[Tuple[str, float]]:
        return [(f, v) for _, f, v, r in self.rows if r is None]

    def family(self, family: str):
        return [r for r in self.rows if r[0] == family]


FAMILY_OF = {f: g for g, fs in GROUPS.items() for f in fs}


def correlate(datasets: Dict[float, Dataset], axis: str, method: str = "pointbiserial",
              split: str = "all") -> CorrelationTable:
    """Per-factor correlation with the label at each sweep point.

    ``datasets`` maps the sweep value (min-h or delta-t) to its dataset.
    """
    fn = {"pointbiserial": point_biserial, "spearman": spearman}.get(method)
    if fn is None:
        raise ContractError(f"unknown correlation method {method!r}")
    table = CorrelationTable(axis, method)
    for value in sorted(datasets):
        X, y = datasets[value].matrix(split)
        for j, name in enumerate(FACTORS):
            table.rows.append((FAMILY_OF[name], name, value, fn(X[:, j], y)))
    return table
