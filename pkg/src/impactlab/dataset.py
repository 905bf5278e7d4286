"""Labelled instances for the "will this paper reach max-h-index?" task."""

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .corpus import Corpus
from .errors import ConfigurationError, DataError
from .features import (FACTORS, ExtractedRow, ExtractionContext, FeatureVector,
                       extract_all)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Instance:
    paper_id: str
    t: int
    max_h: int
    features: FeatureVector
    label: bool
    primary_author: str
    venue: Optional[str] = None
    citations: int = 0


@dataclass(frozen=True, eq=False)
class Dataset:
    instances: Tuple[Instance, ...]
    split_seed: int
    train_ids: Tuple[str, ...]
    validation_ids: Tuple[str, ...]
    config: Dict
    fingerprint: Optional[str] = None
    excluded: Dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "_by_id", {i.paper_id: i for i in self.instances})

    def __len__(self):
        return len(self.instances)

    def instance(self, paper_id) -> Instance:
        return self._by_id[paper_id]

    def select(self, split: str = "all") -> List[Instance]:
        if split == "all":
            return list(self.instances)
        ids = {"train": self.train_ids, "validation": self.validation_ids}.get(split)
        if ids is None:
            raise ConfigurationError(f"unknown split {split!r}")
        return [self._by_id[i] for i in ids]

    def matrix(self, split: str = "all", factors: Sequence[str] = FACTORS):
        """Feature matrix and boolean label vector for a split and factor subset."""
        inst = self.select(split)
        X = np.array([i.features.select(factors) for i in inst], dtype=float).reshape(
            len(inst), len(factors))
        y = np.array([i.label for i in inst], dtype=bool)
        return X, y

    @property
    def positive_rate(self) -> float:
        return float(np.mean([i.label for i in self.instances])) if self.instances else 0.0

    def to_dict(self) -> dict:
        return {
            "config": self.config, "fingerprint": self.fingerprint,
            "split_seed": self.split_seed, "excluded": self.excluded,
            "factors": list(FACTORS),
            "train_ids": list(self.train_ids), "validation_ids": list(self.validation_ids),
            "instances": [
                {"paper_id": i.paper_id, "t": i.t, "max_h": i.max_h, "label": i.label,
                 "primary_author": i.primary_author, "venue": i.venue,
                 "citations": i.citations, "features": [float(x) for x in i.features.values]}
                for i in self.instances
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Dataset":
        if d.get("factors") != list(FACTORS):
            raise DataError("dataset factor list does not match this version")
        inst = tuple(
            Instance(r["paper_id"], r["t"], r["max_h"], FeatureVector(r["features"]),
                     bool(r["label"]), r["primary_author"], r.get("venue"), r.get("citations", 0))
            for r in d["instances"])
        return cls(inst, d["split_seed"], tuple(d["train_ids"]), tuple(d["validation_ids"]),
                   d["config"], d.get("fingerprint"), d.get("excluded", {}))


def split_ids(ids: Sequence[str], labels: Sequence[bool], seed: int,
              stratified: bool = False) -> Tuple[Tuple[str, ...], Tuple[str, ...]]:
    """Random half split; the training half gets ceil(n/2) ids.

    The stratified variant stable-sorts a shuffled order by label and deals
    alternately, so each class is halved as evenly as possible.
    """
    n = len(ids)
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    if stratified:
        lab = np.asarray(labels, dtype=bool)[order]
        order = order[np.argsort(~lab, kind="stable")]
        train = order[0::2]
        val = order[1::2]
    else:
        n_train = math.ceil(n / 2)
        train, val = order[:n_train], order[n_train:]
    return tuple(ids[i] for i in sorted(train)), tuple(ids[i] for i in sorted(val))


def label_rows(corpus: Corpus, rows: Iterable[ExtractedRow], t: int, delta_t: int,
               min_h: int = 10, seed: int = 0, stratified: bool = False,
               excluded: Optional[Dict[str, int]] = None) -> Dataset:
    """Attach labels at ``t + delta_t`` to extracted rows and split them.

    The threshold is each row's max-h-index frozen at ``t``.
    """
    if min_h < 1:
        raise ConfigurationError("min_h must be >= 1")
    if delta_t < 0:
        raise ConfigurationError("delta_t must be >= 0")
    if not len(corpus):
        raise ConfigurationError("empty corpus")
    first, last = corpus.year_range
    if t > last or t < first:
        raise ConfigurationError(f"t={t} lies outside the corpus years {first}-{last}")
    if t + delta_t > last:
        raise ConfigurationError(f"t + delta_t = {t + delta_t} is beyond the last corpus year {last}")
    future = corpus.citation_counts(t + delta_t)
    excluded = dict(excluded or {})
    insts = []
    for r in rows:
        if r.max_h < min_h:
            excluded["below_min_h"] = excluded.get("below_min_h", 0) + 1
            continue
        c = int(future[corpus.paper_index(r.paper_id)])
        insts.append(Instance(r.paper_id, t, r.max_h, r.features, c >= r.max_h,
                              r.primary_author, r.venue, c))
    if not insts:
        raise ConfigurationError(
            f"no instances at t={t} with max-h-index >= {min_h} (excluded: {excluded})")
    ids = [i.paper_id for i in insts]
    train, val = split_ids(ids, [i.label for i in insts], seed, stratified)
    config = {"t": t, "delta_t": delta_t, "min_h": min_h, "stratified": stratified}
    return Dataset(tuple(insts), seed, train, val, config, corpus.fingerprint, excluded)


def build_dataset(corpus: Corpus, context: ExtractionContext, t: int, delta_t: int,
                  min_h: int = 10, seed: int = 0, stratified: bool = False,
                  threads: Optional[int] = None) -> Dataset:
    if context.t != t:
        raise ConfigurationError(f"extraction context is sliced at {context.t}, not {t}")
    first, last = corpus.year_range
    if t + delta_t > last:
        raise ConfigurationError(f"t + delta_t = {t + delta_t} is beyond the last corpus year {last}")
    rows, excluded = extract_all(context, min_h=min_h, threads=threads)
    return label_rows(corpus, rows, t, delta_t, min_h, seed, stratified, excluded)


def case_filter(dataset: Dataset, author: Optional[str] = None,
                venue: Optional[str] = None) -> Dataset:
    """Restrict to one primary author and/or one venue, keeping labels and split."""
    if author is None and venue is None:
        raise ConfigurationError("case_filter needs an author or a venue")
    if venue is not None:
        venue = venue.strip().lower()
    keep = [i for i in dataset.instances
            if (author is None or i.primary_author == author)
            and (venue is None or i.venue == venue)]
    if not keep:
        logger.warning("case filter (author=%r, venue=%r) matched no instances", author, venue)
    ids = {i.paper_id for i in keep}
    config = dict(dataset.config, case_author=author, case_venue=venue)
    return Dataset(tuple(keep), dataset.split_seed,
                   tuple(i for i in dataset.train_ids if i in ids),
                   tuple(i for i in dataset.validation_ids if i in ids),
                   config, dataset.fingerprint, dict(dataset.excluded))


def save_dataset(dataset: Dataset, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(dataset.to_dict(), fh, sort_keys=True)
        fh.write("\n")


def load_dataset(path) -> Dataset:
    try:
        with open(path, encoding="utf-8") as fh:
            return Dataset.from_dict(json.load(fh))
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise DataError(f"cannot read dataset {path}: {exc}") from exc
