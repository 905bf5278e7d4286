"""
The 26 impact factors for a (paper, t) instance.

Every ratio uses the paper's own max-h-index (the h-index of its primary
author at t) as denominator.  Degenerate denominators (no venue history, no
resolvable references, no prior papers) produce 0 rather than a missing
value.  "Prior" paper sets never contain the target paper itself.
"""

import csv
import logging
import math
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .collab_graph import (CollabNet, PageRankScores, SocialStats, build_collab_net,
                           pagerank, social_factors, social_stats)
from .corpus import Corpus, Paper
from .errors import ConfigurationError, ContractError, DataError, UnknownIdError
from .scholar_metrics import h_index_all, paper_counts_all
from .topic_model import (TopicModel, TopicPopularity, c_diversity, c_novelty,
                          topic_popularity)

logger = logging.getLogger(__name__)

GROUPS: Dict[str, Tuple[str, ...]] = {
    "A": ("A-first-max", "A-ave-max", "A-sum-max", "A-first-ratio", "A-max-ratio",
          "A-num-authors", "A-num-first"),
    "C": ("C-popularity", "C-popularity-ratio", "C-novelty", "C-diversity",
          "C-authority-first", "C-authority-max", "C-authority-ave"),
    "V": ("V-ratio-max", "V-citation"),
    "S": ("S-degree", "S-pagerank", "S-h-co-author", "S-h-weight"),
    "R": ("R-ratio-max", "R-citation"),
    "T": ("T-ave-h", "T-max-h", "T-h-first", "T-h-max"),
}
FACTORS: Tuple[str, ...] = tuple(f for g in "ACVSRT" for f in GROUPS[g])
FACTOR_INDEX = {f: i for i, f in enumerate(FACTORS)}

# factor sets of the introductory F/A/V/TP/F-A-V comparison
PRESETS: Dict[str, Tuple[str, ...]] = {
    "preset:F": FACTORS,
    "preset:A": ("C-authority-first", "C-authority-max", "C-authority-ave"),
    "preset:V": GROUPS["V"],
    "preset:TP": ("C-popularity", "C-popularity-ratio"),
}
PRESETS["preset:F-A-V"] = tuple(f for f in FACTORS
                              if f not in PRESETS["preset:A"] and f not in GROUPS["V"])


def _resolve_token(tok: str) -> Tuple[str, ...]:
    if tok in GROUPS:
        return GROUPS[tok]
    if tok in PRESETS:
        return PRESETS[tok]
    if tok in FACTOR_INDEX:
        return (tok,)
    raise ConfigurationError(f"unknown factor group or name {tok!r}")


def parse_mask(spec: Optional[str]) -> Tuple[str, ...]:
    """Resolve a feature-mask expression to an ordered tuple of factor names.

    Comma separated tokens; each token is a group letter (A C V S R T), a
    factor name, or a ``preset:`` name.  Plain tokens select, ``-`` prefixed
    tokens remove.  Without any plain token the selection starts from all
    26 factors, so ``-C`` means "everything but content" and ``C,V`` means
    "only content and venue".
    """
    if spec is None or spec.strip().lower() in ("", "all", "full"):
        return FACTORS
    include, exclude = set(), set()
    any_include = False
    for tok in (t.strip() for t in spec.split(",")):
        if not tok:
            continue
        if tok[0] in "-!":
            exclude.update(_resolve_token(tok[1:].strip()))
        else:
            any_include = True
            include.update(_resolve_token(tok.lstrip("+").strip()))
    base = include if any_include else set(FACTORS)
    chosen = tuple(f for f in FACTORS if f in base and f not in exclude)
    if not chosen:
        raise ConfigurationError(f"feature mask {spec!r} selects no factors")
    return chosen


class FeatureVector(Mapping):
    """The 26 named factor values of one instance (read-only mapping)."""

    __slots__ = ("values",)

    def __init__(self, values):
        values = np.array(values, dtype=float)
        if values.shape != (len(FACTORS),):
            raise ContractError(f"expected {len(FACTORS)} factor values, got {values.shape}")
        values.setflags(write=False)
        self.values = values

    @classmethod
    def from_mapping(cls, m: Mapping[str, float]) -> "FeatureVector":
        return cls([m[f] for f in FACTORS])

    def __getitem__(self, name):
        return float(self.values[FACTOR_INDEX[name]])

    def __iter__(self):
        return iter(FACTORS)

    def __len__(self):
        return len(FACTORS)

    def __eq__(self, other):
        if isinstance(other, FeatureVector):
            return np.array_equal(self.values, other.values)
        return Mapping.__eq__(self, other)

    def __hash__(self):
        return hash(self.values.tobytes())

    def __repr__(self):
        return f"FeatureVector({dict(self)})"

    def select(self, names: Sequence[str]) -> np.ndarray:
        return self.values[[FACTOR_INDEX[n] for n in names]]


def _ratio(num, den) -> float:
    return float(num) / float(den) if den else 0.0


class ExtractionContext:
    """Everything sliced at year ``t`` that extraction needs; shared read-only.

    Per-author authority profiles and per-venue citation arrays are computed
    lazily; the memo is lock-guarded and the values are identical with or
    without it.
    """

    def __init__(self, corpus: Corpus, t: int, model: TopicModel,
                 net: Optional[CollabNet] = None, scores: Optional[PageRankScores] = None):
        if model.fingerprint is not None and model.fingerprint != corpus.fingerprint:
            raise ConfigurationError("topic model was trained on a different corpus")
        if model.as_of is not None and model.as_of != t:
            raise ConfigurationError(f"topic model is sliced at {model.as_of}, not {t}")
        if net is None:
            net = build_collab_net(corpus, t)
        if net.fingerprint is not None and net.fingerprint != corpus.fingerprint:
            raise ConfigurationError("collaboration network was built from a different corpus")
        if net.as_of is not None and net.as_of != t:
            raise ConfigurationError(f"collaboration network is sliced at {net.as_of}, not {t}")
        if scores is None:
            scores = pagerank(net) if len(net) else None

        self.corpus = corpus
        self.t = int(t)
        self.model = model
        self.net = net
        self.scores = scores
        self.citations = corpus.citation_counts(t)
        self.h_now = h_index_all(corpus, t)
        self.h_prev = h_index_all(corpus, t - 3)
        self.paper_counts = paper_counts_all(corpus, t)
        in_slice = [p for p in corpus.paper_ids if corpus.papers[p].year <= t]
        rows = model.rows_for(in_slice)
        if (rows < 0).any():
            raise ConfigurationError(
                f"topic model lacks {int((rows < 0).sum())} papers published by {t}")
        self._model_rows = np.full(len(corpus), -1, dtype=np.int64)
        self._model_rows[[corpus.paper_index(p) for p in in_slice]] = rows
        self.popularity: TopicPopularity = topic_popularity(model, corpus, t)
        if len(net):
            node_h = np.array([self.h_now[corpus.author_index(a)] if corpus.has_author(a) else 0
                               for a in net.authors])
            self.social: Optional[SocialStats] = social_stats(net, scores, node_h)
        else:
            self.social = None
        self._authority: Dict[int, np.ndarray] = {}
        self._venue: Dict[str, np.ndarray] = {}
        self._lock = threading.Lock()

    @property
    def fingerprint(self) -> str:
        return self.corpus.fingerprint

    def theta_of(self, paper_index: int) -> Optional[np.ndarray]:
        row = self._model_rows[paper_index]
        return None if row < 0 else self.model.doc_topic[row]

    def authority(self, author_idx: int) -> np.ndarray:
        with self._lock:
            prof = self._authority.get(author_idx)
        if prof is not None:
            return prof
        pids = self.corpus.author_papers[self.corpus.author_ids[author_idx]]
        idx = np.array([self.corpus.paper_index(p) for p in pids], dtype=np.int64)
        idx = idx[self.corpus.years[idx] <= self.t]
        if idx.size:
            prof = self.citations[idx].astype(float) @ self.model.doc_topic[self._model_rows[idx]]
        else:
            prof = np.zeros(self.model.K)
        with self._lock:
            self._authority.setdefault(author_idx, prof)
        return prof

    def venue_citations(self, venue: str) -> np.ndarray:
        """Sorted citation counts at t of the venue's papers published by t."""
        with self._lock:
            arr = self._venue.get(venue)
        if arr is not None:
            return arr
        pids = self.corpus.venue_papers.get(venue, ())
        idx = np.array([self.corpus.paper_index(p) for p in pids], dtype=np.int64)
        if idx.size:
            idx = idx[self.corpus.years[idx] <= self.t]
        arr = np.sort(self.citations[idx]) if idx.size else np.zeros(0, dtype=np.int64)
        with self._lock:
            self._venue.setdefault(venue, arr)
        return arr


@dataclass(frozen=True)
class ExtractedRow:
    paper_id: str
    primary_author: str
    max_h: int
    venue: Optional[str]
    features: FeatureVector


def venue_factors(ctx: ExtractionContext, paper: Paper, max_h: int,
                  own_citations: Optional[int] = None) -> Tuple[float, float]:
    """(V-ratio-max, V-citation) over the venue's earlier papers, target excluded.

    ``own_citations`` is the target's own count when it is part of the
    venue's slice, so it can be removed.
    """
    if paper.venue is None:
        return 0.0, 0.0
    cites = ctx.venue_citations(paper.venue)
    n = cites.size
    total = float(cites.sum())
    qualifying = n - int(np.searchsorted(cites, max_h, side="left"))
    if own_citations is not None:
        n -= 1
        total -= own_citations
        qualifying -= int(own_citations >= max_h)
    if n <= 0:
        return 0.0, 0.0
    return qualifying / n, _ratio(total / n, max_h)


def reference_factors(ctx: ExtractionContext, paper: Paper, max_h: int) -> Tuple[float, float]:
    """(R-ratio-max, R-citation) over references resolvable in the corpus."""
    idx = [ctx.corpus.paper_index(r) for r in paper.references if r in ctx.corpus]
    if not idx:
        return 0.0, 0.0
    c = ctx.citations[idx]
    return float(np.count_nonzero(c >= max_h)) / len(idx), _ratio(float(c.mean()), max_h)


def temporal_factors(ctx: ExtractionContext, author_idx: Sequence[int],
                     primary_pos: int) -> Tuple[float, float, float, float]:
    """(T-ave-h, T-max-h, T-h-first, T-h-max) from 3-year h-index deltas."""
    a = np.asarray(author_idx, dtype=np.int64)
    deltas = (ctx.h_now[a] - ctx.h_prev[a]).astype(float)
    return float(deltas.mean()), float(deltas.max()), float(deltas[0]), float(deltas[primary_pos])


def extract(ctx: ExtractionContext, paper: Paper,
            theta: Optional[np.ndarray] = None) -> Tuple[FeatureVector, str, int]:
    """Compute all 26 factors for a paper published at ``ctx.t``.

    The paper need not be part of the corpus (ad-hoc prediction); in that
    case ``theta`` must be supplied.  Returns the vector, the primary author
    and the max-h-index.
    """
    corpus = ctx.corpus
    if paper.year != ctx.t:
        raise ContractError(f"paper {paper.id!r} is from {paper.year}, not {ctx.t}")
    if not paper.authors:
        raise ContractError(f"paper {paper.id!r} has no authors")
    missing = [a for a in paper.authors if not corpus.has_author(a)]
    if missing:
        raise UnknownIdError(f"authors not found in corpus: {missing}")

    own = corpus.paper_index(paper.id) if paper.id in corpus else None
    if theta is None:
        if own is None:
            raise ContractError(f"ad-hoc paper {paper.id!r} needs an explicit topic distribution")
        theta = ctx.theta_of(own)
        if theta is None:
            raise UnknownIdError(f"paper {paper.id!r} has no topic distribution")
    theta = np.asarray(theta, dtype=float)
    own_cites = int(ctx.citations[own]) if own is not None else 0

    aidx = [corpus.author_index(a) for a in paper.authors]
    hs = ctx.h_now[aidx].astype(float)
    primary_pos = int(np.argmax(hs))
    max_h = int(hs[primary_pos])
    if max_h < 1:
        raise ContractError(f"paper {paper.id!r} has max-h-index 0")
    prior = ctx.paper_counts[aidx] - (1 if own is not None else 0)

    v = {}
    v["A-first-max"] = hs[0] / max_h
    v["A-ave-max"] = hs.mean() / max_h
    v["A-sum-max"] = hs.sum() / max_h
    v["A-first-ratio"] = _ratio(hs[0], prior[0])
    v["A-max-ratio"] = _ratio(max_h, prior[primary_pos])
    v["A-num-authors"] = float(len(aidx))
    v["A-num-first"] = float(prior[0])

    pop = float(np.dot(ctx.popularity.values, theta))
    v["C-popularity"] = pop
    v["C-popularity-ratio"] = pop / max_h
    ref_thetas = [ctx.theta_of(corpus.paper_index(r)) if r in corpus else None
                  for r in paper.references]
    v["C-novelty"] = c_novelty(theta, ref_thetas)
    v["C-diversity"] = c_diversity(theta)
    own_theta = ctx.theta_of(own) if own is not None else None
    auth = []
    for ai in aidx:
        prof = ctx.authority(ai)
        if own_theta is not None and own_cites:
            prof = prof - own_theta * own_cites
        auth.append(float(np.dot(theta, prof)))
    v["C-authority-first"] = auth[0]
    v["C-authority-max"] = auth[primary_pos]
    v["C-authority-ave"] = float(np.mean(auth))

    in_venue = own is not None and paper.venue is not None and \
        corpus.papers[paper.id].venue == paper.venue
    v["V-ratio-max"], v["V-citation"] = venue_factors(
        ctx, paper, max_h, own_cites if in_venue else None)

    if ctx.social is not None:
        s = social_factors(ctx.net, ctx.social, paper.authors, max_h)
    else:
        s = (0.0, 0.0, 0.0, 0.0)
    v["S-degree"], v["S-pagerank"], v["S-h-co-author"], v["S-h-weight"] = s

    v["R-ratio-max"], v["R-citation"] = reference_factors(ctx, paper, max_h)
    v["T-ave-h"], v["T-max-h"], v["T-h-first"], v["T-h-max"] = \
        temporal_factors(ctx, aidx, primary_pos)

    fv = FeatureVector.from_mapping(v)
    if not np.isfinite(fv.values).all():
        raise DataError(f"non-finite factor for paper {paper.id!r}")
    return fv, paper.authors[primary_pos], max_h


def worker_count(threads: Optional[int] = None) -> int:
    if threads is None:
        threads = int(os.environ.get("IMPACTLAB_THREADS", "1") or 1)
    return max(1, int(threads))


def extract_all(ctx: ExtractionContext, min_h: int = 1,
                threads: Optional[int] = None) -> Tuple[List[ExtractedRow], Dict[str, int]]:
    """Extract every paper published at ``ctx.t`` whose max-h-index is >= ``min_h``.

    Returns rows in corpus order plus exclusion counts.
    """
    corpus = ctx.corpus
    targets = [corpus.papers[p] for p in corpus.year_index.get(ctx.t, ())]
    excluded = {"no_authors": 0, "below_min_h": 0}
    eligible = []
    for p in targets:
        if not p.authors:
            excluded["no_authors"] += 1
            continue
        max_h = int(max(ctx.h_now[corpus.author_index(a)] for a in p.authors))
        if max_h < max(min_h, 1):
            excluded["below_min_h"] += 1
            continue
        eligible.append(p)

    def one(p):
        fv, primary, max_h = extract(ctx, p)
        return ExtractedRow(p.id, primary, max_h, p.venue, fv)

    n = worker_count(threads)
    if n == 1:
        rows = [one(p) for p in eligible]
    else:
        with ThreadPoolExecutor(max_workers=n) as pool:
            rows = list(pool.map(one, eligible))
    return rows, excluded


# --- CSV artifact -----------------------------------------------------------------

ID_COLUMNS = ("paper_id", "primary_author", "max_h", "venue")


def write_features_csv(rows: Iterable[ExtractedRow], path, meta: Optional[dict] = None) -> None:
    """Leading ``# key=value`` metadata lines, then a header and one row per paper."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for k, v in sorted((meta or {}).items()):
            fh.write(f"# {k}={'' if v is None else v}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ID_COLUMNS + FACTORS)
        for r in rows:
            w.writerow([r.paper_id, r.primary_author, r.max_h, r.venue or ""]
                       + [repr(float(x)) for x in r.features.values])


def read_features_csv(path) -> Tuple[List[ExtractedRow], dict]:
    meta = {}
    rows = []
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            line = fh.readline()
            while line.startswith("# "):
                k, _, val = line[2:].rstrip("\n").partition("=")
                meta[k] = val
                line = fh.readline()
            header = next(csv.reader([line]))
            if tuple(header) != ID_COLUMNS + FACTORS:
                raise DataError(f"{path}: unexpected header")
            for rec in csv.reader(fh):
                if not rec:
                    continue
                rows.append(ExtractedRow(
                    rec[0], rec[1], int(rec[2]), rec[3] or None,
                    FeatureVector([float(x) for x in rec[4:]])))
    except (OSError, ValueError, StopIteration) as exc:
        raise DataError(f"cannot read features {path}: {exc}") from exc
    return rows, meta
