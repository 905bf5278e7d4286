"""
Seeded synthetic corpora in ArnetMiner format.

Generative story, per paper in year order:

1. pick a lead author from a Polya urn (weight = papers so far + 1), then
   co-authors from the lead's home-topic community or the global urn;
2. draw a planted topic: the lead's home topic, or a random one;
3. fitness = max over authors of talent, damped for authors writing outside
   their home topic;
4. words come from the topic's vocabulary block (plus a shared block);
5. references go to strictly earlier papers of the same topic with weight
   ``(citations + 1) ** strength * fitness * exp(-age / recency)``;
6. venue tier follows fitness rank plus noise.

Authority on the planted topic therefore predicts future citations, which
gives the feature pipeline a learnable signal.
"""

import io
import math
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Tuple

import numpy as np

from .corpus import Paper, write_arnetminer
from .errors import ConfigurationError


@dataclass
class SynthConfig:
    papers: int = 5000
    authors: int = 1500
    venues: int = 20
    topics: int = 10
    years: Tuple[int, int] = (2000, 2012)
    vocab_size: int = 2000
    preferential_attachment_strength: float = 0.5
    mean_references: float = 15.0
    mean_authors_per_paper: float = 2.5
    words_per_paper: int = 40
    on_topic_probability: float = 0.5
    off_topic_fitness: float = 0.1
    recency: float = 4.0
    venue_noise: float = 0.8
    talent_sigma: float = 0.3
    seed: int = 0

    def validate(self):
        for name in ("papers", "authors", "venues", "topics", "vocab_size", "words_per_paper"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be >= 1")
        lo, hi = self.years
        if hi < lo:
            raise ConfigurationError("empty year range")
        if self.venue_noise < 0 or self.talent_sigma < 0:
            raise ConfigurationError("venue_noise and talent_sigma must be >= 0")
        if self.preferential_attachment_strength < 0:
            raise ConfigurationError("preferential_attachment_strength must be >= 0")
        if self.mean_references < 0 or self.mean_authors_per_paper < 1:
            raise ConfigurationError("mean_references >= 0 and mean_authors_per_paper >= 1 required")
        if self.papers > 1 and self.mean_references >= self.papers - 1:
            raise ConfigurationError(
                f"mean_references={self.mean_references} needs more than {self.papers - 1} earlier papers")
        if self.vocab_size < 2 * self.topics:
            raise ConfigurationError("vocab_size must give every topic at least two words")


def _truncated_geometric(rng, mean: float, cap: int) -> int:
    if mean <= 1 or cap <= 1:
        return 1
    p = 1.0 / mean
    while True:
        k = int(rng.geometric(p))
        if k <= cap:
            return k


def generate(config: SynthConfig) -> Tuple[str, Dict]:
    """Generate ``(arnetminer_text, truth)``; byte-identical for equal configs."""
    config.validate()
    cfg = config
    rng = np.random.default_rng(cfg.seed)
    T = cfg.topics

    home = rng.integers(0, T, size=cfg.authors)
    talent = rng.lognormal(0.0, cfg.talent_sigma, size=cfg.authors)
    productivity = np.zeros(cfg.authors)
    community = [np.flatnonzero(home == z) for z in range(T)]

    shared = max(1, cfg.vocab_size // 10)
    block = (cfg.vocab_size - shared) // T
    if block < 2:
        shared = cfg.vocab_size - 2 * T
        block = 2
    zipf = 1.0 / np.arange(1, block + 1)
    zipf /= zipf.sum()

    lo, hi = cfg.years
    years = np.sort(rng.integers(lo, hi + 1, size=cfg.papers))

    topics = np.empty(cfg.papers, dtype=np.int64)
    fitness = np.empty(cfg.papers)
    author_lists: List[List[int]] = []
    for i in range(cfg.papers):
        k = _truncated_geometric(rng, cfg.mean_authors_per_paper, min(10, cfg.authors))
        w = productivity + 1.0
        lead = int(rng.choice(cfg.authors, p=w / w.sum()))
        chosen = [lead]
        while len(chosen) < k:
            pool = community[home[lead]] if rng.random() < 0.7 else np.arange(cfg.authors)
            pool = pool[~np.isin(pool, chosen)]
            if pool.size == 0:
                pool = np.setdiff1d(np.arange(cfg.authors), chosen)
                if pool.size == 0:
                    break
            pw = productivity[pool] + 1.0
            chosen.append(int(rng.choice(pool, p=pw / pw.sum())))
        for a in chosen:
            productivity[a] += 1
        z = int(home[lead]) if rng.random() < cfg.on_topic_probability else int(rng.integers(T))
        topics[i] = z
        fitness[i] = max(talent[a] * (1.0 if home[a] == z else cfg.off_topic_fitness)
                         for a in chosen)
        author_lists.append(chosen)

    # venue tier follows fitness rank with noise
    fit_rank = (np.argsort(np.argsort(fitness)) + 0.5) / cfg.papers
    tier = np.clip(fit_rank + rng.normal(0.0, cfg.venue_noise, size=cfg.papers), 0.0, 1.0 - 1e-9)
    venue_of = (tier * cfg.venues).astype(np.int64)

    indeg = np.zeros(cfg.papers)
    by_topic: List[List[int]] = [[] for _ in range(T)]
    papers: List[Paper] = []
    n_words = cfg.words_per_paper
    for i in range(cfg.papers):
        z = topics[i]
        cands = np.array([j for j in by_topic[z] if years[j] < years[i]], dtype=np.int64)
        refs: List[int] = []
        if cands.size and cfg.mean_references > 0:
            r = min(int(rng.poisson(cfg.mean_references)), cands.size)
            if r:
                age = years[i] - years[cands]
                w = ((indeg[cands] + 1.0) ** cfg.preferential_attachment_strength
                     * fitness[cands] * np.exp(-age / cfg.recency))
                refs = [int(j) for j in rng.choice(cands, size=r, replace=False, p=w / w.sum())]
                indeg[refs] += 1
        by_topic[z].append(i)

        topical = rng.random(n_words) < 0.85
        words = np.where(topical,
                         z * block + rng.choice(block, size=n_words, p=zipf),
                         T * block + rng.integers(0, shared, size=n_words))
        tokens = [f"w{int(x)}" for x in words]
        papers.append(Paper(
            id=str(i + 1), title=" ".join(tokens[:6]),
            authors=tuple(f"author{a:05d}" for a in author_lists[i]),
            year=int(years[i]), venue=f"venue{int(venue_of[i]):02d}",
            abstract=" ".join(tokens[6:]), references=tuple(str(j + 1) for j in refs),
        ))

    buf = io.StringIO()
    write_arnetminer(papers, buf)
    truth = {
        "config": asdict(cfg),
        "papers": {p.id: {"topic": int(topics[i]), "fitness": float(fitness[i])}
                   for i, p in enumerate(papers)},
        "authors": {f"author{a:05d}": {"home_topic": int(home[a]), "talent": float(talent[a])}
                    for a in range(cfg.authors)},
    }
    truth["config"]["years"] = list(cfg.years)
    return buf.getvalue(), truth
