"""Weighted co-authorship network, weighted PageRank and the social factors."""

import logging
from dataclasses import dataclass
from typing import Dict, Iterator, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from .corpus import Corpus
from .errors import ConfigurationError, DataError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class CollabNet:
    """Undirected author graph; ``weights[i, j]`` counts co-authored papers."""
    authors: Tuple[str, ...]
    weights: sp.csr_matrix
    as_of: Optional[int] = None
    fingerprint: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "_index", {a: i for i, a in enumerate(self.authors)})

    def __len__(self):
        return len(self.authors)

    def index(self, author) -> Optional[int]:
        return self._index.get(author)

    def edges(self) -> Iterator[Tuple[str, str, int]]:
        upper = sp.triu(self.weights, k=1).tocoo()
        order = np.lexsort((upper.col, upper.row))
        for i, j, w in zip(upper.row[order], upper.col[order], upper.data[order]):
            yield self.authors[i], self.authors[j], int(w)

    @property
    def n_edges(self) -> int:
        return int(sp.triu(self.weights, k=1).nnz)

    def degrees(self) -> np.ndarray:
        return np.diff(self.weights.indptr).astype(np.int64)


def from_edges(authors: Sequence[str], edges, as_of=None, fingerprint=None) -> CollabNet:
    """Build a net from ``(u, v, weight)`` triples over the given node list."""
    index = {a: i for i, a in enumerate(authors)}
    rows, cols, vals = [], [], []
    for u, v, w in edges:
        if u == v:
            raise DataError(f"self-loop on {u!r}")
        i, j = index[u], index[v]
        rows += [i, j]
        cols += [j, i]
        vals += [w, w]
    n = len(authors)
    w = sp.csr_matrix((np.array(vals, dtype=float), (rows, cols)), shape=(n, n))
    w.sum_duplicates()
    return CollabNet(tuple(authors), w, as_of, fingerprint)


def build_collab_net(corpus: Corpus, y: int) -> CollabNet:
    """One node per author with a paper by ``y``; edge weight = shared papers by ``y``."""
    keep = corpus.years[corpus.authorship_paper] <= y
    nodes = np.unique(corpus.authorship_author[keep])
    remap = np.full(len(corpus.author_ids), -1, dtype=np.int64)
    remap[nodes] = np.arange(nodes.size)
    rows = corpus.authorship_paper[keep]
    cols = remap[corpus.authorship_author[keep]]
    m = sp.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(len(corpus), nodes.size))
    w = (m.T @ m).tocsr()
    w = (w - sp.diags(w.diagonal())).tocsr()
    w.eliminate_zeros()
    w.sort_indices()
    authors = tuple(corpus.author_ids[i] for i in nodes)
    return CollabNet(authors, w, y, corpus.fingerprint)


@dataclass(frozen=True, eq=False)
class PageRankScores:
    scores: np.ndarray
    damping: float
    iterations_used: int
    converged: bool

    def __getitem__(self, i):
        return self.scores[i]


def pagerank(net: CollabNet, damping: float = 0.85, tolerance: float = 1e-10,
             max_iterations: int = 200) -> PageRankScores:
    """Weighted PageRank by power iteration.

    A walker at u moves to neighbour v with probability w(u, v) / strength(u).
    Isolated nodes are dangling: their mass is spread uniformly.
    """
    n = len(net)
    if n == 0:
        raise ConfigurationError("pagerank on an empty network")
    if not 0.0 < damping < 1.0:
        raise ConfigurationError("damping must lie in (0, 1)")
    strength = np.asarray(net.weights.sum(axis=1)).ravel()
    dangling = strength == 0
    inv = np.zeros(n)
    inv[~dangling] = 1.0 / strength[~dangling]
    # transpose of the row-stochastic transition matrix
    trans_t = (sp.diags(inv) @ net.weights).T.tocsr()
    r = np.full(n, 1.0 / n)
    converged = False
    it = 0
    for it in range(1, max_iterations + 1):
        new = damping * (trans_t @ r + r[dangling].sum() / n) + (1.0 - damping) / n
        new /= new.sum()
        delta = np.abs(new - r).sum()
        r = new
        if delta < tolerance:
            converged = True
            break
    if not converged:
        logger.warning("pagerank did not converge in %d iterations", max_iterations)
    return PageRankScores(r, damping, it, converged)


@dataclass(frozen=True, eq=False)
class SocialStats:
    """Per-node social metrics aligned with ``net.authors``."""
    degree: np.ndarray
    pagerank: np.ndarray
    coauthor_h: np.ndarray
    weighted_coauthor_h: np.ndarray


def social_stats(net: CollabNet, scores: PageRankScores, h_of_node: np.ndarray) -> SocialStats:
    """Degree, PageRank and (weighted) mean co-author h-index for every node.

    ``h_of_node`` holds each node's h-index, aligned with ``net.authors``.
    Nodes without co-authors get 0 for both co-author metrics.
    """
    h = np.asarray(h_of_node, dtype=float)
    binary = net.weights.copy()
    binary.data[:] = 1.0
    degree = net.degrees()
    strength = np.asarray(net.weights.sum(axis=1)).ravel()
    co_h = np.zeros(len(net))
    w_h = np.zeros(len(net))
    has = degree > 0
    co_h[has] = (binary @ h)[has] / degree[has]
    w_h[has] = (net.weights @ h)[has] / strength[has]
    return SocialStats(degree, scores.scores, co_h, w_h)


def social_factors(net: CollabNet, stats: SocialStats, authors: Sequence[str],
                   max_h: float) -> Tuple[float, float, float, float]:
    """(S-degree, S-pagerank, S-h-co-author, S-h-weight) for a paper's author list.

    Each metric is maximised over the authors; the two co-author h metrics
    are then divided by ``max_h``.  Authors missing from ``net`` count as
    isolated with zero PageRank.
    """
    deg = pr = co = wco = 0.0
    for a in authors:
        i = net.index(a)
        if i is None:
            continue
        deg = max(deg, float(stats.degree[i]))
        pr = max(pr, float(stats.pagerank[i]))
        co = max(co, float(stats.coauthor_h[i]))
        wco = max(wco, float(stats.weighted_coauthor_h[i]))
    if max_h > 0:
        co /= max_h
        wco /= max_h
    else:
        co = wco = 0.0
    return deg, pr, co, wco


def save_edge_list(net: CollabNet, path) -> None:
    """Tab-separated ``author_u  author_v  weight`` lines after ``#`` metadata lines.

    ``# node`` lines list authors, so isolated nodes survive a round trip.
    """
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# fingerprint\t{net.fingerprint or ''}\n")
        fh.write(f"# as_of\t{'' if net.as_of is None else net.as_of}\n")
        for a in net.authors:
            fh.write(f"# node\t{a}\n")
        for u, v, w in net.edges():
            fh.write(f"{u}\t{v}\t{w}\n")


def load_edge_list(path) -> CollabNet:
    authors, edges = [], []
    fingerprint, as_of = None, None
    try:
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.rstrip("\n")
                if not line:
                    continue
                if line.startswith("# "):
                    key, _, value = line[2:].partition("\t")
                    if key == "fingerprint":
                        fingerprint = value or None
                    elif key == "as_of":
                        as_of = int(value) if value else None
                    elif key == "node":
                        authors.append(value)
                    continue
                u, v, w = line.split("\t")
                edges.append((u, v, int(w)))
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read collaboration network {path}: {exc}") from exc
    if not authors:
        authors = sorted({a for u, v, _ in edges for a in (u, v)})
    return from_edges(authors, edges, as_of, fingerprint)
