"""Time-sliced h-index, primary-author resolution and h-index characterisation."""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp

from .corpus import Corpus, Paper
from .errors import ContractError


@dataclass(frozen=True)
class AuthorSlice:
    author: str
    as_of: int
    h_index: int
    paper_count: int
    coauthor_ids: frozenset


@dataclass(frozen=True)
class PrimaryAuthor:
    author: str
    max_h: int
    tie_broken: bool


def h_from_counts(counts) -> int:
    """Largest h such that at least h of the given citation counts are >= h."""
    c = np.sort(np.asarray(counts, dtype=np.int64))[::-1]
    ranks = np.arange(1, c.size + 1)
    return int(np.count_nonzero(c >= ranks))


def h_index(corpus: Corpus, author: str, y: int) -> int:
    corpus.author_index(author)
    counts = corpus.citation_counts(y)
    rows = [corpus.paper_index(pid) for pid in corpus.author_papers[author]]
    rows = [i for i in rows if corpus.years[i] <= y]
    return h_from_counts(counts[rows])


def h_index_all(corpus: Corpus, y: int) -> np.ndarray:
    """h-index of every author at year ``y``, aligned with ``corpus.author_ids``."""
    n_authors = len(corpus.author_ids)
    counts = corpus.citation_counts(y)
    keep = corpus.years[corpus.authorship_paper] <= y
    a = corpus.authorship_author[keep]
    c = counts[corpus.authorship_paper[keep]]
    if a.size == 0:
        return np.zeros(n_authors, dtype=np.int64)
    order = np.lexsort((-c, a))
    a, c = a[order], c[order]
    starts = np.flatnonzero(np.r_[True, a[1:] != a[:-1]])
    lengths = np.diff(np.r_[starts, a.size])
    rank = np.arange(a.size) - np.repeat(starts, lengths) + 1
    return np.bincount(a[c >= rank], minlength=n_authors).astype(np.int64)


def paper_counts_all(corpus: Corpus, y: int) -> np.ndarray:
    keep = corpus.years[corpus.authorship_paper] <= y
    return np.bincount(corpus.authorship_author[keep],
                       minlength=len(corpus.author_ids)).astype(np.int64)


def primary_author(corpus: Corpus, paper: Union[Paper, str], y: int,
                   h_lookup: Optional[np.ndarray] = None) -> PrimaryAuthor:
    """Author with the highest h-index at ``y``; ties go to the earliest listed.

    ``h_lookup`` is an optional precomputed ``h_index_all(corpus, y)``.
    """
    if isinstance(paper, str):
        paper = corpus.paper(paper)
    if not paper.authors:
        raise ContractError(f"paper {paper.id!r} has no authors")
    if h_lookup is None:
        hs = [h_index(corpus, a, y) for a in paper.authors]
    else:
        hs = [int(h_lookup[corpus.author_index(a)]) for a in paper.authors]
    best = max(hs)
    pos = hs.index(best)
    return PrimaryAuthor(paper.authors[pos], best, hs.count(best) > 1)


def delta_h(corpus: Corpus, author: str, y: int, window: int = 3) -> int:
    return h_index(corpus, author, y) - h_index(corpus, author, y - window)


def coauthor_matrix(corpus: Corpus, y: int) -> sp.csr_matrix:
    """Symmetric author x author matrix of co-authored paper counts (year <= y)."""
    keep = corpus.years[corpus.authorship_paper] <= y
    rows = corpus.authorship_paper[keep]
    cols = corpus.authorship_author[keep]
    m = sp.csr_matrix((np.ones(rows.size), (rows, cols)),
                      shape=(len(corpus), len(corpus.author_ids)))
    co = (m.T @ m).tocsr()
    co = (co - sp.diags(co.diagonal())).tocsr()
    co.eliminate_zeros()
    return co


def author_slice(corpus: Corpus, author: str, y: int) -> AuthorSlice:
    corpus.author_index(author)
    pids = [p for p in corpus.author_papers[author] if corpus.papers[p].year <= y]
    co = set()
    for pid in pids:
        co.update(corpus.papers[pid].authors)
    co.discard(author)
    return AuthorSlice(author, y, h_index(corpus, author, y), len(pids), frozenset(co))


# --- characterisation ---------------------------------------------------------

CONDITIONAL_TABLES = ("papers", "avg_citations", "coauthors", "h_ratio",
                      "coauthor_h", "years_active")


@dataclass
class Characterization:
    """Distribution and conditional-mean tables for a corpus slice.

    ``conditional[name]`` rows are ``(h, n, mean, ci_half_width)`` with
    ``ci_half_width`` None for buckets holding fewer than two authors.
    """
    as_of: int
    citation_histogram: Dict[int, int]
    h_histogram: Dict[int, int]
    conditional: Dict[str, List[tuple]] = field(default_factory=dict)
    summary: Dict[str, float] = field(default_factory=dict)


def _bucket_means(h: np.ndarray, values: np.ndarray) -> List[tuple]:
    rows = []
    for hv in np.unique(h):
        v = values[h == hv]
        mean = float(v.mean())
        ci = None
        if v.size >= 2:
            ci = 1.96 * float(v.std(ddof=1)) / math.sqrt(v.size)
        rows.append((int(hv), int(v.size), mean, ci))
    return rows


def characterize(corpus: Corpus, y: int) -> Characterization:
    counts = corpus.citation_counts(y)
    in_slice = corpus.years <= y
    cvals, cfreq = np.unique(counts[in_slice], return_counts=True)

    h_all = h_index_all(corpus, y)
    n_papers = paper_counts_all(corpus, y)
    active = n_papers > 0
    hvals, hfreq = np.unique(h_all[active], return_counts=True)

    keep = corpus.years[corpus.authorship_paper] <= y
    a = corpus.authorship_author[keep]
    p = corpus.authorship_paper[keep]
    n_auth = len(corpus.author_ids)
    cite_sum = np.bincount(a, weights=counts[p], minlength=n_auth)
    yrs = corpus.years[p]
    first = np.full(n_auth, np.iinfo(np.int64).max)
    last = np.full(n_auth, np.iinfo(np.int64).min)
    np.minimum.at(first, a, yrs)
    np.maximum.at(last, a, yrs)

    co = coauthor_matrix(corpus, y)
    binary = co.copy()
    binary.data[:] = 1.0
    degree = np.asarray(binary.sum(axis=1)).ravel()
    co_h_sum = binary @ h_all.astype(float)

    idx = np.flatnonzero(active)
    h = h_all[idx]
    tables = {
        "papers": _bucket_means(h, n_papers[idx].astype(float)),
        "avg_citations": _bucket_means(h, cite_sum[idx] / n_papers[idx]),
        "coauthors": _bucket_means(h, degree[idx]),
        "h_ratio": _bucket_means(h, h / n_papers[idx]),
        "years_active": _bucket_means(h, (last[idx] - first[idx] + 1).astype(float)),
    }
    with_co = idx[degree[idx] > 0]
    tables["coauthor_h"] = _bucket_means(h_all[with_co], co_h_sum[with_co] / degree[with_co])
    tables = {k: tables[k] for k in CONDITIONAL_TABLES}

    n_slice = int(in_slice.sum())
    over50 = int((counts[in_slice] > 50).sum())
    over60 = int((h_all[active] > 60).sum())
    summary = {
        "papers": n_slice,
        "authors": int(active.sum()),
        "papers_over_50_citations": over50,
        "papers_over_50_citations_fraction": over50 / n_slice if n_slice else 0.0,
        "authors_h_over_60": over60,
        "authors_h_over_60_fraction": over60 / int(active.sum()) if active.any() else 0.0,
    }
    return Characterization(
        as_of=y,
        citation_histogram={int(k): int(v) for k, v in zip(cvals, cfreq)},
        h_histogram={int(k): int(v) for k, v in zip(hvals, hfreq)},
        conditional=tables,
        summary=summary,
    )
