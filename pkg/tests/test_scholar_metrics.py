import math
from collections import defaultdict

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from impactlab import scholar_metrics as M
from impactlab.corpus import Corpus
from impactlab.errors import ContractError

from .helpers import brute_h, corpus_of, flat_citations, paper, random_micro_corpus


def cited(pid, n, year=2001, author="citer"):
    """``n`` papers citing ``pid``."""
    return [paper(f"{pid}-c{i}", (f"{author}{pid}{i}",), year, refs=[pid]) for i in range(n)]


def author_with_counts(counts, author="x", year=2000):
    ps = []
    for k, c in enumerate(counts):
        pid = f"{author}{k}"
        ps.append(paper(pid, (author,), year))
        ps.extend(cited(pid, c))
    return ps


def test_h_example_3_1_5():
    corpus = corpus_of(*author_with_counts([3, 1, 5]))
    assert M.h_index(corpus, "x", 2005) == 2
    assert M.h_from_counts([3, 1, 5]) == 2


def test_h_of_author_without_papers_by_y():
    corpus = corpus_of(*author_with_counts([3, 1, 5], year=2004))
    assert M.h_index(corpus, "x", 2003) == 0


def test_h_from_counts_edge_cases():
    assert M.h_from_counts([]) == 0
    assert M.h_from_counts([0, 0]) == 0
    assert M.h_from_counts([10, 10, 10]) == 3
    assert M.h_from_counts([1]) == 1


@pytest.mark.parametrize("hs,expected,tie", [((4, 7), ("b", 7), False),
                                              ((5, 5), ("a", 5), True),
                                              ((3,), ("a", 3), False)])
def test_primary_author(hs, expected, tie):
    names = "ab"[: len(hs)]
    ps = []
    for name, h in zip(names, hs):
        ps += author_with_counts([h] * h, author=name)
    ps.append(paper("target", names, 2002))
    corpus = corpus_of(*ps)
    pa = M.primary_author(corpus, "target", 2002)
    assert (pa.author, pa.max_h) == expected
    assert pa.tie_broken is tie
    lookup = M.h_index_all(corpus, 2002)
    assert M.primary_author(corpus, "target", 2002, lookup) == pa


def test_primary_author_needs_authors():
    corpus = corpus_of(paper("p", authors=()))
    with pytest.raises(ContractError):
        M.primary_author(corpus, "p", 2000)


def test_delta_h_window():
    # h 2 at 2004, 5 at 2007
    ps = [paper(f"x{k}", ("x",), 2000) for k in range(5)]
    for k in range(5):
        year = 2003 if k < 2 else 2006
        ps += [paper(f"x{k}-c{i}", (f"c{k}{i}",), year, refs=[f"x{k}"]) for i in range(5)]
    corpus = corpus_of(*ps)
    assert M.h_index(corpus, "x", 2004) == 2
    assert M.h_index(corpus, "x", 2007) == 5
    assert M.delta_h(corpus, "x", 2007) == 3
    assert M.delta_h(corpus, "x", 2012) == 0


def test_delta_h_of_new_author_equals_h():
    ps = [paper("old", ("y",), 1990), paper("new", ("n",), 2007, refs=[]),
          paper("c", ("z",), 2007, refs=["new"])]
    corpus = corpus_of(*ps)
    assert M.delta_h(corpus, "n", 2007) == M.h_index(corpus, "n", 2007) == 1


def test_characterize_single_author_zero_citations():
    ch = M.characterize(corpus_of(paper("p", ("a",), 2000)), 2000)
    assert ch.h_histogram == {0: 1}
    assert ch.citation_histogram == {0: 1}


@settings(max_examples=1000, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_h_index_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    papers, names = random_micro_corpus(rng, max_papers=50, max_authors=10)
    corpus = Corpus(papers)
    y = int(rng.integers(1999, 2012))
    h_all = M.h_index_all(corpus, y)
    for a in names:
        if not corpus.has_author(a):
            continue
        expected = brute_h(papers, a, y)
        assert M.h_index(corpus, a, y) == expected
        assert h_all[corpus.author_index(a)] == expected


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_h_index_monotone_and_bounded(seed):
    rng = np.random.default_rng(seed)
    papers, names = random_micro_corpus(rng, max_papers=30, max_authors=5)
    corpus = Corpus(papers)
    for a in corpus.author_ids:
        prev = 0
        for y in range(1999, 2012):
            h = M.h_index(corpus, a, y)
            mine = [p for p in papers if a in p.authors and p.year <= y]
            top = max([flat_citations(papers, p.id, y) for p in mine], default=0)
            assert h >= prev
            assert h <= min(len(mine), top)
            assert (h == 0) == (top == 0)
            prev = h


def _flat_tables(papers, y):
    """Characterization tables recomputed by scanning flat lists."""
    live = [p for p in papers if p.year <= y]
    authors = sorted({a for p in live for a in p.authors})
    cites = {p.id: flat_citations(papers, p.id, y) for p in live}
    h = {a: brute_h(papers, a, y) for a in authors}
    per = defaultdict(dict)
    for a in authors:
        mine = [p for p in live if a in p.authors]
        co = {b for p in mine for b in p.authors} - {a}
        per["papers"][a] = len(mine)
        per["avg_citations"][a] = sum(cites[p.id] for p in mine) / len(mine)
        per["coauthors"][a] = len(co)
        per["h_ratio"][a] = h[a] / len(mine)
        per["years_active"][a] = max(p.year for p in mine) - min(p.year for p in mine) + 1
        if co:
            per["coauthor_h"][a] = sum(h[b] for b in co) / len(co)
    tables = {}
    for name, vals in per.items():
        buckets = defaultdict(list)
        for a, v in vals.items():
            buckets[h[a]].append(v)
        rows = []
        for hv in sorted(buckets):
            v = buckets[hv]
            mean = sum(v) / len(v)
            ci = None
            if len(v) >= 2:
                sd = math.sqrt(sum((x - mean) ** 2 for x in v) / (len(v) - 1))
                ci = 1.96 * sd / math.sqrt(len(v))
            rows.append((hv, len(v), mean, ci))
        tables[name] = rows
    hist = defaultdict(int)
    for c in cites.values():
        hist[c] += 1
    hh = defaultdict(int)
    for v in h.values():
        hh[v] += 1
    return tables, dict(hist), dict(hh)


def test_characterization_matches_flat_scan():
    rng = np.random.default_rng(7)
    names = [f"r{i}" for i in range(100)]
    papers = []
    for i in range(400):
        yr = 1995 + i // 30
        auth = tuple(dict.fromkeys(names[j] for j in rng.choice(100, size=rng.integers(1, 4))))
        refs = [str(j) for j in rng.choice(i, size=min(i, int(rng.integers(0, 8))), replace=False)] if i else []
        papers.append(paper(i, auth, yr, refs))
    corpus = Corpus(papers)
    y = 2005
    ch = M.characterize(corpus, y)
    tables, hist, hh = _flat_tables(papers, y)
    assert ch.citation_histogram == hist
    assert ch.h_histogram == hh
    assert set(ch.conditional) == set(M.CONDITIONAL_TABLES)
    for name in M.CONDITIONAL_TABLES:
        got, want = ch.conditional[name], tables[name]
        assert [r[:2] for r in got] == [r[:2] for r in want], name
        for g, w in zip(got, want):
            assert g[2] == pytest.approx(w[2], rel=1e-12, abs=1e-12)
            assert (g[3] is None) == (w[3] is None)
            if w[3] is not None:
                assert g[3] == pytest.approx(w[3], rel=1e-9, abs=1e-12)


def test_coauthor_matrix_symmetric_without_diagonal():
    corpus = corpus_of(paper("1", ("a", "b", "c")), paper("2", ("a", "b")))
    co = M.coauthor_matrix(corpus, 2000).toarray()
    i = {a: corpus.author_index(a) for a in "abc"}
    assert co[i["a"], i["b"]] == 2
    assert co[i["a"], i["c"]] == 1
    assert np.allclose(co, co.T)
    assert np.all(np.diag(co) == 0)


def test_author_slice():
    corpus = corpus_of(paper("1", ("a", "b"), 2000), paper("2", ("a", "c"), 2005))
    s = M.author_slice(corpus, "a", 2001)
    assert s.paper_count == 1
    assert s.coauthor_ids == frozenset({"b"})
