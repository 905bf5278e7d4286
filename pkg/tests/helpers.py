"""Independent oracles and fixture builders shared by the test modules.

The oracles deliberately avoid the library's own code paths: they scan
flat lists, enumerate pairs and solve linear systems directly.
"""

import itertools
import math

import numpy as np

from impactlab.corpus import Corpus, Paper

# desk-scale experiment settings used by the end-to-end tests
DESK_T = 2007
DESK_DT = 5
DESK_MIN_H = 3
DESK_TOPICS = 10
DESK_LDA_ITERS = 200


def paper(pid, authors=("a",), year=2000, refs=(), venue=None, title="", abstract=""):
    return Paper(id=str(pid), title=title, authors=tuple(authors), year=year,
                 venue=venue, abstract=abstract, references=tuple(str(r) for r in refs))


def corpus_of(*papers):
    return Corpus(list(papers))


def random_micro_corpus(rng, max_papers=50, max_authors=10, years=(2000, 2010)):
    """Random corpus with backward-in-time references; returns (papers, author names)."""
    n = int(rng.integers(1, max_papers + 1))
    n_auth = int(rng.integers(1, max_authors + 1))
    names = [f"u{i}" for i in range(n_auth)]
    yrs = np.sort(rng.integers(years[0], years[1] + 1, size=n))
    out = []
    for i in range(n):
        k = int(rng.integers(1, min(3, n_auth) + 1))
        auth = [names[j] for j in rng.choice(n_auth, size=k, replace=False)]
        earlier = [j for j in range(i) if yrs[j] <= yrs[i]]
        r = int(rng.integers(0, min(6, len(earlier)) + 1)) if earlier else 0
        refs = [str(j) for j in rng.choice(earlier, size=r, replace=False)] if r else []
        out.append(paper(i, auth, int(yrs[i]), refs))
    return out, names


# --- oracles ----------------------------------------------------------------------

def flat_citations(papers, pid, y):
    """Citations of ``pid`` from papers published by ``y``, by a full scan."""
    ids = {p.id for p in papers}
    assert pid in ids
    return sum(1 for p in papers if p.year <= y and pid in p.references and p.id != pid)


def brute_h(papers, author, y):
    """Try every h from the author's paper count downwards."""
    mine = [p for p in papers if author in p.authors and p.year <= y]
    cites = [flat_citations(papers, p.id, y) for p in mine]
    for h in range(len(cites), -1, -1):
        if sum(1 for c in cites if c >= h) >= h:
            return h
    return 0


def pair_auc(scores, labels):
    """Fraction of (positive, negative) pairs ordered correctly; ties count half."""
    pos = [s for s, l in zip(scores, labels) if l]
    neg = [s for s, l in zip(scores, labels) if not l]
    total = 0.0
    for p, q in itertools.product(pos, neg):
        total += 1.0 if p > q else 0.5 if p == q else 0.0
    return total / (len(pos) * len(neg))


def pagerank_linear(W, damping=0.85):
    """Stationary vector of the damped weighted walk by a direct linear solve."""
    W = np.asarray(W, dtype=float)
    n = W.shape[0]
    out = W.sum(axis=1)
    P = np.zeros_like(W)
    for i in range(n):
        P[i] = W[i] / out[i] if out[i] > 0 else np.full(n, 1.0 / n)
    # r = d P^T r + (1-d)/n  =>  (I - d P^T) r = (1-d)/n
    r = np.linalg.solve(np.eye(n) - damping * P.T, np.full(n, (1 - damping) / n))
    return r / r.sum()


def entropy2(labels):
    _, counts = np.unique(labels, return_counts=True)
    p = counts / counts.sum()
    return float(-sum(q * math.log2(q) for q in p if q > 0))


def central_difference(f, x, step=1e-5):
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = step
        g[i] = (f(x + e) - f(x - e)) / (2 * step)
    return g


def uniform_context(corpus, t, K=2):
    """Extraction context whose topic model gives every paper a flat mixture."""
    from impactlab.features import ExtractionContext
    from impactlab.topic_model import TopicModel

    ids = tuple(p for p in corpus.paper_ids if corpus.papers[p].year <= t)
    model = TopicModel(K=K, vocabulary={}, topic_word_counts=np.zeros((K, 0), dtype=np.int64),
                       doc_topic=np.full((len(ids), K), 1.0 / K), doc_ids=ids, alpha=1.0,
                       beta=0.01, seed=0, iterations=1, as_of=t, fingerprint=corpus.fingerprint)
    return ExtractionContext(corpus, t, model)
