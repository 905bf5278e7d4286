"""
LDA by collapsed Gibbs sampling, plus the topic-based content factors.

The content factors are all functions of per-document topic distributions
``theta = p(z|d)``:

* popularity   - citation-weighted topic mass of the corpus, dotted with theta
* novelty      - mean KL divergence from theta to the references' thetas
* diversity    - Shannon entropy of theta
* authority    - citation-weighted topic profile of an author, dotted with theta

Natural logarithms throughout.
"""

import json
import logging
from collections import Counter
from dataclasses import dataclass
from types import MappingProxyType
from typing import Iterable, List, Mapping, Optional, Sequence

import numpy as np
from numba import njit

from .corpus import Corpus
from .errors import ConfigurationError, DataError, UnknownIdError

logger = logging.getLogger(__name__)

MIN_TOKEN_COUNT = 5


@njit(cache=True)
def _gibbs_sweep(words, docs, z, nwk, ndk, nk, alpha, beta, vbeta, uniforms):
    n_topics = nk.size
    cdf = np.empty(n_topics)
    for i in range(words.size):
        w = words[i]
        d = docs[i]
        k = z[i]
        nwk[w, k] -= 1
        ndk[d, k] -= 1
        nk[k] -= 1
        total = 0.0
        for j in range(n_topics):
            total += (ndk[d, j] + alpha) * (nwk[w, j] + beta) / (nk[j] + vbeta)
            cdf[j] = total
        u = uniforms[i] * total
        k = 0
        while k < n_topics - 1 and cdf[k] <= u:
            k += 1
        z[i] = k
        nwk[w, k] += 1
        ndk[d, k] += 1
        nk[k] += 1


@njit(cache=True)
def _foldin_sweep(words, z, ndk, phi, alpha, uniforms):
    n_topics = ndk.size
    cdf = np.empty(n_topics)
    for i in range(words.size):
        w = words[i]
        ndk[z[i]] -= 1
        total = 0.0
        for j in range(n_topics):
            total += (ndk[j] + alpha) * phi[w, j]
            cdf[j] = total
        u = uniforms[i] * total
        k = 0
        while k < n_topics - 1 and cdf[k] <= u:
            k += 1
        z[i] = k
        ndk[k] += 1


@dataclass(frozen=True, eq=False)
class TopicModel:
    """Fitted LDA state.

    ``topic_word_counts`` is K x V; ``doc_topic`` is D x K with rows aligned
    to ``doc_ids``.  ``as_of`` and ``fingerprint`` tie the model to the
    corpus slice it was trained on (None for ad-hoc document sets).
    """
    K: int
    vocabulary: Mapping[str, int]
    topic_word_counts: np.ndarray
    doc_topic: np.ndarray
    doc_ids: tuple
    alpha: float
    beta: float
    seed: int
    iterations: int
    as_of: Optional[int] = None
    fingerprint: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "_rows", {d: i for i, d in enumerate(self.doc_ids)})

    def has_doc(self, doc_id) -> bool:
        return doc_id in self._rows

    def row(self, doc_id) -> int:
        try:
            return self._rows[doc_id]
        except KeyError:
            raise UnknownIdError(f"document {doc_id!r} has no topic distribution") from None

    def theta(self, doc_id) -> np.ndarray:
        return self.doc_topic[self.row(doc_id)]

    def rows_for(self, ids: Sequence) -> np.ndarray:
        """Model row for each id, -1 where the model has no distribution."""
        return np.array([self._rows.get(i, -1) for i in ids], dtype=np.int64)

    def phi(self) -> np.ndarray:
        """Smoothed word-given-topic probabilities, V x K."""
        V = len(self.vocabulary)
        nk = self.topic_word_counts.sum(axis=1)
        return (self.topic_word_counts.T + self.beta) / (nk + V * self.beta)

    def infer(self, tokens: Iterable[str], iterations: int = 100, seed: int = 0) -> np.ndarray:
        """Topic distribution for an unseen document by fold-in Gibbs sampling.

        Topic-word statistics stay fixed at the fitted values.
        """
        words = np.array([self.vocabulary[t] for t in tokens if t in self.vocabulary],
                         dtype=np.int64)
        if words.size == 0:
            return np.full(self.K, 1.0 / self.K)
        rng = np.random.default_rng(seed)
        z = rng.integers(0, self.K, size=words.size)
        ndk = np.bincount(z, minlength=self.K).astype(np.int64)
        phi = np.ascontiguousarray(self.phi())
        for _ in range(iterations):
            _foldin_sweep(words, z, ndk, phi, self.alpha, rng.random(words.size))
        return (ndk + self.alpha) / (words.size + self.K * self.alpha)


def build_vocabulary(documents: Sequence[Sequence[str]], min_count: int = MIN_TOKEN_COUNT) -> dict:
    counts = Counter(tok for doc in documents for tok in doc)
    kept = sorted(tok for tok, c in counts.items() if c >= min_count)
    return {tok: i for i, tok in enumerate(kept)}


def fit_lda(documents: Sequence[Sequence[str]], K: int, alpha: Optional[float] = None,
            beta: float = 0.01, iterations: int = 1000, seed: int = 0,
            doc_ids: Optional[Sequence] = None, min_count: int = MIN_TOKEN_COUNT,
            as_of: Optional[int] = None, fingerprint: Optional[str] = None) -> TopicModel:
    """Fit LDA with a single collapsed Gibbs chain.

    Args:
        documents: token sequences.
        K: number of topics.
        alpha: document-topic Dirichlet parameter; defaults to 50/K.
        beta: topic-word Dirichlet parameter.
        iterations: full sweeps over all tokens.
        seed: seeds both the initial assignment and every sweep.
        doc_ids: identifiers aligned with ``documents``; defaults to 0..D-1.
        min_count: tokens rarer than this (corpus-wide) are dropped.

    The document-topic estimate comes from the final state only.
    """
    if K < 1:
        raise ConfigurationError("K must be >= 1")
    if iterations < 1:
        raise ConfigurationError("iterations must be >= 1")
    if len(documents) == 0:
        raise ConfigurationError("cannot fit LDA on an empty document set")
    if alpha is None:
        alpha = 50.0 / K
    if doc_ids is None:
        doc_ids = range(len(documents))
    doc_ids = tuple(doc_ids)
    if len(doc_ids) != len(documents):
        raise ConfigurationError("doc_ids and documents differ in length")

    vocab = build_vocabulary(documents, min_count)
    V = len(vocab)
    words, docs = [], []
    for d, doc in enumerate(documents):
        for tok in doc:
            w = vocab.get(tok)
            if w is not None:
                words.append(w)
                docs.append(d)
    words = np.array(words, dtype=np.int64)
    docs = np.array(docs, dtype=np.int64)
    D = len(documents)

    rng = np.random.default_rng(seed)
    z = rng.integers(0, K, size=words.size).astype(np.int64)
    nwk = np.zeros((V, K), dtype=np.int64)
    ndk = np.zeros((D, K), dtype=np.int64)
    np.add.at(nwk, (words, z), 1)
    np.add.at(ndk, (docs, z), 1)
    nk = nwk.sum(axis=0)
    vbeta = V * beta
    logger.info("LDA: %d docs, %d tokens, V=%d, K=%d, %d sweeps", D, words.size, V, K, iterations)
    for _ in range(iterations):
        _gibbs_sweep(words, docs, z, nwk, ndk, nk, float(alpha), float(beta),
                     float(vbeta), rng.random(words.size))

    n_d = ndk.sum(axis=1, keepdims=True)
    doc_topic = (ndk + alpha) / (n_d + K * alpha)
    return TopicModel(
        K=K, vocabulary=MappingProxyType(vocab),
        topic_word_counts=np.ascontiguousarray(nwk.T), doc_topic=doc_topic,
        doc_ids=doc_ids, alpha=float(alpha), beta=float(beta), seed=int(seed),
        iterations=int(iterations), as_of=as_of, fingerprint=fingerprint,
    )


def fit_corpus_lda(corpus: Corpus, t: int, K: int = 100, iterations: int = 1000,
                   seed: int = 0, alpha: Optional[float] = None, beta: float = 0.01) -> TopicModel:
    """Joint LDA over every paper published in or before ``t`` (targets included)."""
    ids = [pid for pid in corpus.paper_ids if corpus.papers[pid].year <= t]
    docs = [corpus.papers[pid].tokens() for pid in ids]
    return fit_lda(docs, K, alpha=alpha, beta=beta, iterations=iterations, seed=seed,
                   doc_ids=ids, as_of=t, fingerprint=corpus.fingerprint)


def save_model(model: TopicModel, path) -> None:
    """Write a compressed ``.npz``: count/probability arrays plus a JSON ``meta`` entry."""
    vocab = sorted(model.vocabulary, key=model.vocabulary.get)
    meta = {"K": model.K, "alpha": model.alpha, "beta": model.beta, "seed": model.seed,
            "iterations": model.iterations, "as_of": model.as_of,
            "fingerprint": model.fingerprint}
    with open(path, "wb") as fh:
        np.savez_compressed(
            fh, topic_word_counts=model.topic_word_counts, doc_topic=model.doc_topic,
            doc_ids=np.array([str(d) for d in model.doc_ids], dtype=str),
            vocabulary=np.array(vocab, dtype=str), meta=np.array(json.dumps(meta)),
        )


def load_model(path) -> TopicModel:
    try:
        with np.load(path, allow_pickle=False) as z:
            meta = json.loads(str(z["meta"]))
            vocab = [str(v) for v in z["vocabulary"]]
            return TopicModel(
                K=int(meta["K"]), vocabulary=MappingProxyType({v: i for i, v in enumerate(vocab)}),
                topic_word_counts=z["topic_word_counts"], doc_topic=z["doc_topic"],
                doc_ids=tuple(str(d) for d in z["doc_ids"]), alpha=meta["alpha"],
                beta=meta["beta"], seed=meta["seed"], iterations=meta["iterations"],
                as_of=meta["as_of"], fingerprint=meta["fingerprint"],
            )
    except (OSError, KeyError, ValueError) as exc:
        raise DataError(f"cannot read topic model {path}: {exc}") from exc


# --- content factors ------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TopicPopularity:
    values: np.ndarray
    as_of: int


@dataclass(frozen=True, eq=False)
class AuthorityProfile:
    author: str
    values: np.ndarray
    as_of: int


def _weighted_topic_mass(model: TopicModel, corpus: Corpus, paper_ids, y: int) -> np.ndarray:
    counts = corpus.citation_counts(y)
    idx = np.array([corpus.paper_index(p) for p in paper_ids], dtype=np.int64)
    if idx.size == 0:
        return np.zeros(model.K)
    rows = model.rows_for(paper_ids)
    if (rows < 0).any():
        missing = [paper_ids[i] for i in np.flatnonzero(rows < 0)[:5]]
        raise UnknownIdError(f"papers without topic distributions: {missing}")
    return counts[idx].astype(float) @ model.doc_topic[rows]


def topic_popularity(model: TopicModel, corpus: Corpus, y: int) -> TopicPopularity:
    ids = [p for p in corpus.paper_ids if corpus.papers[p].year <= y]
    return TopicPopularity(_weighted_topic_mass(model, corpus, ids, y), y)


def authority_profile(model: TopicModel, corpus: Corpus, author: str, y: int) -> AuthorityProfile:
    corpus.author_index(author)
    ids = [p for p in corpus.author_papers[author] if corpus.papers[p].year <= y]
    return AuthorityProfile(author, _weighted_topic_mass(model, corpus, ids, y), y)


def _values(v) -> np.ndarray:
    return np.asarray(getattr(v, "values", v), dtype=float)


def c_popularity(popularity, theta) -> float:
    return float(np.dot(_values(popularity), np.asarray(theta, dtype=float)))


def c_authority(profile, theta) -> float:
    return float(np.dot(np.asarray(theta, dtype=float), _values(profile)))


def kl_divergence(p, q) -> float:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    nz = p > 0
    return float(np.sum(p[nz] * np.log(p[nz] / q[nz])))


def c_novelty(theta, reference_thetas: Iterable[Optional[np.ndarray]]) -> float:
    """Mean KL(theta || theta_ref) over references; None entries are unscorable."""
    kls = [kl_divergence(theta, r) for r in reference_thetas if r is not None]
    return float(np.mean(kls)) if kls else 0.0


def c_diversity(theta) -> float:
    p = np.asarray(theta, dtype=float)
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)))
