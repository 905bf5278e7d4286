"""
From-scratch classifiers and information-gain-ratio factor ranking.

* logistic regression: z-scored inputs, L2-regularised mean log-loss,
  full-batch accelerated gradient descent
* CART trees with Gini impurity, grown to purity; bagging and random
  forests built from bootstrap samples (per-tree seed = seed + tree index)
"""

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import expit

from .errors import ConfigurationError, ContractError, DataError
from .features import FACTORS

logger = logging.getLogger(__name__)


def _check_training(X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y).astype(bool)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ContractError(f"feature matrix {X.shape} does not match {y.shape[0]} labels")
    if X.shape[0] < 2:
        raise ContractError("need at least two training instances")
    if y.all() or not y.any():
        raise ContractError("training labels contain a single class")
    if not np.isfinite(X).all():
        raise ContractError("training features contain non-finite values")
    return X, y


# --- logistic regression ---------------------------------------------------------

def logistic_loss(params: np.ndarray, X: np.ndarray, y: np.ndarray, l2: float) -> float:
    """Mean negative log-likelihood plus ``l2/2 * ||w||^2``; ``params = [w..., b]``."""
    w, b = params[:-1], params[-1]
    s = X @ w + b
    # log(1 + exp(s)) - y*s, computed stably
    nll = np.logaddexp(0.0, s) - y * s
    return float(nll.mean() + 0.5 * l2 * (w @ w))


def logistic_gradient(params: np.ndarray, X: np.ndarray, y: np.ndarray, l2: float) -> np.ndarray:
    w, b = params[:-1], params[-1]
    r = expit(X @ w + b) - y
    g = np.empty_like(params)
    g[:-1] = X.T @ r / X.shape[0] + l2 * w
    g[-1] = r.mean()
    return g


@dataclass(frozen=True, eq=False)
class LogisticModel:
    weights: np.ndarray
    bias: float
    mean: np.ndarray
    std: np.ndarray
    l2: float
    feature_names: Tuple[str, ...]
    training_log: Dict = field(default_factory=dict)

    kind = "lrc"

    def decision_function(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        if X.shape[1] != self.weights.size:
            raise ContractError(f"expected {self.weights.size} features, got {X.shape[1]}")
        s = ((X - self.mean) / self.std) @ self.weights + self.bias
        return s[0] if single else s

    def predict_proba(self, X):
        s = self.decision_function(X)
        return float(expit(s)) if np.ndim(s) == 0 else expit(s)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "weights": self.weights.tolist(), "bias": self.bias,
                "mean": self.mean.tolist(), "std": self.std.tolist(), "l2": self.l2,
                "feature_names": list(self.feature_names), "training_log": self.training_log}

    @classmethod
    def from_dict(cls, d: dict) -> "LogisticModel":
        return cls(np.array(d["weights"], dtype=float), float(d["bias"]),
                   np.array(d["mean"], dtype=float), np.array(d["std"], dtype=float),
                   float(d["l2"]), tuple(d["feature_names"]), d.get("training_log", {}))


def fit_logistic(X, y, l2: float = 1e-4, max_iterations: int = 10000,
                 tolerance: float = 1e-6, feature_names: Optional[Sequence[str]] = None
                 ) -> LogisticModel:
    """Fit L2-regularised logistic regression on standardised features.

    Optimiser: Nesterov-accelerated full-batch gradient descent with step
    1/L (L bounds the loss curvature) and gradient-based momentum restart.
    Stops when the gradient norm drops below ``tolerance``.  Zero-variance
    features keep weight 0.
    """
    X, y = _check_training(X, y)
    n, d = X.shape
    if feature_names is None:
        feature_names = FACTORS if d == len(FACTORS) else tuple(f"x{i}" for i in range(d))
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    frozen = std == 0
    std = np.where(frozen, 1.0, std)
    Xs = (X - mean) / std
    Xs[:, frozen] = 0.0
    yf = y.astype(float)

    aug = np.hstack([Xs, np.ones((n, 1))])
    lipschitz = 0.25 * np.linalg.norm(aug, 2) ** 2 / n + l2
    step = 1.0 / lipschitz

    x = np.zeros(d + 1)
    v = x.copy()
    momentum = 1.0
    gnorm = float("inf")
    it = 0
    for it in range(1, max_iterations + 1):
        g_v = logistic_gradient(v, Xs, yf, l2)
        g_v[:-1][frozen] = 0.0
        x_new = v - step * g_v
        m_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * momentum ** 2))
        if g_v @ (x_new - x) > 0:
            # restart momentum when it points uphill
            m_new = 1.0
            v = x_new.copy()
        else:
            v = x_new + ((momentum - 1.0) / m_new) * (x_new - x)
        x, momentum = x_new, m_new
        g = logistic_gradient(x, Xs, yf, l2)
        g[:-1][frozen] = 0.0
        gnorm = float(np.linalg.norm(g))
        if gnorm < tolerance:
            break
    converged = gnorm < tolerance
    if not converged:
        logger.warning("logistic regression stopped at %d iterations (|grad|=%.3g)", it, gnorm)
    log = {"iterations": it, "final_gradient_norm": gnorm, "converged": converged,
           "loss": logistic_loss(x, Xs, yf, l2), "frozen_features": int(frozen.sum())}
    return LogisticModel(x[:-1].copy(), float(x[-1]), mean, std, float(l2),
                         tuple(feature_names), log)


def predict_proba(model, X):
    return model.predict_proba(X)


# --- CART trees -------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DecisionTree:
    """Array-encoded binary tree; ``feature[i] == -1`` marks a leaf.

    Samples with ``x[feature] <= threshold`` go left.  ``value`` holds the
    positive-class fraction of the training samples reaching each node.
    """
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def depth(self) -> int:
        depth = np.zeros(self.feature.size, dtype=np.int64)
        for i in range(self.feature.size):
            if self.feature[i] >= 0:
                depth[self.left[i]] = depth[i] + 1
                depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def apply(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = self.feature[node] >= 0
        while active.any():
            idx = np.flatnonzero(active)
            nd = node[idx]
            go_left = X[idx, self.feature[nd]] <= self.threshold[nd]
            node[idx] = np.where(go_left, self.left[nd], self.right[nd])
            active[idx] = self.feature[node[idx]] >= 0
        return node

    def predict_proba(self, X) -> np.ndarray:
        return self.value[self.apply(np.atleast_2d(np.asarray(X, dtype=float)))]

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist()
                for k in ("feature", "threshold", "left", "right", "value")}

    @classmethod
    def from_dict(cls, d: dict) -> "DecisionTree":
        return cls(np.array(d["feature"], dtype=np.int64), np.array(d["threshold"], dtype=float),
                   np.array(d["left"], dtype=np.int64), np.array(d["right"], dtype=np.int64),
                   np.array(d["value"], dtype=float))


def _best_split(X: np.ndarray, y: np.ndarray, feats: np.ndarray):
    """Lowest weighted Gini split over ``feats``: (impurity, feature, threshold) or None."""
    n = y.size
    Xf = X[:, feats]
    order = np.argsort(Xf, axis=0, kind="stable")
    xs = np.take_along_axis(Xf, order, axis=0)
    ys = y[order].astype(float)
    pos_left = np.cumsum(ys, axis=0)[:-1]
    n_left = np.arange(1, n, dtype=float)[:, None]
    n_right = n - n_left
    pos_right = ys.sum(axis=0) - pos_left
    # n * weighted gini / 2
    imp = pos_left * (n_left - pos_left) / n_left + pos_right * (n_right - pos_right) / n_right
    valid = xs[:-1] < xs[1:]
    if not valid.any():
        return None
    imp = np.where(valid, imp, np.inf)
    flat = int(np.argmin(imp.T))
    f, i = divmod(flat, n - 1)
    lo, hi = xs[i, f], xs[i + 1, f]
    thr = lo + (hi - lo) / 2.0
    if not lo <= thr < hi:
        thr = lo
    return float(imp[i, f]), int(feats[f]), float(thr)


def grow_tree(X: np.ndarray, y: np.ndarray, rng: Optional[np.random.Generator] = None,
              max_features: Optional[int] = None) -> DecisionTree:
    """Grow a Gini CART tree until every leaf is pure or unsplittable.

    With ``max_features`` < number of columns a fresh random subset is drawn
    at each node; if it admits no split the remaining columns are tried.
    """
    n, d = X.shape
    if max_features is None or max_features >= d:
        max_features = d
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node(frac):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(frac)
        return len(feature) - 1

    root = new_node(float(y.mean()))
    stack = [(root, np.arange(n))]
    all_feats = np.arange(d)
    while stack:
        node, idx = stack.pop()
        yn = y[idx]
        pos = int(yn.sum())
        if pos == 0 or pos == idx.size:
            continue
        Xn = X[idx]
        if max_features < d:
            feats = rng.choice(d, size=max_features, replace=False)
            best = _best_split(Xn, yn, feats)
            if best is None:
                rest = np.setdiff1d(all_feats, feats)
                best = _best_split(Xn, yn, rest) if rest.size else None
        else:
            best = _best_split(Xn, yn, all_feats)
        if best is None:
            continue
        _, f, thr = best
        mask = Xn[:, f] <= thr
        li, ri = idx[mask], idx[~mask]
        feature[node] = f
        threshold[node] = thr
        left[node] = new_node(float(y[li].mean()))
        right[node] = new_node(float(y[ri].mean()))
        stack.append((right[node], ri))
        stack.append((left[node], li))
    return DecisionTree(np.array(feature, dtype=np.int64), np.array(threshold),
                        np.array(left, dtype=np.int64), np.array(right, dtype=np.int64),
                        np.array(value))


ENSEMBLE_KINDS = ("tree", "rf", "bag")


@dataclass(frozen=True, eq=False)
class TreeEnsemble:
    kind: str
    trees: Tuple[DecisionTree, ...]
    feature_subsample: int
    seed: int
    feature_names: Tuple[str, ...]

    @property
    def trees_count(self) -> int:
        return len(self.trees)

    def predict_proba(self, X):
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        if X.shape[1] != len(self.feature_names):
            raise ContractError(f"expected {len(self.feature_names)} features, got {X.shape[1]}")
        p = np.mean([t.predict_proba(X) for t in self.trees], axis=0)
        return float(p[0]) if single else p

    def to_dict(self) -> dict:
        return {"kind": self.kind, "feature_subsample": self.feature_subsample,
                "seed": self.seed, "feature_names": list(self.feature_names),
                "trees": [t.to_dict() for t in self.trees]}

    @classmethod
    def from_dict(cls, d: dict) -> "TreeEnsemble":
        return cls(d["kind"], tuple(DecisionTree.from_dict(t) for t in d["trees"]),
                   int(d["feature_subsample"]), int(d["seed"]), tuple(d["feature_names"]))


def fit_ensemble(X, y, kind: str = "rf", trees: int = 100, seed: int = 0,
                 max_features: Optional[int] = None, feature_names=None,
                 threads: int = 1) -> TreeEnsemble:
    """Fit a single CART tree (``tree``), bagged trees (``bag``) or a random forest (``rf``).

    ``bag`` and ``rf`` draw a bootstrap sample per tree from
    ``default_rng(seed + i)``; ``rf`` considers ``ceil(sqrt(d))`` columns per
    split unless ``max_features`` says otherwise.  ``tree`` uses all rows.
    """
    X, y = _check_training(X, y)
    if kind not in ENSEMBLE_KINDS:
        raise ConfigurationError(f"unknown ensemble kind {kind!r}")
    n, d = X.shape
    if feature_names is None:
        feature_names = FACTORS if d == len(FACTORS) else tuple(f"x{i}" for i in range(d))
    if kind == "rf":
        m = max_features if max_features is not None else math.ceil(math.sqrt(d))
    else:
        m = d
    m = min(max(1, int(m)), d)
    count = 1 if kind == "tree" else int(trees)
    if count < 1:
        raise ConfigurationError("need at least one tree")

    def build(i):
        rng = np.random.default_rng(seed + i)
        if kind == "tree":
            rows = np.arange(n)
        else:
            rows = rng.integers(0, n, size=n)
        return grow_tree(X[rows], y[rows], rng, m)

    if threads > 1 and count > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            fitted = tuple(pool.map(build, range(count)))
    else:
        fitted = tuple(build(i) for i in range(count))
    return TreeEnsemble(kind, fitted, m, int(seed), tuple(feature_names))


# --- model persistence ---------------------------------------------------------------

def model_to_dict(model) -> dict:
    return model.to_dict()


def model_from_dict(d: dict):
    if d.get("kind") == "lrc":
        return LogisticModel.from_dict(d)
    if d.get("kind") in ENSEMBLE_KINDS:
        return TreeEnsemble.from_dict(d)
    raise DataError(f"unknown model kind {d.get('kind')!r}")


# --- information gain ratio ---------------------------------------------------------

def entropy_bits(counts) -> float:
    c = np.asarray(counts, dtype=float)
    c = c[c > 0]
    if c.size == 0:
        return 0.0
    p = c / c.sum()
    return float(-(p * np.log2(p)).sum())


def equal_frequency_bins(x, bins: int = 10) -> np.ndarray:
    """Bin codes from at most ``bins`` equal-frequency bins; duplicate edges merge.

    Values equal to an edge fall in the lower bin.
    """
    x = np.asarray(x, dtype=float)
    edges = np.unique(np.quantile(x, np.arange(1, bins) / bins))
    return np.searchsorted(edges, x, side="left")


def info_gain_ratio(feature, labels, bins: int = 10) -> Tuple[float, float, float]:
    """(IG, IV, IGR) in bits for a discretised feature against binary labels."""
    x = np.asarray(feature, dtype=float)
    y = np.asarray(labels).astype(bool)
    if x.size != y.size:
        raise ContractError("feature and labels differ in length")
    if x.size < 2:
        raise ContractError("need at least two instances")
    codes = equal_frequency_bins(x, bins)
    n = y.size
    h_y = entropy_bits(np.bincount(y.astype(int), minlength=2))
    cond = 0.0
    bin_sizes = np.bincount(codes)
    for b in np.flatnonzero(bin_sizes):
        yb = y[codes == b]
        cond += yb.size / n * entropy_bits(np.bincount(yb.astype(int), minlength=2))
    ig = max(h_y - cond, 0.0)
    iv = entropy_bits(bin_sizes)
    igr = ig / iv if iv > 0 else 0.0
    if igr > 1.0 + 1e-12:
        logger.warning("IGR %.4f exceeds 1: binning defect", igr)
    return ig, iv, igr


@dataclass(frozen=True)
class IGRRow:
    factor: str
    ig: float
    iv: float
    igr: float
    rank: int


@dataclass(frozen=True)
class IGRReport:
    rows: Tuple[IGRRow, ...]
    bins: int
    split: str

    def by_factor(self) -> Dict[str, IGRRow]:
        return {r.factor: r for r in self.rows}


def rank_factors(dataset, bins: int = 10, split: str = "all") -> IGRReport:
    """IGR of every factor, ranked descending with ties broken by factor name."""
    X, y = dataset.matrix(split)
    stats = []
    for j, name in enumerate(FACTORS):
        ig, iv, igr = info_gain_ratio(X[:, j], y, bins)
        stats.append((name, ig, iv, igr))
    stats.sort(key=lambda s: (-s[3], s[0]))
    rows = tuple(IGRRow(name, ig, iv, igr, r + 1) for r, (name, ig, iv, igr) in enumerate(stats))
    return IGRReport(rows, bins, split)
