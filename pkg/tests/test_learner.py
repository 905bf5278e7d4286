import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from impactlab import learner as L
from impactlab.errors import ConfigurationError, ContractError, DataError
from impactlab.features import FACTORS

from .helpers import central_difference, entropy2


def blobs(n=200, d=3, gap=4.0, seed=0):
    rng = np.random.default_rng(seed)
    y = np.arange(n) % 2 == 0
    X = rng.normal(size=(n, d))
    X[y, 0] += gap
    return X, y


def test_gradient_matches_central_differences():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(40, 5))
    y = (rng.random(40) < 0.4).astype(float)
    worst = 0.0
    for _ in range(100):
        params = rng.normal(scale=2.0, size=6)
        l2 = float(rng.uniform(0, 0.1))
        g = L.logistic_gradient(params, X, y, l2)
        num = central_difference(lambda p: L.logistic_loss(p, X, y, l2), params)
        worst = max(worst, float(np.max(np.abs(g - num) / np.maximum(np.abs(num), 1e-3))))
    assert worst < 1e-4


def test_separable_training_accuracy():
    X, y = blobs(gap=12.0)
    m = L.fit_logistic(X, y)
    acc = np.mean((m.predict_proba(X) >= 0.5) == y)
    assert acc >= 0.99


def test_sigmoid_fixed_points():
    m = L.LogisticModel(np.array([1.0]), 0.0, np.zeros(1), np.ones(1), 0.0, ("x",))
    assert m.predict_proba(np.array([0.0])) == 0.5
    assert m.predict_proba(np.array([math.log(3)])) == pytest.approx(0.75, abs=1e-12)
    zero = L.LogisticModel(np.zeros(26), 0.0, np.zeros(26), np.ones(26), 0.0, FACTORS)
    assert np.all(zero.predict_proba(np.random.default_rng(0).normal(size=(5, 26))) == 0.5)


@pytest.mark.parametrize("y", [[True, True, True], [False, False, False]])
def test_single_class_rejected(y):
    X = np.arange(3.0).reshape(3, 1)
    with pytest.raises(ContractError):
        L.fit_logistic(X, y)
    with pytest.raises(ContractError):
        L.fit_ensemble(X, y, kind="rf", trees=2)


def test_shape_and_finiteness_contracts():
    with pytest.raises(ContractError):
        L.fit_logistic(np.zeros((3, 2)), [True, False])
    with pytest.raises(ContractError):
        L.fit_logistic(np.array([[np.nan], [1.0]]), [True, False])
    m = L.fit_logistic(*blobs())
    with pytest.raises(ContractError):
        m.predict_proba(np.zeros((2, 7)))


def test_probability_monotone_in_positive_weight_feature():
    X, y = blobs()
    m = L.fit_logistic(X, y)
    assert m.weights[0] > 0
    grid = np.zeros((50, 3))
    grid[:, 0] = np.linspace(-5, 10, 50)
    assert np.all(np.diff(m.predict_proba(grid)) > 0)


def test_l2_shrinks_weights():
    X, y = blobs(gap=1.5)
    norms = [np.linalg.norm(L.fit_logistic(X, y, l2=l2).weights) for l2 in (1e-4, 1e-2, 1.0)]
    assert norms[0] > norms[1] > norms[2]


def test_constant_feature_keeps_zero_weight():
    X, y = blobs()
    X[:, 2] = 7.0
    m = L.fit_logistic(X, y)
    assert m.weights[2] == 0.0 and m.training_log["frozen_features"] == 1
    assert m.training_log["converged"]


def test_depth_one_tree():
    X = np.array([[0.0], [1.0], [2.0], [3.0]])
    y = np.array([False, False, True, True])
    ens = L.fit_ensemble(X, y, kind="tree")
    tree = ens.trees[0]
    assert tree.depth == 1
    assert tree.threshold[0] == pytest.approx(1.5)
    assert ens.predict_proba(X).tolist() == [0.0, 0.0, 1.0, 1.0]


def test_tree_grows_to_purity():
    X, y = blobs(gap=1.0)
    tree = L.fit_ensemble(X, y, kind="tree").trees[0]
    assert np.array_equal(tree.predict_proba(X) >= 0.5, y)


def test_rf_with_all_features_equals_bagging():
    X, y = blobs(gap=1.0)
    rf = L.fit_ensemble(X, y, kind="rf", trees=5, seed=3, max_features=3)
    bag = L.fit_ensemble(X, y, kind="bag", trees=5, seed=3)
    assert np.array_equal(rf.predict_proba(X), bag.predict_proba(X))


@pytest.mark.parametrize("kind", L.ENSEMBLE_KINDS)
def test_ensemble_determinism_and_range(kind):
    X, y = blobs(gap=1.0, seed=2)
    a = L.fit_ensemble(X, y, kind=kind, trees=7, seed=11)
    b = L.fit_ensemble(X, y, kind=kind, trees=7, seed=11, threads=3)
    pa, pb = a.predict_proba(X), b.predict_proba(X)
    assert pa.tobytes() == pb.tobytes()
    assert ((pa >= 0) & (pa <= 1)).all()
    if kind != "tree":
        c = L.fit_ensemble(X, y, kind=kind, trees=7, seed=12)
        assert not np.array_equal(pa, c.predict_proba(X))


def test_unknown_ensemble_kind():
    with pytest.raises(ConfigurationError):
        L.fit_ensemble(*blobs(), kind="boost")


def test_model_dict_roundtrip():
    X, y = blobs()
    for m in (L.fit_logistic(X, y), L.fit_ensemble(X, y, kind="rf", trees=3)):
        back = L.model_from_dict(L.model_to_dict(m))
        assert np.array_equal(back.predict_proba(X), m.predict_proba(X))
    with pytest.raises(DataError):
        L.model_from_dict({"kind": "svm"})


# --- information gain ratio -----------------------------------------------------------

def test_perfect_feature_has_unit_igr():
    y = np.array([0, 1] * 50, dtype=bool)
    ig, iv, igr = L.info_gain_ratio(y.astype(float), y)
    assert ig == pytest.approx(1.0, abs=1e-9)
    assert igr == pytest.approx(1.0, abs=1e-9)


def test_constant_feature_has_zero_igr():
    y = np.array([0, 1, 1, 0, 1], dtype=bool)
    assert L.info_gain_ratio(np.ones(5), y) == (0.0, 0.0, 0.0)


def test_independent_feature_has_negligible_igr():
    rng = np.random.default_rng(0)
    x = rng.normal(size=20000)
    y = rng.random(20000) < 0.3
    assert L.info_gain_ratio(x, y)[2] < 0.01


def test_information_gain_matches_entropy_oracle():
    rng = np.random.default_rng(1)
    x = rng.integers(0, 4, size=400).astype(float)
    y = rng.random(400) < (0.2 + 0.2 * x)
    ig, iv, _ = L.info_gain_ratio(x, y, bins=10)
    cond = sum(np.mean(x == v) * entropy2(y[x == v]) for v in np.unique(x))
    assert ig == pytest.approx(entropy2(y) - cond, abs=1e-12)
    assert iv == pytest.approx(entropy2(x), abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_igr_bounded(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 300))
    x = rng.normal(size=n).round(int(rng.integers(0, 3)))
    y = rng.random(n) < rng.random()
    ig, iv, igr = L.info_gain_ratio(x, y)
    assert 0 <= igr <= 1 + 1e-12
    assert ig <= entropy2(y) + 1e-12


def test_equal_frequency_bins():
    codes = L.equal_frequency_bins(np.arange(100.0))
    assert np.bincount(codes).tolist() == [10] * 10
    assert L.equal_frequency_bins(np.ones(7)).tolist() == [0] * 7


class _DS:
    def __init__(self, X, y):
        self.X, self.y = X, y

    def matrix(self, split="all"):
        return self.X, self.y


def test_rank_factors_covers_every_factor_and_breaks_ties_by_name():
    rng = np.random.default_rng(0)
    y = rng.random(200) < 0.5
    report = L.rank_factors(_DS(np.zeros((200, 26)), y))
    assert len(report.rows) == 26
    assert [r.factor for r in report.rows] == sorted(FACTORS)
    assert [r.rank for r in report.rows] == list(range(1, 27))
    X = np.zeros((200, 26))
    X[:, FACTORS.index("V-citation")] = y
    top = L.rank_factors(_DS(X, y)).rows[0]
    assert top.factor == "V-citation" and top.igr == pytest.approx(1.0)


def test_rank_factors_on_synthetic_dataset(synthetic_experiment):
    ds = synthetic_experiment.dataset(5, 3)
    report = L.rank_factors(ds)
    assert {r.factor for r in report.rows} == set(FACTORS)
    igrs = [r.igr for r in report.rows]
    assert igrs == sorted(igrs, reverse=True)
    assert all(0 <= v <= 1 for v in igrs)
