import json
from dataclasses import replace

import numpy as np
import pytest

from impactlab import dataset as D, pipeline as P
from impactlab.errors import ConfigurationError, DataError, UnknownIdError
from impactlab.learner import LogisticModel, fit_logistic
from impactlab.features import FACTORS

from .helpers import DESK_DT, DESK_MIN_H, DESK_T, corpus_of, paper, uniform_context


def desk(**kw):
    return replace(P.ExperimentConfig(t=DESK_T, delta_t=DESK_DT, min_h=DESK_MIN_H), **kw)


def test_config_from_mapping():
    cfg = P.ExperimentConfig.from_mapping({"min-h": 4, "model": "rf"}, split_seed=3, l2=None)
    assert (cfg.min_h, cfg.model, cfg.split_seed, cfg.l2) == (4, "rf", 3, 1e-4)
    with pytest.raises(ConfigurationError):
        P.ExperimentConfig.from_mapping({"depth": 3})
    with pytest.raises(ConfigurationError):
        desk(model="svm").validate()
    with pytest.raises(ConfigurationError):
        desk(feature_mask="-A,-C,-V,-S,-R,-T").validate()


def test_remove_nothing_equals_full(synthetic_experiment):
    a = P.run_experiment(desk(), synthetic_experiment)
    b = P.run_experiment(desk(feature_mask="A,C,V,S,R,T"), synthetic_experiment)
    assert a.metrics() == b.metrics()


def test_single_point_sweep_equals_run(synthetic_experiment):
    out = P.sweep(desk(), "dt", [DESK_DT], synthetic_experiment)
    rep = P.run_experiment(desk(), synthetic_experiment)
    point = out["points"][0]
    assert all(point[k] == v for k, v in rep.metrics().items())
    assert out["trend"]["f1"] is None
    with pytest.raises(ConfigurationError):
        P.sweep(desk(), "topics", [1], synthetic_experiment)


def test_experiment_year_must_match(synthetic_experiment):
    with pytest.raises(ConfigurationError):
        P.run_experiment(desk(t=DESK_T - 1), synthetic_experiment)


def test_ablation_rows(synthetic_experiment):
    masks = [("full", "all"), ("remove-C", "-C"), ("only-C", "C")]
    rows = P.ablation(desk(), synthetic_experiment, masks)
    assert [r["mask"] for r in rows] == ["full", "remove-C", "only-C"]
    assert [r["factors"] for r in rows] == [26, 19, 7]
    assert len(P.ABLATION_MASKS) == 13


def test_reports_identical_across_thread_counts(synthetic_experiment):
    masks = P.ABLATION_MASKS[:4]
    one = P.ablation(desk(model="rf", trees=10), synthetic_experiment, masks, threads=1)
    four = P.ablation(desk(model="rf", trees=10), synthetic_experiment, masks, threads=4)
    assert json.dumps(one, sort_keys=True) == json.dumps(four, sort_keys=True)


def test_predict_single_matches_in_corpus_instance():
    # the same paper, once inside the snapshot and once as an ad-hoc record; it
    # cites nothing because an in-snapshot paper's own references count at t
    base = [paper("a1", ("a",), 2003, venue="kdd"), paper("b1", ("b", "a"), 2004),
            paper("c1", ("z",), 2004, refs=["a1", "b1"]), paper("c2", ("y",), 2005, refs=["a1"]),
            paper("v1", ("w",), 2004, venue="kdd"), paper("c3", ("x",), 2005, refs=["v1", "b1"])]
    target = paper("t", ("a", "b"), 2006, venue="kdd")
    later = [paper("c4", ("q",), 2007, refs=["t", "a1"]), paper("c5", ("r",), 2008, refs=["t"])]
    with_t = corpus_of(*base, target, *later)
    without_t = corpus_of(*base)
    ds = D.build_dataset(with_t, uniform_context(with_t, 2006), 2006, 2, min_h=1)
    inst = ds.instance("t")
    X = np.array([[0.0] * 26, inst.features.values * 0.5 + 1.0])
    model = fit_logistic(X, [False, True])
    record = {"title": "", "authors": ["a", "b"], "venue": "KDD"}
    prob, fv = P.predict_single(model, uniform_context(without_t, 2006), record)
    assert fv.values.tobytes() == inst.features.values.tobytes()
    assert prob == model.predict_proba(inst.features.values)


def test_predict_single_zero_model_and_unknown_author(synthetic_experiment):
    ctx = synthetic_experiment.context
    zero = LogisticModel(np.zeros(26), 0.0, np.zeros(26), np.ones(26), 0.0, FACTORS)
    author = synthetic_experiment.rows[0].primary_author
    prob, _ = P.predict_single(zero, ctx, {"title": "w1 w2", "authors": [author]})
    assert prob == 0.5
    with pytest.raises(UnknownIdError):
        P.predict_single(zero, ctx, {"authors": ["nobody at all"]})


def test_higher_authority_gets_higher_probability(synthetic_experiment):
    ds = synthetic_experiment.dataset(DESK_DT, DESK_MIN_H)
    model = P.train_model(ds)
    j = FACTORS.index("C-authority-max")
    assert model.weights[j] > 0
    X, _ = ds.matrix("validation")
    lo, hi = X[0].copy(), X[0].copy()
    lo[j], hi[j] = np.percentile(X[:, j], 10), np.percentile(X[:, j], 90)
    assert model.predict_proba(hi) > model.predict_proba(lo)


def test_trained_model_roundtrip(tmp_path, synthetic_experiment):
    ds = synthetic_experiment.dataset(DESK_DT, DESK_MIN_H)
    model = P.train_model(ds, kind="bag", trees=3)
    path = tmp_path / "m.json"
    P.save_trained(model, path, ds, {"mask": "all"})
    back, payload = P.load_trained(path)
    X, _ = ds.matrix("validation")
    assert np.array_equal(back.predict_proba(X), model.predict_proba(X))
    assert payload["fingerprint"] == ds.fingerprint and payload["mask"] == "all"
    (tmp_path / "bad.json").write_text("nope")
    with pytest.raises(DataError):
        P.load_trained(tmp_path / "bad.json")
