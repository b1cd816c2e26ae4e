import math
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import f_oneway

from afr_ecg.errors import AllMissingColumn, OneClassOnly, SingleClassTraining
from afr_ecg.learn import (
    HyperParams, auc_bruteforce, hyper_search, median_imputer_fit, mrmr_select, patient_scores,
    rf_predict, rf_train, roc_auc, search_space, standardizer_fit, vote,
)
from afr_ecg.learn.forest import rf_votes
from afr_ecg.learn.mrmr import f_statistic, relevance
from afr_ecg.learn.search import K_GRID, RF_SPACE, split_params

from oracles import concordance_auc

nan = np.nan


# preprocessing

def test_imputer_examples():
    imp = median_imputer_fit([[1.0], [nan], [3.0]])
    assert np.array_equal(imp.apply([[1.0], [nan], [3.0]]), [[1.0], [2.0], [3.0]])
    X = np.arange(12.0).reshape(4, 3)
    assert np.array_equal(median_imputer_fit(X).apply(X), X)


def test_imputer_drops_all_missing_column(caplog):
    X = np.array([[1.0, nan, 5.0], [2.0, nan, 6.0]])
    imp = median_imputer_fit(X)
    assert imp.dropped == (1,)
    assert imp.apply(np.array([[nan, 9.0, nan]])).tolist() == [[1.5, 5.5]]
    assert "all-missing" in caplog.text
    with pytest.raises(AllMissingColumn):
        median_imputer_fit(X, strict=True)


def test_imputer_uses_training_rows_only():
    train = np.array([[1.0], [3.0], [nan]])
    test = np.array([[nan], [100.0]])
    assert median_imputer_fit(train).apply(test).tolist() == [[2.0], [100.0]]


def test_standardizer_examples():
    sc = standardizer_fit([[0.0], [2.0]])
    assert sc.apply([[0.0], [2.0]]).ravel().tolist() == [-1.0, 1.0]
    const = standardizer_fit([[5.0], [5.0], [5.0]])
    assert const.apply([[5.0], [7.0]]).ravel().tolist() == [0.0, 0.0]
    sc = standardizer_fit([[0.0], [2.0], [0.0], [2.0]])  # mean 1, population sd 1
    assert sc.apply([[4.0]]).item() == 3.0


# mRMR

def test_relevance_follows_anova_f():
    rng = np.random.default_rng(0)
    y = np.repeat([0, 1], 20)
    X = rng.normal(size=(40, 6)) + np.outer(y, [0, 0.3, 0.6, 1.0, 1.5, 2.0])
    ref = np.array([f_oneway(X[y == 0, j], X[y == 1, j]).statistic for j in range(6)])
    assert np.allclose(f_statistic(X, y), ref, rtol=1e-10)
    assert np.array_equal(np.argsort(relevance(X, y)), np.argsort(ref))


def test_label_feature_first():
    rng = np.random.default_rng(1)
    y = rng.integers(0, 2, 60)
    X = rng.normal(size=(60, 10))
    X[:, 6] = y
    assert mrmr_select(X, y, 3)[0] == 6


def test_duplicate_not_picked_second():
    rng = np.random.default_rng(2)
    y = np.repeat([0, 1], 30)
    inf = y + 0.4 * rng.normal(size=60)
    other = y + 0.8 * rng.normal(size=60)
    X = np.column_stack([rng.normal(size=60), inf, inf, other, rng.normal(size=60)])
    first, second = mrmr_select(X, y, 2)
    assert first in (1, 2) and second not in (1, 2)


@pytest.mark.parametrize("k", [1, 5, 13])
def test_mrmr_returns_k_distinct(k):
    rng = np.random.default_rng(3)
    X, y = rng.normal(size=(50, 30)), rng.integers(0, 2, 50)
    sel = mrmr_select(X, y, k)
    assert len(sel) == k == len(set(sel))


def test_mrmr_rejects_bad_input():
    X = np.zeros((4, 3))
    with pytest.raises(ValueError):
        mrmr_select(X, [0, 1, 0, 1], 4)
    X[0, 0] = nan
    with pytest.raises(ValueError):
        mrmr_select(X, [0, 1, 0, 1], 2)


# random forest

def _xor(n=200, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1, 1, (n, 2))
    return X, ((X[:, 0] > 0) ^ (X[:, 1] > 0)).astype(int)


def test_xor_training_accuracy():
    X, y = _xor()
    forest = rf_train(X, y, HyperParams(n_trees=100, max_depth=4, features_per_split=1.0), seed=0)
    assert np.mean((rf_predict(forest, X) > 0.5) == y) >= 0.95


def test_single_class():
    with pytest.raises(SingleClassTraining):
        rf_train(np.zeros((5, 2)), np.ones(5), HyperParams(), seed=0)


def test_probability_is_vote_fraction():
    X, y = _xor(80, seed=1)
    forest = rf_train(X, y, HyperParams(n_trees=77, max_depth=3), seed=5)
    votes = rf_votes(forest, X)
    prob = rf_predict(forest, X)
    assert np.array_equal(prob, votes / 77)
    assert np.all((prob >= 0) & (prob <= 1))


def test_separable_duplicate_row():
    X = np.r_[np.zeros((10, 2)), np.ones((10, 2))] + np.linspace(0, 0.1, 20)[:, None]
    y = np.repeat([0, 1], 10)
    forest = rf_train(X, y, HyperParams(n_trees=50, max_depth=3, features_per_split=1.0), seed=2)
    p = rf_predict(forest, X[[3, 15]])
    assert p[0] < 0.5 < p[1]


def test_forest_deterministic_and_seed_sensitive():
    X, y = _xor(100, seed=3)
    hp = HyperParams(n_trees=60, max_depth=5)
    a, b, c = (rf_train(X, y, hp, s) for s in (11, 11, 12))
    assert np.array_equal(a.threshold, b.threshold) and np.array_equal(a.feature, b.feature)
    assert not (a.feature.size == c.feature.size and np.array_equal(a.threshold, c.threshold))


def test_hyperparam_ranges():
    for bad in ({"n_trees": 10}, {"max_depth": 20}, {"min_leaf": 0}, {"features_per_split": 1.5},
                {"features_per_split": "cube"}, {"class_weight": "auto"}):
        with pytest.raises(ValueError):
            HyperParams(**bad)
    assert HyperParams(features_per_split="sqrt").mtry(804) == 28
    assert HyperParams(features_per_split=0.2).mtry(3) == 1


def test_balanced_class_weight_moves_scores():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(60, 3))
    y = (np.arange(60) < 8).astype(int)
    none = rf_predict(rf_train(X, y, HyperParams(n_trees=50, max_depth=2), 0), X).mean()
    bal = rf_predict(rf_train(X, y, HyperParams(n_trees=50, max_depth=2, class_weight="balanced"), 0), X).mean()
    assert bal > none


# ROC and voting

def test_roc_examples():
    assert roc_auc([0.9, 0.1], [1, 0])[0] == 1.0
    assert roc_auc([0.5, 0.5], [1, 0])[0] == 0.5
    auc, pts = roc_auc([0.8, 0.6, 0.4, 0.2], [1, 0, 1, 0])
    assert auc == 0.75
    assert pts[0].tolist() == [math.inf, 0.0, 0.0]
    assert pts[-1][1:].tolist() == [1.0, 1.0]
    with pytest.raises(OneClassOnly):
        roc_auc([0.1, 0.2], [1, 1])


@settings(max_examples=200, deadline=None)
@given(data=st.lists(st.tuples(st.sampled_from([0.0, 0.2, 0.4, 0.5, 0.6, 0.8, 1.0]), st.integers(0, 1)),
                     min_size=2, max_size=20))
def test_roc_equals_bruteforce(data):
    s, y = map(np.array, zip(*data))
    if len(set(y)) < 2:
        return
    assert roc_auc(s, y)[0] == auc_bruteforce(s, y) == concordance_auc(s, y)


def test_curve_trapezoid_equals_auc():
    rng = np.random.default_rng(5)
    s, y = rng.integers(0, 6, 30) / 5, np.r_[np.zeros(15), np.ones(15)]
    auc, pts = roc_auc(s, y)
    assert np.trapezoid(pts[:, 2], pts[:, 1]) == pytest.approx(auc, abs=1e-12)


def test_vote_examples():
    assert vote([1, 1, 0, 1, 0]) == (0.6, 1)
    assert vote([0.3]) == (0.0, 0)
    assert vote([0.51, 0.49]) == (0.5, 0)


def test_patient_scores_groups():
    sc = patient_scores(["a", "b", "a", "a"], [0.9, 0.2, 0.1, 0.7])
    assert sc == {"a": 2 / 3, "b": 0.0}
    assert patient_scores(["a", "a"], [0.2, 0.4], "mean")["a"] == pytest.approx(0.3)


# hyperparameter search

def test_budget_contract():
    calls = []
    res = hyper_search(lambda c: calls.append(c) or 0.0, budget=10, seed=0)
    assert len(calls) == 10 == res.n_evaluations
    with pytest.raises(ValueError):
        hyper_search(lambda c: 0.0, budget=9)


def test_constant_objective_returns_sampled_point():
    res = hyper_search(lambda c: 0.5, budget=12, seed=3)
    assert all(s == 0.5 for _, s in res.history)
    assert res.best == res.history[0][0]
    split_params(res.best)  # decodes to valid HyperParams


def test_samples_stay_in_space():
    res = hyper_search(lambda c: -abs(c["n_trees"] - 300), budget=30, seed=1, space=search_space(K_GRID))
    for cfg, _ in res.history:
        hp, k = split_params(cfg)
        assert k in K_GRID
    assert res.best_score == max(s for _, s in res.history)


def test_depth_objective_over_20_seeds():
    hits = sum(
        hyper_search(lambda c: float(c["max_depth"] >= 6), budget=10, seed=s).best["max_depth"] >= 6
        for s in range(20)
    )
    assert hits / 20 >= 0.95


def test_search_is_deterministic():
    obj = lambda c: c["max_depth"] * 0.1 - c["min_leaf"] * 0.05 + (c["class_weight"] == "balanced")
    a = hyper_search(obj, budget=20, seed=np.random.SeedSequence(9))
    b = hyper_search(obj, budget=20, seed=np.random.SeedSequence(9))
    assert a.history == b.history


def test_space_covers_every_choice():
    names = [d.name for d in RF_SPACE]
    assert names == ["n_trees", "max_depth", "min_leaf", "features_per_split", "class_weight"]
    for fps, cw in product(RF_SPACE[3].choices, RF_SPACE[4].choices):
        HyperParams(features_per_split=fps, class_weight=cw)
