import json
import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from afr_ecg.errors import FoldClassCollapse, TooFewPatients
from afr_ecg.features import ECG_FEATURES
from afr_ecg.learn import CohortTable, CvConfig, nested_cv, stratified_folds
from afr_ecg.learn import cv as cv_mod

from cohorts import PLANTED, planted_cohort

SMALL_FEATURES = [PLANTED] + [f for f in ECG_FEATURES if f != PLANTED][:29]
FAST = CvConfig(outer_k=4, inner_k=4, budget=10, seed=7)


def _small(n=20, **kw):
    return planted_cohort(n, n_segments=3, features=SMALL_FEATURES, **kw)


def test_43_patients_fold_sizes():
    pids = [f"P{i}" for i in range(43)]
    labels = {p: int(i < 15) for i, p in enumerate(pids)}
    folds = stratified_folds(pids, labels, 8, seed=0)
    assert sorted(map(len, folds), reverse=True) == [6, 6, 6, 5, 5, 5, 5, 5]
    assert sorted(p for f in folds for p in f) == sorted(pids)
    positives = [sum(labels[p] for p in f) for f in folds]
    assert max(positives) - min(positives) <= 1


@settings(max_examples=40, deadline=None)
@given(n=st.integers(8, 60), k=st.integers(2, 8), seed=st.integers(0, 1000), n_pos=st.integers(1, 7))
def test_folds_partition_patients(n, k, seed, n_pos):
    pids = [f"P{i}" for i in range(n)]
    labels = {p: int(i % 8 < n_pos) for i, p in enumerate(pids)}
    folds = stratified_folds(pids, labels, k, seed)
    counts = Counter(p for f in folds for p in f)
    assert set(counts) == set(pids) and set(counts.values()) == {1}
    sizes = [len(f) for f in folds]
    assert max(sizes) - min(sizes) <= 1


def test_report_shape_and_grouping():
    rep = nested_cv(_small(), "meta+ecg", "post", FAST)
    assert len(rep.folds) == 4
    seen = [p for f in rep.folds for p in f.test_patients]
    assert len(seen) == len(set(seen)) == 20
    used = [f for f in rep.folds if not f.skipped]
    assert rep.mean_auroc == sum(f.auroc for f in used) / len(used)
    for f in used:
        assert f.n_inner_folds == 4
        assert len(f.selected_features) == f.hyperparams["k"]
        assert f.hyperparams["k"] in FAST.k_grid


def test_trace_never_shows_test_patients():
    rep = nested_cv(_small(), "ecg", "post", FAST)
    tests = {f.fold: set(f.test_patients) for f in rep.folds}
    stages = Counter()
    for entry in rep.trace:
        if entry["stage"] == "split":
            continue
        stages[entry["stage"]] += 1
        assert not set(entry["patients"]) & tests[entry["fold"]]
        assert set(entry["patients"]) | tests[entry["fold"]] == set(p for s in tests.values() for p in s)
    assert set(stages.values()) == {4}


def test_fit_calls_see_outer_train_rows_only(monkeypatch):
    """Tag every row with its patient number and audit each fitted object's input."""
    cohort = _small()
    tag = len(cohort.feature_names) - 2  # last ECG column, so mRMR and the scaler see it
    tags = np.array([float(p[1:]) for p in cohort.patient_ids])
    tagged = CohortTable(
        cohort.patient_ids, cohort.segments,
        np.column_stack([cohort.X[:, :-2], tags, cohort.X[:, -2:]]),
        cohort.feature_names[:-2] + ["tag"] + cohort.feature_names[-2:], cohort.labels,
    )
    calls = []
    real = {n: getattr(cv_mod, n) for n in ("median_imputer_fit", "standardizer_fit", "mrmr_select", "rf_train")}

    def imputer(X, *a, **k):
        calls.append(("imputer", set(np.asarray(X)[:, tag])))
        return real["median_imputer_fit"](X, *a, **k)

    def scaler(X, *a, **k):
        sc = real["standardizer_fit"](X, *a, **k)
        calls.append(("scaler", set(np.asarray(X)[:, tag]), sc))
        return sc

    def mrmr(X, y, k):
        sc = [c for c in calls if c[0] == "scaler"][-1][2]
        raw = np.asarray(X)[:, tag] * sc.scale[tag] + sc.mean[tag]
        calls.append(("mrmr", set(np.rint(raw))))
        ranking = real["mrmr_select"](X, y, k)
        calls.append(("ranking", ranking, np.asarray(X).copy()))
        return ranking

    def forest(X, y, hp, seed):
        _, ranking, S = [c for c in calls if c[0] == "ranking"][-1]
        allowed = {row.tobytes() for row in np.ascontiguousarray(S[:, ranking[: X.shape[1]]])}
        calls.append(("forest", all(row.tobytes() in allowed for row in np.ascontiguousarray(X))))
        return real["rf_train"](X, y, hp, seed)

    monkeypatch.setattr(cv_mod, "median_imputer_fit", imputer)
    monkeypatch.setattr(cv_mod, "standardizer_fit", scaler)
    monkeypatch.setattr(cv_mod, "mrmr_select", mrmr)
    monkeypatch.setattr(cv_mod, "rf_train", forest)
    rep = nested_cv(tagged, "ecg", "post", FAST)

    fold = -1
    tests = [set(float(p[1:]) for p in f.test_patients) for f in rep.folds]
    n_forest = 0
    for c in calls:
        if c[0] == "imputer":
            fold += 1
        if c[0] in ("imputer", "scaler", "mrmr"):
            assert c[1] and not (c[1] & tests[fold]), (c[0], fold)
        if c[0] == "forest":
            assert c[1]
            n_forest += 1
    assert fold == 3 and n_forest > 0


def test_determinism():
    a = nested_cv(_small(), "meta+ecg", "post", FAST).to_dict()
    b = nested_cv(_small(), "meta+ecg", "post", FAST).to_dict()
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)


def test_meta_only_uses_no_mrmr():
    rep = nested_cv(_small(), "meta", "pre", FAST)
    assert all(e["stage"] != "mrmr" for e in rep.trace)
    for f in rep.folds:
        assert sorted(f.selected_features) == ["age", "sex"]


def test_too_few_patients():
    with pytest.raises(TooFewPatients):
        nested_cv(_small(n=14), "ecg", "post", FAST)
    one_class = _small()
    one_class.labels = {p: 1 for p in one_class.labels}
    with pytest.raises(TooFewPatients):
        nested_cv(one_class, "ecg", "post", FAST)


def test_unlabeled_patients_are_left_out():
    cohort = _small(n=22)
    cohort.labels["P000"] = None
    cohort.labels.pop("P001")
    rep = nested_cv(cohort, "ecg", "post", FAST)
    assert rep.n_patients == 20


def test_one_class_test_fold_is_skipped():
    cohort = _small(n=20)
    # three positives only: with eight outer folds some test folds hold negatives only
    cohort.labels = {p: int(i < 3) for i, p in enumerate(sorted(cohort.labels))}
    rep = nested_cv(cohort, "ecg", "post", CvConfig(outer_k=8, inner_k=3, budget=10, seed=1))
    skipped = [f for f in rep.folds if f.skipped]
    assert skipped and all(f.reason == "one_class_test_fold" for f in skipped)
    assert rep.mean_auroc == pytest.approx(np.mean([f.auroc for f in rep.folds if not f.skipped]))


def test_every_fold_one_class_raises(caplog):
    # a single positive patient: its own fold trains on one class, every other fold tests on one
    cohort = _small(n=16)
    cohort.labels = {p: int(i == 0) for i, p in enumerate(sorted(cohort.labels))}
    with pytest.raises(FoldClassCollapse):
        nested_cv(cohort, "ecg", "post", CvConfig(outer_k=16, inner_k=2, budget=10, seed=0))
    assert caplog.text.count("training patients share one class") == 1
    assert caplog.text.count("test patients share one class") == 15


def test_report_files(tmp_path):
    rep = nested_cv(_small(), "meta+ecg", "post", CvConfig(outer_k=4, inner_k=4, budget=10, pooled=True, seed=7))
    rep.write_json(tmp_path / "r.json")
    rep.write_roc_csv(tmp_path / "r.csv")
    d = json.loads((tmp_path / "r.json").read_text())
    assert d["mean_auroc"] == rep.mean_auroc
    assert 0.0 <= d["pooled_auroc"] <= 1.0
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "fold,threshold,fpr,tpr"
    assert all(line.split(",")[1] == "inf" for line in lines[1:] if line.split(",")[2:] == ["0.0", "0.0"])
    assert not math.isnan(d["folds"][0]["inner_auroc"])
