import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from afr_ecg.errors import AllPairsDegenerate, InsufficientPairs
from afr_ecg.stats import (
    PairedFeatureTable, bh_qvalues, is_significant, mean_fold_change, paired_ttest, read_volcano,
    volcano, write_volcano,
)

from oracles import oracle_ttest


def test_textbook_example():
    r = paired_ttest([1, 2, 3, 4], [2, 4, 3, 6])
    assert round(r.t, 3) == 2.611
    # frozen from the quadrature oracle; the hand-derived 0.0797 agrees to 1e-4
    assert r.p == pytest.approx(0.0796049808179063, abs=1e-12)
    assert abs(r.p - 0.0797) < 2e-4
    assert r.n == 4 and not r.degenerate
    t, p = oracle_ttest([1, 2, 3, 4], [2, 4, 3, 6])
    assert abs(r.p - p) <= 1e-12


def test_matches_quadrature_oracle():
    rng = np.random.default_rng(0)
    for _ in range(100):
        n = int(rng.integers(3, 16))
        pre = rng.normal(10, 3, n)
        post = pre + rng.normal(rng.normal(0, 1), 2, n)
        r = paired_ttest(pre, post)
        t, p = oracle_ttest(pre, post)
        assert abs(r.p - p) <= 1e-8
        assert r.t == pytest.approx(t, rel=1e-10)


def test_degenerate_cases():
    r = paired_ttest([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
    assert (r.t, r.p, r.degenerate) == (0.0, 1.0, True)
    r = paired_ttest([1.0, 2.0, 3.0], [2.0, 3.0, 4.0])
    assert r.t == math.inf and r.p == 0.0 and r.degenerate
    with pytest.raises(InsufficientPairs):
        paired_ttest([1.0, 2.0], [3.0, 5.0])
    with pytest.raises(InsufficientPairs):
        paired_ttest([1.0, 2.0, np.nan], [3.0, 5.0, 1.0])


vectors = st.lists(st.tuples(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3)), min_size=3, max_size=20)


@settings(max_examples=80, deadline=None)
@given(pairs=vectors)
def test_antisymmetry(pairs):
    pre, post = map(np.array, zip(*pairs))
    a, b = paired_ttest(pre, post), paired_ttest(post, pre)
    assert a.t == -b.t
    assert a.p == b.p


@settings(max_examples=80, deadline=None)
@given(pairs=st.lists(st.tuples(st.floats(1, 1e3), st.floats(1, 1e3)), min_size=3, max_size=20),
       k=st.floats(1e-3, 1e3))
def test_unit_invariance(pairs, k):
    pre, post = map(np.array, zip(*pairs))
    d = post - pre
    # differences equal up to rounding make sd itself a rounding artifact
    assume(np.std(d) > 1e-6 * (np.abs(d).max() + 1.0))
    a, b = paired_ttest(pre, post), paired_ttest(pre * k, post * k)
    assert b.t == pytest.approx(a.t, rel=1e-7)
    assert b.p == pytest.approx(a.p, rel=1e-6, abs=1e-12)
    assert mean_fold_change(pre * k, post * k).mean_fc == pytest.approx(mean_fold_change(pre, post).mean_fc, rel=1e-12)


def test_fold_change_examples():
    assert mean_fold_change([2, 2], [4, 8]).mean_fc == 3.0
    assert mean_fold_change([3, 5, 7], [3, 5, 7]).mean_fc == 1.0
    fc = mean_fold_change([1, 0, 2], [2, 5, 2])
    assert fc.mean_fc == 1.5 and fc.dropped == 1
    assert mean_fold_change([-1, 2], [1, 2]).sign_varies
    with pytest.raises(AllPairsDegenerate):
        mean_fold_change([0, 0], [1, 2])


def test_bh_qvalues_against_definition():
    rng = np.random.default_rng(1)
    p = rng.uniform(0, 1, 30) ** 3
    p[[4, 9]] = np.nan
    q = bh_qvalues(p)
    ok = ~np.isnan(p)
    m = ok.sum()
    for i in np.nonzero(ok)[0]:
        ranks = {j: int((p[ok] <= p[j]).sum()) for j in np.nonzero(ok)[0]}
        expected = min(min(p[j] * m / ranks[j] for j in ranks if p[j] >= p[i]), 1.0)
        assert q[i] == pytest.approx(expected, rel=1e-12)
    assert np.isnan(q[[4, 9]]).all()


def test_significance_predicate_modes():
    assert is_significant(0.01, 2.0, fc_mode="log2")
    assert is_significant(0.01, 0.5, fc_mode="log2")
    assert not is_significant(0.01, 1.5, fc_mode="log2")
    assert is_significant(0.01, 1.5, fc_mode="raw")
    assert not is_significant(0.01, 0.9, fc_mode="raw")
    assert not is_significant(0.05, 4.0, fc_mode="raw")
    with pytest.raises(ValueError):
        is_significant(0.01, 2.0, fc_mode="abs")


def _table(rng, n=12):
    feats = ["flat", "hr", "noise", "sparse", "zero_pre"]
    pre = np.column_stack([
        np.full(n, 5.0), rng.normal(65, 5, n), rng.normal(100, 10, n), np.full(n, np.nan), np.zeros(n),
    ])
    post = pre.copy()
    post[:, 1] += 20.0 + rng.normal(0, 1, n)
    post[:, 2] = rng.normal(100, 10, n)
    post[:, 4] = rng.normal(1, 0.1, n)
    pre[:2, 3], post[:2, 3] = 1.0, 2.0
    return PairedFeatureTable([f"P{i}" for i in range(n)], feats, pre, post)


@pytest.mark.parametrize("mode", ["log2", "raw"])
def test_volcano_rows(mode):
    rows = volcano(_table(np.random.default_rng(2)), fc_mode=mode)
    by = {r.feature: r for r in rows}
    assert by["flat"].p_value == 1.0 and by["flat"].mean_fc == 1.0 and not by["flat"].significant
    assert by["sparse"].note == "insufficient_pairs" and math.isnan(by["sparse"].p_value)
    assert by["zero_pre"].note == "all_pre_zero" and not by["zero_pre"].significant
    assert by["hr"].log2_fc > 0
    # +20 bpm on ~65 bpm is a ~1.3 fold change: flagged by the literal rule only
    assert by["hr"].significant == (mode == "raw")
    for r in rows:
        assert r.significant == is_significant(r.p_value, r.mean_fc, 0.05, 1.0, mode)
    ps = [r.p_value for r in rows if not math.isnan(r.p_value)]
    assert ps == sorted(ps)
    assert math.isnan(rows[-1].p_value)


def test_volcano_needs_three_patients():
    t = PairedFeatureTable(["a", "b"], ["f"], [[1.0], [2.0]], [[1.0], [3.0]])
    with pytest.raises(InsufficientPairs):
        volcano(t)


def test_volcano_csv_round_trip(tmp_path):
    rows = volcano(_table(np.random.default_rng(3)))
    write_volcano(rows, tmp_path / "v.csv")
    back = read_volcano(tmp_path / "v.csv")
    assert len(back) == len(rows)
    for a, b in zip(rows, back):
        for field in ("p_value", "mean_fc", "log2_fc", "t_stat", "q_value"):
            va, vb = getattr(a, field), getattr(b, field)
            assert (math.isnan(va) and math.isnan(vb)) or va == vb
        assert (a.feature, a.significant, a.n_pairs, a.note) == (b.feature, b.significant, b.n_pairs, b.note)


def test_pure_noise_cohort():
    rng = np.random.default_rng(4)
    n, p = 40, 804
    pre = rng.normal(100, 10, (n, p))
    post = rng.normal(100, 10, (n, p))
    t = PairedFeatureTable([f"P{i}" for i in range(n)], [f"f{j}" for j in range(p)], pre, post)
    rows = volcano(t, fc_mode="log2")
    frac = np.mean([r.p_value < 0.05 for r in rows])
    assert 0.03 <= frac <= 0.07
    assert sum(r.significant for r in rows) == 0
    # the literal rule keeps roughly half of the nominal hits (those with mean FC > 1)
    raw = volcano(t, fc_mode="raw")
    assert 0 < sum(r.significant for r in raw) < sum(r.p_value < 0.05 for r in raw)
