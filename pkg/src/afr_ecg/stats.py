"""Paired pre/post significance analysis and the volcano table.

For every feature the patients with both phases present form the pairs.
Significance needs ``p < alpha`` and a fold-change criterion. Two readings
of the fold-change threshold are supported:

* ``log2``: ``|log2 mean_fc| >= fc_threshold`` (two-fold change for 1.0);
* ``raw``:  ``|mean_fc| > fc_threshold``, the literal rule.

A Benjamini-Hochberg ``q_value`` column is reported for reference; it does
not enter the significance flag.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.special import betainc

from .errors import AllPairsDegenerate, InsufficientPairs

FC_MODES = ("log2", "raw")
VOLCANO_COLUMNS = (
    "feature", "p_value", "mean_fc", "log2_fc", "significant",
    "t_stat", "n_pairs", "q_value", "dropped_zero_pre", "sign_varies", "degenerate", "note",
)


class TTest(NamedTuple):
    t: float
    p: float
    n: int
    degenerate: bool


def _complete_pairs(pre, post):
    pre = np.asarray(pre, dtype=np.float64)
    post = np.asarray(post, dtype=np.float64)
    if pre.shape != post.shape:
        raise ValueError("pre and post must have the same length")
    keep = ~(np.isnan(pre) | np.isnan(post))
    return pre[keep], post[keep]


def student_t_sf2(t: float, df: float) -> float:
    """Two-sided tail probability P(|T| >= |t|) for Student's t."""
    if math.isinf(t):
        return 0.0
    return float(betainc(0.5 * df, 0.5, df / (df + t * t)))


def paired_ttest(pre, post) -> TTest:
    """Paired t-test on ``d = post - pre`` over complete pairs.

    A zero-variance difference vector is flagged as degenerate: p is 1 when
    the mean difference is 0 (t = 0) and 0 otherwise (t = +-inf).
    """
    a, b = _complete_pairs(pre, post)
    n = a.size
    if n < 3:
        raise InsufficientPairs(f"{n} complete pairs, need >= 3")
    d = b - a
    mean = float(np.mean(d))
    sd = float(np.std(d, ddof=1))
    if sd == 0.0 or not np.isfinite(sd):
        if mean == 0.0:
            return TTest(0.0, 1.0, n, True)
        return TTest(math.copysign(math.inf, mean), 0.0, n, True)
    t = mean / (sd / math.sqrt(n))
    return TTest(t, student_t_sf2(t, n - 1), n, False)


@dataclass(frozen=True)
class FoldChange:
    mean_fc: float
    dropped: int
    sign_varies: bool


def mean_fold_change(pre, post) -> FoldChange:
    """Mean of per-patient ``post / pre`` ratios; pairs with ``pre == 0`` are dropped and counted."""
    a, b = _complete_pairs(pre, post)
    nz = a != 0
    if not nz.any():
        raise AllPairsDegenerate("every pre value is zero")
    ratio = b[nz] / a[nz]
    signs = np.sign(ratio)
    return FoldChange(float(np.mean(ratio)), int((~nz).sum()), bool(np.unique(signs).size > 1))


def bh_qvalues(p) -> np.ndarray:
    """Benjamini-Hochberg adjusted p-values; NaN entries stay NaN and are not counted."""
    p = np.asarray(p, dtype=np.float64)
    q = np.full(p.shape, np.nan)
    ok = np.nonzero(~np.isnan(p))[0]
    m = ok.size
    if m == 0:
        return q
    order = ok[np.argsort(p[ok], kind="stable")]
    adj = p[order] * m / np.arange(1, m + 1)
    adj = np.minimum.accumulate(adj[::-1])[::-1]
    q[order] = np.minimum(adj, 1.0)
    return q


@dataclass
class PairedFeatureTable:
    """Aligned pre/post matrices (patients x features), NaN for missing."""

    patient_ids: list
    features: list
    pre: np.ndarray
    post: np.ndarray

    def __post_init__(self):
        self.pre = np.asarray(self.pre, dtype=np.float64)
        self.post = np.asarray(self.post, dtype=np.float64)
        shape = (len(self.patient_ids), len(self.features))
        if self.pre.shape != shape or self.post.shape != shape:
            raise ValueError(f"matrices must be {shape}")

    @property
    def n(self) -> int:
        return len(self.patient_ids)

    @classmethod
    def from_rows(cls, pre_rows: dict, post_rows: dict, features: Sequence[str]):
        """Build from ``{patient_id: {feature: value}}`` maps; keeps patients present in both."""
        ids = sorted(set(pre_rows) & set(post_rows))
        feats = list(features)
        get = lambda rows: np.array([[rows[p].get(f, np.nan) for f in feats] for p in ids], dtype=np.float64).reshape(len(ids), len(feats))
        return cls(ids, feats, get(pre_rows), get(post_rows))


@dataclass
class VolcanoRow:
    feature: str
    p_value: float
    mean_fc: float
    log2_fc: float
    significant: bool
    t_stat: float = np.nan
    n_pairs: int = 0
    q_value: float = np.nan
    dropped_zero_pre: int = 0
    sign_varies: bool = False
    degenerate: bool = False
    note: str = ""


def is_significant(p_value, mean_fc, alpha=0.05, fc_threshold=1.0, fc_mode="log2") -> bool:
    if fc_mode not in FC_MODES:
        raise ValueError(f"fc_mode must be one of {FC_MODES}")
    if not (p_value < alpha):
        return False
    if fc_mode == "raw":
        return bool(abs(mean_fc) > fc_threshold)
    l2 = math.log2(mean_fc) if mean_fc > 0 else math.nan
    return bool(abs(l2) >= fc_threshold)


def volcano(table: PairedFeatureTable, alpha: float = 0.05, fc_threshold: float = 1.0, fc_mode: str = "log2") -> list:
    """One ``VolcanoRow`` per feature, sorted by p ascending (ties and NaN by feature order)."""
    if table.n < 3:
        raise InsufficientPairs(f"{table.n} patients, need >= 3")
    if fc_mode not in FC_MODES:
        raise ValueError(f"fc_mode must be one of {FC_MODES}")
    rows = []
    for j, name in enumerate(table.features):
        a, b = table.pre[:, j], table.post[:, j]
        row = VolcanoRow(name, np.nan, np.nan, np.nan, False)
        try:
            tt = paired_ttest(a, b)
        except InsufficientPairs:
            row.n_pairs = int((~(np.isnan(a) | np.isnan(b))).sum())
            row.note = "insufficient_pairs"
            rows.append(row)
            continue
        row.p_value, row.t_stat, row.n_pairs, row.degenerate = tt.p, tt.t, tt.n, tt.degenerate
        try:
            fc = mean_fold_change(a, b)
            row.mean_fc, row.dropped_zero_pre, row.sign_varies = fc.mean_fc, fc.dropped, fc.sign_varies
            row.log2_fc = math.log2(fc.mean_fc) if fc.mean_fc > 0 else np.nan
        except AllPairsDegenerate:
            row.note = "all_pre_zero"
        row.significant = is_significant(row.p_value, row.mean_fc, alpha, fc_threshold, fc_mode)
        rows.append(row)
    q = bh_qvalues([r.p_value for r in rows])
    for r, qv in zip(rows, q):
        r.q_value = float(qv)
    order = sorted(range(len(rows)), key=lambda i: (np.isnan(rows[i].p_value), rows[i].p_value if not np.isnan(rows[i].p_value) else 0.0, i))
    return [rows[i] for i in order]


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    v = float(v)
    return "" if math.isnan(v) else repr(v)


def write_volcano(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(VOLCANO_COLUMNS)
        for r in rows:
            w.writerow([_fmt(getattr(r, c)) for c in VOLCANO_COLUMNS])


def read_volcano(path) -> list:
    out = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            f = lambda k: float(rec[k]) if rec[k] != "" else np.nan
            out.append(VolcanoRow(
                rec["feature"], f("p_value"), f("mean_fc"), f("log2_fc"), rec["significant"] == "1",
                t_stat=f("t_stat"), n_pairs=int(rec["n_pairs"]), q_value=f("q_value"),
                dropped_zero_pre=int(rec["dropped_zero_pre"]), sign_varies=rec["sign_varies"] == "1",
                degenerate=rec["degenerate"] == "1", note=rec["note"],
            ))
    return out
