"""Patient-level ROC analysis and segment vote aggregation."""
from __future__ import annotations

import numpy as np
from scipy.stats import rankdata

from ..errors import OneClassOnly


def roc_auc(scores, labels):
    """AUROC by the Mann-Whitney rank statistic (ties count 1/2) and the ROC curve.

    Returns ``(auc, points)`` where ``points`` is an (m, 3) array of
    ``(threshold, fpr, tpr)``, one row per distinct score (descending) after
    a leading ``(inf, 0, 0)``.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels).astype(np.int64)
    if s.shape != y.shape:
        raise ValueError("scores and labels must have the same shape")
    n1 = int((y == 1).sum())
    n0 = int((y == 0).sum())
    if n1 == 0 or n0 == 0:
        raise OneClassOnly("both classes are required")
    ranks = rankdata(s)  # average ranks for ties
    u = float(ranks[y == 1].sum()) - n1 * (n1 + 1) / 2.0
    auc = u / (n1 * n0)
    thr = np.unique(s)[::-1]
    tp = np.array([(s[y == 1] >= t).sum() for t in thr], dtype=np.float64)
    fp = np.array([(s[y == 0] >= t).sum() for t in thr], dtype=np.float64)
    pts = np.column_stack([np.r_[np.inf, thr], np.r_[0.0, fp / n0], np.r_[0.0, tp / n1]])
    return auc, pts


def auc_bruteforce(scores, labels) -> float:
    """Pairwise concordance count; reference for ``roc_auc``."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    pos, neg = s[y == 1], s[y == 0]
    if pos.size == 0 or neg.size == 0:
        raise OneClassOnly("both classes are required")
    conc = (pos[:, None] > neg[None, :]).sum() + 0.5 * (pos[:, None] == neg[None, :]).sum()
    return float(conc) / (pos.size * neg.size)


def vote(probabilities, threshold: float = 0.5):
    """Share of segments with probability above ``threshold`` and the hard patient label."""
    p = np.asarray(probabilities, dtype=np.float64)
    if p.size == 0:
        raise ValueError("no segment predictions")
    score = float((p > threshold).sum()) / p.size
    return score, int(score > 0.5)


def patient_scores(patient_ids, probabilities, mode: str = "vote") -> dict:
    """Aggregate segment probabilities into one score per patient (insertion order kept)."""
    groups = {}
    for pid, pr in zip(patient_ids, probabilities):
        groups.setdefault(pid, []).append(pr)
    if mode == "vote":
        return {pid: vote(v)[0] for pid, v in groups.items()}
    if mode == "mean":
        return {pid: float(np.mean(v)) for pid, v in groups.items()}
    raise ValueError("mode must be vote or mean")
