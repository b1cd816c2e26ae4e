"""Greedy minimum-redundancy maximum-relevance feature ranking.

Relevance of a feature is its absolute point-biserial correlation with the
binary label. This is a monotone function of the one-way ANOVA F statistic,
``F = (n - 2) r^2 / (1 - r^2)``, so the relevance order is the F order, but
it lives on the same [0, 1] scale as the |Pearson| redundancy term. The
score of a candidate ``f`` given the selected set ``S`` is
``relevance(f) - mean_{s in S} |corr(f, s)|``.
"""
from __future__ import annotations

import numpy as np


def _abs_corr_matrix(X):
    Xc = X - X.mean(axis=0)
    norm = np.sqrt((Xc * Xc).sum(axis=0))
    safe = np.where(norm > 0, norm, 1.0)
    Z = Xc / safe
    C = np.abs(Z.T @ Z)
    C[:, norm == 0] = 0.0
    C[norm == 0, :] = 0.0
    return np.clip(C, 0.0, 1.0)


def relevance(X, y) -> np.ndarray:
    """|point-biserial r| of every column with the label (0 for constant columns)."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    Xc = X - X.mean(axis=0)
    yc = y - y.mean()
    nx = np.sqrt((Xc * Xc).sum(axis=0))
    ny = np.sqrt((yc * yc).sum())
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.abs(Xc.T @ yc) / (nx * ny)
    return np.clip(np.where((nx > 0) & (ny > 0), r, 0.0), 0.0, 1.0)


def f_statistic(X, y) -> np.ndarray:
    """One-way ANOVA F for a binary label (used by tests as the reference order)."""
    r = relevance(X, y)
    n = np.asarray(y).size
    with np.errstate(divide="ignore"):
        return np.where(r < 1, (n - 2) * r * r / (1 - r * r), np.inf)


def mrmr_select(X, y, k: int) -> list:
    """Indices of ``k`` columns in selection order; ties go to the lower column index."""
    X = np.asarray(X, dtype=np.float64)
    p = X.shape[1]
    if not 1 <= k <= p:
        raise ValueError(f"k must be in [1, {p}]")
    if np.isnan(X).any():
        raise ValueError("X must be imputed")
    rel = relevance(X, y)
    C = _abs_corr_matrix(X)
    selected = [int(np.argmax(rel))]
    red_sum = C[:, selected[0]].copy()
    avail = np.ones(p, dtype=bool)
    avail[selected[0]] = False
    while len(selected) < k:
        score = rel - red_sum / len(selected)
        score[~avail] = -np.inf
        j = int(np.argmax(score))
        selected.append(j)
        avail[j] = False
        red_sum += C[:, j]
    return selected
