"""Train-only median imputation and standardization."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..errors import AllMissingColumn

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MedianImputer:
    keep: np.ndarray     # indices of retained columns
    medians: np.ndarray  # one per retained column
    dropped: tuple = ()  # indices of all-missing columns

    def apply(self, X):
        X = np.asarray(X, dtype=np.float64)[:, self.keep]
        out = X.copy()
        miss = np.isnan(out)
        out[miss] = np.broadcast_to(self.medians, out.shape)[miss]
        return out


def median_imputer_fit(X, strict: bool = False) -> MedianImputer:
    """Column medians over non-missing training values.

    All-missing columns are dropped with a warning, or raise
    ``AllMissingColumn`` when ``strict``.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("X must be 2-D")
    present = ~np.isnan(X)
    empty = ~present.any(axis=0)
    if empty.any():
        if strict:
            raise AllMissingColumn(f"{int(empty.sum())} column(s) have no training values")
        log.warning("dropping %d all-missing column(s)", int(empty.sum()))
    keep = np.nonzero(~empty)[0]
    med = np.array([np.median(X[present[:, j], j]) for j in keep], dtype=np.float64)
    return MedianImputer(keep, med, tuple(int(j) for j in np.nonzero(empty)[0]))


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray  # 0 marks a constant training column

    def apply(self, X):
        X = np.asarray(X, dtype=np.float64)
        safe = np.where(self.scale > 0, self.scale, 1.0)
        return np.where(self.scale > 0, (X - self.mean) / safe, 0.0)


def standardizer_fit(X) -> Standardizer:
    """Population mean and standard deviation of each training column."""
    X = np.asarray(X, dtype=np.float64)
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    # treat round-off level spread as constant
    sd = np.where(sd > 1e-12 * np.maximum(np.abs(mu), 1.0), sd, 0.0)
    return Standardizer(mu, sd)
