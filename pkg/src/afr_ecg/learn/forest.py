"""Bagged CART random forest on top of the compiled tree kernel."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import kernels
from ..errors import SingleClassTraining


@dataclass(frozen=True)
class HyperParams:
    n_trees: int = 100
    max_depth: int = 6
    min_leaf: int = 1
    features_per_split: object = "sqrt"  # "sqrt", "log2" or a fraction in (0, 1]
    class_weight: str = "none"           # "none" or "balanced"

    def __post_init__(self):
        if not 50 <= self.n_trees <= 500:
            raise ValueError("n_trees must be in [50, 500]")
        if not 2 <= self.max_depth <= 12:
            raise ValueError("max_depth must be in [2, 12]")
        if not 1 <= self.min_leaf <= 8:
            raise ValueError("min_leaf must be in [1, 8]")
        fps = self.features_per_split
        if isinstance(fps, str):
            if fps not in ("sqrt", "log2"):
                raise ValueError("features_per_split must be sqrt, log2 or a fraction")
        elif not 0 < float(fps) <= 1:
            raise ValueError("features_per_split fraction must be in (0, 1]")
        if self.class_weight not in ("none", "balanced"):
            raise ValueError("class_weight must be none or balanced")

    def mtry(self, p: int) -> int:
        fps = self.features_per_split
        if fps == "sqrt":
            m = int(math.sqrt(p))
        elif fps == "log2":
            m = int(math.log2(p)) if p > 1 else 1
        else:
            m = int(float(fps) * p)
        return min(max(m, 1), p)

    def as_dict(self) -> dict:
        return {
            "n_trees": self.n_trees, "max_depth": self.max_depth, "min_leaf": self.min_leaf,
            "features_per_split": self.features_per_split, "class_weight": self.class_weight,
        }


@dataclass(frozen=True)
class Forest:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    roots: np.ndarray
    n_features: int

    @property
    def n_trees(self) -> int:
        return int(self.roots.size)


def class_weights(y, mode: str):
    y = np.asarray(y)
    if mode == "none":
        return (1.0, 1.0)
    n = y.size
    n1 = int((y == 1).sum())
    return (n / (2.0 * (n - n1)), n / (2.0 * n1))


def tree_seeds(seed, n_trees: int) -> np.ndarray:
    return np.random.SeedSequence(seed).generate_state(n_trees, dtype=np.uint64)


def rf_train(X, y, hp: HyperParams, seed) -> Forest:
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y).astype(np.int64)
    if X.ndim != 2 or X.shape[0] != y.size:
        raise ValueError("X must be (n_samples, n_features) matching y")
    if np.unique(y).size < 2:
        raise SingleClassTraining("training labels contain a single class")
    cw = class_weights(y, hp.class_weight)
    mtry = hp.mtry(X.shape[1])
    parts = []
    roots = []
    offset = 0
    for s in tree_seeds(seed, hp.n_trees):
        f, t, l, r, v = kernels.fit_tree(X, y, cw, hp.max_depth, hp.min_leaf, mtry, int(s))
        l = np.where(l >= 0, l + offset, -1).astype(np.int32)
        r = np.where(r >= 0, r + offset, -1).astype(np.int32)
        parts.append((f, t, l, r, v))
        roots.append(offset)
        offset += f.size
    cat = [np.concatenate([p[i] for p in parts]) for i in range(5)]
    return Forest(*cat, roots=np.asarray(roots, dtype=np.int64), n_features=X.shape[1])


def rf_votes(forest: Forest, X) -> np.ndarray:
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != forest.n_features:
        raise ValueError(f"expected {forest.n_features} features, got {X.shape[1]}")
    return np.asarray(kernels.predict_votes(
        X, forest.feature, forest.threshold, forest.left, forest.right, forest.value, forest.roots
    ))


def rf_predict(forest: Forest, X) -> np.ndarray:
    """Fraction of trees voting for class 1, per row."""
    return rf_votes(forest, X) / forest.n_trees
