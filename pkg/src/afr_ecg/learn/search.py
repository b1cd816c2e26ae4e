"""Sequential model-based hyperparameter search.

The first ``ceil(budget / 3)`` points come from a scrambled Sobol sequence.
Every later point maximises the univariate Parzen density ratio
``l(x) / g(x)`` (tree-structured Parzen estimator), where ``l`` is fitted to
the best quarter of the history and ``g`` to the rest.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.stats import qmc

from .forest import HyperParams

GAMMA = 0.25
N_CANDIDATES = 24


@dataclass(frozen=True)
class IntDim:
    name: str
    lo: int
    hi: int

    def decode(self, u: float) -> int:
        return self.lo + min(int(u * (self.hi - self.lo + 1)), self.hi - self.lo)

    def unit(self, v) -> float:
        return 0.5 if self.hi == self.lo else (v - self.lo) / (self.hi - self.lo)


@dataclass(frozen=True)
class CatDim:
    name: str
    choices: tuple

    def decode(self, u: float):
        return self.choices[min(int(u * len(self.choices)), len(self.choices) - 1)]


RF_SPACE = (
    IntDim("n_trees", 50, 500),
    IntDim("max_depth", 2, 12),
    IntDim("min_leaf", 1, 8),
    CatDim("features_per_split", ("sqrt", "log2", 0.2, 0.4, 0.6, 0.8, 1.0)),
    CatDim("class_weight", ("none", "balanced")),
)
K_GRID = (3, 5, 8, 13, 21)


def search_space(k_choices: Sequence[int] = ()) -> tuple:
    """RF space, plus the mRMR feature count when ``k_choices`` is non-empty."""
    return RF_SPACE + ((CatDim("k", tuple(k_choices)),) if k_choices else ())


def split_params(cfg: dict):
    """(HyperParams, k or None) from a sampled configuration."""
    hp = HyperParams(**{d.name: cfg[d.name] for d in RF_SPACE})
    return hp, cfg.get("k")


@dataclass
class SearchResult:
    best: dict
    best_score: float
    history: list = field(default_factory=list)  # (config, score) in evaluation order

    @property
    def n_evaluations(self) -> int:
        return len(self.history)


def _sobol(d, n, seed):
    sampler = qmc.Sobol(d, scramble=True, seed=seed)
    m = max(int(math.ceil(math.log2(max(n, 1)))), 0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return sampler.random_base2(m)[:n]


def _log_parzen_num(z, centers, bw):
    # mixture of truncated-free Gaussians plus a uniform prior component on [0, 1]
    k = centers.size + 1
    dens = np.exp(-0.5 * ((z[:, None] - centers[None, :]) / bw) ** 2) / (bw * math.sqrt(2 * math.pi))
    return np.log((dens.sum(axis=1) + 1.0) / k)


def _propose(space, history, rng):
    scores = np.array([s for _, s in history])
    order = np.argsort(-scores, kind="stable")
    n_good = max(1, int(math.ceil(GAMMA * len(history))))
    good = [history[i][0] for i in order[:n_good]]
    bad = [history[i][0] for i in order[n_good:]]
    cand = [dict() for _ in range(N_CANDIDATES)]
    logratio = np.zeros(N_CANDIDATES)
    for d in space:
        if isinstance(d, IntDim):
            gz = np.array([d.unit(c[d.name]) for c in good])
            bz = np.array([d.unit(c[d.name]) for c in bad])
            bw_g = max(0.05, 0.5 * len(gz) ** -0.2)
            bw_b = max(0.05, 0.5 * max(len(bz), 1) ** -0.2)
            pick = rng.integers(0, gz.size + 1, N_CANDIDATES)
            z = np.where(pick < gz.size, gz[np.minimum(pick, gz.size - 1)] + bw_g * rng.standard_normal(N_CANDIDATES), rng.random(N_CANDIDATES))
            z = np.clip(z, 0.0, 1.0)
            vals = [d.decode(min(u, 1.0 - 1e-12)) for u in z]
            zq = np.array([d.unit(v) for v in vals])
            logratio += _log_parzen_num(zq, gz, bw_g) - _log_parzen_num(zq, bz, bw_b)
        else:
            m = len(d.choices)
            cg = np.array([sum(c[d.name] == ch for c in good) for ch in d.choices], dtype=np.float64) + 1.0
            cb = np.array([sum(c[d.name] == ch for c in bad) for ch in d.choices], dtype=np.float64) + 1.0
            pg, pb = cg / cg.sum(), cb / cb.sum()
            idx = rng.choice(m, size=N_CANDIDATES, p=pg)
            vals = [d.choices[i] for i in idx]
            logratio += np.log(pg[idx]) - np.log(pb[idx])
        for c, v in zip(cand, vals):
            c[d.name] = v
    seen = {tuple(sorted(c.items(), key=lambda kv: kv[0])) for c, _ in history}
    for i in np.argsort(-logratio, kind="stable"):
        key = tuple(sorted(cand[i].items(), key=lambda kv: kv[0]))
        if key not in seen:
            return cand[i]
    return cand[int(np.argmax(logratio))]


def hyper_search(objective: Callable[[dict], float], budget: int = 50, seed=0, space=RF_SPACE) -> SearchResult:
    """Maximise ``objective`` over ``space`` with exactly ``budget`` evaluations.

    The best configuration is the earliest one reaching the maximum score.
    """
    if budget < 10:
        raise ValueError("budget must be >= 10")
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    sobol_seed, tpe_seed = ss.spawn(2)
    n_init = int(math.ceil(budget / 3))
    init = _sobol(len(space), n_init, np.random.default_rng(sobol_seed))
    rng = np.random.default_rng(tpe_seed)
    history = []
    for i in range(budget):
        if i < n_init:
            cfg = {d.name: d.decode(u) for d, u in zip(space, init[i])}
        else:
            cfg = _propose(space, history, rng)
        history.append((cfg, float(objective(cfg))))
    scores = [s for _, s in history]
    finite = [s if np.isfinite(s) else -np.inf for s in scores]
    b = int(np.argmax(finite))
    return SearchResult(dict(history[b][0]), scores[b], history)
