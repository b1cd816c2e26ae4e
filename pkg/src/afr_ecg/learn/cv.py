"""Nested cross-validation with patient-level folds.

Outer loop (default 8 folds): on each outer-train split fit the median
imputer and standardizer, rank features once with mRMR, tune the forest
hyperparameters and the number of mRMR features on the inner loop (default
8 folds), refit on the whole outer-train split and score the outer-test
patients by segment vote. The reported score is the mean of the outer-fold
AUROCs. Every fitted object is logged in ``CvReport.trace`` with the
patients it saw, so leakage can be audited.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from ..errors import FoldClassCollapse, OneClassOnly, SingleClassTraining, TooFewPatients
from .forest import rf_predict, rf_train
from .metrics import patient_scores, roc_auc
from .mrmr import mrmr_select
from .preprocess import median_imputer_fit, standardizer_fit
from .search import K_GRID, hyper_search, search_space, split_params

log = logging.getLogger(__name__)

META_COLUMNS = ("age", "sex")
FEATURE_SETS = ("meta", "ecg", "meta+ecg")
MIN_PATIENTS = 16


@dataclass
class CohortTable:
    """One row per (patient, segment); ``labels`` maps patient_id to 0/1."""

    patient_ids: list
    segments: list
    X: np.ndarray
    feature_names: list
    labels: dict

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        if self.X.shape != (len(self.patient_ids), len(self.feature_names)):
            raise ValueError("X shape does not match rows x feature_names")
        if len(self.segments) != len(self.patient_ids):
            raise ValueError("segments must have one entry per row")

    def columns_for(self, feature_set: str) -> list:
        if feature_set not in FEATURE_SETS:
            raise ValueError(f"feature_set must be one of {FEATURE_SETS}")
        meta = [c for c in self.feature_names if c in META_COLUMNS]
        ecg = [c for c in self.feature_names if c not in META_COLUMNS]
        return {"meta": meta, "ecg": ecg, "meta+ecg": ecg + meta}[feature_set]


@dataclass(frozen=True)
class CvConfig:
    outer_k: int = 8
    inner_k: int = 8
    budget: int = 50
    k_grid: tuple = K_GRID
    aggregation: str = "vote"  # or "mean"
    pooled: bool = False
    seed: int = 0


@dataclass
class FoldResult:
    fold: int
    test_patients: list
    selected_features: list = field(default_factory=list)
    hyperparams: dict = field(default_factory=dict)
    inner_auroc: float = math.nan
    n_inner_folds: int = 0
    auroc: float = math.nan
    roc_points: list = field(default_factory=list)
    skipped: bool = False
    reason: str = ""


@dataclass
class CvReport:
    phase: str
    feature_set: str
    seed: int
    config: dict
    n_patients: int
    folds: list
    mean_auroc: float
    pooled_auroc: Optional[float] = None
    trace: list = field(default_factory=list)

    @property
    def fold_aurocs(self) -> list:
        return [f.auroc for f in self.folds if not f.skipped]

    def to_dict(self) -> dict:
        d = asdict(self)
        return _jsonable(d)

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1, sort_keys=True)
            fh.write("\n")

    def write_roc_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["fold", "threshold", "fpr", "tpr"])
            for f in self.folds:
                for thr, fpr, tpr in f.roc_points:
                    w.writerow([f.fold, "inf" if thr is None else repr(float(thr)), repr(float(fpr)), repr(float(tpr))])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return None if not math.isfinite(v) else v
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def stratified_folds(patients, labels: dict, k: int, seed) -> list:
    """Deal patients round-robin into ``k`` folds: class 0 (shuffled) first, then class 1.

    Fold sizes differ by at most one and each class is spread as evenly as
    possible. Patients are listed sorted inside each fold.
    """
    rng = np.random.default_rng(seed)
    ordered = []
    for c in (0, 1):
        members = sorted(p for p in patients if labels[p] == c)
        ordered += [members[i] for i in rng.permutation(len(members))]
    folds = [[] for _ in range(k)]
    for i, p in enumerate(ordered):
        folds[i % k].append(p)
    return [sorted(f) for f in folds]


def _patient_auc(pids, probs, labels, mode):
    sc = patient_scores(pids, probs, mode)
    ids = list(sc)
    return roc_auc([sc[p] for p in ids], [labels[p] for p in ids])


def nested_cv(cohort: CohortTable, feature_set: str = "meta+ecg", phase: str = "", config: CvConfig = CvConfig()) -> CvReport:
    cols = cohort.columns_for(feature_set)
    if not cols:
        raise TooFewPatients(f"feature set {feature_set!r} has no columns in the table")
    col_idx = [cohort.feature_names.index(c) for c in cols]
    labels = {p: int(v) for p, v in cohort.labels.items() if v is not None and not (isinstance(v, float) and math.isnan(v))}
    row_keep = np.array([p in labels for p in cohort.patient_ids])
    pids = np.array(cohort.patient_ids, dtype=object)[row_keep]
    X = cohort.X[row_keep][:, col_idx]
    patients = sorted(set(pids))
    if len(patients) < MIN_PATIENTS:
        raise TooFewPatients(f"{len(patients)} labeled patients, need >= {MIN_PATIENTS}")
    if len({labels[p] for p in patients}) < 2:
        raise TooFewPatients("labeled patients all share one class")
    y_rows = np.array([labels[p] for p in pids], dtype=np.int64)

    root = np.random.SeedSequence(config.seed)
    split_seed, *fold_seeds = root.spawn(config.outer_k + 1)
    outer = stratified_folds(patients, labels, config.outer_k, split_seed)
    trace = []
    folds = []
    pooled_ids, pooled_scores = [], []
    use_mrmr = feature_set != "meta"

    for f, test_p in enumerate(outer):
        test_set = set(test_p)
        train_p = [p for p in patients if p not in test_set]
        tr = np.array([p not in test_set for p in pids])
        te = ~tr
        res = FoldResult(f, list(test_p))
        fs_inner, fs_forest, fs_search, fs_refit = fold_seeds[f].spawn(4)
        trace.append({"fold": f, "stage": "split", "test": list(test_p)})
        if len({labels[p] for p in train_p}) < 2:
            log.warning("outer fold %d: training patients share one class; fold skipped", f)
            res.skipped = True
            res.reason = "one_class_train_fold"
            folds.append(res)
            continue

        imp = median_imputer_fit(X[tr])
        Xtr = imp.apply(X[tr])
        trace.append({"fold": f, "stage": "imputer", "patients": train_p})
        sc = standardizer_fit(Xtr)
        Xtr = sc.apply(Xtr)
        trace.append({"fold": f, "stage": "scaler", "patients": train_p})
        Xte = sc.apply(imp.apply(X[te]))
        kept = [cols[j] for j in imp.keep]
        p_avail = len(kept)
        ytr = y_rows[tr]
        ptr = pids[tr]

        if use_mrmr:
            k_choices = tuple(k for k in config.k_grid if k <= p_avail) or (p_avail,)
            ranking = mrmr_select(Xtr, ytr, max(k_choices))
            trace.append({"fold": f, "stage": "mrmr", "patients": train_p})
        else:
            k_choices = ()
            ranking = list(range(p_avail))

        inner = stratified_folds(train_p, labels, config.inner_k, fs_inner)
        inner_masks = []
        for val_p in inner:
            vs = set(val_p)
            inner_masks.append(np.array([p in vs for p in ptr]))
        inner_seeds = [int(s) for s in fs_forest.generate_state(config.inner_k)]

        def objective(cfg, _masks=inner_masks, _rank=ranking):
            hp, k = split_params(cfg)
            use = _rank[: (k or len(_rank))]
            aucs = []
            for vm, s in zip(_masks, inner_seeds):
                try:
                    forest = rf_train(Xtr[~vm][:, use], ytr[~vm], hp, s)
                    prob = rf_predict(forest, Xtr[vm][:, use])
                    aucs.append(_patient_auc(ptr[vm], prob, labels, config.aggregation)[0])
                except (SingleClassTraining, OneClassOnly):
                    continue
            return float(np.mean(aucs)) if aucs else -math.inf

        search = hyper_search(objective, config.budget, fs_search, search_space(k_choices))
        trace.append({"fold": f, "stage": "search", "patients": train_p})
        hp, k = split_params(search.best)
        use = ranking[: (k or len(ranking))]
        res.selected_features = [kept[j] for j in use]
        res.hyperparams = dict(hp.as_dict(), k=len(use))
        res.inner_auroc = search.best_score
        res.n_inner_folds = len(inner)

        forest = rf_train(Xtr[:, use], ytr, hp, int(fs_refit.generate_state(1)[0]))
        trace.append({"fold": f, "stage": "refit", "patients": train_p})
        prob = rf_predict(forest, Xte[:, use])
        ps = patient_scores(pids[te], prob, config.aggregation)
        pooled_ids += list(ps)
        pooled_scores += list(ps.values())
        try:
            auc, pts = roc_auc(list(ps.values()), [labels[p] for p in ps])
            res.auroc = float(auc)
            res.roc_points = [[None if math.isinf(t) else float(t), float(a), float(b)] for t, a, b in pts]
        except OneClassOnly:
            err = FoldClassCollapse(f"outer fold {f}: test patients share one class")
            log.warning("%s; fold skipped", err)
            res.skipped = True
            res.reason = "one_class_test_fold"
        folds.append(res)

    aucs = [r.auroc for r in folds if not r.skipped]
    if not aucs:
        raise FoldClassCollapse("every outer fold had a one-class test set")
    pooled = None
    if config.pooled:
        pooled = float(roc_auc(pooled_scores, [labels[p] for p in pooled_ids])[0])
    cfg = asdict(config)
    cfg["k_grid"] = list(config.k_grid)
    return CvReport(phase, feature_set, config.seed, cfg, len(patients), folds, float(np.mean(aucs)), pooled, trace)
