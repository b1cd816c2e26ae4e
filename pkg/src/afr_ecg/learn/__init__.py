"""Risk-prediction protocol: preprocessing, mRMR, random forest, search and nested CV."""
from .cv import CohortTable, CvConfig, CvReport, FoldResult, nested_cv, stratified_folds
from .forest import Forest, HyperParams, rf_predict, rf_train
from .metrics import auc_bruteforce, patient_scores, roc_auc, vote
from .mrmr import mrmr_select
from .preprocess import MedianImputer, Standardizer, median_imputer_fit, standardizer_fit
from .search import SearchResult, hyper_search, search_space

__all__ = [
    "CohortTable", "CvConfig", "CvReport", "FoldResult", "nested_cv", "stratified_folds",
    "Forest", "HyperParams", "rf_predict", "rf_train",
    "auc_bruteforce", "patient_scores", "roc_auc", "vote",
    "mrmr_select",
    "MedianImputer", "Standardizer", "median_imputer_fit", "standardizer_fit",
    "SearchResult", "hyper_search", "search_space",
]
