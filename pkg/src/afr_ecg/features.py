"""Per-segment feature vector: 23 HRV + 44 MOR features for each of 12 leads."""
from __future__ import annotations

import logging
from typing import Optional

import numpy as np

from . import hrv, morphology
from .delineation import delineate
from .errors import AnalysisError
from .qrs import PeakList, detect_energy
from .recordio import LEADS, Recording

log = logging.getLogger(__name__)

PER_LEAD = tuple(hrv.FEATURE_NAMES) + tuple(morphology.FEATURE_NAMES)
ECG_FEATURES = tuple(f"{lead}_{name}" for lead in LEADS for name in PER_LEAD)
META_FEATURES = ("age", "sex")

assert len(PER_LEAD) == 67 and len(ECG_FEATURES) == 804


def lead_features(x, peaks: PeakList, fs: float, lead: str = "", hrv_min_intervals: int = hrv.MIN_INTERVALS) -> dict:
    """67 features for one lead; groups that cannot be computed are NaN."""
    out = dict.fromkeys(PER_LEAD, np.nan)
    try:
        out.update(hrv.hrv_features(hrv.rr_from_peaks(peaks, lead), min_intervals=hrv_min_intervals))
    except AnalysisError as exc:
        log.debug("%s: HRV skipped (%s)", lead, exc)
    try:
        fid = delineate(x, peaks, fs, lead)
        out.update(morphology.mor_aggregate(morphology.mor_beats(fid, x, fs)))
    except AnalysisError as exc:
        log.debug("%s: MOR skipped (%s)", lead, exc)
    return out


def segment_features(
    seg: Recording,
    peaks: Optional[list] = None,
    hrv_min_intervals: int = hrv.MIN_INTERVALS,
) -> dict:
    """804 named features ``<lead>_<feature>`` for one segment.

    ``peaks`` optionally supplies one PeakList per lead (indices relative to
    the segment); otherwise the energy detector runs on each lead.
    """
    feats = {}
    for li, lead in enumerate(LEADS):
        x = seg.samples[li]
        pk = peaks[li] if peaks is not None else detect_energy(x, seg.fs)
        for name, value in lead_features(x, pk, seg.fs, lead, hrv_min_intervals).items():
            feats[f"{lead}_{name}"] = value
    return feats
