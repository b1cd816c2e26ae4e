"""Beat-agreement signal quality (bSQI), moving-window scanning and segment selection."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import InsufficientBeats, RegionTooShort
from .qrs import MATCH_TOL_MS, PeakList, detect_energy, detect_filterbank, match_pairs, match_peaks
from .recordio import LEADS, Recording

log = logging.getLogger(__name__)

BSQI_THRESHOLD = 0.8
OVERLAP_S = 5.0


@dataclass(frozen=True)
class ScoredSegment:
    patient_id: str
    phase: str
    start_s: float
    dur_s: float
    bsqi_mean: float
    per_lead_bsqi: tuple

    def __post_init__(self):
        if len(self.per_lead_bsqi) != len(LEADS):
            raise ValueError("need one bSQI per lead")
        if not 0.0 <= self.bsqi_mean <= 1.0:
            raise ValueError(f"bsqi_mean out of range: {self.bsqi_mean}")

    def as_row(self) -> list:
        return [self.patient_id, self.phase, self.start_s, self.dur_s, self.bsqi_mean, *self.per_lead_bsqi]


SEGMENT_COLUMNS = ["patient_id", "phase", "start_s", "dur_s", "bsqi_mean", *(f"bsqi_{l}" for l in LEADS)]


def bsqi(a: PeakList, b: PeakList, tol_ms: float = MATCH_TOL_MS) -> float:
    """Matched beats over all beats reported by either detector."""
    n_match, na, nb = match_peaks(a, b, tol_ms)
    if na == 0 and nb == 0:
        raise InsufficientBeats("neither detector found a beat")
    return n_match / (na + nb - n_match)


def window_starts(region_s: float, window_s: float, stride_s: float) -> np.ndarray:
    if region_s + 1e-9 < window_s:
        raise RegionTooShort(f"region of {region_s} s shorter than window {window_s} s")
    if stride_s <= 0:
        raise ValueError("stride must be positive")
    n = int(np.floor((region_s - window_s) / stride_s + 1e-9)) + 1
    return np.arange(n) * stride_s


def beat_union(a: PeakList, b: PeakList, tol_ms: float = MATCH_TOL_MS) -> tuple[np.ndarray, np.ndarray]:
    """Merge two detectors' peaks into beats: ``(positions, matched)``.

    A matched pair is one beat placed at the pair's midpoint; an unmatched
    peak from either detector is a beat of its own. Counting beats by
    position keeps a pair that straddles a window edge in one window only,
    whereas matching each window's clipped lists would count it as two
    unmatched peaks.
    """
    ia, ib = match_pairs(a, b, tol_ms)
    mid = (a.indices[ia] + b.indices[ib]) // 2
    lone_a = np.delete(a.indices, ia)
    lone_b = np.delete(b.indices, ib)
    pos = np.concatenate([mid, lone_a, lone_b])
    matched = np.concatenate([np.ones(mid.size, bool), np.zeros(lone_a.size + lone_b.size, bool)])
    order = np.argsort(pos, kind="stable")
    return pos[order], matched[order]


def lead_peaks(region: Recording) -> list:
    """Both detectors on every lead of a region: list of (energy, filterbank) pairs."""
    return [(detect_energy(x, region.fs), detect_filterbank(x, region.fs)) for x in region.samples]


def scan(
    region: Recording,
    window_s: float,
    phase: str = "pre",
    overlap_s: float = OVERLAP_S,
    stride_s: Optional[float] = None,
    tol_ms: float = MATCH_TOL_MS,
    peaks: Optional[list] = None,
) -> list:
    """Score every window of a region.

    Windows advance by ``window_s - overlap_s`` (or ``stride_s`` when
    given); a trailing partial window is dropped. Detectors run and are
    matched once per lead over the whole region (see ``beat_union``); a
    window's bSQI on a lead is its matched beats over all its beats, so it
    equals ``bsqi`` on the clipped lists whenever no pair straddles an edge.
    A window where neither detector fires on a lead scores 0 for that lead.
    """
    stride = stride_s if stride_s is not None else window_s - overlap_s
    starts = window_starts(region.duration_s, window_s, stride)
    if peaks is None:
        peaks = lead_peaks(region)
    beats = [beat_union(a, b, tol_ms) for a, b in peaks]
    fs = region.fs
    out = []
    for s in starts:
        lo = int(round(s * fs))
        hi = lo + int(round(window_s * fs))
        per_lead = []
        for pos, matched in beats:
            i, j = np.searchsorted(pos, [lo, hi], side="left")
            # no beat from either detector on this lead: scores 0
            per_lead.append(float(matched[i:j].sum()) / (j - i) if j > i else 0.0)
        out.append(
            ScoredSegment(region.patient_id, phase, float(s), float(window_s),
                          float(np.mean(per_lead)), tuple(per_lead))
        )
    return out


def select(segments: Sequence[ScoredSegment], k: int, threshold: float = BSQI_THRESHOLD) -> list:
    """Top ``k`` segments by mean bSQI (earlier start wins ties).

    Returns an empty list when even the best segment is below ``threshold``.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    ranked = sorted(segments, key=lambda seg: (-seg.bsqi_mean, seg.start_s))
    if not ranked or ranked[0].bsqi_mean < threshold:
        return []
    return ranked[:k]
