"""Heart rate variability features from one lead's RR series.

23 features: time domain (AVNN, SDNN, RMSSD, SEM, PNN20, PNN50, minRR,
maxRR, medHR, maxHR), fragmentation (PIP, IALS, PSS, PAS, PACEv), Poincare
(SD1, SD2, SD1_SD2), geometric (HTI, TINN) and the parabolic phase-space
map coefficients (sq_map_quadratic, sq_map_linear, sq_map_intercept).

Fragmentation follows Costa et al. (2017): an interval is an inflection
point when the RR increments on either side satisfy ``d[i-1] * d[i] <= 0``.
Inflection points cut the series into acceleration/deceleration segments.
PACEv is the negated lag-1 autocorrelation of the increments (uncentred),
1 for perfect alternation and 0 for a constant series.

The phase-space map fits ``rr[i+1]**2 = a rr[i]**2 + b rr[i] + c`` (RR in
seconds) by least squares; rank-deficient fits return the minimum-norm
solution and set ``sq_map_degenerate``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SeriesTooShort, TooFewBeats
from .qrs import PeakList

FEATURE_NAMES = (
    "AVNN", "SDNN", "RMSSD", "SEM", "PNN20", "PNN50", "minRR", "maxRR", "medHR", "maxHR",
    "PIP", "IALS", "PSS", "PAS", "PACEv",
    "SD1", "SD2", "SD1_SD2",
    "HTI", "TINN",
    "sq_map_quadratic", "sq_map_linear", "sq_map_intercept",
)
FRACTION_FEATURES = ("PNN20", "PNN50", "PIP", "IALS", "PSS", "PAS")
RR_RANGE_MS = (300.0, 2000.0)
MIN_INTERVALS = 10
HIST_BIN_MS = 1000.0 / 128.0


@dataclass(frozen=True)
class RrSeries:
    values: np.ndarray  # ms
    lead: str = ""

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if np.any(v <= 0):
            raise ValueError("RR intervals must be positive")
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size


class HrvFeatures(dict):
    """Feature name -> value, plus the phase-space degeneracy flag."""

    sq_map_degenerate: bool = False


def rr_from_peaks(peaks: PeakList, lead: str = "") -> RrSeries:
    if len(peaks) < 2:
        raise TooFewBeats(f"need >= 2 peaks, got {len(peaks)}")
    return RrSeries(np.diff(peaks.indices) * 1000.0 / peaks.fs, lead)


def fragmentation(rr) -> dict:
    rr = np.asarray(rr, dtype=np.float64)
    n = rr.size
    d = np.diff(rr)
    inflection = d[:-1] * d[1:] <= 0  # interior points 1..n-2
    ip = np.nonzero(inflection)[0] + 1
    bounds = np.concatenate([[0], ip, [n - 1]])
    seg = np.diff(bounds)
    total = seg.sum()
    # alternation: runs of consecutive length-1 segments
    alt = 0
    run = 0
    for length in np.append(seg, 0):
        if length == 1:
            run += 1
        else:
            if run >= 4:
                alt += run
            run = 0
    denom = float(np.mean(d * d))
    pace = -float(np.mean(d[:-1] * d[1:])) / denom if denom > 0 else 0.0
    return {
        "PIP": ip.size / n,
        "IALS": seg.size / total,
        "PSS": seg[seg < 3].sum() / total,
        "PAS": alt / total,
        "PACEv": pace,
    }


def _tinn(rr: np.ndarray) -> float:
    """Baseline width of the least-squares triangle fitted to the RR histogram."""
    edges = np.arange(rr.min(), rr.max() + HIST_BIN_MS, HIST_BIN_MS)
    if edges.size < 3:
        return 0.0
    counts, edges = np.histogram(rr, bins=edges)
    centers = 0.5 * (edges[:-1] + edges[1:])
    x_mode = int(np.argmax(counts))
    y_mode = counts[x_mode]
    best = (np.inf, 0.0)
    for a in range(0, x_mode + 1):
        for b in range(x_mode, centers.size):
            q = np.zeros(centers.size)
            if x_mode > a:
                k = np.arange(a, x_mode + 1)
                q[k] = y_mode * (k - a) / (x_mode - a)
            q[x_mode] = y_mode
            if b > x_mode:
                k = np.arange(x_mode, b + 1)
                q[k] = y_mode * (b - k) / (b - x_mode)
            err = float(np.sum((counts - q) ** 2))
            if err < best[0]:
                best = (err, centers[b] - centers[a] + HIST_BIN_MS)
    return float(best[1])


def sq_map_fit(rr_ms) -> tuple[np.ndarray, bool]:
    rr = np.asarray(rr_ms, dtype=np.float64) / 1000.0
    A = np.column_stack([rr[:-1] ** 2, rr[:-1], np.ones(rr.size - 1)])
    coef, _, rank, _ = np.linalg.lstsq(A, rr[1:] ** 2, rcond=None)
    return coef, bool(rank < 3)


def hrv_features(rr: RrSeries, min_intervals: int = MIN_INTERVALS) -> HrvFeatures:
    v = rr.values if isinstance(rr, RrSeries) else np.asarray(rr, dtype=np.float64)
    v = v[(v >= RR_RANGE_MS[0]) & (v <= RR_RANGE_MS[1])]
    if v.size < max(min_intervals, 3):
        raise SeriesTooShort(f"{v.size} usable RR intervals, need >= {max(min_intervals, 3)}")
    d = np.diff(v)
    hr = 60000.0 / v
    sdnn = float(np.std(v, ddof=1))
    var_d = float(np.var(d, ddof=1)) if d.size > 1 else 0.0
    sd1 = np.sqrt(0.5 * var_d)
    sd2 = np.sqrt(max(2.0 * sdnn**2 - 0.5 * var_d, 0.0))
    counts, _ = np.histogram(v, bins=np.arange(v.min(), v.max() + 2 * HIST_BIN_MS, HIST_BIN_MS))
    coef, degenerate = sq_map_fit(v)

    f = HrvFeatures()
    f["AVNN"] = float(v.mean())
    f["SDNN"] = sdnn
    f["RMSSD"] = float(np.sqrt(np.mean(d * d)))
    f["SEM"] = sdnn / np.sqrt(v.size)
    f["PNN20"] = float(np.mean(np.abs(d) > 20.0))
    f["PNN50"] = float(np.mean(np.abs(d) > 50.0))
    f["minRR"] = float(v.min())
    f["maxRR"] = float(v.max())
    f["medHR"] = float(np.median(hr))
    f["maxHR"] = float(hr.max())
    f.update(fragmentation(v))
    f["SD1"] = float(sd1)
    f["SD2"] = float(sd2)
    f["SD1_SD2"] = float(sd1 / sd2) if sd2 > 0 else np.nan
    f["HTI"] = float(v.size / counts.max())
    f["TINN"] = _tinn(v)
    f["sq_map_quadratic"], f["sq_map_linear"], f["sq_map_intercept"] = (float(c) for c in coef)
    f.sq_map_degenerate = degenerate
    return f
