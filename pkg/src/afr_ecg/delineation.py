"""Per-beat fiducial points on a single lead.

Rules, all on zero-phase filtered copies of the lead:

* R: extreme absolute deflection within 50 ms of the detector mark; its sign
  sets the QRS polarity.
* Q / S: opposite-polarity extremes in the 80 ms before / after R.
* QRS onset / J: walking outward from Q / S, past the wave's own flank,
  to where the slope falls below 5% of the beat's maximum absolute slope.
* T: extreme in ``[J + 40 ms, J + min(400 ms, 0.6 RR)]``; T offset where the
  tangent at the steepest descending flank meets the isoelectric level.
* P: extreme in ``[QRS on - 250 ms, QRS on - 50 ms]`` (never before the
  previous T offset); onset/offset by the same tangent construction.

Boundary beats (first and last) only get QRS fiducials.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import savgol_filter

from . import kernels
from .errors import TooFewBeats
from .qrs import PeakList, bandpass

FIDUCIALS = ("p_on", "p_peak", "p_off", "qrs_on", "q", "r", "s", "j", "t_peak", "t_off")
QRS_SLOPE_FRACTION = 0.05
P_MIN_REL_AMPLITUDE = 0.04
T_MIN_REL_AMPLITUDE = 0.04
NOISE_FACTOR = 5.0


@dataclass
class FiducialSet:
    """Fiducials for one lead: ``points[name]`` is a float array over beats, NaN when missing."""

    lead: str
    fs: float
    points: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.points["r"]) if self.points else 0

    def __getitem__(self, name):
        return self.points[name]

    def beat(self, i: int) -> dict:
        return {k: self.points[k][i] for k in FIDUCIALS}

    def ordered(self) -> bool:
        """True when every beat respects p_on <= ... <= t_off over its present points."""
        arr = np.vstack([self.points[k] for k in FIDUCIALS])
        for col in arr.T:
            present = col[~np.isnan(col)]
            if np.any(np.diff(present) < 0):
                return False
        return True


def _noise_sd(x: np.ndarray) -> float:
    d = np.diff(x)
    return float(1.4826 * np.median(np.abs(d - np.median(d))) / np.sqrt(2.0)) if d.size else 0.0


def delineate(x, peaks: PeakList, fs: float, lead: str = "") -> FiducialSet:
    x = np.asarray(x, dtype=np.float64)
    idx = peaks.indices
    if idx.size < 2:
        raise TooFewBeats(f"need >= 2 beats, got {idx.size}")
    ms = fs / 1000.0
    xq = bandpass(x, 0.5, 40.0, fs)  # QRS view
    xs = bandpass(x, 0.5, 20.0, fs)  # P/T view
    # smoothed slope for the low-amplitude P/T flanks
    ds = savgol_filter(xs, max(int(round(25 * ms)) | 1, 5), 2, deriv=1)
    noise = _noise_sd(x) * np.sqrt(20.0 / (fs / 2.0))

    windows = [int(round(w * ms)) for w in (10, 40, 50, 80, 250, 400)]
    arr = kernels.delineate_beats(
        xq, xs, ds, idx, windows, P_MIN_REL_AMPLITUDE, T_MIN_REL_AMPLITUDE,
        NOISE_FACTOR * noise, QRS_SLOPE_FRACTION,
    )
    pts = {k: arr[i].copy() for i, k in enumerate(FIDUCIALS)}
    _enforce_order(pts)
    return FiducialSet(lead, fs, pts)


def _enforce_order(pts: dict) -> None:
    """Drop optional fiducials that would break the within-beat ordering."""
    nb = len(pts["r"])
    for b in range(nb):
        last = -np.inf
        for name in FIDUCIALS:
            v = pts[name][b]
            if np.isnan(v):
                continue
            if v < last:
                if name in ("p_on", "p_peak", "p_off", "t_peak", "t_off"):
                    pts[name][b] = np.nan
                    continue
                # QRS points come from monotone searches; clamp rather than drop
                pts[name][b] = last
                v = last
            last = v
    # a P wave missing any of its three points is missing entirely
    for group in (("p_on", "p_peak", "p_off"), ("t_peak", "t_off")):
        miss = np.zeros(nb, dtype=bool)
        for name in group:
            miss |= np.isnan(pts[name])
        for name in group:
            pts[name][miss] = np.nan
