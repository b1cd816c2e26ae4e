"""Two independent R-peak detectors and beat matching.

``detect_energy`` follows Pan & Tompkins: 5-15 Hz band-pass, derivative,
squaring, 150 ms moving-window integration, dual adaptive thresholds with
search-back. ``detect_filterbank`` is a single-stage detector on the
squared 10-25 Hz band with one adaptive threshold tied to recent beat
energy. Both use zero-phase filters and report the sample of maximum
absolute band-passed amplitude within 100 ms of each detection.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.ndimage import uniform_filter1d
from scipy.signal import butter, find_peaks, sosfiltfilt

from .errors import DataError, SignalTooShort

MIN_DURATION_S = 2.0
MIN_FS = 250.0
REFRACTORY_S = 0.25
LOCATE_S = 0.10
MATCH_TOL_MS = 150.0


@dataclass(frozen=True)
class PeakList:
    indices: np.ndarray
    fs: float

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64).ravel()
        if idx.size > 1 and np.any(np.diff(idx) <= 0):
            raise ValueError("peak indices must be strictly increasing")
        object.__setattr__(self, "indices", idx)

    def __len__(self):
        return self.indices.size

    @property
    def times_s(self) -> np.ndarray:
        return self.indices / self.fs

    def within(self, start: int, stop: int) -> "PeakList":
        """Peaks in ``[start, stop)``, re-indexed relative to ``start``."""
        sel = self.indices[(self.indices >= start) & (self.indices < stop)]
        return PeakList(sel - start, self.fs)


@lru_cache(maxsize=32)
def bandpass_sos(lo: float, hi: float, fs: float, order: int = 2):
    return butter(order, [lo, hi], btype="bandpass", fs=fs, output="sos")


def bandpass(x: np.ndarray, lo: float, hi: float, fs: float, order: int = 2) -> np.ndarray:
    return sosfiltfilt(bandpass_sos(lo, hi, float(fs), order), np.asarray(x, dtype=np.float64))


def _check(x, fs):
    x = np.asarray(x, dtype=np.float64)
    if fs < MIN_FS:
        raise DataError(f"fs must be >= 250 Hz, got {fs}")
    if x.size < MIN_DURATION_S * fs:
        raise SignalTooShort(f"{x.size / fs:.2f} s of signal, need >= {MIN_DURATION_S} s")
    return x


def _locate(bp: np.ndarray, detections, fs: float) -> np.ndarray:
    """Snap detections to the absolute maximum of ``bp`` and enforce the refractory period."""
    half = int(round(LOCATE_S * fs))
    absbp = np.abs(bp)
    located = []
    for d in detections:
        lo, hi = max(d - half, 0), min(d + half + 1, bp.size)
        located.append(lo + int(np.argmax(absbp[lo:hi])))
    refractory = int(round(REFRACTORY_S * fs))
    out: list[int] = []
    for p in sorted(located):
        if out and p - out[-1] < refractory:
            if absbp[p] > absbp[out[-1]]:
                out[-1] = p
            continue
        out.append(p)
    return np.asarray(out, dtype=np.int64)


def detect_energy(x, fs: float) -> PeakList:
    """Pan-Tompkins-style detector."""
    x = _check(x, fs)
    bp = bandpass(x, 5.0, 15.0, fs)
    slope = np.gradient(bp) * fs
    mwi = uniform_filter1d(slope * slope, size=max(int(round(0.15 * fs)), 1), mode="nearest")
    refractory = int(round(REFRACTORY_S * fs))
    cand, props = find_peaks(mwi, distance=refractory, height=0.0)
    heights = props["peak_heights"] if cand.size else np.zeros(0)
    if cand.size == 0 or heights.max() <= 0:
        return PeakList(np.zeros(0, dtype=np.int64), fs)

    spki = 0.5 * np.percentile(heights, 90)
    npki = 0.5 * np.median(heights)
    accepted: list[int] = []
    acc_heights: list[float] = []
    rr_recent: list[int] = []
    last_slope = None
    t_wave_win = int(round(0.36 * fs))
    half_slope_win = int(round(0.075 * fs))

    def max_slope(c):
        lo, hi = max(c - half_slope_win, 0), min(c + half_slope_win + 1, slope.size)
        return np.abs(slope[lo:hi]).max()

    i = 0
    while i < cand.size:
        c, h = int(cand[i]), float(heights[i])
        thr1 = npki + 0.25 * (spki - npki)
        # search-back for a missed beat
        if accepted and len(rr_recent) >= 2:
            rr_avg = float(np.mean(rr_recent[-8:]))
            if c - accepted[-1] > 1.66 * rr_avg:
                thr2 = 0.5 * thr1
                gap = np.nonzero(
                    (cand > accepted[-1] + refractory) & (cand < c - refractory) & (heights > thr2)
                )[0]
                if gap.size:
                    k = gap[np.argmax(heights[gap])]
                    rr_recent.append(int(cand[k]) - accepted[-1])
                    accepted.append(int(cand[k]))
                    acc_heights.append(float(heights[k]))
                    spki = 0.25 * float(heights[k]) + 0.75 * spki
                    last_slope = max_slope(int(cand[k]))
                    continue
        if h > thr1 and (not accepted or c - accepted[-1] >= refractory):
            s = max_slope(c)
            if accepted and c - accepted[-1] < t_wave_win and last_slope is not None and s < 0.5 * last_slope:
                npki = 0.125 * h + 0.875 * npki  # T wave
            else:
                if accepted:
                    rr_recent.append(c - accepted[-1])
                accepted.append(c)
                acc_heights.append(h)
                last_slope = s
                spki = 0.125 * h + 0.875 * spki
        else:
            npki = 0.125 * h + 0.875 * npki
        i += 1
    return PeakList(_locate(bp, accepted, fs), fs)


def detect_filterbank(x, fs: float) -> PeakList:
    """Single-stage energy detector on the 10-25 Hz band with search-back."""
    x = _check(x, fs)
    bp = bandpass(x, 10.0, 25.0, fs)
    env = uniform_filter1d(bp * bp, size=max(int(round(0.08 * fs)), 1), mode="nearest")
    refractory = int(round(REFRACTORY_S * fs))
    cand, props = find_peaks(env, distance=refractory, height=0.0)
    if cand.size == 0 or props["peak_heights"].max() <= 0:
        return PeakList(np.zeros(0, dtype=np.int64), fs)
    heights = props["peak_heights"]
    # beat energy level: robust upper quantile, then tracked from accepted beats
    level = float(np.percentile(heights, 80))
    accepted: list[int] = []
    levels: list[float] = []
    for c, h in zip(cand, heights):
        thr = 0.3 * (np.mean(levels[-8:]) if levels else level)
        if h <= thr:
            continue
        accepted.append(int(c))
        levels.append(float(h))
    # search-back: gaps longer than 1.5 median RR get their strongest candidate
    if len(accepted) >= 3:
        acc = np.asarray(accepted)
        rr_med = float(np.median(np.diff(acc)))
        extra = []
        for a, b in zip(acc[:-1], acc[1:]):
            if b - a > 1.5 * rr_med:
                inside = np.nonzero((cand > a + refractory) & (cand < b - refractory))[0]
                if inside.size:
                    k = inside[np.argmax(heights[inside])]
                    if heights[k] > 0.15 * np.mean(levels):
                        extra.append(int(cand[k]))
        accepted = sorted(accepted + extra)
    return PeakList(_locate(bp, accepted, fs), fs)


def match_pairs(a: PeakList, b: PeakList, tol_ms: float = MATCH_TOL_MS) -> tuple[np.ndarray, np.ndarray]:
    """Greedy one-to-one matching of the closest pairs within ``tol_ms``.

    Returns the positions in ``a`` and in ``b`` of the matched peaks, ordered
    by their position in ``a``.
    """
    if tol_ms <= 0:
        raise ValueError("tol_ms must be positive")
    if a.fs != b.fs:
        raise ValueError("peak lists have different sampling rates")
    na, nb = len(a), len(b)
    empty = np.zeros(0, dtype=np.int64)
    if na == 0 or nb == 0:
        return empty, empty
    tol = tol_ms * a.fs / 1000.0
    ia, ib = a.indices, b.indices
    # candidate pairs within tolerance; sorted by distance then position
    pairs = []
    for i, p in enumerate(ia):
        lo = np.searchsorted(ib, p - tol, side="left")
        hi = np.searchsorted(ib, p + tol, side="right")
        for j in range(lo, hi):
            pairs.append((abs(int(ib[j]) - int(p)), min(int(p), int(ib[j])), i, j))
    pairs.sort()
    used_a = np.zeros(na, dtype=bool)
    used_b = np.zeros(nb, dtype=bool)
    matched = []
    for _, _, i, j in pairs:
        if not used_a[i] and not used_b[j]:
            used_a[i] = used_b[j] = True
            matched.append((i, j))
    if not matched:
        return empty, empty
    matched.sort()
    m = np.array(matched, dtype=np.int64)
    return m[:, 0], m[:, 1]


def match_peaks(a: PeakList, b: PeakList, tol_ms: float = MATCH_TOL_MS) -> tuple[int, int, int]:
    """Size of the greedy one-to-one matching; returns ``(n_match, n_a, n_b)``."""
    ia, _ = match_pairs(a, b, tol_ms)
    return len(ia), len(a), len(b)
