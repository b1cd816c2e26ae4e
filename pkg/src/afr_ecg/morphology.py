"""Per-beat morphological biomarkers and their per-segment median / std.

Intervals are in ms, amplitudes in microvolts relative to the beat's
isoelectric level (mean over the PR segment, or the 40 ms before QRS onset
when there is no P wave). Heart-rate corrections of QT use the RR interval
to the next beat:

* Bazett     QT / sqrt(RR[s])
* Fridericia QT / cbrt(RR[s])
* Hodges     QT + 1.75 (HR - 60)

``R_dep`` is the R upstroke duration (Q to R) and ``PR2_int`` the P-peak to
R-peak interval. ``ST_seg`` runs from J to T onset, the first sample after J
where the slope towards the T peak exceeds 10% of its maximum.
"""
from __future__ import annotations

import numpy as np

from .delineation import FiducialSet
from .errors import EmptyFiducials

BIOMARKERS = (
    "Pwave_int", "PR_int", "PR2_int", "PR_seg", "QRS_int", "QT_int", "QT_cB", "QT_cF",
    "QT_cH", "RR_int", "ST_seg", "TP_seg", "Twave_int", "Jpoint", "R_dep", "Rwave",
    "Twave", "Pwave", "Qwave", "Swave", "ST_dev", "QRS_area",
)
AMPLITUDE_BIOMARKERS = ("Jpoint", "Rwave", "Twave", "Pwave", "Qwave", "Swave", "ST_dev", "QRS_area")
MIN_BEATS = 3
FEATURE_NAMES = tuple(f"{b}_{stat}" for b in BIOMARKERS for stat in ("med", "std"))


def qt_corrections(qt_ms, rr_ms):
    """(Bazett, Fridericia, Hodges) corrected QT."""
    qt_ms = np.asarray(qt_ms, dtype=np.float64)
    rr_s = np.asarray(rr_ms, dtype=np.float64) / 1000.0
    hr = 60.0 / rr_s
    return qt_ms / np.sqrt(rr_s), qt_ms / np.cbrt(rr_s), qt_ms + 1.75 * (hr - 60.0)


def mor_beats(fid: FiducialSet, x, fs: float) -> dict:
    """Biomarkers for every beat: ``{name: array over beats}`` with NaN for missing."""
    nb = len(fid)
    if nb == 0:
        raise EmptyFiducials("no beats")
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    to_ms = 1000.0 / fs
    ms = fs / 1000.0
    P = fid.points
    p_on, p_peak, p_off = P["p_on"], P["p_peak"], P["p_off"]
    qrs_on, q, r, s, j = P["qrs_on"], P["q"], P["r"], P["s"], P["j"]
    t_peak, t_off = P["t_peak"], P["t_off"]
    nxt = lambda a: np.append(a[1:], np.nan)

    out = {name: np.full(nb, np.nan) for name in BIOMARKERS}
    out["Pwave_int"] = (p_off - p_on) * to_ms
    out["PR_int"] = (qrs_on - p_on) * to_ms
    out["PR2_int"] = (r - p_peak) * to_ms
    out["PR_seg"] = (qrs_on - p_off) * to_ms
    out["QRS_int"] = (j - qrs_on) * to_ms
    out["QT_int"] = (t_off - qrs_on) * to_ms
    out["RR_int"] = (nxt(r) - r) * to_ms
    out["QT_cB"], out["QT_cF"], out["QT_cH"] = qt_corrections(out["QT_int"], out["RR_int"])
    out["TP_seg"] = (nxt(p_on) - t_off) * to_ms
    out["Twave_int"] = (t_off - j) * to_ms
    out["R_dep"] = (r - q) * to_ms

    w40 = int(round(40 * ms))
    w60 = int(round(60 * ms))
    dx = np.gradient(x)
    for b in range(nb):
        qo = int(qrs_on[b])
        if not np.isnan(p_off[b]) and p_off[b] < qo:
            base = x[int(p_off[b]) : qo + 1].mean()
        else:
            base = x[max(qo - w40, 0) : qo + 1].mean()
        amp = lambda k: x[int(k)] - base if not np.isnan(k) else np.nan
        out["Rwave"][b] = amp(r[b])
        out["Qwave"][b] = amp(q[b])
        out["Swave"][b] = amp(s[b])
        out["Jpoint"][b] = amp(j[b])
        out["Pwave"][b] = amp(p_peak[b])
        out["Twave"][b] = amp(t_peak[b])
        if not np.isnan(j[b]) and int(j[b]) + w60 < n:
            out["ST_dev"][b] = x[int(j[b]) + w60] - base
        jj = int(j[b])
        if jj > qo:
            out["QRS_area"][b] = np.abs(x[qo : jj + 1] - base).sum() * to_ms
        if not np.isnan(t_peak[b]) and t_peak[b] > jj + 1:
            tp = int(t_peak[b])
            sign = 1.0 if x[tp] - base >= 0 else -1.0
            slope = sign * dx[jj : tp + 1]
            peak_slope = slope.max()
            if peak_slope > 0:
                t_on = jj + int(np.argmax(slope > 0.1 * peak_slope))
                out["ST_seg"][b] = (t_on - jj) * to_ms
    return out


def mor_aggregate(beats: dict, min_beats: int = MIN_BEATS) -> dict:
    """Median and population std over beats where each biomarker is present."""
    feats = {}
    for name in BIOMARKERS:
        v = np.asarray(beats.get(name, []), dtype=np.float64)
        v = v[~np.isnan(v)]
        if v.size >= min_beats:
            feats[f"{name}_med"] = float(np.median(v))
            feats[f"{name}_std"] = float(np.std(v))
        else:
            feats[f"{name}_med"] = np.nan
            feats[f"{name}_std"] = np.nan
    return feats
