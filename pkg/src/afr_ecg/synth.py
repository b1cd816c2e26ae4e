"""Sum-of-Gaussians 12-lead ECG generator with exact ground truth.

Each beat is five Gaussian waves (P, Q, R, S, T) placed relative to the R
peak. Wave boundaries used as ground truth:

* P and T: ``centre -/+ 2 sigma``. For a Gaussian this is exactly where the
  tangent at the steepest flank meets the baseline, i.e. what a tangent
  delineator measures.
* QRS onset: ``Q centre - 2.5 sigma_Q``; J point: ``S centre + 2.5 sigma_S``.

The T wave is stretched with the square root of the following RR interval
so that QT shortens at high heart rate and never overlaps the next P wave.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .recordio import LEADS, CohortManifest, ManifestEntry, Recording, save_manifest, save_recording

QRS_EDGE_SIGMAS = 2.5
PT_EDGE_SIGMAS = 2.0


@dataclass(frozen=True)
class Wave:
    amp_uv: float
    width_ms: float  # Gaussian sigma
    offset_ms: float  # centre relative to R at RR = 1000 ms


@dataclass(frozen=True)
class BeatTemplate:
    p: Wave = Wave(150.0, 25.0, -170.0)
    q: Wave = Wave(-120.0, 8.0, -22.0)
    r: Wave = Wave(1000.0, 9.0, 0.0)
    s: Wave = Wave(-250.0, 9.0, 24.0)
    t: Wave = Wave(300.0, 45.0, 268.0)

    def scaled(self, gain: float) -> "BeatTemplate":
        return BeatTemplate(
            *(replace(w, amp_uv=w.amp_uv * gain) for w in (self.p, self.q, self.r, self.s, self.t))
        )

    @property
    def qt_ms(self) -> float:
        """QT interval at RR = 1000 ms."""
        t_off = self.t.offset_ms + PT_EDGE_SIGMAS * self.t.width_ms
        return t_off - (self.q.offset_ms - QRS_EDGE_SIGMAS * self.q.width_ms)


# single gain per lead; negative gains invert the whole complex (aVR, V1)
LEAD_GAINS = {
    "I": 0.6, "II": 1.0, "III": 0.5, "aVR": -0.8, "aVL": 0.35, "aVF": 0.75,
    "V1": -0.55, "V2": 0.8, "V3": 1.1, "V4": 1.3, "V5": 1.1, "V6": 0.85,
}


def default_templates(base: BeatTemplate = BeatTemplate()) -> tuple:
    return tuple(base.scaled(LEAD_GAINS[lead]) for lead in LEADS)


@dataclass(frozen=True)
class SynthSpec:
    hr_bpm: float = 60.0
    hrv_std_ms: float = 0.0
    templates: Optional[tuple] = None  # 12 BeatTemplate, default_templates() if None
    noise_uv: float = 0.0
    wander_uv: float = 0.0
    wander_hz: float = 0.3
    duration_s: float = 60.0
    fs: float = 500.0
    quant: float = 0.03
    seed: int = 0
    patient_id: str = "synth"

    def __post_init__(self):
        if not 30 <= self.hr_bpm <= 220:
            raise ValueError(f"hr_bpm must lie in [30, 220], got {self.hr_bpm}")
        if self.fs < 250:
            raise ValueError(f"fs must be >= 250 Hz, got {self.fs}")
        if self.duration_s <= 0:
            raise ValueError("duration_s must be positive")
        tpl = self.templates if self.templates is not None else default_templates()
        if len(tpl) != len(LEADS):
            raise ValueError("need one template per lead")
        for t in tpl:
            for w in (t.p, t.q, t.r, t.s, t.t):
                if w.width_ms <= 0:
                    raise ValueError("wave widths must be positive")
        object.__setattr__(self, "templates", tuple(tpl))


FIDUCIAL_NAMES = ("p_on", "p_peak", "p_off", "qrs_on", "q", "r", "s", "j", "t_peak", "t_off")


@dataclass
class GroundTruth:
    """Beat positions (samples) plus per-lead fiducials and biomarkers.

    ``fiducials[lead][name]`` holds fractional sample positions per beat;
    ``biomarkers[lead][name]`` holds values in ms or microvolts per beat.
    """

    r_samples: np.ndarray
    fs: float
    fiducials: dict = field(default_factory=dict)
    biomarkers: dict = field(default_factory=dict)

    @property
    def beat_times_s(self) -> np.ndarray:
        return self.r_samples / self.fs


def _rr_series(spec: SynthSpec, rng: np.random.Generator) -> np.ndarray:
    mean_rr = 60000.0 / spec.hr_bpm
    n = int(math.ceil(spec.duration_s * 1000.0 / max(mean_rr - 3 * spec.hrv_std_ms, 300.0))) + 10
    rr = mean_rr + (rng.normal(0.0, spec.hrv_std_ms, n) if spec.hrv_std_ms > 0 else np.zeros(n))
    return np.clip(rr, 300.0, 2000.0)


def _wave_timing(tpl: BeatTemplate, rr_next_ms: float) -> dict:
    """Centres and sigmas (ms, relative to R) for one beat."""
    stretch = math.sqrt(rr_next_ms / 1000.0)
    return {
        "p": (tpl.p.offset_ms, tpl.p.width_ms),
        "q": (tpl.q.offset_ms, tpl.q.width_ms),
        "r": (tpl.r.offset_ms, tpl.r.width_ms),
        "s": (tpl.s.offset_ms, tpl.s.width_ms),
        "t": (tpl.t.offset_ms * stretch, tpl.t.width_ms * stretch),
    }


def generate(spec: SynthSpec) -> tuple[Recording, GroundTruth]:
    rng = np.random.default_rng(spec.seed)
    fs = spec.fs
    n = int(round(spec.duration_s * fs))
    rr = _rr_series(spec, rng)
    # first beat half an interval in, beats on the sample grid
    times_ms = rr[0] / 2.0 + np.concatenate([[0.0], np.cumsum(rr[1:])])
    r_samples = np.rint(times_ms * fs / 1000.0).astype(np.int64)
    keep = r_samples < n
    r_samples = r_samples[keep]
    rr_next = np.diff(np.concatenate([r_samples, [r_samples[-1] + int(round(rr[len(r_samples)] * fs / 1000))]]))
    rr_next_ms = rr_next * 1000.0 / fs

    t_axis = np.arange(n)
    clean = np.zeros((len(LEADS), n))
    truth = GroundTruth(r_samples=r_samples, fs=fs)
    ms = fs / 1000.0

    for li, (lead, tpl) in enumerate(zip(LEADS, spec.templates)):
        amps = {k: getattr(tpl, k).amp_uv for k in "pqrst"}
        fid = {name: np.empty(len(r_samples)) for name in FIDUCIAL_NAMES}
        for bi, (r0, rr_ms) in enumerate(zip(r_samples, rr_next_ms)):
            timing = _wave_timing(tpl, rr_ms)
            for k, (mu_ms, sd_ms) in timing.items():
                mu = r0 + mu_ms * ms
                sd = sd_ms * ms
                lo = max(int(mu - 6 * sd), 0)
                hi = min(int(mu + 6 * sd) + 2, n)
                if hi > lo and amps[k] != 0.0:
                    tt = t_axis[lo:hi]
                    clean[li, lo:hi] += amps[k] * np.exp(-0.5 * ((tt - mu) / sd) ** 2)
            (pm, ps), (qm, qs), _, (sm, ss), (tm, ts) = (timing[k] for k in "pqrst")
            fid["p_on"][bi] = r0 + (pm - PT_EDGE_SIGMAS * ps) * ms
            fid["p_peak"][bi] = r0 + pm * ms
            fid["p_off"][bi] = r0 + (pm + PT_EDGE_SIGMAS * ps) * ms
            fid["qrs_on"][bi] = r0 + (qm - QRS_EDGE_SIGMAS * qs) * ms
            fid["q"][bi] = r0 + qm * ms
            fid["r"][bi] = r0
            fid["s"][bi] = r0 + sm * ms
            fid["j"][bi] = r0 + (sm + QRS_EDGE_SIGMAS * ss) * ms
            fid["t_peak"][bi] = r0 + tm * ms
            fid["t_off"][bi] = r0 + (tm + PT_EDGE_SIGMAS * ts) * ms
        if amps["p"] == 0.0:
            for name in ("p_on", "p_peak", "p_off"):
                fid[name][:] = np.nan
        truth.fiducials[lead] = fid

    for li, lead in enumerate(LEADS):
        fid = truth.fiducials[lead]
        bm = {}
        to_ms = 1000.0 / fs
        bm["QRS_int"] = (fid["j"] - fid["qrs_on"]) * to_ms
        bm["QT_int"] = (fid["t_off"] - fid["qrs_on"]) * to_ms
        bm["PR_int"] = (fid["qrs_on"] - fid["p_on"]) * to_ms
        bm["Pwave_int"] = (fid["p_off"] - fid["p_on"]) * to_ms
        bm["Twave_int"] = (fid["t_off"] - fid["j"]) * to_ms
        bm["RR_int"] = rr_next_ms.copy()
        base = np.full(len(r_samples), np.nan)
        for bi in range(len(r_samples)):
            a = fid["p_off"][bi] if not np.isnan(fid["p_off"][bi]) else fid["qrs_on"][bi] - 40 * ms
            a, b = int(math.ceil(a)), int(math.floor(fid["qrs_on"][bi]))
            if 0 <= a < b < n:
                base[bi] = clean[li, a : b + 1].mean()
        r_idx = np.clip(r_samples, 0, n - 1)
        bm["Rwave"] = clean[li, r_idx] - base
        t_idx = np.clip(np.rint(fid["t_peak"]).astype(np.int64), 0, n - 1)
        bm["Twave"] = clean[li, t_idx] - base
        truth.biomarkers[lead] = bm

    x = clean
    if spec.noise_uv > 0:
        x = x + rng.normal(0.0, spec.noise_uv, x.shape)
    if spec.wander_uv > 0:
        phase = rng.uniform(0, 2 * np.pi, (len(LEADS), 1))
        x = x + spec.wander_uv * np.sin(2 * np.pi * spec.wander_hz * t_axis / fs + phase)
    x = np.rint(x / spec.quant) * spec.quant
    return Recording(spec.patient_id, x, fs, spec.quant), truth


def add_white_noise(rec: Recording, snr_db: float, seed: int = 0) -> Recording:
    """Add white Gaussian noise at ``snr_db`` relative to each lead's own power."""
    rng = np.random.default_rng(seed)
    x = rec.samples - rec.samples.mean(axis=1, keepdims=True)
    power = np.mean(x**2, axis=1, keepdims=True)
    sd = np.sqrt(power / 10 ** (snr_db / 10.0))
    noisy = rec.samples + rng.standard_normal(rec.samples.shape) * sd
    return Recording(rec.patient_id, noisy, rec.fs, rec.quant)


def concat(parts: list) -> Recording:
    first = parts[0]
    return Recording(first.patient_id, np.concatenate([p.samples for p in parts], axis=1), first.fs, first.quant)


# ---------------------------------------------------------------------------
# cohorts


def make_cohort(
    out_dir,
    n_patients: int = 20,
    seed: int = 0,
    duration_s: float = 600.0,
    fs: float = 500.0,
    noise_uv: float = 10.0,
    post_hr_shift: float = 20.0,
    label_effect_ms: float = 30.0,
    noisy_patients: tuple = (),
    fmt: str = "flat-binary",
) -> Path:
    """Write a synthetic cohort (recordings + manifest + ground-truth CSV).

    Every patient gets a pre half at a baseline heart rate and a post half at
    ``post_hr_shift`` bpm higher. Patients with ``afr_label = 1`` get a QT
    prolonged by ``label_effect_ms`` in the post half. Patients listed in
    ``noisy_patients`` (indices) are overwritten with white noise.
    """
    out = Path(out_dir)
    (out / "recordings").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    entries = []
    truth_rows = []
    half = duration_s / 2.0
    for i in range(n_patients):
        pid = f"P{i:03d}"
        label = int(i % 2)
        hr = float(rng.uniform(55, 75))
        base = BeatTemplate()
        post_tpl = base
        if label:
            post_tpl = replace(base, t=replace(base.t, offset_ms=base.t.offset_ms + label_effect_ms))
        specs = [
            SynthSpec(hr, 20.0, default_templates(base), noise_uv, 0.0, 0.3, half, fs, 0.03, seed * 100003 + 2 * i, pid),
            SynthSpec(min(hr + post_hr_shift, 220.0), 20.0, default_templates(post_tpl), noise_uv, 0.0, 0.3,
                      half, fs, 0.03, seed * 100003 + 2 * i + 1, pid),
        ]
        parts = []
        for phase, spec in zip(("pre", "post"), specs):
            rec, truth = generate(spec)
            parts.append(rec)
            truth_rows.append([pid, phase, spec.hr_bpm, len(truth.r_samples), spec.templates[1].qt_ms])
        rec = concat(parts)
        if i in noisy_patients:
            noise = np.random.default_rng(seed + 7919 * (i + 1)).normal(0.0, 300.0, rec.samples.shape)
            rec = Recording(pid, np.rint(noise / rec.quant) * rec.quant, fs, rec.quant)
        suffix = ".csv" if fmt == "csv" else ".bin"
        rel = Path("recordings") / f"{pid}{suffix}"
        save_recording(rec, out / rel, fmt)
        entries.append(
            ManifestEntry(pid, str(rel), label, float(round(rng.uniform(45, 80), 1)),
                          "M" if rng.random() < 0.6 else "F", float(round(rng.uniform(154, 500))))
        )
    manifest_path = save_manifest(CohortManifest(entries), out / "manifest.csv")
    with open(out / "ground_truth.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["patient_id", "phase", "hr_bpm", "n_beats", "qt_ms_at_rr1000"])
        w.writerows(truth_rows)
    return manifest_path


def write_ground_truth(truth: GroundTruth, path) -> Path:
    """Per-beat fiducials of every lead, in samples."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["lead", "beat", *FIDUCIAL_NAMES])
        for lead in LEADS:
            fid = truth.fiducials[lead]
            for b in range(len(truth.r_samples)):
                w.writerow([lead, b, *(repr(float(fid[k][b])) for k in FIDUCIAL_NAMES)])
    return path
