"""Multi-lead recordings, the two on-disk formats, and the cohort manifest.

Flat-binary: ``<stem>.bin`` holds little-endian int32 samples, lead
interleaved (sample-major), and ``<stem>.json`` is the header::

    {"patient_id": "p001", "fs": 2000.0, "quant": 0.03,
     "leads": ["I", ..., "V6"], "n_samples": 600000}

Amplitude in microvolts is ``raw * quant``.

CSV: optional ``# key=value`` comment lines (fs, quant, n_samples,
patient_id), one header row of lead names, then one row per sample with
amplitudes already in microvolts.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import (
    BadLabel,
    DuplicatePatient,
    LeadCountMismatch,
    MalformedHeader,
    OutOfBounds,
    TruncatedData,
)

log = logging.getLogger(__name__)

LEADS = ("I", "II", "III", "aVR", "aVL", "aVF", "V1", "V2", "V3", "V4", "V5", "V6")
MANIFEST_COLUMNS = ("patient_id", "recording_path", "afr_label", "age", "sex", "followup_days")

# pre and post regions must be disjoint 5-minute spans
REGION_S = 300.0
MIN_PREPOST_DURATION_S = 2 * REGION_S


@dataclass(frozen=True)
class Recording:
    """Immutable 12-lead recording; ``samples`` has shape (12, n) in microvolts."""

    patient_id: str
    samples: np.ndarray
    fs: float
    quant: float = 0.03
    leads: tuple = LEADS

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 2:
            raise LeadCountMismatch("samples must be 2-D (leads, n)")
        if samples.shape[0] != len(LEADS):
            raise LeadCountMismatch(f"expected 12 leads, got {samples.shape[0]}")
        if tuple(self.leads) != LEADS:
            raise MalformedHeader(f"lead order must be {LEADS}, got {tuple(self.leads)}")
        if not self.fs > 0:
            raise MalformedHeader(f"fs must be positive, got {self.fs}")
        if not self.quant > 0:
            raise MalformedHeader(f"quant must be positive, got {self.quant}")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "fs", float(self.fs))
        object.__setattr__(self, "leads", tuple(self.leads))

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.fs

    def lead(self, name: str) -> np.ndarray:
        return self.samples[LEADS.index(name)]


def window(rec: Recording, start_s: float, dur_s: float) -> Recording:
    """Slice all leads to ``[start_s, start_s + dur_s)``."""
    start = int(round(start_s * rec.fs))
    n = int(round(dur_s * rec.fs))
    if start_s < 0 or dur_s <= 0 or start < 0 or start + n > rec.n_samples:
        raise OutOfBounds(
            f"window [{start_s}, {start_s + dur_s}) s outside recording of {rec.duration_s} s"
        )
    return Recording(rec.patient_id, rec.samples[:, start : start + n], rec.fs, rec.quant)


def pre_post_regions(rec: Recording, region_s: float = REGION_S) -> tuple[Recording, Recording]:
    """First and last ``region_s`` seconds of a recording."""
    if rec.duration_s < 2 * region_s:
        raise OutOfBounds(
            f"recording of {rec.duration_s:.1f} s is shorter than {2 * region_s:.0f} s; "
            "cannot take disjoint pre/post regions"
        )
    n = int(round(region_s * rec.fs))
    return (
        window(rec, 0.0, region_s),
        Recording(rec.patient_id, rec.samples[:, rec.n_samples - n :], rec.fs, rec.quant),
    )


# ---------------------------------------------------------------------------
# file formats


def _order_leads(names: list[str]) -> list[int]:
    if len(names) != len(LEADS):
        raise LeadCountMismatch(f"expected 12 leads, got {len(names)}: {names}")
    unknown = set(names) - set(LEADS)
    if unknown or len(set(names)) != len(names):
        raise MalformedHeader(f"unexpected lead names {sorted(unknown) or names}")
    return [names.index(lead) for lead in LEADS]


def _read_bin(path: Path) -> Recording:
    header_path = path.with_suffix(".json")
    try:
        header = json.loads(header_path.read_text())
        fs = float(header["fs"])
        quant = float(header["quant"])
        names = list(header["leads"])
        n_samples = int(header["n_samples"])
    except FileNotFoundError:
        raise MalformedHeader(f"missing header sidecar {header_path}") from None
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedHeader(f"bad header {header_path}: {exc}") from None
    order = _order_leads(names)
    raw = np.fromfile(path, dtype="<i4")
    if raw.size != n_samples * len(names):
        raise TruncatedData(
            f"{path}: header declares {n_samples} samples x {len(names)} leads, "
            f"file holds {raw.size} values"
        )
    data = raw.reshape(n_samples, len(names)).T[order].astype(np.float64) * quant
    patient_id = str(header.get("patient_id", path.stem))
    return Recording(patient_id, data, fs, quant)


def _read_csv(path: Path) -> Recording:
    meta: dict[str, str] = {}
    with open(path, newline="") as fh:
        lines = fh.readlines()
    body_start = 0
    for body_start, line in enumerate(lines):
        if not line.startswith("#"):
            break
        key, sep, value = line[1:].strip().partition("=")
        if not sep:
            raise MalformedHeader(f"{path}: bad comment line {line.strip()!r}")
        meta[key.strip()] = value.strip()
    if "fs" not in meta:
        raise MalformedHeader(f"{path}: header must declare fs")
    try:
        fs = float(meta["fs"])
        quant = float(meta.get("quant", 0.03))
        declared = int(meta["n_samples"]) if "n_samples" in meta else None
    except ValueError as exc:
        raise MalformedHeader(f"{path}: {exc}") from None
    if body_start >= len(lines):
        raise MalformedHeader(f"{path}: missing lead-name row")
    names = [c.strip() for c in next(csv.reader([lines[body_start]]))]
    order = _order_leads(names)
    rows = lines[body_start + 1 :]
    rows = [r for r in rows if r.strip()]
    try:
        data = np.loadtxt(rows, delimiter=",", dtype=np.float64, ndmin=2) if rows else np.zeros((0, 12))
    except ValueError as exc:
        raise TruncatedData(f"{path}: unreadable sample rows ({exc})") from None
    if data.shape[1] != len(names):
        raise LeadCountMismatch(f"{path}: rows have {data.shape[1]} columns, header {len(names)}")
    if declared is not None and declared != data.shape[0]:
        raise TruncatedData(f"{path}: header declares {declared} samples, found {data.shape[0]}")
    patient_id = meta.get("patient_id", path.stem)
    return Recording(patient_id, data.T[order], fs, quant)


def load_recording(path, format: Optional[str] = None) -> Recording:
    """Load a recording; ``format`` is ``"flat-binary"`` or ``"csv"`` (guessed from suffix)."""
    path = Path(path)
    if format is None:
        format = "csv" if path.suffix.lower() == ".csv" else "flat-binary"
    if not path.exists():
        raise FileNotFoundError(path)
    if format == "csv":
        return _read_csv(path)
    if format in ("flat-binary", "bin"):
        return _read_bin(path)
    raise ValueError(f"unknown format {format!r}")


def save_recording(rec: Recording, path, format: Optional[str] = None) -> Path:
    path = Path(path)
    if format is None:
        format = "csv" if path.suffix.lower() == ".csv" else "flat-binary"
    path.parent.mkdir(parents=True, exist_ok=True)
    if format == "csv":
        with open(path, "w", newline="") as fh:
            fh.write(f"# patient_id={rec.patient_id}\n# fs={rec.fs!r}\n")
            fh.write(f"# quant={rec.quant!r}\n# n_samples={rec.n_samples}\n")
            fh.write(",".join(LEADS) + "\n")
            np.savetxt(fh, rec.samples.T, delimiter=",", fmt="%.17g")
        return path
    raw = np.rint(rec.samples / rec.quant)
    if np.abs(raw).max(initial=0) > np.iinfo(np.int32).max:
        raise OverflowError("amplitudes exceed int32 range at this quantization")
    raw.T.astype("<i4").tofile(path)
    header = {
        "patient_id": rec.patient_id,
        "fs": rec.fs,
        "quant": rec.quant,
        "leads": list(LEADS),
        "n_samples": rec.n_samples,
    }
    path.with_suffix(".json").write_text(json.dumps(header, indent=1))
    return path


# ---------------------------------------------------------------------------
# manifest


@dataclass(frozen=True)
class ManifestEntry:
    patient_id: str
    recording_path: str
    afr_label: Optional[int] = None
    age: float = math.nan
    sex: Optional[str] = None
    followup_days: float = math.nan

    @property
    def sex_code(self) -> float:
        """1 for male, 0 for female, NaN when unknown."""
        return {"M": 1.0, "F": 0.0}.get(self.sex, math.nan)


@dataclass
class CohortManifest:
    entries: list = field(default_factory=list)
    base_dir: Optional[Path] = None

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def labeled(self) -> list:
        return [e for e in self.entries if e.afr_label is not None]

    def by_id(self) -> dict:
        return {e.patient_id: e for e in self.entries}

    def resolve(self, entry: ManifestEntry) -> Path:
        p = Path(entry.recording_path)
        if not p.is_absolute() and self.base_dir is not None:
            p = self.base_dir / p
        return p


def _opt_float(value: str) -> float:
    value = (value or "").strip()
    return float(value) if value and value.lower() not in ("na", "nan") else math.nan


def load_manifest(path) -> CohortManifest:
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        cols = reader.fieldnames or []
        for required in ("patient_id", "recording_path"):
            if required not in cols:
                raise MalformedHeader(f"manifest {path} lacks column {required!r}")
        entries = []
        seen = set()
        for row in reader:
            pid = row["patient_id"].strip()
            if pid in seen:
                raise DuplicatePatient(f"patient_id {pid!r} appears twice in {path}")
            seen.add(pid)
            label_s = (row.get("afr_label") or "").strip()
            label = None
            if label_s and label_s.lower() not in ("na", "nan"):
                try:
                    label = int(float(label_s))
                except ValueError:
                    raise BadLabel(f"{pid}: afr_label {label_s!r}") from None
                if label not in (0, 1) or float(label_s) != label:
                    raise BadLabel(f"{pid}: afr_label {label_s!r} not in {{0,1}}")
            sex = (row.get("sex") or "").strip().upper() or None
            if sex is not None and sex not in ("M", "F"):
                log.warning("%s: unknown sex %r treated as missing", pid, sex)
                sex = None
            entries.append(
                ManifestEntry(
                    pid,
                    row["recording_path"].strip(),
                    label,
                    _opt_float(row.get("age", "")),
                    sex,
                    _opt_float(row.get("followup_days", "")),
                )
            )
    return CohortManifest(entries, base_dir=path.parent)


def save_manifest(manifest: CohortManifest, path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(MANIFEST_COLUMNS)
        for e in manifest.entries:
            w.writerow(
                [
                    e.patient_id,
                    e.recording_path,
                    "" if e.afr_label is None else e.afr_label,
                    "" if math.isnan(e.age) else repr(e.age),
                    e.sex or "",
                    "" if math.isnan(e.followup_days) else repr(e.followup_days),
                ]
            )
    return path
