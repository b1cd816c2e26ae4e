"""Pipeline stages: ingest -> segments -> features -> stats / train -> report.

Every stage reads the artifacts of the previous one from the output
directory and writes its own. A stage is skipped when its outputs exist and
its stamp (a hash of the relevant config section and of its input files)
matches; ``force`` recomputes it. Artifacts never contain timestamps, so
identical inputs and seed give byte-identical files.
"""
from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from . import stats as st
from .config import file_digest, fingerprint
from .errors import AfrEcgError, DataError, TooFewPatients
from .features import ECG_FEATURES, META_FEATURES, segment_features
from .learn import CohortTable, CvConfig, nested_cv
from .qrs import MIN_FS, detect_energy
from .quality import SEGMENT_COLUMNS, lead_peaks, scan, select
from .recordio import (
    MIN_PREPOST_DURATION_S,
    CohortManifest,
    ManifestEntry,
    load_manifest,
    load_recording,
    save_manifest,
    window,
)
from .tables import read_matrix, read_table, write_table

log = logging.getLogger(__name__)

STAGES = ("ingest", "segments", "features", "stats", "train", "report")
PHASES = ("pre", "post")
TASKS = ("stats", "class")
INGEST_COLUMNS = ("patient_id", "status", "reason", "duration_s", "fs", "recording_path")
EXCLUSION_COLUMNS = ("patient_id", "category", "reason")
WINDOW_COLUMNS = tuple(SEGMENT_COLUMNS)
SELECTED_COLUMNS = ("task", "rank", *SEGMENT_COLUMNS)
FEATURE_ID_COLUMNS = ("patient_id", "phase", "task", "rank", "start_s", "dur_s", "bsqi_mean")
FEATURE_COLUMNS = FEATURE_ID_COLUMNS + ECG_FEATURES + META_FEATURES


def feature_file(task: str, phase: str) -> str:
    return f"features_{task}_{phase}.csv"


def cv_files(phase: str, feature_set: str):
    tag = f"{phase}_{feature_set.replace('+', '-')}"
    return f"cv_report_{tag}.json", f"roc_points_{tag}.csv"


# ---------------------------------------------------------------------------
# stage bookkeeping


def _stamp_path(out: Path, stage: str) -> Path:
    return out / ".stamps" / f"{stage}.json"


def _up_to_date(out: Path, stage: str, stamp: str, outputs) -> bool:
    p = _stamp_path(out, stage)
    if not p.exists() or not all((out / o).exists() for o in outputs):
        return False
    return json.loads(p.read_text()).get("stamp") == stamp


def _write_stamp(out: Path, stage: str, stamp: str) -> None:
    p = _stamp_path(out, stage)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(json.dumps({"stage": stage, "stamp": stamp}, sort_keys=True) + "\n")


def _digests(out: Path, names) -> dict:
    return {n: file_digest(out / n) for n in names}


def _require(out: Path, names, stage: str):
    missing = [n for n in names if not (out / n).exists()]
    if missing:
        raise DataError(f"stage {stage!r} needs {', '.join(missing)} in {out}; run the earlier stages first")


def _map(fn, items, workers: int):
    if workers > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(fn, items))
    return [fn(it) for it in items]


def _manifest(out: Path) -> CohortManifest:
    _require(out, ["manifest.csv"], "manifest")
    return load_manifest(out / "manifest.csv")


# ---------------------------------------------------------------------------
# ingest


def _ingest_one(args):
    pid, path = args
    try:
        rec = load_recording(path)
    except (AfrEcgError, OSError, ValueError) as exc:
        return [pid, "corrupted", f"{type(exc).__name__}: {exc}", math.nan, math.nan, path]
    if rec.patient_id != pid:
        log.info("%s: recording header names patient %r; manifest id kept", pid, rec.patient_id)
    if rec.fs < MIN_FS:
        return [pid, "corrupted", f"UnsupportedRate: fs {rec.fs:g} Hz < {MIN_FS:g} Hz", rec.duration_s, rec.fs, path]
    if rec.duration_s < MIN_PREPOST_DURATION_S:
        return [pid, "corrupted", f"RecordingTooShort: {rec.duration_s:g} s < {MIN_PREPOST_DURATION_S:g} s",
                rec.duration_s, rec.fs, path]
    return [pid, "ok", "", rec.duration_s, rec.fs, path]


def stage_ingest(manifest_path, cfg: dict, out: Path, force: bool = False) -> bool:
    if manifest_path is None:
        raise DataError("ingest needs --manifest")
    manifest_path = Path(manifest_path)
    if not manifest_path.exists():
        raise DataError(f"manifest not found: {manifest_path}")
    man = load_manifest(manifest_path)
    paths = [str(man.resolve(e).resolve()) for e in man]
    src = {"manifest": file_digest(manifest_path)}
    for e, p in zip(man, paths):
        src[e.patient_id] = file_digest(p) if Path(p).exists() else "missing"
        side = Path(p).with_suffix(".json")
        if side.exists() and side != Path(p):
            src[e.patient_id + ".json"] = file_digest(side)
    stamp = fingerprint("ingest", src)
    outputs = ["manifest.csv", "ingest.csv"]
    if not force and _up_to_date(out, "ingest", stamp, outputs):
        log.info("ingest: up to date, skipped")
        return False
    rows = _map(_ingest_one, [(e.patient_id, p) for e, p in zip(man, paths)], cfg["run"]["workers"])
    for r in rows:
        if r[1] != "ok":
            log.warning("%s excluded as corrupted: %s", r[0], r[2])
    local = CohortManifest([ManifestEntry(e.patient_id, p, e.afr_label, e.age, e.sex, e.followup_days)
                            for e, p in zip(man, paths)])
    save_manifest(local, out / "manifest.csv")
    write_table(out / "ingest.csv", INGEST_COLUMNS, rows)
    _write_stamp(out, "ingest", stamp)
    return True


# ---------------------------------------------------------------------------
# segments


def _regions(rec, region_s):
    return {"pre": window(rec, 0.0, region_s), "post": window(rec, rec.duration_s - region_s, region_s)}


def _segment_one(args):
    pid, path, seg_cfg = args
    rec = load_recording(path)
    stride = seg_cfg["stride_s"] or None
    windows = {"stats": seg_cfg["window_stats_s"], "class": seg_cfg["window_class_s"]}
    top_k = {"stats": seg_cfg["top_k_stats"], "class": seg_cfg["top_k_class"]}
    all_rows, chosen, failures = [], [], []
    for phase, region in _regions(rec, seg_cfg["region_s"]).items():
        region = replace(region, patient_id=pid)
        peaks = lead_peaks(region)
        for task in TASKS:
            segs = scan(region, windows[task], phase, seg_cfg["overlap_s"], stride, seg_cfg["match_tol_ms"], peaks)
            all_rows += [s.as_row() for s in segs]
            best = select(segs, int(top_k[task]), seg_cfg["bsqi_threshold"])
            if not best:
                top = max((s.bsqi_mean for s in segs), default=math.nan)
                failures.append(f"{phase}/{windows[task]:g}s best bSQI {top:.3f}")
            chosen += [[task, rank, *s.as_row()] for rank, s in enumerate(best)]
    return pid, all_rows, chosen, failures


def stage_segments(cfg: dict, out: Path, force: bool = False) -> bool:
    _require(out, ["ingest.csv", "manifest.csv"], "segments")
    stamp = fingerprint("segments", cfg["segments"], _digests(out, ["ingest.csv"]))
    outputs = ["windows.csv", "segments.csv", "exclusions.csv"]
    if not force and _up_to_date(out, "segments", stamp, outputs):
        log.info("segments: up to date, skipped")
        return False
    _, rows = read_table(out / "ingest.csv")
    exclusions = [[r[0], "corrupted", r[2]] for r in rows if r[1] != "ok"]
    jobs = [(r[0], r[5], cfg["segments"]) for r in rows if r[1] == "ok"]
    windows_rows, selected_rows = [], []
    thr = cfg["segments"]["bsqi_threshold"]
    for pid, all_rows, chosen, failures in _map(_segment_one, jobs, cfg["run"]["workers"]):
        windows_rows += all_rows
        if failures:
            reason = f"bSQI<{thr:g}: " + "; ".join(failures)
            log.warning("%s excluded for low quality (%s)", pid, reason)
            exclusions.append([pid, "low_quality", reason])
        else:
            selected_rows += chosen
    order = {r[0]: i for i, r in enumerate(rows)}
    exclusions.sort(key=lambda e: order[e[0]])
    write_table(out / "windows.csv", WINDOW_COLUMNS, windows_rows)
    write_table(out / "segments.csv", SELECTED_COLUMNS, selected_rows)
    write_table(out / "exclusions.csv", EXCLUSION_COLUMNS, exclusions)
    _write_stamp(out, "segments", stamp)
    return True


# ---------------------------------------------------------------------------
# features


def _features_one(args):
    pid, path, selected, region_s, hrv_min, meta = args  # selected: (task, phase, rank, start, dur, bsqi)
    rec = load_recording(path)
    rows = []
    for phase, region in _regions(rec, region_s).items():
        segs = [s for s in selected if s[1] == phase]
        if not segs:
            continue
        peaks = [detect_energy(region.samples[i], region.fs) for i in range(region.samples.shape[0])]
        for task, _, rank, start_s, dur_s, bsqi_mean in segs:
            seg = window(region, start_s, dur_s)
            lo = int(round(start_s * region.fs))
            sub = [p.within(lo, lo + seg.n_samples) for p in peaks]
            feats = segment_features(seg, sub, hrv_min_intervals=hrv_min)
            rows.append([pid, phase, task, rank, start_s, dur_s, bsqi_mean,
                         *(feats[c] for c in ECG_FEATURES), *meta])
    return rows


def stage_features(cfg: dict, out: Path, force: bool = False) -> bool:
    _require(out, ["segments.csv", "manifest.csv", "ingest.csv"], "features")
    stamp = fingerprint("features", cfg["features"], cfg["segments"]["region_s"],
                        _digests(out, ["segments.csv", "manifest.csv"]))
    outputs = [feature_file(t, p) for t in TASKS for p in PHASES]
    if not force and _up_to_date(out, "features", stamp, outputs):
        log.info("features: up to date, skipped")
        return False
    man = _manifest(out)
    _, seg_rows = read_table(out / "segments.csv")
    by_pid = {}
    for r in seg_rows:
        task, rank, pid, phase, start_s, dur_s, bsqi_mean = r[:7]
        by_pid.setdefault(pid, []).append((task, phase, int(rank), float(start_s), float(dur_s), float(bsqi_mean)))
    jobs = [
        (e.patient_id, e.recording_path, by_pid[e.patient_id], cfg["segments"]["region_s"],
         int(cfg["features"]["hrv_min_intervals"]), (e.age, e.sex_code))
        for e in man if e.patient_id in by_pid
    ]
    results = _map(_features_one, jobs, cfg["run"]["workers"])
    tables = {(t, p): [] for t in TASKS for p in PHASES}
    for rows in results:
        for r in rows:
            tables[(r[2], r[1])].append(r)
    for (task, phase), rows in tables.items():
        rows.sort(key=lambda r: (r[0], r[3]))
        write_table(out / feature_file(task, phase), FEATURE_COLUMNS, rows)
    _write_stamp(out, "features", stamp)
    return True


# ---------------------------------------------------------------------------
# stats


def load_feature_rows(path) -> dict:
    """``{patient_id: {feature: value}}`` from a one-segment-per-patient feature CSV."""
    _, names, ids, X = read_matrix(path, len(FEATURE_ID_COLUMNS))
    rows = {}
    for idv, x in zip(ids, X):
        if idv[0] in rows:
            raise DataError(f"{path}: patient {idv[0]} has more than one row")
        rows[idv[0]] = dict(zip(names, x))
    return rows


def stage_stats(cfg: dict, out: Path, force: bool = False, pre_path=None, post_path=None, volcano_path=None) -> bool:
    pre_path = Path(pre_path) if pre_path else out / feature_file("stats", "pre")
    post_path = Path(post_path) if post_path else out / feature_file("stats", "post")
    volcano_path = Path(volcano_path) if volcano_path else out / "volcano.csv"
    for p in (pre_path, post_path):
        if not p.exists():
            raise DataError(f"stats needs {p}; run the features stage first")
    stamp = fingerprint("stats", cfg["stats"], file_digest(pre_path), file_digest(post_path), str(volcano_path.name))
    if not force and _up_to_date(out, "stats", stamp, [volcano_path.name]) and volcano_path.parent == out:
        log.info("stats: up to date, skipped")
        return False
    table = st.PairedFeatureTable.from_rows(load_feature_rows(pre_path), load_feature_rows(post_path), ECG_FEATURES)
    rows = st.volcano(table, cfg["stats"]["alpha"], cfg["stats"]["fc_threshold"], cfg["stats"]["fc_mode"])
    st.write_volcano(rows, volcano_path)
    out.mkdir(parents=True, exist_ok=True)
    _write_stamp(out, "stats", stamp)
    return True


# ---------------------------------------------------------------------------
# train


def load_cohort_table(path, manifest: CohortManifest) -> CohortTable:
    _, names, ids, X = read_matrix(path, len(FEATURE_ID_COLUMNS))
    labels = {e.patient_id: e.afr_label for e in manifest if e.afr_label is not None}
    return CohortTable([i[0] for i in ids], [int(i[3]) for i in ids], X, list(names), labels)


def stage_train(cfg: dict, out: Path, force: bool = False, features_path=None) -> bool:
    tr = cfg["train"]
    features_path = Path(features_path) if features_path else out / feature_file("class", tr["phase"])
    if not features_path.exists():
        raise DataError(f"train needs {features_path}; run the features stage first")
    _require(out, ["manifest.csv"], "train")
    report_name, roc_name = cv_files(tr["phase"], tr["feature_set"])
    stamp = fingerprint("train", tr, cfg["run"]["seed"], file_digest(features_path), file_digest(out / "manifest.csv"))
    if not force and _up_to_date(out, f"train_{tr['phase']}_{tr['feature_set']}", stamp, [report_name, roc_name]):
        log.info("train: up to date, skipped")
        return False
    cohort = load_cohort_table(features_path, _manifest(out))
    if not cohort.patient_ids:
        raise TooFewPatients("no segments in the classification feature table")
    conf = CvConfig(tr["outer_k"], tr["inner_k"], tr["budget"], tuple(tr["k_grid"]), tr["aggregation"],
                    bool(tr["pooled"]), cfg["run"]["seed"])
    report = nested_cv(cohort, tr["feature_set"], tr["phase"], conf)
    report.write_json(out / report_name)
    report.write_roc_csv(out / roc_name)
    _write_stamp(out, f"train_{tr['phase']}_{tr['feature_set']}", stamp)
    return True


# ---------------------------------------------------------------------------
# report


def exclusion_summary(out: Path) -> dict:
    _, ingest = read_table(out / "ingest.csv")
    _, excl = read_table(out / "exclusions.csv")
    corrupted = [e[0] for e in excl if e[1] == "corrupted"]
    low = [e[0] for e in excl if e[1] == "low_quality"]
    n_in = len(ingest)
    return {
        "input": n_in,
        "corrupted": len(corrupted),
        "low_quality": len(low),
        "processed": n_in - len(corrupted) - len(low),
        "corrupted_ids": corrupted,
        "low_quality_ids": low,
    }


def stage_report(cfg: dict, out: Path, force: bool = False) -> bool:
    _require(out, ["ingest.csv", "exclusions.csv", "manifest.csv"], "report")
    cv_reports = sorted(p.name for p in out.glob("cv_report_*.json"))
    inputs = ["ingest.csv", "exclusions.csv", "manifest.csv"] + cv_reports
    if (out / "volcano.csv").exists():
        inputs.append("volcano.csv")
    stamp = fingerprint("report", cfg["stats"], _digests(out, inputs))
    if not force and _up_to_date(out, "report", stamp, ["report.json", "report.md"]):
        log.info("report: up to date, skipped")
        return False
    ex = exclusion_summary(out)
    man = _manifest(out)
    excluded = set(ex["corrupted_ids"]) | set(ex["low_quality_ids"])
    summary = {"cohort": ex, "labeled_processed": sum(1 for e in man.labeled if e.patient_id not in excluded)}
    lines = [
        "# Pipeline report", "",
        "## Cohort", "",
        f"- input recordings: {ex['input']}",
        f"- corrupted or unusable: {ex['corrupted']}",
        f"- low quality (bSQI below {cfg['segments']['bsqi_threshold']:g}): {ex['low_quality']}",
        f"- processed: {ex['processed']} ({summary['labeled_processed']} with labels)",
    ]
    if (out / "volcano.csv").exists():
        vr = st.read_volcano(out / "volcano.csv")
        alpha = cfg["stats"]["alpha"]
        sig = [r for r in vr if r.significant]
        summary["stats"] = {
            "features_tested": sum(1 for r in vr if not math.isnan(r.p_value)),
            "p_below_alpha": sum(1 for r in vr if r.p_value < alpha),
            "significant": len(sig),
            "fc_mode": cfg["stats"]["fc_mode"],
            "top": [{"feature": r.feature, "p_value": r.p_value, "mean_fc": r.mean_fc} for r in vr[:10]],
        }
        lines += ["", "## Pre vs post", "",
                  f"- features tested: {summary['stats']['features_tested']}",
                  f"- p < {alpha:g}: {summary['stats']['p_below_alpha']}",
                  f"- significant ({cfg['stats']['fc_mode']} fold-change rule): {len(sig)}", "",
                  "| feature | p | mean FC |", "|---|---|---|"]
        lines += [f"| {r.feature} | {r.p_value:.3g} | {r.mean_fc:.4g} |" for r in vr[:10]]
    if cv_reports:
        summary["cv"] = {}
        lines += ["", "## Nested cross-validation", "", "| phase | features | mean AUROC | folds used |", "|---|---|---|---|"]
        for name in cv_reports:
            rep = json.loads((out / name).read_text())
            used = sum(1 for f in rep["folds"] if not f["skipped"])
            summary["cv"][name] = {"phase": rep["phase"], "feature_set": rep["feature_set"],
                                   "mean_auroc": rep["mean_auroc"], "folds_used": used}
            lines.append(f"| {rep['phase']} | {rep['feature_set']} | {rep['mean_auroc']:.3f} | {used}/{len(rep['folds'])} |")
    (out / "report.json").write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n")
    (out / "report.md").write_text("\n".join(lines) + "\n")
    _write_stamp(out, "report", stamp)
    return True


def run_stage(stage: str, cfg: dict, out, manifest=None, force: bool = False) -> bool:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    if stage == "ingest":
        return stage_ingest(manifest, cfg, out, force)
    if stage == "segments":
        return stage_segments(cfg, out, force)
    if stage == "features":
        return stage_features(cfg, out, force)
    if stage == "stats":
        return stage_stats(cfg, out, force)
    if stage == "train":
        return stage_train(cfg, out, force)
    if stage == "report":
        return stage_report(cfg, out, force)
    raise ValueError(f"unknown stage {stage!r}")


def run_pipeline(manifest, cfg: dict, out, stages=STAGES, force: bool = False) -> dict:
    """Run ``stages`` in order; returns ``{stage: ran}`` (False when skipped as up to date)."""
    return {s: run_stage(s, cfg, out, manifest, force) for s in stages}
