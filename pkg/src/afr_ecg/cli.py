"""Command-line entry point ``afr-ecg``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 degenerate
analysis.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import pipeline
from .config import load_config
from .errors import AnalysisError, ConfigError, DataError

log = logging.getLogger("afr_ecg")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_ANALYSIS = 0, 2, 3, 4


def _common(p: argparse.ArgumentParser, manifest: bool = False):
    p.add_argument("--config", help="TOML file overriding the shipped default profile")
    p.add_argument("--out", required=True, help="output directory for artifacts")
    p.add_argument("--seed", type=int, help="master seed (overrides run.seed)")
    p.add_argument("--force", action="store_true", help="recompute even when artifacts are up to date")
    p.add_argument("--workers", type=int, help="worker processes for per-recording stages")
    if manifest:
        p.add_argument("--manifest", help="cohort manifest CSV")


def _train_flags(p: argparse.ArgumentParser):
    p.add_argument("--phase", choices=("pre", "post"))
    p.add_argument("--features", choices=("meta", "ecg", "meta+ecg"), dest="feature_set")
    p.add_argument("--outer-k", type=int)
    p.add_argument("--inner-k", type=int)
    p.add_argument("--budget", type=int)
    p.add_argument("--pooled", action="store_true", default=None, help="also report the pooled outer-fold AUROC")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="afr-ecg", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("synth", help="write a synthetic cohort (recordings, manifest, ground truth)")
    sp.add_argument("--out", required=True)
    sp.add_argument("--n-patients", type=int, default=20)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--duration", type=float, default=600.0, help="seconds per recording")
    sp.add_argument("--fs", type=float, default=500.0)
    sp.add_argument("--noise-uv", type=float, default=10.0)
    sp.add_argument("--post-hr-shift", type=float, default=20.0)
    sp.add_argument("--noisy", default="", help="comma-separated patient indices replaced by pure noise")
    sp.add_argument("--format", choices=("flat-binary", "csv"), default="flat-binary")

    _common(sub.add_parser("ingest", help="validate recordings listed in a manifest"), manifest=True)
    _common(sub.add_parser("segments", help="bSQI scan and segment selection"))
    _common(sub.add_parser("features", help="804 ECG features + META per selected segment"))
    p = sub.add_parser("stats", help="paired pre/post tests and the volcano table")
    _common(p)
    p.add_argument("--pre", help="pre-phase feature CSV (default: OUT/features_stats_pre.csv)")
    p.add_argument("--post", help="post-phase feature CSV (default: OUT/features_stats_post.csv)")
    p.add_argument("--fc-mode", choices=("raw", "log2"))
    p.add_argument("--alpha", type=float)
    p = sub.add_parser("train", help="nested cross-validated random forest")
    _common(p, manifest=True)
    p.add_argument("--features-csv", help="classification feature CSV (default: OUT/features_class_<phase>.csv)")
    _train_flags(p)
    _common(sub.add_parser("report", help="cohort accounting and result summary"))
    p = sub.add_parser("run", help="all stages in order")
    _common(p, manifest=True)
    _train_flags(p)
    p.add_argument("--skip-train", action="store_true", help="stop after the stats stage (plus report)")
    return ap


def _overrides(args) -> dict:
    ov = {}

    def put(section, key, value):
        if value is not None:
            ov.setdefault(section, {})[key] = value

    put("run", "seed", getattr(args, "seed", None))
    put("run", "workers", getattr(args, "workers", None))
    for key in ("phase", "feature_set", "budget", "pooled"):
        put("train", key, getattr(args, key, None))
    put("train", "outer_k", getattr(args, "outer_k", None))
    put("train", "inner_k", getattr(args, "inner_k", None))
    put("stats", "fc_mode", getattr(args, "fc_mode", None))
    put("stats", "alpha", getattr(args, "alpha", None))
    return ov


def _synth(args) -> int:
    from .synth import make_cohort

    noisy = tuple(int(t) for t in args.noisy.split(",") if t.strip())
    path = make_cohort(args.out, args.n_patients, args.seed, args.duration, args.fs, args.noise_uv,
                       args.post_hr_shift, noisy_patients=noisy, fmt=args.format)
    print(path)
    return EXIT_OK


def _manifest_for_train(args, out: Path):
    # train may be given a manifest directly instead of relying on ingest
    if getattr(args, "manifest", None) and not (out / "manifest.csv").exists():
        from .recordio import load_manifest, save_manifest

        out.mkdir(parents=True, exist_ok=True)
        save_manifest(load_manifest(args.manifest), out / "manifest.csv")


def dispatch(args) -> int:
    if args.command == "synth":
        return _synth(args)
    cfg = load_config(args.config, _overrides(args))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.command == "stats":
        ran = pipeline.stage_stats(cfg, out, args.force, args.pre, args.post)
        log.info("stats: %s", "done" if ran else "skipped")
    elif args.command == "train":
        _manifest_for_train(args, out)
        ran = pipeline.stage_train(cfg, out, args.force, args.features_csv)
        log.info("train: %s", "done" if ran else "skipped")
    elif args.command == "run":
        stages = [s for s in pipeline.STAGES if not (args.skip_train and s == "train")]
        for stage, ran in pipeline.run_pipeline(args.manifest, cfg, out, stages, args.force).items():
            log.info("%s: %s", stage, "done" if ran else "skipped")
    else:
        ran = pipeline.run_stage(args.command, cfg, out, getattr(args, "manifest", None), args.force)
        log.info("%s: %s", args.command, "done" if ran else "skipped")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return dispatch(args)
    except ConfigError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except DataError as exc:
        log.error("data error: %s", exc)
        return EXIT_DATA
    except AnalysisError as exc:
        log.error("analysis error: %s", exc)
        return EXIT_ANALYSIS


if __name__ == "__main__":
    sys.exit(main())
