"""Pipeline configuration: the shipped ``default.toml`` profile plus user overrides."""
from __future__ import annotations

import copy
import hashlib
import json
from importlib import resources
from pathlib import Path
from typing import Optional

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigError


def default_profile_path():
    return resources.files("afr_ecg") / "data" / "default.toml"


def _load_toml(path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _merge(base: dict, over: dict, where: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in over.items():
        if key not in base:
            raise ConfigError(f"unknown config key {where}{key}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{where}{key} must be a table")
            out[key] = _merge(base[key], value, f"{where}{key}.")
        else:
            out[key] = value
    return out


def _positive(cfg, section, *keys):
    for k in keys:
        v = cfg[section][k]
        if isinstance(v, bool) or not isinstance(v, (int, float)) or v <= 0:
            raise ConfigError(f"{section}.{k} must be a positive number, got {v!r}")


def validate(cfg: dict) -> dict:
    seg = cfg["segments"]
    _positive(cfg, "segments", "region_s", "window_stats_s", "window_class_s", "overlap_s",
              "bsqi_threshold", "top_k_stats", "top_k_class", "match_tol_ms")
    if seg["stride_s"] < 0:
        raise ConfigError("segments.stride_s must be >= 0")
    for w in ("window_stats_s", "window_class_s"):
        if seg["stride_s"] == 0 and seg[w] <= seg["overlap_s"]:
            raise ConfigError(f"segments.{w} must exceed overlap_s")
        if seg[w] > seg["region_s"]:
            raise ConfigError(f"segments.{w} exceeds region_s")
    if seg["bsqi_threshold"] > 1:
        raise ConfigError("segments.bsqi_threshold must be <= 1")
    _positive(cfg, "features", "hrv_min_intervals")
    _positive(cfg, "stats", "alpha", "fc_threshold")
    if cfg["stats"]["fc_mode"] not in ("raw", "log2"):
        raise ConfigError("stats.fc_mode must be 'raw' or 'log2'")
    tr = cfg["train"]
    _positive(cfg, "train", "outer_k", "inner_k", "budget")
    if tr["phase"] not in ("pre", "post"):
        raise ConfigError("train.phase must be 'pre' or 'post'")
    if tr["feature_set"] not in ("meta", "ecg", "meta+ecg"):
        raise ConfigError("train.feature_set must be meta, ecg or meta+ecg")
    if tr["budget"] < 10:
        raise ConfigError("train.budget must be >= 10")
    if tr["outer_k"] < 2 or tr["inner_k"] < 2:
        raise ConfigError("train.outer_k and train.inner_k must be >= 2")
    if not tr["k_grid"] or any((not isinstance(k, int)) or k < 1 for k in tr["k_grid"]):
        raise ConfigError("train.k_grid must be a non-empty list of positive integers")
    if tr["aggregation"] not in ("vote", "mean"):
        raise ConfigError("train.aggregation must be 'vote' or 'mean'")
    if not isinstance(cfg["run"]["seed"], int) or cfg["run"]["seed"] < 0:
        raise ConfigError("run.seed must be a non-negative integer")
    if not isinstance(cfg["run"]["workers"], int) or cfg["run"]["workers"] < 1:
        raise ConfigError("run.workers must be a positive integer")
    return cfg


def load_config(path: Optional[str] = None, overrides: Optional[dict] = None) -> dict:
    """Default profile, then the user file, then ``overrides`` (same nesting)."""
    cfg = _load_toml(default_profile_path())
    if path is not None:
        cfg = _merge(cfg, _load_toml(Path(path)))
    if overrides:
        cfg = _merge(cfg, overrides)
    return validate(cfg)


def fingerprint(*parts) -> str:
    """Stable hash of JSON-serialisable parts (config sections, file digests)."""
    blob = json.dumps(parts, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
