"""The compiled kernels and their NumPy twins must agree bit for bit."""
import os
import subprocess
import sys

import numpy as np
import pytest

from afr_ecg import delineation, kernels
from afr_ecg.learn import HyperParams, rf_predict, rf_train
from afr_ecg.qrs import detect_energy
from afr_ecg.recordio import LEADS
from afr_ecg.synth import SynthSpec, generate

py = kernels.python_backend
cy = kernels.compiled_backend
needs_compiled = pytest.mark.skipif(cy is None, reason="compiled extension not built")


def test_active_backend():
    expected = "python" if cy is None or os.environ.get("AFR_ECG_PURE_PYTHON") else "cython"
    assert kernels.BACKEND == expected


def test_env_var_forces_fallback():
    code = "import afr_ecg.kernels as k; print(k.BACKEND)"
    env = dict(os.environ, AFR_ECG_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_xorshift_reference_values():
    # seeding state is splitmix64's first output for 0, a published reference value
    rng = py.XorShift(0)
    assert rng.state == 0xE220A8397B1DCDAF
    assert [rng.next() for _ in range(3)] == [8916199331640804048, 16032783972208265725, 12954103179475586193]


@needs_compiled
@pytest.mark.parametrize("seed", [0, 1, 2**63 + 5])
def test_bootstrap_equal(seed):
    a = py.bootstrap_indices(97, seed)[0]
    b = np.asarray(cy.bootstrap_indices(97, seed)[0])
    assert np.array_equal(a, b)


def _data(seed, n=120, p=6, ties=False):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, p))
    if ties:
        X = np.round(X, 1)
    y = (X[:, 0] + 0.5 * X[:, 1] ** 2 + 0.3 * rng.normal(size=n) > 0.4).astype(np.int64)
    return np.ascontiguousarray(X), y


@needs_compiled
@pytest.mark.parametrize("seed", range(6))
@pytest.mark.parametrize("cfg", [(1.0, 1.0, 3, 1, 2), (0.7, 2.4, 8, 3, 6), (1.0, 1.0, 12, 1, 1)])
def test_trees_equal(seed, cfg):
    cw0, cw1, depth, leaf, mtry = cfg
    X, y = _data(seed, ties=seed % 2 == 1)
    a = py.fit_tree(X, y, (cw0, cw1), depth, leaf, mtry, seed * 7919 + 1)
    b = cy.fit_tree(X, y, (cw0, cw1), depth, leaf, mtry, seed * 7919 + 1)
    for u, v in zip(a, b):
        assert np.array_equal(np.asarray(u), np.asarray(v), equal_nan=True)


@needs_compiled
def test_forest_votes_equal(monkeypatch):
    X, y = _data(42, n=200, p=10)
    hp = HyperParams(n_trees=60, max_depth=7, features_per_split=0.4, class_weight="balanced")
    probs = {}
    for name, backend in (("py", py), ("cy", cy)):
        monkeypatch.setattr(kernels, "fit_tree", backend.fit_tree)
        monkeypatch.setattr(kernels, "predict_votes", backend.predict_votes)
        probs[name] = rf_predict(rf_train(X, y, hp, seed=3), X)
    assert np.array_equal(probs["py"], probs["cy"])


@needs_compiled
@pytest.mark.parametrize("hr,noise,seed", [(50, 0, 0), (75, 10, 1), (118, 25, 2), (90, 60, 3)])
def test_delineation_equal(monkeypatch, hr, noise, seed):
    rec, _ = generate(SynthSpec(hr_bpm=hr, hrv_std_ms=30, noise_uv=noise, duration_s=20, seed=seed))
    for li, lead in enumerate(LEADS):
        x = rec.samples[li]
        peaks = detect_energy(x, rec.fs)
        if len(peaks) < 2:
            continue
        out = []
        for backend in (py, cy):
            monkeypatch.setattr(kernels, "delineate_beats", backend.delineate_beats)
            out.append(delineation.delineate(x, peaks, rec.fs, lead))
        for name in delineation.FIDUCIALS:
            assert np.array_equal(out[0][name], out[1][name], equal_nan=True), (lead, name)
