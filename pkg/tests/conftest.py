import time

import numpy as np
import pytest

from afr_ecg import pipeline
from afr_ecg.config import load_config
from afr_ecg.synth import SynthSpec, generate, make_cohort

# criterion number -> (passed, detail); filled by tests/test_acceptance.py
ACCEPTANCE = {}

# pure-noise patient planted in the shared end-to-end cohort
NOISY_INDEX = 3
PRE_TRAIN_STAGES = ("ingest", "segments", "features", "stats", "report")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running acceptance checks")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def clean_60s():
    """One minute of noiseless 60 bpm ECG at 500 Hz with its ground truth."""
    return generate(SynthSpec(hr_bpm=60.0, duration_s=60.0, seed=1))


@pytest.fixture(scope="session")
def e2e_cohort(tmp_path_factory):
    root = tmp_path_factory.mktemp("cohort")
    manifest = make_cohort(root, n_patients=20, seed=0, duration_s=600.0, noisy_patients=(NOISY_INDEX,))
    return manifest


@pytest.fixture(scope="session")
def e2e_run(e2e_cohort, tmp_path_factory):
    """Ingest through stats (plus report) on the shared cohort, timed."""
    out = tmp_path_factory.mktemp("run_a")
    cfg = load_config()
    t0 = time.perf_counter()
    ran = pipeline.run_pipeline(e2e_cohort, cfg, out, PRE_TRAIN_STAGES)
    elapsed = time.perf_counter() - t0
    return {"out": out, "cfg": cfg, "elapsed": elapsed, "ran": ran, "manifest": e2e_cohort}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
