"""Compiled vs pure-Python kernels: tree growing, forest voting, beat delineation.

    python3 benchmarks/bench_kernels.py [--repeat 3]

Both backends are run on identical inputs; outputs are checked for equality
before timings are reported.
"""
import argparse
import time

import numpy as np
from scipy.signal import savgol_filter

from afr_ecg import _kernels_py as py_backend
from afr_ecg import kernels
from afr_ecg.delineation import _noise_sd
from afr_ecg.qrs import bandpass, detect_energy
from afr_ecg.synth import SynthSpec, generate


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def tree_case(n=200, p=20, n_trees=50, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, p))
    y = (X[:, 0] + 0.5 * rng.normal(size=n) > 0).astype(np.int64)

    def fit(backend):
        return [backend.fit_tree(X, y, (1.0, 1.0), 8, 1, int(np.sqrt(p)), s) for s in range(n_trees)]

    return X, fit


def delineation_case(seed=0):
    rec, _ = generate(SynthSpec(hr_bpm=70, hrv_std_ms=30, noise_uv=10, duration_s=60, seed=seed))
    fs = rec.fs
    ms = fs / 1000.0
    args = []
    for x in rec.samples:
        xq = bandpass(x, 0.5, 40.0, fs)
        xs = bandpass(x, 0.5, 20.0, fs)
        ds = savgol_filter(xs, max(int(round(25 * ms)) | 1, 5), 2, deriv=1)
        w = [int(round(v * ms)) for v in (10, 40, 50, 80, 250, 400)]
        noise = 5.0 * _noise_sd(x) * np.sqrt(20.0 / (fs / 2.0))
        args.append((xq, xs, ds, detect_energy(x, fs).indices, w, 0.04, 0.04, noise, 0.05))
    return args


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    a = ap.parse_args()
    cb = kernels.compiled_backend
    if cb is None:
        print("compiled extension not built; only the Python backend is available")
        return
    rows = []

    X, fit = tree_case()
    t_py, trees_py = best_of(lambda: fit(py_backend), a.repeat)
    t_c, trees_c = best_of(lambda: fit(cb), a.repeat)
    assert all(all(np.array_equal(u, v) for u, v in zip(tp, tc)) for tp, tc in zip(trees_py, trees_c))
    rows.append(("fit_tree x50 (200x20, depth 8)", t_py, t_c))

    parts = [np.concatenate(z) for z in zip(*trees_c)]
    sizes = [t[0].size for t in trees_c]
    roots = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    offs = np.repeat(roots, sizes)
    left = np.where(parts[2] >= 0, parts[2] + offs, -1).astype(np.int32)
    right = np.where(parts[3] >= 0, parts[3] + offs, -1).astype(np.int32)
    args = (X, parts[0], parts[1], left, right, parts[4], roots)
    t_py, v_py = best_of(lambda: py_backend.predict_votes(*args), a.repeat)
    t_c, v_c = best_of(lambda: cb.predict_votes(*args), a.repeat)
    assert np.array_equal(v_py, v_c)
    rows.append(("predict_votes (50 trees, 200 rows)", t_py, t_c))

    cases = delineation_case()
    t_py, d_py = best_of(lambda: [py_backend.delineate_beats(*c) for c in cases], a.repeat)
    t_c, d_c = best_of(lambda: [cb.delineate_beats(*c) for c in cases], a.repeat)
    assert all(np.array_equal(u, v, equal_nan=True) for u, v in zip(d_py, d_c))
    rows.append(("delineate_beats (12 leads x 60 s)", t_py, t_c))

    print(f"{'kernel':40s} {'python [s]':>11s} {'cython [s]':>11s} {'speedup':>8s}")
    for name, tp, tc in rows:
        print(f"{name:40s} {tp:11.4f} {tc:11.4f} {tp / tc:7.1f}x")
    print("outputs identical across backends")


if __name__ == "__main__":
    main()
