"""Backend selection for the hot kernels (tree growing, forest voting, beat delineation).

The compiled extension is used when importable; set ``AFR_ECG_PURE_PYTHON=1``
to force the NumPy fallback. Both expose ``fit_tree``, ``predict_votes``,
``bootstrap_indices`` and ``delineate_beats`` with identical results.
"""
import os

from . import _kernels_py as python_backend

try:
    from . import _kernels as compiled_backend
except ImportError:  # extension not built
    compiled_backend = None

if compiled_backend is not None and not os.environ.get("AFR_ECG_PURE_PYTHON"):
    _active = compiled_backend
else:
    _active = python_backend

BACKEND = _active.BACKEND
fit_tree = _active.fit_tree
predict_votes = _active.predict_votes
bootstrap_indices = _active.bootstrap_indices
delineate_beats = _active.delineate_beats
