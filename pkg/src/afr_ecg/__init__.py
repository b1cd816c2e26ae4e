"""Quality-gated 12-lead ECG feature engineering, pre/post statistics and
nested cross-validated random-forest risk prediction.

Modules: ``recordio`` (recordings, formats, manifest), ``qrs`` (two R-peak
detectors), ``quality`` (bSQI scanning), ``delineation``, ``hrv``,
``morphology``, ``features`` (804-column vector), ``stats`` (paired tests,
volcano table), ``learn`` (nested CV), ``synth`` (ground-truth generator)
and ``pipeline`` / ``cli`` (stage orchestration).
"""
from .kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"

__all__ = ["KERNEL_BACKEND", "__version__"]
