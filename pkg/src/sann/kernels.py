"""Backend selection for the hot loops.

The compiled extension is used when it imports; otherwise the numpy
fallback. ``SANN_PURE_PYTHON=1`` forces the fallback.
"""
import os

from . import _pykernels as python_backend

try:
    if os.environ.get("SANN_PURE_PYTHON"):
        raise ImportError("pure python backend requested")
    from . import _kernels as compiled_backend
except ImportError:
    compiled_backend = None

_active = compiled_backend if compiled_backend is not None else python_backend
BACKEND = "compiled" if compiled_backend is not None else "python"

pair_trials = _active.pair_trials
triple_trials = _active.triple_trials
first_capture = _active.first_capture


def backends():
    """Map of available backend name to module."""
    out = {"python": python_backend}
    if compiled_backend is not None:
        out["compiled"] = compiled_backend
    return out
