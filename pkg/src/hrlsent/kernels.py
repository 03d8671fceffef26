"""Forward kernels, backed by the compiled extension when it is importable.

Set ``HRLSENT_PURE_PYTHON=1`` to force the numpy fallback.  ``BACKEND`` names
the implementation in use.
"""

import os

import numpy as np

from . import _kernels_py as _py
from .errors import ShapeError

try:
    if os.environ.get("HRLSENT_PURE_PYTHON"):
        raise ImportError("pure-python backend requested")
    from . import _kernels as _native
except ImportError:
    _native = None

BACKEND = "cython" if _native is not None else "python"

MODE_SAMPLE, MODE_GREEDY, MODE_FORCED = 0, 1, 2
_NO_FORCE = np.zeros(0, dtype=np.int8)
_NO_UNIFORM = np.zeros(0)


def _impl(*arrays):
    if _native is not None and all(a.dtype == np.float64 for a in arrays):
        return _native
    return _py


def lstm_step(W, b, h, c, x, backend=None):
    mod = backend or _impl(W, h, x)
    return mod.lstm_step(W, b, h, c, x)


def low_rollout(Wp, bp, W, b, h, c, X, *, uniforms=None, forced=None, greedy=False,
                backend=None):
    """Run the word policy over the rows of ``X`` starting from ``(h, c)``."""
    k = X.shape[0]
    if forced is not None:
        mode = MODE_FORCED
        forced = np.ascontiguousarray(forced, dtype=np.int8)
        if forced.shape[0] != k:
            raise ShapeError(f"forced mask has {forced.shape[0]} entries for {k} words")
    elif greedy:
        mode = MODE_GREEDY
    else:
        mode = MODE_SAMPLE
        if uniforms is None or uniforms.shape[0] != k:
            raise ShapeError("sampling needs one uniform draw per word")
    mod = backend or _impl(Wp, W, h, X)
    return mod.low_rollout(Wp, float(bp), W, b, h, c, X,
                           _NO_UNIFORM if uniforms is None else uniforms,
                           _NO_FORCE if forced is None else forced, mode)


def native_module():
    return _native


def python_module():
    return _py
