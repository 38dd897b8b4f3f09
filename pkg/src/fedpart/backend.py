"""Kernel backend selection: numba-compiled or plain numpy.

The env var FEDPART_NUMBA picks the path: "0" forces the plain numpy
kernels, "1" requires numba (ImportError if missing), unset/anything else
means use numba when importable. Selection happens at import time; the
active kernels are exposed as module attributes.
"""

from __future__ import annotations

import os

from . import kernels

try:
    from numba import njit
except ImportError:
    njit = None

NUMBA_AVAILABLE = njit is not None

_flag = os.environ.get("FEDPART_NUMBA", "")
if _flag == "0":
    USING_NUMBA = False
elif _flag == "1":
    if not NUMBA_AVAILABLE:
        raise ImportError("FEDPART_NUMBA=1 but numba is not importable")
    USING_NUMBA = True
else:
    USING_NUMBA = NUMBA_AVAILABLE

_jitted = None


def jit_kernels():
    """Compile (once) and return the numba kernels, or None without numba."""
    global _jitted
    if not NUMBA_AVAILABLE:
        return None
    if _jitted is None:
        # nogil so sweep cells can overlap; no fastmath, IEEE op order must hold
        _jitted = {
            "quad": njit(cache=True, nogil=True)(kernels.quad_local_steps),
            "logistic": njit(cache=True, nogil=True)(kernels.logistic_local_steps),
        }
    return _jitted


if USING_NUMBA:
    _k = jit_kernels()
    quad_local_steps = _k["quad"]
    logistic_local_steps = _k["logistic"]
else:
    quad_local_steps = kernels.quad_local_steps
    logistic_local_steps = kernels.logistic_local_steps
