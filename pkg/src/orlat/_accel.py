"""Backend selection for the compiled inner loops.

Every hot kernel in :mod:`orlat._kernels` exists twice: a loop version
compiled with numba and a vectorised numpy version.  The compiled one is
used unless ``ORLAT_DISABLE_NUMBA`` is set to a truthy value or numba is
not importable.  ``ORLAT_THREADS`` caps the worker count used by the
Monte Carlo chunk scheduler.
"""

from __future__ import annotations

import os

_FALSY = {"", "0", "false", "no", "off"}

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba ships with the environment
    numba = None
    HAVE_NUMBA = False


def numba_enabled() -> bool:
    flag = os.environ.get("ORLAT_DISABLE_NUMBA", "").strip().lower()
    return HAVE_NUMBA and flag in _FALSY


def backend_name() -> str:
    return "numba" if numba_enabled() else "numpy"


def max_threads() -> int:
    raw = os.environ.get("ORLAT_THREADS", "").strip()
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return max(1, os.cpu_count() or 1)


def njit(func):
    """Compile ``func`` in nopython mode, or return it untouched without numba."""
    if not HAVE_NUMBA:
        return func
    return numba.njit(cache=True, nogil=True)(func)
