"""Numba switch for the hot kernels.

Every kernel in :mod:`amorph.kernels` exists twice: an explicit-loop version
compiled with ``numba.njit`` and a vectorised pure-numpy version.  The numba
path is used when numba imports and ``AMORPH_NUMBA`` is not set to a false
value (``0``, ``false``, ``no``, ``off``).  The flag is read once at import.
"""
import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

_FLAG = os.environ.get("AMORPH_NUMBA", "1").strip().lower()
USE_NUMBA = numba is not None and _FLAG not in ("0", "false", "no", "off")


def njit(fn):
    """Compile ``fn`` in nopython mode, or return it unchanged without numba."""
    if numba is None:
        return fn
    return numba.njit(cache=True, nogil=True)(fn)


def backend():
    return "numba" if USE_NUMBA else "numpy"
