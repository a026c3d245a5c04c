"""Fixed-point circle arithmetic.

Circle coordinates live in ``[0, 1)`` as unsigned integers scaled by
``2**64`` so that rotations are exact modular additions.  Parameters are kept
at 128 fractional bits and truncated to 64 bits for the array kernels.
"""
from fractions import Fraction
from math import isqrt

import numpy as np

ONE64 = 1 << 64
ONE128 = 1 << 128
HALF64 = 1 << 63
MASK64 = ONE64 - 1

# floor(((sqrt 5) - 1) / 2 * 2**128)
GOLDEN128 = (isqrt(5 << 256) - ONE128) // 2
GOLDEN = Fraction(GOLDEN128, ONE128)
# floor((sqrt 2 - 1) * 2**128); used as an irrational grid offset
SILVER128 = isqrt(2 << 256) - ONE128
SILVER = Fraction(SILVER128, ONE128)


def fixed128(x):
    """Round-toward-zero reduction of a rational into ``[0, 1)`` at 128 bits."""
    x = Fraction(x)
    return (x.numerator * ONE128 // x.denominator) % ONE128


def fixed64(x):
    return fixed128(x) >> 64


def to_fixed64(values):
    """Float circle coordinates -> uint64 fixed point (truncating)."""
    v = np.mod(np.asarray(values, dtype=np.float64), 1.0)
    v = np.minimum(v, np.nextafter(1.0, 0.0))
    hi = np.floor(v * 2.0**32)
    lo = np.floor((v * 2.0**32 - hi) * 2.0**32)
    return (hi.astype(np.uint64) << np.uint64(32)) | lo.astype(np.uint64)


def to_float(values):
    """uint64 fixed point -> float64 in ``[0, 1)``."""
    v = np.asarray(values, dtype=np.uint64)
    hi = (v >> np.uint64(11)).astype(np.float64)
    return hi * 2.0**-53


def circle_dist64(a, b):
    """Exact arc distance between fixed-point coordinates, as uint64."""
    d = np.asarray(a, dtype=np.uint64) - np.asarray(b, dtype=np.uint64)
    return np.minimum(d, np.uint64(0) - d)


def circle_threshold(delta):
    """Integer threshold ``t`` with ``dist >= t`` iff arc distance ``>= delta``.

    Distances never exceed ``2**63`` (half a turn), so any ``delta > 1/2``
    maps to ``2**63 + 1``, which is unreachable.
    """
    delta = Fraction(delta)
    if delta <= 0:
        return 0
    if delta > Fraction(1, 2):
        return HALF64 + 1
    num = delta.numerator * ONE64
    return -(-num // delta.denominator)


def orbit_positions64(alpha64, start64, n):
    """``start + k*alpha mod 1`` for ``k < n`` as uint64."""
    k = np.arange(n, dtype=np.uint64)
    return k * np.uint64(alpha64) + np.uint64(start64)
