"""Besicovitch pseudo-distances between sequences and box-counting on shift orbits.

Distances are computed directly from symbol arrays: position ``k`` counts
when the two sequences differ somewhere in ``[k, k + m]`` for ``delta =
2**-m``.  This code path shares nothing with the orbit engines, so comparing
packing counts here with greedy separated sets from
:func:`amorph.separation.pair_frequencies` is a genuine cross-check.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .scaling import GROWTH, least_squares
from .separation import checkpoints, max_separated_set, pair_frequencies, sample_points
from .symbolic import Sequence, cantor_window, sequence_for
from .systems import parse_spec


@dataclass(frozen=True)
class BesicovitchPoint:
    """The shifted sequence ``sigma^offset x`` read over ``horizon`` positions."""

    sequence: Sequence
    horizon: int
    offset: int = 0

    def symbols(self, extra=0):
        return self.sequence.block(self.offset, self.horizon + extra)


def _dyadic_exponent(delta):
    d = Fraction(delta)
    if d <= 0 or d > 1 or d.numerator != 1 or d.denominator & (d.denominator - 1):
        raise ValueError(f"delta must be 2^-m with m >= 0, got {delta}")
    return d.denominator.bit_length() - 1


def _window_any(diff, m):
    """``out[k] = diff[k] or ... or diff[k + m]``."""
    c = np.concatenate([[0], np.cumsum(diff, dtype=np.int64)])
    n = len(diff) - m
    return (c[m + 1:m + 1 + n] - c[:n]) > 0


def _suffix_max(hits, cps):
    c = np.cumsum(hits, dtype=np.int64)
    return float(np.max(c[cps - 1] / cps))


def besicovitch_distance(x, y, delta, horizon, mode="suffix_max"):
    """Pseudo-distance between two sequences at scale ``delta = 2**-m``.

    ``x`` and ``y`` are :class:`Sequence` objects or symbol arrays holding at
    least ``horizon + m`` symbols.
    """
    T = int(horizon)
    if T < 64:
        raise ValueError("horizon must be at least 64")
    m = _dyadic_exponent(delta)
    xs = x.block(0, T + m) if isinstance(x, Sequence) else np.asarray(x)[:T + m]
    ys = y.block(0, T + m) if isinstance(y, Sequence) else np.asarray(y)[:T + m]
    hits = _window_any(xs != ys, m)
    return _suffix_max(hits, checkpoints(T, mode))


def distance_matrix(points, delta, mode="suffix_max"):
    """Pairwise pseudo-distances of :class:`BesicovitchPoint` objects with one horizon."""
    T = {p.horizon for p in points}
    if len(T) != 1:
        raise ValueError("all points need the same horizon")
    T = T.pop()
    m = _dyadic_exponent(delta)
    cps = checkpoints(T, mode)
    rows = np.stack([p.symbols(m) for p in points])
    M = len(points)
    D = np.zeros((M, M))
    for i in range(M - 1):
        hits = _window_any_rows(rows[i + 1:] != rows[i][None], m)
        c = np.cumsum(hits, axis=1, dtype=np.int64)
        D[i, i + 1:] = (c[:, cps - 1] / cps[None, :]).max(axis=1)
    return D + D.T


def _window_any_rows(diff, m):
    c = np.concatenate([np.zeros((diff.shape[0], 1), dtype=np.int64), np.cumsum(diff, axis=1, dtype=np.int64)], axis=1)
    n = diff.shape[1] - m
    return (c[:, m + 1:m + 1 + n] - c[:, :n]) > 0


def orbit_points(seq, size, horizon):
    """The first ``size`` shifts of ``seq``."""
    return [BesicovitchPoint(seq, int(horizon), k) for k in range(int(size))]


def packing_count(D, eps):
    """Greedy ``eps``-packing in index order: keep a point at distance ``>= eps`` from all kept."""
    D = np.asarray(D, dtype=np.float64)
    kept = []
    for i in range(D.shape[0]):
        if not kept or bool((D[i, kept] >= eps).all()):
            kept.append(i)
    return len(kept)


def covering_count(D, eps):
    """Greedy cover by sets ``{y : d(c, y) < eps}``; each step takes the largest gain."""
    D = np.asarray(D, dtype=np.float64)
    near = D < eps
    np.fill_diagonal(near, True)
    left = np.ones(D.shape[0], dtype=bool)
    count = 0
    while left.any():
        gain = (near & left[None, :]).sum(axis=1)
        c = int(np.argmax(gain))
        left &= ~near[c]
        count += 1
    return count


@dataclass
class BoxDimension:
    eps: list
    counts: list
    slope: float
    lower: float
    upper: float
    r2: float


def box_dimension(D, eps_grid, mode="packing", window=4):
    """Slope of ``log count`` against ``-log eps`` for a distance matrix ``D``.

    ``lower``/``upper`` are the extreme slopes over sub-windows of ``window``
    consecutive grid points.
    """
    eps_grid = sorted((float(e) for e in eps_grid), reverse=True)
    if len(eps_grid) < 4:
        raise ValueError("need at least four eps values")
    if mode not in ("packing", "covering"):
        raise ValueError(f"unknown mode {mode!r}")
    count = packing_count if mode == "packing" else covering_count
    counts = [count(D, e) for e in eps_grid]
    x = [-math.log(e) for e in eps_grid]
    y = [math.log(c) for c in counts]
    slope, _, r2 = least_squares(x, y)
    w = min(window, len(x))
    subs = [least_squares(x[k:k + w], y[k:k + w])[0] for k in range(len(x) - w + 1)]
    return BoxDimension(eps_grid, counts, slope, min(subs), max(subs), r2)


def sep_packing_identity(system, size, horizon, nus, delta=1, seed=0):
    """Greedy Sep through the orbit engine against packing counts through direct distances.

    Returns ``(sep_counts, packing_counts)`` for each ``nu``; on a subshift
    sample the two lists must agree exactly.
    """
    if isinstance(system, str):
        system = parse_spec(system)
    if not system.symbolic or system.power != 1:
        raise ValueError("the identity is stated for a plain subshift")
    smp = sample_points(system, size, seed)
    rec = pair_frequencies(smp, Fraction(delta), horizon)
    seps = [len(max_separated_set(rec, float(nu))) for nu in nus]
    D = distance_matrix(orbit_points(sequence_for(system), size, horizon), delta)
    packs = [packing_count(D, float(nu)) for nu in nus]
    return seps, packs


def total_boundedness_probe(seq, eps, samples, horizon, delta=1):
    """Packing counts of growing orbit samples.

    Returns ``(not_totally_bounded, curve)``; the flag is set when the last
    sample-size step still grows the count by more than 10%.
    """
    samples = sorted(int(m) for m in samples)
    if len(samples) < 3:
        raise ValueError("need at least three sample sizes")
    top = distance_matrix(orbit_points(seq, samples[-1], horizon), delta)
    curve = [packing_count(top[:M, :M], float(eps)) for M in samples]
    return curve[-1] > (1 + GROWTH) * curve[-2], list(zip(samples, curve))


def window_length(delta):
    """Symbols compared per position at scale ``delta``."""
    return cantor_window(delta)
