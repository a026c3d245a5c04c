"""Separation counts, separation frequencies, separated and spanning sets.

The pair-frequency matrix is the central object: entry ``(i, j)`` estimates
the upper density of times at which the orbits of sample points ``i`` and
``j`` are at least ``delta`` apart.  Two routes compute it:

* a general chunked kernel that iterates the orbit engine, for any system;
* a shift-orbit fast path for subshift samples, where all points lie on one
  orbit and pair counts reduce to prefix sums over shift differences.

Both routes produce identical matrices on subshift samples.
"""
from __future__ import annotations

import heapq
import itertools
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import _fixed, kernels
from .orbits import ProductEngine, ShiftEngine, engine_for, rng_for
from .symbolic import cantor_window
from .systems import SystemSpec, metric, parse_spec, step

CHUNK = 256
EXACT_CAP = 18
DEFAULT_MAX_SAMPLES = 4096
N_CHECKPOINTS = 16


def checkpoints(horizon, mode="suffix_max"):
    """Times ``n`` at which ``S_n / n`` is read.

    ``suffix_max`` uses 16 geometrically spaced times in ``[ceil(T/4), T]``
    (duplicates after rounding removed); ``terminal`` only ``T``.
    """
    T = int(horizon)
    if mode == "terminal":
        return np.array([T], dtype=np.int64)
    if mode != "suffix_max":
        raise ValueError(f"unknown estimator mode {mode!r}")
    lo = -(-T // 4)
    pts = np.rint(np.geomspace(lo, T, N_CHECKPOINTS)).astype(np.int64)
    pts[-1] = T
    return np.unique(pts)


@dataclass
class OrbitSample:
    """Sample points of a system together with the engine that moves them."""

    system: SystemSpec
    engine: object
    state: object
    seed: int = 0
    plan: str = "grid+random"

    def __len__(self):
        return self.engine.size(self.state)

    @property
    def coords(self):
        return self.engine.coords(self.state)

    def take(self, idx):
        idx = np.asarray(idx, dtype=np.int64)
        return OrbitSample(self.system, self.engine, self.engine.take(self.state, idx), self.seed, self.plan)


def sample_points(system, size, seed=0):
    """Deterministic sample of ``size`` points.

    Half of the points lie on a uniform grid (shifted by an irrational
    offset on circle coordinates), the rest are uniform random; products zip
    the factor samples through a seeded permutation; subshifts use the first
    ``size`` shifts of the generating sequence.
    """
    if isinstance(system, str):
        system = parse_spec(system)
    eng = engine_for(system, seed)
    rng = rng_for(seed, _text_key(system.text), size)
    return OrbitSample(system, eng, eng.sample(int(size), rng), seed)


def sample_from_coords(system, coords, seed=0):
    """Sample built from explicit coordinates (offsets for subshifts)."""
    if isinstance(system, str):
        system = parse_spec(system)
    eng = engine_for(system, seed)
    arr = np.asarray(coords)
    if arr.ndim == 1:
        arr = arr[:, None]
    return OrbitSample(system, eng, eng.from_coords(arr), seed, "explicit")


def _text_key(text):
    import zlib
    return zlib.crc32(text.encode("ascii"))


@dataclass
class SeparationRecord:
    delta: float
    frequencies: np.ndarray
    horizon: int
    mode: str = "suffix_max"
    metric: str = ""

    def __post_init__(self):
        F = self.frequencies
        if F.ndim != 2 or F.shape[0] != F.shape[1]:
            raise ValueError("frequency matrix must be square")

    @property
    def size(self):
        return self.frequencies.shape[0]

    def check(self):
        F = self.frequencies
        assert np.all(np.diag(F) == 0.0)
        assert np.array_equal(F, F.T)
        assert F.min(initial=0.0) >= 0.0 and F.max(initial=0.0) <= 1.0

    def rows(self):
        i, j = np.triu_indices(self.size, 1)
        return i, j, self.frequencies[i, j]

    def to_csv(self, path=None, header=()):
        from .io import csv_text
        i, j, f = self.rows()
        cols = ["i", "j", "delta", "frequency"] + (["metric"] if self.metric else [])
        data = [[int(a), int(b), float(self.delta), float(c)] + ([self.metric] if self.metric else [])
                for a, b, c in zip(i, j, f)]
        meta = list(header) + [f"size={self.size}", f"horizon={self.horizon}", f"mode={self.mode}"]
        text = csv_text(cols, data, meta)
        if path is not None:
            from .io import atomic_write
            atomic_write(path, text)
        return text

    @classmethod
    def from_csv(cls, text):
        meta = {}
        rows = []
        lines = text.splitlines()
        for ln in lines:
            if ln.startswith("#"):
                for part in ln[1:].split():
                    if "=" in part:
                        k, v = part.split("=", 1)
                        meta[k] = v
        body = [ln for ln in lines if ln and not ln.startswith("#")]
        head = body[0].split(",")
        for ln in body[1:]:
            rows.append(dict(zip(head, ln.split(","))))
        size = int(meta.get("size", 0)) or (1 + max(max(int(r["i"]), int(r["j"])) for r in rows))
        F = np.zeros((size, size))
        delta = float(rows[0]["delta"]) if rows else float(meta.get("delta", 0))
        for r in rows:
            a, b, v = int(r["i"]), int(r["j"]), float(r["frequency"])
            F[a, b] = F[b, a] = v
        return cls(delta, F, int(meta.get("horizon", 0)), meta.get("mode", "suffix_max"),
                   rows[0].get("metric", "") if rows else "")


# ---------------------------------------------------------------------------
# scalar reference

def sep_count(sys, delta, x, y, n):
    """``#{k < n : d(f^k x, f^k y) >= delta}`` by iterating both points."""
    if isinstance(sys, str):
        sys = parse_spec(sys)
    count = 0
    for _ in range(int(n)):
        if metric(sys, x, y) >= delta:
            count += 1
        x, y = step(sys, x), step(sys, y)
    return count


def sep_frequency(sys, delta, x, y, horizon, mode="suffix_max"):
    """Finite-horizon separation frequency of one pair (vectorised engine)."""
    if isinstance(sys, str):
        sys = parse_spec(sys)
    smp = sample_from_coords(sys, np.array([x, y], dtype=np.float64 if not sys.symbolic else np.int64))
    return float(pair_frequencies(smp, delta, horizon, mode).frequencies[0, 1])


# ---------------------------------------------------------------------------
# pair-frequency matrices

def _is_shift_sample(sample):
    return isinstance(sample.engine, ShiftEngine)


def _shift_columns(engine):
    if isinstance(engine, ShiftEngine):
        return [engine]
    if isinstance(engine, ProductEngine):
        return engine.shift_children
    return []


def _interval_delta(delta):
    return float(delta)


def pair_frequencies(sample, delta, horizon, mode="suffix_max", route="auto", return_counts=False):
    """Symmetric matrix of separation frequencies for all sample pairs.

    ``route`` selects ``"general"`` (orbit engine + chunk kernel), ``"shift"``
    (prefix sums over shift differences, subshift samples only) or
    ``"auto"``.
    """
    T = int(horizon)
    if T < 1:
        raise ValueError("horizon must be positive")
    cps = checkpoints(T, mode)
    M = len(sample)
    delta = Fraction(delta).limit_denominator(1 << 62) if not isinstance(delta, Fraction) else delta
    if route == "auto":
        route = "shift" if _is_shift_sample(sample) else "general"
    if route == "shift":
        best, counts = _shift_route(sample, delta, T, cps)
    elif route == "general":
        best, counts = _general_route(sample, delta, T, cps)
    else:
        raise ValueError(f"unknown route {route!r}")
    F = best + best.T
    rec = SeparationRecord(float(delta), F, T, mode)
    if return_counts:
        return rec, counts + counts.T
    return rec


def _general_route(sample, delta, T, cps):
    eng = sample.engine
    state = sample.state
    M = len(sample)
    thr = _fixed.circle_threshold(delta)
    window = cantor_window(delta)
    shift_cols = _shift_columns(eng)
    if shift_cols and window:
        _, _, offs = eng.observe(state)
        top = int(offs.max()) if offs.size else 0
        key_tables = [c.keys(top + c.power * T + 1, window) for c in shift_cols]
    counts = np.zeros((M, M), dtype=np.int64)
    best = np.zeros((M, M), dtype=np.float64)
    nc, ni, ns = eng.nc, eng.ni, eng.ns
    dflt = float(delta)
    for t0 in range(0, T, CHUNK):
        k = min(CHUNK, T - t0)
        C = np.empty((M, k, nc), dtype=np.uint64)
        I = np.empty((M, k, ni), dtype=np.float64)
        S = np.zeros((M, k, ns), dtype=np.uint64)
        for kk in range(k):
            c, iv, o = eng.observe(state)
            C[:, kk] = c
            I[:, kk] = iv
            if ns and window:
                for col, tab in enumerate(key_tables):
                    S[:, kk, col] = tab[o[:, col]]
            state = eng.advance(state)
        sel = (cps > t0) & (cps <= t0 + k)
        cp_local = (cps[sel] - 1 - t0).astype(np.int64)
        cp_n = cps[sel].astype(np.int64)
        kernels.pair_chunk(C, I, S, np.uint64(thr), dflt, counts, best, cp_local, cp_n)
    return np.triu(best, 1), np.triu(counts, 1)


def _shift_route(sample, delta, T, cps):
    eng = sample.engine
    if not isinstance(eng, ShiftEngine):
        raise ValueError("the shift route needs a subshift sample")
    offs = sample.state["o"].astype(np.int64)
    M = len(offs)
    best = np.zeros((M, M), dtype=np.float64)
    counts = np.zeros((M, M), dtype=np.int64)
    window = cantor_window(delta)
    if window == 0 or M < 2:
        return best, counts
    if len(np.unique(offs)) != M or offs.min() < 0:
        raise ValueError("subshift sample offsets must be distinct and non-negative")
    p = eng.power
    i, j = np.triu_indices(M, 1)
    # orient each pair so that the first member has the smaller offset
    lo = np.where(offs[i] < offs[j], i, j)
    hi = np.where(offs[i] < offs[j], j, i)
    shift = offs[hi] - offs[lo]
    order = np.lexsort((hi, lo, shift))
    lo, hi, shift = lo[order], hi[order], shift[order]
    gshift, gstart = np.unique(shift, return_index=True)
    gstart = np.append(gstart, len(shift)).astype(np.int64)
    limit = int(offs.max()) + p * T + int(gshift.max()) + 2
    keys = eng.keys(limit, window)
    kernels.shift_groups(keys, offs, np.int64(p), lo.astype(np.int64), hi.astype(np.int64),
                         gstart, gshift.astype(np.int64), cps.astype(np.int64), best, counts)
    # move everything to the upper triangle
    low = np.tril(best, -1)
    best = np.triu(best, 1) + low.T
    lowc = np.tril(counts, -1)
    counts = np.triu(counts, 1) + lowc.T
    return best, counts


def trajectory_frequencies(circle_traj, delta, mode="suffix_max", interval_traj=None):
    """Pair frequencies for explicit trajectories.

    ``circle_traj`` has shape ``(M, T, nc)`` with coordinates in ``[0, 1)``;
    ``interval_traj`` optionally ``(M, T, ni)``.
    """
    C = _fixed.to_fixed64(np.asarray(circle_traj, dtype=np.float64))
    M, T = C.shape[:2]
    I = (np.zeros((M, T, 0)) if interval_traj is None
         else np.ascontiguousarray(interval_traj, dtype=np.float64))
    S = np.zeros((M, T, 0), dtype=np.uint64)
    cps = checkpoints(T, mode)
    counts = np.zeros((M, M), dtype=np.int64)
    best = np.zeros((M, M), dtype=np.float64)
    delta = Fraction(delta)
    kernels.pair_chunk(np.ascontiguousarray(C), I, S, np.uint64(_fixed.circle_threshold(delta)),
                       float(delta), counts, best, (cps - 1).astype(np.int64), cps.astype(np.int64))
    best = np.triu(best, 1)
    return best + best.T


def first_separation_times(sample, delta, horizon):
    """Matrix of the first time each pair is ``delta`` apart (-1 if never)."""
    eng = sample.engine
    state = sample.state
    M = len(sample)
    T = int(horizon)
    delta = Fraction(delta)
    thr = _fixed.circle_threshold(delta)
    window = cantor_window(delta)
    shift_cols = _shift_columns(eng)
    if shift_cols and window:
        _, _, offs = eng.observe(state)
        key_tables = [c.keys(int(offs.max()) + c.power * T + 1, window) for c in shift_cols]
    hit = np.full((M, M), -1, dtype=np.int64)
    for t0 in range(0, T, CHUNK):
        k = min(CHUNK, T - t0)
        C = np.empty((M, k, eng.nc), dtype=np.uint64)
        I = np.empty((M, k, eng.ni), dtype=np.float64)
        S = np.zeros((M, k, eng.ns), dtype=np.uint64)
        for kk in range(k):
            c, iv, o = eng.observe(state)
            C[:, kk] = c
            I[:, kk] = iv
            if eng.ns and window:
                for col, tab in enumerate(key_tables):
                    S[:, kk, col] = tab[o[:, col]]
            state = eng.advance(state)
        kernels.first_hit_chunk(C, I, S, np.uint64(thr), float(delta), hit, t0)
    hit = np.triu(hit, 1) + np.triu(hit, 1).T
    np.fill_diagonal(hit, -1)
    return hit


# ---------------------------------------------------------------------------
# separated and spanning sets

def _matrix(F):
    return F.frequencies if isinstance(F, SeparationRecord) else np.asarray(F, dtype=np.float64)


def max_separated_set(F, nu):
    """Greedy separated set: scan in index order, keep ``i`` iff ``F[i, kept] >= nu``."""
    return kernels.greedy_sep(np.ascontiguousarray(_matrix(F)), float(nu))


def is_separated(F, idx, nu):
    F = _matrix(F)
    idx = list(idx)
    return all(F[a, b] >= nu for a, b in itertools.combinations(idx, 2))


def _adjacency(F, nu, separated=True):
    F = _matrix(F)
    M = F.shape[0]
    adj = [0] * M
    for i in range(M):
        row = (F[i] >= nu) if separated else (F[i] < nu)
        bits = 0
        for j in np.nonzero(row)[0]:
            if j != i:
                bits |= 1 << int(j)
        adj[i] = bits
    return adj


def exact_max_separated(F, nu, cap=EXACT_CAP):
    """Maximum separated subset size by branch and bound (max clique)."""
    F = _matrix(F)
    M = F.shape[0]
    if M > cap:
        raise ValueError(f"exact search limited to {cap} points, got {M}")
    if M == 0:
        return 0
    adj = _adjacency(F, nu, True)
    best = 0

    def grow(size, cand):
        nonlocal best
        if cand == 0:
            best = max(best, size)
            return
        if size + bin(cand).count("1") <= best:
            return
        while cand:
            if size + bin(cand).count("1") <= best:
                return
            v = cand.bit_length() - 1
            cand &= ~(1 << v)
            grow(size + 1, cand & adj[v])

    grow(0, (1 << M) - 1)
    return best


def min_spanning_set(F, nu):
    """Greedy cover: every point needs a chosen representative closer than ``nu``.

    A point always represents itself.  Picks the candidate covering most
    uncovered points, ties to the lowest index; lazy evaluation gives the
    same choices as the eager rule.
    """
    F = _matrix(F)
    M = F.shape[0]
    if M == 0:
        return np.zeros(0, dtype=np.int64)
    close = F < nu
    np.fill_diagonal(close, True)
    uncovered = np.ones(M, dtype=bool)
    heap = [(-int(close[:, y].sum()), y) for y in range(M)]
    heapq.heapify(heap)
    chosen = []
    left = M
    while left:
        _, y = heapq.heappop(heap)
        gain = int(np.count_nonzero(close[:, y] & uncovered))
        if gain == 0:
            continue
        if not heap or (-gain, y) <= heap[0]:
            chosen.append(y)
            uncovered &= ~close[:, y]
            left = int(uncovered.sum())
        else:
            heapq.heappush(heap, (-gain, y))
    return np.array(sorted(chosen), dtype=np.int64)


def is_spanning(F, idx, nu):
    F = _matrix(F)
    idx = list(idx)
    M = F.shape[0]
    for x in range(M):
        if x in idx:
            continue
        if not any(F[x, y] < nu for y in idx):
            return False
    return True


def exact_min_spanning(F, nu, cap=EXACT_CAP):
    """Minimum spanning subset size by exhaustive search over subset sizes."""
    F = _matrix(F)
    M = F.shape[0]
    if M > cap:
        raise ValueError(f"exact search limited to {cap} points, got {M}")
    if M == 0:
        return 0
    cover = _adjacency(F, nu, False)
    cover = [c | (1 << i) for i, c in enumerate(cover)]
    full = (1 << M) - 1
    for size in range(1, M + 1):
        for combo in itertools.combinations(range(M), size):
            acc = 0
            for y in combo:
                acc |= cover[y]
            if acc == full:
                return size
    return M


def restricted_sep(sample, delta, nu, horizon, member=None, mode="suffix_max"):
    """Greedy separated-set size over the sample points selected by ``member``.

    ``member`` is a boolean mask or a predicate on the coordinate array.
    """
    if member is None:
        idx = np.arange(len(sample))
    else:
        mask = member(sample.coords) if callable(member) else np.asarray(member, dtype=bool)
        idx = np.nonzero(mask)[0]
    if len(idx) == 0:
        warnings.warn("restricted sample is empty", RuntimeWarning)
        return 0
    sub = sample.take(idx)
    rec = pair_frequencies(sub, delta, horizon, mode)
    return len(max_separated_set(rec, nu))


# ---------------------------------------------------------------------------
# oracle suite on small instances

def random_instance(rng, n_points=None, horizon=None):
    """Pair frequencies at ``delta`` and ``2*delta`` for a small random point cloud.

    Trajectories are random walks on the circle with point-dependent drift,
    so the matrices come from a genuine metric and the frequencies satisfy
    the triangle-type inequalities that the Sep/Span comparisons rely on.
    """
    n = int(n_points or rng.integers(2, 16))
    T = int(horizon or rng.integers(64, 257))
    drift = rng.random(n) * 0.2
    jumps = rng.normal(0.0, rng.uniform(0.01, 0.1), size=(n, T))
    start = rng.random(n)
    traj = np.mod(start[:, None] + np.cumsum(jumps, axis=1) + drift[:, None] * np.arange(T), 1.0)
    delta = Fraction(int(rng.integers(1, 16)), 64)
    nu = Fraction(1, 2 ** int(rng.integers(1, 6)))
    F1 = trajectory_frequencies(traj[:, :, None], delta)
    F2 = trajectory_frequencies(traj[:, :, None], 2 * delta)
    return {"n": n, "T": T, "delta": delta, "nu": nu, "F": F1, "F2": F2}


def oracle_suite(instances=200, seed=0):
    """Exact-versus-greedy checks and the two spanning/separation inequalities.

    Returns a dict with violation counts and the greedy equality rate.
    """
    rng = rng_for(seed, 7331)
    out = {"instances": 0, "sep_ge_span": 0, "span_half_ge_sep_double": 0,
           "greedy_above_exact": 0, "greedy_not_separated": 0, "greedy_equal": 0}
    for _ in range(instances):
        inst = random_instance(rng)
        F, F2, nu = inst["F"], inst["F2"], float(inst["nu"])
        sep = exact_max_separated(F, nu)
        span = exact_min_spanning(F, nu)
        span_half = exact_min_spanning(F, nu / 2)
        sep_double = exact_max_separated(F2, nu)
        greedy = max_separated_set(F, nu)
        out["instances"] += 1
        out["sep_ge_span"] += int(sep < span)
        out["span_half_ge_sep_double"] += int(span_half < sep_double)
        out["greedy_above_exact"] += int(len(greedy) > sep)
        out["greedy_not_separated"] += int(not is_separated(F, greedy, nu))
        out["greedy_equal"] += int(len(greedy) == sep)
    out["violations"] = (out["sep_ge_span"] + out["span_half_ge_sep_double"]
                         + out["greedy_above_exact"] + out["greedy_not_separated"])
    out["equality_rate"] = out["greedy_equal"] / max(1, out["instances"])
    return out
