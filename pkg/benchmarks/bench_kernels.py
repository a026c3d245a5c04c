"""Timing of the compiled kernels against their numpy versions.

    python benchmarks/bench_kernels.py [--repeat 3] [--size 64] [--horizon 4096]

Part one calls each kernel directly on the same random inputs, checks the
two backends agree, and reports the best-of-``repeat`` time.  Part two runs a
whole ``pair_frequencies`` call in fresh interpreters with ``AMORPH_NUMBA=1``
and ``AMORPH_NUMBA=0``.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np
from numba import njit

from amorph.kernels import (NUMPY_KERNELS, _first_hit_loop, _greedy_sep_loop, _pair_chunk_loop,
                            _shift_groups_loop)

LOOPS = {
    "pair_chunk": njit(_pair_chunk_loop),
    "first_hit_chunk": njit(_first_hit_loop),
    "shift_groups": njit(_shift_groups_loop),
    "greedy_sep": njit(_greedy_sep_loop),
}


def _pair_inputs(M, K, rng):
    C = rng.integers(0, 2 ** 64, size=(M, K, 2), dtype=np.uint64, endpoint=False)
    I = rng.random((M, K, 1))
    S = np.zeros((M, K, 0), dtype=np.uint64)
    cps = np.array([K // 4, K // 2, K - 1], dtype=np.int64)

    def call(fn):
        counts = np.zeros((M, M), dtype=np.int64)
        best = np.zeros((M, M))
        fn(C, I, S, np.uint64(2 ** 62), 0.25, counts, best, cps, cps + 1)
        return counts, best
    return call


def _first_hit_inputs(M, K, rng):
    C = rng.integers(0, 2 ** 64, size=(M, K, 1), dtype=np.uint64, endpoint=False)
    I = rng.random((M, K, 0))
    S = np.zeros((M, K, 0), dtype=np.uint64)

    def call(fn):
        hit = np.full((M, M), -1, dtype=np.int64)
        fn(C, I, S, np.uint64(2 ** 63 - 2 ** 60), 0.5, hit, 0)
        return (hit,)
    return call


def _shift_inputs(M, K, rng):
    keys = rng.integers(0, 4, size=K + 8 * M + 2).astype(np.uint64)
    offs = np.sort(rng.choice(4 * M, size=M, replace=False)).astype(np.int64)
    i, j = np.triu_indices(M, 1)
    shift = offs[j] - offs[i]
    order = np.lexsort((j, i, shift))
    i, j, shift = i[order].astype(np.int64), j[order].astype(np.int64), shift[order]
    gshift, gstart = np.unique(shift, return_index=True)
    gstart = np.append(gstart, len(shift)).astype(np.int64)
    cps = np.array([K // 4, K // 2, K], dtype=np.int64)

    def call(fn):
        best = np.zeros((M, M))
        counts = np.zeros((M, M), dtype=np.int64)
        fn(keys, offs, np.int64(1), i, j, gstart, gshift.astype(np.int64), cps, best, counts)
        return best, counts
    return call


def _greedy_inputs(M, K, rng):
    A = rng.random((4 * M, 4 * M))
    F = np.triu(A, 1)
    F = F + F.T

    def call(fn):
        return (fn(F, 0.3),)
    return call


INPUTS = {"pair_chunk": _pair_inputs, "first_hit_chunk": _first_hit_inputs,
          "shift_groups": _shift_inputs, "greedy_sep": _greedy_inputs}

_END_TO_END = """
import time
from fractions import Fraction
from amorph import _accel
from amorph.separation import pair_frequencies, sample_points
smp = sample_points({system!r}, {size}, seed=1)
pair_frequencies(sample_points({system!r}, 8, seed=1), Fraction(1, 4), 128)
t0 = time.perf_counter()
pair_frequencies(smp, Fraction(1, 4), {horizon})
print(_accel.backend(), time.perf_counter() - t0)
"""


def end_to_end(system, size, horizon):
    out = {}
    for flag in ("1", "0"):
        env = dict(os.environ, AMORPH_NUMBA=flag)
        code = _END_TO_END.format(system=system, size=size, horizon=horizon)
        res = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        name, secs = res.stdout.split()
        out[name] = float(secs)
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--size", type=int, default=64, help="points per kernel call")
    ap.add_argument("--horizon", type=int, default=4096, help="time steps per chunk / orbit")
    args = ap.parse_args(argv)

    rng = np.random.default_rng(0)
    print(f"{'kernel':<18}{'numba s':>12}{'numpy s':>12}{'ratio':>10}")
    for name, make in INPUTS.items():
        call = make(args.size, args.horizon, rng)
        a, b = call(LOOPS[name]), call(NUMPY_KERNELS[name])
        if not all(np.array_equal(x, y) for x, y in zip(a, b)):
            raise SystemExit(f"{name}: backends disagree")
        t_nb = min(timeit.repeat(lambda: call(LOOPS[name]), number=1, repeat=args.repeat))
        t_np = min(timeit.repeat(lambda: call(NUMPY_KERNELS[name]), number=1, repeat=args.repeat))
        print(f"{name:<18}{t_nb:>12.4f}{t_np:>12.4f}{t_np / t_nb:>10.2f}")

    print()
    print(f"{'pair_frequencies':<30}{'numba s':>12}{'numpy s':>12}")
    for system in ("torus_shear", "sturmian", "pinched:alpha=3"):
        t = end_to_end(system, 2 * args.size, args.horizon)
        print(f"{system:<30}{t['numba']:>12.4f}{t['numpy']:>12.4f}")


if __name__ == "__main__":
    main()
