"""Hot loops, each with a numba version and a pure-numpy version.

The public names at the bottom of the module are bound to one of the two
implementations according to :data:`amorph._accel.USE_NUMBA`.  Both versions
compute identical integers; frequencies are formed as ``count / n`` in the
same order so the floats agree bit for bit.
"""
import numpy as np

from ._accel import USE_NUMBA, njit


# ---------------------------------------------------------------------------
# pair separation counts over one time chunk

def _pair_chunk_loop(circ, intv, keys, thr, delta, counts, best, cp_local, cp_n):
    M = circ.shape[0]
    K = circ.shape[1]
    nc = circ.shape[2]
    ni = intv.shape[2]
    ns = keys.shape[2]
    ncp = cp_local.shape[0]
    for i in range(M):
        for j in range(i + 1, M):
            c = counts[i, j]
            b = best[i, j]
            ptr = 0
            for k in range(K):
                sep = False
                for a in range(nc):
                    d = circ[i, k, a] - circ[j, k, a]
                    e = circ[j, k, a] - circ[i, k, a]
                    if e < d:
                        d = e
                    if d >= thr:
                        sep = True
                        break
                if not sep:
                    for a in range(ni):
                        if abs(intv[i, k, a] - intv[j, k, a]) >= delta:
                            sep = True
                            break
                if not sep:
                    for a in range(ns):
                        if keys[i, k, a] != keys[j, k, a]:
                            sep = True
                            break
                if sep:
                    c += 1
                if ptr < ncp and cp_local[ptr] == k:
                    f = c / cp_n[ptr]
                    if f > b:
                        b = f
                    ptr += 1
            counts[i, j] = c
            best[i, j] = b


def _pair_chunk_numpy(circ, intv, keys, thr, delta, counts, best, cp_local, cp_n):
    M = circ.shape[0]
    thr = np.uint64(thr)
    for i in range(M - 1):
        sep = np.zeros((M - i - 1, circ.shape[1]), dtype=bool)
        if circ.shape[2]:
            d = circ[i + 1:] - circ[i][None]
            d = np.minimum(d, np.uint64(0) - d)
            sep |= (d >= thr).any(axis=2)
        if intv.shape[2]:
            sep |= (np.abs(intv[i + 1:] - intv[i][None]) >= delta).any(axis=2)
        if keys.shape[2]:
            sep |= (keys[i + 1:] != keys[i][None]).any(axis=2)
        run = counts[i, i + 1:][:, None] + np.cumsum(sep, axis=1)
        if len(cp_local):
            f = run[:, cp_local] / cp_n[None, :]
            best[i, i + 1:] = np.maximum(best[i, i + 1:], f.max(axis=1))
        counts[i, i + 1:] = run[:, -1]


# ---------------------------------------------------------------------------
# first separation time (Bowen-Dinaburg metrics)

def _first_hit_loop(circ, intv, keys, thr, delta, hit, t0):
    M = circ.shape[0]
    K = circ.shape[1]
    nc = circ.shape[2]
    ni = intv.shape[2]
    ns = keys.shape[2]
    for i in range(M):
        for j in range(i + 1, M):
            if hit[i, j] >= 0:
                continue
            for k in range(K):
                sep = False
                for a in range(nc):
                    d = circ[i, k, a] - circ[j, k, a]
                    e = circ[j, k, a] - circ[i, k, a]
                    if e < d:
                        d = e
                    if d >= thr:
                        sep = True
                for a in range(ni):
                    if abs(intv[i, k, a] - intv[j, k, a]) >= delta:
                        sep = True
                for a in range(ns):
                    if keys[i, k, a] != keys[j, k, a]:
                        sep = True
                if sep:
                    hit[i, j] = t0 + k
                    break


def _first_hit_numpy(circ, intv, keys, thr, delta, hit, t0):
    M = circ.shape[0]
    thr = np.uint64(thr)
    for i in range(M - 1):
        open_ = hit[i, i + 1:] < 0
        if not open_.any():
            continue
        sep = np.zeros((M - i - 1, circ.shape[1]), dtype=bool)
        if circ.shape[2]:
            d = circ[i + 1:] - circ[i][None]
            d = np.minimum(d, np.uint64(0) - d)
            sep |= (d >= thr).any(axis=2)
        if intv.shape[2]:
            sep |= (np.abs(intv[i + 1:] - intv[i][None]) >= delta).any(axis=2)
        if keys.shape[2]:
            sep |= (keys[i + 1:] != keys[i][None]).any(axis=2)
        anyh = sep.any(axis=1) & open_
        first = np.argmax(sep, axis=1)
        row = hit[i, i + 1:]
        row[anyh] = t0 + first[anyh]
        hit[i, i + 1:] = row


# ---------------------------------------------------------------------------
# shift-orbit fast path

def _shift_groups_loop(keys, offsets, power, pi, pj, gstart, gshift, cps, best, counts_out):
    L = keys.shape[0]
    ncp = cps.shape[0]
    T = cps[ncp - 1]
    span = 0
    for a in range(offsets.shape[0]):
        if offsets[a] > span:
            span = offsets[a]
    span = span + power * T + 1
    Q = np.zeros(span + power, dtype=np.int64)
    for g in range(gshift.shape[0]):
        s = gshift[g]
        for t in range(power):
            Q[t] = 0
        for t in range(span - 1):
            dt = 1 if keys[t] != keys[t + s] else 0
            Q[t + power] = Q[t] + dt
        for e in range(gstart[g], gstart[g + 1]):
            i = pi[e]
            j = pj[e]
            o = offsets[i]
            base = Q[o]
            b = 0.0
            for c in range(ncp):
                n = cps[c]
                f = (Q[o + power * n] - base) / n
                if f > b:
                    b = f
            best[i, j] = b
            counts_out[i, j] = Q[o + power * T] - base


def _shift_groups_numpy(keys, offsets, power, pi, pj, gstart, gshift, cps, best, counts_out):
    T = int(cps[-1])
    span = int(offsets.max()) + power * T + 1
    for g in range(len(gshift)):
        s = int(gshift[g])
        D = (keys[:span - 1] != keys[s:s + span - 1]).astype(np.int64)
        Q = np.zeros(span + power, dtype=np.int64)
        for r in range(power):
            Q[r + power::power][:len(D[r::power])] = np.cumsum(D[r::power])
        sl = slice(gstart[g], gstart[g + 1])
        i = pi[sl]
        j = pj[sl]
        o = offsets[i]
        base = Q[o]
        f = (Q[o[:, None] + power * cps[None, :]] - base[:, None]) / cps[None, :]
        best[i, j] = np.maximum(f.max(axis=1), 0.0)
        counts_out[i, j] = Q[o + power * T] - base


# ---------------------------------------------------------------------------
# greedy separated set

def _greedy_sep_loop(F, nu):
    M = F.shape[0]
    kept = np.empty(M, dtype=np.int64)
    nk = 0
    for i in range(M):
        ok = True
        for a in range(nk):
            if F[i, kept[a]] < nu:
                ok = False
                break
        if ok:
            kept[nk] = i
            nk += 1
    return kept[:nk].copy()


def _greedy_sep_numpy(F, nu):
    M = F.shape[0]
    kept = []
    for i in range(M):
        if not kept or bool((F[i, kept] >= nu).all()):
            kept.append(i)
    return np.array(kept, dtype=np.int64)


if USE_NUMBA:
    pair_chunk = njit(_pair_chunk_loop)
    first_hit_chunk = njit(_first_hit_loop)
    shift_groups = njit(_shift_groups_loop)
    greedy_sep = njit(_greedy_sep_loop)
else:
    pair_chunk = _pair_chunk_numpy
    first_hit_chunk = _first_hit_numpy
    shift_groups = _shift_groups_numpy
    greedy_sep = _greedy_sep_numpy

NUMPY_KERNELS = {
    "pair_chunk": _pair_chunk_numpy,
    "first_hit_chunk": _first_hit_numpy,
    "shift_groups": _shift_groups_numpy,
    "greedy_sep": _greedy_sep_numpy,
}
