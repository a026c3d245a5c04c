"""Sequence spaces: Cantor metric, Sturmian and Thue-Morse codings, Toeplitz words.

Sequences are one-sided and produced by vectorised index functions
(:meth:`Sequence.block`), so windows of several million symbols are cheap.
Symbols are small non-negative integers stored as ``uint8``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import numpy as np

from . import _fixed

HOLE = 255  # the '*' symbol inside uint8 arrays


class Sequence:
    """A one-sided sequence given by a block generator.

    ``generator(start, n)`` must return ``uint8`` symbols for indices
    ``start .. start+n-1``.  ``period`` is optional eventual-period metadata.
    """

    def __init__(self, generator, alphabet=(0, 1), period=None, name="sequence", offset=0):
        self._gen = generator
        self.alphabet = tuple(alphabet)
        self.period = period
        self.name = name
        self.offset = int(offset)

    def block(self, start, n):
        return np.asarray(self._gen(self.offset + int(start), int(n)), dtype=np.uint8)

    def prefix(self, n):
        return self.block(0, n)

    def symbol_at(self, k):
        return int(self.block(k, 1)[0])

    def shifted(self, k):
        """The shifted sequence ``sigma^k x``."""
        return Sequence(self._gen, self.alphabet, self.period, self.name, self.offset + int(k))

    @property
    def bits(self):
        return max(1, math.ceil(math.log2(max(2, len(self.alphabet)))))

    def __repr__(self):
        return f"Sequence({self.name}, offset={self.offset})"


def from_word(word, name=None):
    """Finite word as a sequence padded periodically (``word`` repeated)."""
    arr = np.array([int(c) for c in word], dtype=np.uint8)
    p = len(arr)

    def gen(start, n):
        return arr[(np.arange(start, start + n)) % p]

    return Sequence(gen, tuple(sorted(set(arr.tolist())) or (0,)), period=p, name=name or f"({word})^inf")


def from_array(arr, name="array", fill=0):
    """Finite array, extended by ``fill`` beyond its end."""
    arr = np.asarray(arr, dtype=np.uint8)

    def gen(start, n):
        idx = np.arange(start, start + n)
        out = np.full(n, fill, dtype=np.uint8)
        ok = idx < len(arr)
        out[ok] = arr[idx[ok]]
        return out

    return Sequence(gen, (0, 1), name=name)


def cantor_distance(x, y, max_window=64):
    """``2**-j`` for the first index ``j`` where ``x`` and ``y`` differ.

    Differences beyond ``max_window`` symbols are ignored (result 0).
    """
    if max_window < 1:
        raise ValueError("max_window must be >= 1")
    a = x.block(0, max_window)
    b = y.block(0, max_window)
    diff = np.nonzero(a != b)[0]
    if len(diff) == 0:
        return 0.0
    return 2.0 ** -int(diff[0])


def cantor_window(delta):
    """Window length ``w`` with ``rho(x, y) >= delta`` iff ``x[:w] != y[:w]``.

    Returns 0 when ``delta > 1`` (no pair is ever that far apart).
    """
    delta = Fraction(delta)
    if delta <= 0:
        raise ValueError("delta must be positive")
    if delta > 1:
        return 0
    m = 0
    while Fraction(1, 2 ** (m + 1)) >= delta:
        m += 1
    return m + 1


# ---------------------------------------------------------------------------
# Sturmian and Thue-Morse

def sturmian_block(alpha, x0, start, n):
    a64 = np.uint64(_fixed.fixed64(alpha))
    x64 = np.uint64(_fixed.fixed64(x0))
    thr = np.uint64((_fixed.ONE64 - _fixed.fixed64(alpha)) % _fixed.ONE64)
    k = np.arange(start, start + n, dtype=np.uint64)
    pos = x64 + k * a64
    return (pos >= thr).astype(np.uint8)


def sturmian(alpha, x0, k):
    """Symbol ``k`` of the coding of ``x0 + k*alpha`` by ``[0,1-alpha), [1-alpha,1)``."""
    return int(sturmian_block(Fraction(alpha), Fraction(x0), int(k), 1)[0])


def sturmian_sequence(alpha=_fixed.GOLDEN, x0=0):
    alpha, x0 = Fraction(alpha), Fraction(x0)
    return Sequence(lambda s, n: sturmian_block(alpha, x0, s, n), (0, 1), name="sturmian")


def thue_morse_block(start, n):
    k = np.arange(start, start + n, dtype=np.uint64)
    par = np.zeros(n, dtype=np.uint64)
    while k.any():
        par ^= k & np.uint64(1)
        k >>= np.uint64(1)
    return par.astype(np.uint8)


def thue_morse(k):
    """Parity of the number of ones in the binary expansion of ``k``."""
    return bin(int(k)).count("1") & 1


def thue_morse_sequence():
    return Sequence(thue_morse_block, (0, 1), name="thue_morse")


# ---------------------------------------------------------------------------
# Toeplitz machinery

def _template(word):
    return np.array([HOLE if c == "*" else int(c) for c in word], dtype=np.uint8)


def toeplitz_fill(v, x):
    """The sequence obtained by writing ``x`` into the holes of ``v v v ...``.

    Position ``k`` carries ``v[k mod |v|]`` unless that is ``*``, in which case
    it carries the next unused symbol of ``x``.  ``x`` may contain holes
    (value :data:`HOLE`), which are passed through.
    """
    tmpl = _template(v)
    p = len(tmpl)
    stars = np.concatenate(([0], np.cumsum(tmpl == HOLE)))[:-1]
    q = int((tmpl == HOLE).sum())
    if q == 0 or q == p:
        raise ValueError("template needs at least one '*' and one symbol")

    def gen(start, n):
        k = np.arange(start, start + n, dtype=np.int64)
        r = k % p
        out = tmpl[r].copy()
        holes = np.nonzero(out == HOLE)[0]
        if len(holes):
            ranks = (k[holes] // p) * q + stars[r[holes]]
            lo = int(ranks.min())
            src = x.block(lo, int(ranks.max()) - lo + 1)
            out[holes] = src[ranks - lo]
        return out

    return Sequence(gen, x.alphabet, name=f"F[{v}]({x.name})")


def holes_sequence():
    return Sequence(lambda s, n: np.full(n, HOLE, dtype=np.uint8), (HOLE,), name="*^inf")


def _expand_prefix(word, n):
    """Prefix of the fixed point of filling ``word`` into itself."""
    tmpl = _template(word)
    p = len(tmpl)
    q = int((tmpl == HOLE).sum())
    stars = np.concatenate(([0], np.cumsum(tmpl == HOLE)))[:-1]
    k = np.arange(n, dtype=np.int64)
    r = k % p
    out = tmpl[r].copy()
    rank = (k // p) * q + stars[r]
    holes = np.nonzero(out == HOLE)[0]
    while len(holes):
        out[holes] = out[rank[holes]]
        holes = holes[out[holes] == HOLE]
    return out


@dataclass(frozen=True)
class PeriodicStructure:
    periods: tuple
    densities: tuple

    def __post_init__(self):
        for a, b in zip(self.periods, self.periods[1:]):
            if b % a:
                raise ValueError("periods must form a divisibility chain")


@dataclass(frozen=True)
class ToeplitzWord:
    """The (p,q)-Toeplitz sequence generated by the word ``0^m 1 v``."""

    v: str
    m: int

    def __post_init__(self):
        if set(self.v) - set("01*"):
            raise ValueError("template must be over {0,1,*}")
        if not self.satisfies_length_bound:
            raise ValueError(f"need 1 <= |v|_* <= |v| <= m, got v={self.v!r}, m={self.m}")

    @classmethod
    def from_word(cls, word, m=None):
        """Split a full word ``0^m 1 v``; a bare template is accepted if ``m`` is given."""
        lead = len(word) - len(word.lstrip("0"))
        if lead < len(word) and word[lead] == "1" and (m is None or lead == m):
            return cls(word[lead + 1:], lead)
        if m is None:
            raise ValueError(f"{word!r} is not of the form 0^m 1 v")
        return cls(word, int(m))

    @property
    def word(self):
        return "0" * self.m + "1" + self.v

    @property
    def p(self):
        return len(self.word)

    @property
    def q(self):
        return self.v.count("*")

    @property
    def d(self):
        return math.gcd(self.p, self.q)

    @property
    def satisfies_length_bound(self):
        return 1 <= self.q <= len(self.v) <= self.m

    def level(self, depth):
        """``T_depth``: ``depth`` applications of the fill to the all-hole word."""
        seq = holes_sequence()
        for _ in range(depth):
            seq = toeplitz_fill(self.word, seq)
        return seq

    def level_period(self, depth):
        return self.p ** depth // self.d ** (depth - 1)

    def sequence(self):
        word = self.word
        cache = {"arr": _expand_prefix(word, 1024)}

        def gen(start, n):
            need = start + n
            if need > len(cache["arr"]):
                cache["arr"] = _expand_prefix(word, max(need, 2 * len(cache["arr"])))
            return cache["arr"][start:need]

        return Sequence(gen, (0, 1), name=f"T({word})")

    @cached_property
    def _seq(self):
        return self.sequence()


def toeplitz_expand(w, length):
    """Prefix of ``T(0^m 1 v)`` as a string of ``length`` symbols."""
    return "".join(map(str, w._seq.prefix(length).tolist()))


def per_set(x, p, window=None):
    """Residues ``r`` mod ``p`` on which ``x`` is constant along ``r + p*l``.

    For a :class:`ToeplitzWord` whose ``p`` is one of its structure periods
    the answer is exact: the non-hole positions of the corresponding level.
    Otherwise the check is certified only up to ``window``.
    """
    if isinstance(x, ToeplitzWord):
        for depth in range(1, 64):
            per = x.level_period(depth)
            if per == p:
                lvl = x.level(depth).prefix(p)
                return set(np.nonzero(lvl != HOLE)[0].tolist())
            if per > p:
                break
        x = x._seq
    if window is None:
        window = 64 * p
    rows = window // p
    if rows < 2:
        raise ValueError("window must cover at least two periods")
    a = x.prefix(rows * p).reshape(rows, p)
    return set(np.nonzero((a == a[0]).all(axis=0))[0].tolist())


def density_table(w, depth):
    """Periods ``p^l / d^(l-1)`` and skeleton densities ``1 - q^l / p^l``."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    periods, dens = [], []
    for ell in range(1, depth + 1):
        periods.append(w.level_period(ell))
        dens.append(1 - Fraction(w.q ** ell, w.p ** ell))
    return PeriodicStructure(tuple(periods), tuple(dens))


def is_periodic(w):
    """Whether the length-``p`` prefix of ``T(v)`` is ``d``-periodic.

    Also accepts a bare template string, read as the word itself.
    """
    if isinstance(w, str):
        word = w
        p, d = len(word), math.gcd(len(word), word.count("*"))
    else:
        word, p, d = w.word, w.p, w.d
    pre = _expand_prefix(word, p)
    return bool(np.all(pre[d:] == pre[:-d])) if p > d else True


def gcd_reduce(p, q, x, window=None):
    """``gcd(p, q)`` after certifying ``Per(p, x) <= Per(q, x)`` on a window.

    The inclusion is read on residues: a residue ``k mod p`` belongs to
    ``Per(p, x)``; its image ``k mod q`` must belong to ``Per(q, x)`` for
    every lift ``k`` below ``lcm(p, q)``.
    """
    if p == q:
        return p
    if window is None:
        window = 64 * math.lcm(p, q)
    Pp = per_set(x, p, window)
    Pq = per_set(x, q, window)
    lcm = math.lcm(p, q)
    for k in range(lcm):
        if k % p in Pp and k % q not in Pq:
            raise ValueError(f"Per({p}) is not contained in Per({q}) on the window (position {k})")
    return math.gcd(p, q)


def essential_period(x, p, window=None):
    """Smallest divisor ``e`` of ``p`` whose Per-set lifts to ``Per(p, x)``."""
    if window is None:
        window = 64 * p
    target = per_set(x, p, window)
    for e in sorted(e for e in range(1, p + 1) if p % e == 0):
        pe = per_set(x, e, window)
        if {k for k in range(p) if k % e in pe} == target:
            return e
    return p


def predicted_ac(w):
    """Amorphic complexity ``log(p/d) / log(p/q)`` of a non-periodic word."""
    if is_periodic(w):
        raise ValueError("periodic Toeplitz words have amorphic complexity 0")
    return math.log(w.p / w.d) / math.log(w.p / w.q)


# ---------------------------------------------------------------------------
# windows of symbols packed into integer keys

def window_keys(symbols, window, bits=1):
    """Integer key of ``symbols[t : t+window]`` for each admissible ``t``.

    Two keys agree iff the windows agree.  Needs ``window * bits <= 64``.
    """
    symbols = np.asarray(symbols)
    if window * bits > 64:
        raise ValueError(f"window {window} x {bits} bits does not fit a 64-bit key")
    n = len(symbols) - window + 1
    if n <= 0:
        return np.zeros(0, dtype=np.uint64)
    s = symbols.astype(np.uint64)
    keys = np.zeros(n, dtype=np.uint64)
    for u in range(window):
        keys |= s[u:u + n] << np.uint64(bits * u)
    return keys


def sequence_for(sys):
    """Generating sequence of a symbolic system spec."""
    if sys.kind == "sturmian":
        return sturmian_sequence(sys.get("alpha"), sys.get("x0"))
    if sys.kind == "thue_morse":
        return thue_morse_sequence()
    if sys.kind == "toeplitz":
        return _plain_toeplitz(sys.get("word"))
    raise ValueError(f"{sys.kind} is not symbolic")


_PLAIN = {}


def _plain_toeplitz(word):
    if word not in _PLAIN:
        cache = {"arr": _expand_prefix(word, 1024)}

        def gen(start, n):
            need = start + n
            if need > len(cache["arr"]):
                cache["arr"] = _expand_prefix(word, max(need, 2 * len(cache["arr"])))
            return cache["arr"][start:need]

        _PLAIN[word] = Sequence(gen, (0, 1), name=f"T({word})")
    return _PLAIN[word]


def word_complexity(x, n, window):
    """Number of distinct length-``n`` factors of ``x[:window]``."""
    keys = window_keys(x.prefix(window), n, x.bits)
    return len(np.unique(keys))
