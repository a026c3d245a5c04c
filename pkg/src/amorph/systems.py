"""System catalog, spec-string parser, reference step maps and metrics.

A system is described by a short string such as ``rotation:alpha=golden`` or
``product(rotation:alpha=1/3,sturmian)``.  :func:`parse_spec` turns it into a
frozen :class:`SystemSpec`.  The functions here are scalar reference
implementations; the vectorised orbit engines in :mod:`amorph.orbits` are
checked against them.
"""
from __future__ import annotations

import math
import re
from bisect import bisect_right
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import numpy as np

from . import _fixed


class SpecError(ValueError):
    """Invalid system description."""


class SpecSyntaxError(SpecError):
    def __init__(self, message, text, position):
        self.text = text
        self.position = position
        super().__init__(f"{message} at position {position} in {text!r}")


class AccuracyError(ValueError):
    """Tables are too coarse for the requested accuracy."""


# ---------------------------------------------------------------------------
# catalog

def _open_unit(v):
    return 0 < v < 1


def _positive(v):
    return v > 0


def _nonneg(v):
    return v >= 0


def _pos_int(v):
    return v.denominator == 1 and v >= 1


def _unit(v):
    return 0 <= v < 1


# kind -> {param: (default, validator, description)}
_COMMON = {"power": (Fraction(1), _pos_int, "positive integer: iterate the map this many times per step")}

CATALOG = {
    "rotation": {"alpha": (_fixed.GOLDEN, _open_unit, "rotation angle in (0,1)")},
    "doubling": {},
    "torus_shear": {},
    "morse_smale": {},
    "denjoy": {
        "alpha": (_fixed.GOLDEN, _open_unit, "rotation number in (0,1)"),
        "terms": (Fraction(1 << 15), _pos_int, "gaps kept on each side of the orbit"),
    },
    "annulus_transient": {},
    "pinched": {
        "alpha": (Fraction(3), _positive, "fibre expansion"),
        "eps": (Fraction(0), _nonneg, "forcing offset"),
        "omega": (_fixed.GOLDEN, _open_unit, "base rotation"),
    },
    "sturmian": {
        "alpha": (_fixed.GOLDEN, _open_unit, "rotation angle in (0,1)"),
        "x0": (Fraction(0), _unit, "start point of the coded orbit"),
    },
    "toeplitz": {"word": ("0001*1*", None, "template over {0,1,*}")},
    "thue_morse": {},
}

SYMBOLIC_KINDS = ("sturmian", "toeplitz", "thue_morse")

# phase-space layout: number of circle and interval coordinates
_LAYOUT = {
    "rotation": ("c",),
    "doubling": ("c",),
    "torus_shear": ("c", "c"),
    "morse_smale": ("i",),
    "denjoy": ("c",),
    "annulus_transient": ("i", "c"),
    "pinched": ("c", "i"),
}


@dataclass(frozen=True)
class SystemSpec:
    kind: str
    params: tuple = ()
    children: tuple = ()

    def __post_init__(self):
        if self.kind == "product":
            if len(self.children) != 2:
                raise SpecError("product needs exactly two factors")
        elif self.kind not in CATALOG:
            raise SpecError(f"unknown kind {self.kind!r}")

    def get(self, name):
        for k, v in self.params:
            if k == name:
                return v
        if name in _COMMON:
            return _COMMON[name][0]
        return CATALOG[self.kind][name][0]

    @property
    def power(self):
        return int(self.get("power"))

    @property
    def symbolic(self):
        return self.kind in SYMBOLIC_KINDS

    @property
    def layout(self):
        """Coordinate types: 'c' circle, 'i' interval, 's' sequence."""
        if self.kind == "product":
            return self.children[0].layout + self.children[1].layout
        if self.symbolic:
            return ("s",)
        return _LAYOUT[self.kind]

    @property
    def dim(self):
        return len(self.layout)

    @property
    def text(self):
        """Canonical spec string (parameters sorted, fractions reduced)."""
        if self.kind == "product":
            return f"product({self.children[0].text},{self.children[1].text})"
        if not self.params:
            return self.kind
        parts = ",".join(f"{k}={_format_value(v)}" for k, v in self.params)
        return f"{self.kind}:{parts}"

    def with_power(self, m):
        """The same system iterated ``m`` times per step."""
        if self.kind == "product":
            return SystemSpec("product", (), tuple(c.with_power(m) for c in self.children))
        params = dict(self.params)
        params["power"] = Fraction(self.power * m)
        if params["power"] == 1:
            del params["power"]
        return SystemSpec(self.kind, tuple(sorted(params.items())), ())

    def __str__(self):
        return self.text


def _format_value(v):
    if isinstance(v, str):
        return v
    if v == _fixed.GOLDEN:
        return "golden"
    if v.denominator == 1:
        return str(v.numerator)
    return f"{v.numerator}/{v.denominator}"


# ---------------------------------------------------------------------------
# parser

_IDENT = re.compile(r"[a-z_][a-z0-9_]*")
_DECIMAL = re.compile(r"[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?")
_FRACTION = re.compile(r"[+-]?\d+/\d+")
_WORD = re.compile(r"[0-9*]+")


class _Parser:
    def __init__(self, text):
        self.text = text
        self.pos = 0

    def fail(self, message):
        raise SpecSyntaxError(message, self.text, self.pos)

    def peek(self, s):
        return self.text.startswith(s, self.pos)

    def expect(self, s):
        if not self.peek(s):
            self.fail(f"expected {s!r}")
        self.pos += len(s)

    def ident(self):
        m = _IDENT.match(self.text, self.pos)
        if not m:
            self.fail("expected identifier")
        self.pos = m.end()
        return m.group(0)

    def spec(self):
        start = self.pos
        kind = self.ident()
        if kind == "product":
            self.expect("(")
            a = self.spec()
            self.expect(",")
            b = self.spec()
            self.expect(")")
            return SystemSpec("product", (), (a, b))
        if kind not in CATALOG:
            self.pos = start
            self.fail(f"unknown kind {kind!r}")
        params = {}
        if self.peek(":"):
            self.pos += 1
            while True:
                key_pos = self.pos
                key = self.ident()
                self.expect("=")
                if key in params:
                    self.pos = key_pos
                    self.fail(f"duplicate key {key!r}")
                params[key] = self.value(kind, key, key_pos)
                # a comma continues the parameter list only if "ident=" follows
                if self.peek(","):
                    m = _IDENT.match(self.text, self.pos + 1)
                    if m and self.text.startswith("=", m.end()):
                        self.pos += 1
                        continue
                break
        return _validated(kind, params, self)

    def value(self, kind, key, key_pos):
        if key == "word":
            m = _WORD.match(self.text, self.pos)
            if not m:
                self.fail("expected a template word over {0..9,*}")
            self.pos = m.end()
            return m.group(0)
        if self.text.startswith("golden", self.pos):
            self.pos += len("golden")
            return _fixed.GOLDEN
        m = _FRACTION.match(self.text, self.pos)
        if m:
            num, den = m.group(0).split("/")
            if int(den) == 0:
                self.fail("zero denominator")
            self.pos = m.end()
            return Fraction(int(num), int(den))
        m = _DECIMAL.match(self.text, self.pos)
        if m:
            self.pos = m.end()
            return Fraction(m.group(0))
        self.fail(f"bad value for {key!r}")

    def parse(self):
        s = self.spec()
        if self.pos != len(self.text):
            self.fail("trailing characters")
        return s


def _validated(kind, params, parser=None):
    schema = dict(CATALOG[kind])
    schema.update(_COMMON)
    out = {}
    for key, val in params.items():
        if key not in schema:
            raise SpecError(f"unknown parameter {key!r} for {kind}")
        default, ok, _ = schema[key]
        if key == "word":
            _check_word(val)
        elif not ok(val):
            raise SpecError(f"parameter {key}={_format_value(val)} out of domain for {kind}")
        if val != default:
            out[key] = val
    return SystemSpec(kind, tuple(sorted(out.items())), ())


def _check_word(word):
    if "*" not in word or set(word) == {"*"}:
        raise SpecError("template needs at least one '*' and one symbol")
    if word[0] == "*":
        raise SpecError("template must not start with '*'")


def parse_spec(text):
    """Parse ``kind[:key=value{,key=value}]`` or ``product(spec,spec)``; whitespace is ignored."""
    return _Parser("".join(text.split())).parse()


def make_spec(kind, **params):
    """Build a validated spec from keyword parameters."""
    conv = {k: (v if isinstance(v, str) else Fraction(v)) for k, v in params.items()}
    return _validated(kind, conv)


def param_help():
    """Lines documenting every kind and its parameters."""
    lines = []
    for kind, schema in CATALOG.items():
        items = [f"{k}={_format_value(d)} ({desc})" for k, (d, _, desc) in schema.items()]
        lines.append(f"{kind}: " + ("; ".join(items) if items else "no parameters"))
    lines.append("every kind: power=1 (" + _COMMON["power"][2] + ")")
    lines.append("product(spec,spec): direct product with the maximum metric")
    return lines


# ---------------------------------------------------------------------------
# scalar maps

def morse_smale_map(x):
    return x * x


def pinched_fibre(theta, x, alpha, eps):
    return math.tanh(alpha * x) * (math.sin(math.pi * theta) + eps)


def annulus_levels(x0=0.5, depth=64):
    """Anchors ``x_k = g^k(x0)`` for the squaring map, ``k <= depth``."""
    xs = [x0]
    for _ in range(depth):
        xs.append(xs[-1] ** 2)
    return xs


def annulus_alpha(x, x0=0.5):
    """Forcing term of the transient annulus map over the base ``g(x) = x**2``.

    Zero on ``{0} U (x0, 1]``, a tent of height one on ``(x1, x0]`` peaking at
    ``(x0 + x1) / 2``, and on ``(x_k, x_{k-1}]`` the value at the level-one
    preimage divided by ``k``.
    """
    x = float(x)
    x1 = x0 * x0
    if x <= 0.0 or x > x0:
        return 0.0
    if x > x1:
        level = 1
        base = x
    else:
        # x in (x_k, x_{k-1}] with x_k = x0**(2**k)
        level = 1
        base = x
        while base <= x1:
            base = math.sqrt(base)
            level += 1
        if base > x0:  # rounding at the upper end of a level
            base = x0
    mid = 0.5 * (x0 + x1)
    return (1.0 - 2.0 * abs(mid - base) / (x0 - x1)) / level


def _circ(v):
    return v % 1.0


def step(sys, p, times=1):
    """Image of ``p`` under ``sys`` (already including its ``power``).

    Points are tuples of floats.  For symbolic kinds the point is the integer
    shift offset into the generating sequence.
    """
    n = times * sys.power
    if sys.kind == "product":
        a, b = sys.children
        da = a.dim
        pa, pb = tuple(p[:da]), tuple(p[da:])
        if a.symbolic:
            pa = p[0]
        if b.symbolic:
            pb = p[da]
        ra = step(a, pa, times)
        rb = step(b, pb, times)
        ra = (ra,) if a.symbolic else tuple(ra)
        rb = (rb,) if b.symbolic else tuple(rb)
        return ra + rb
    if sys.symbolic:
        return int(p) + n
    p = tuple(float(c) for c in p)
    k = sys.kind
    for _ in range(n):
        if k == "rotation":
            p = (_circ(p[0] + float(sys.get("alpha"))),)
        elif k == "doubling":
            p = (_circ(2.0 * p[0]),)
        elif k == "torus_shear":
            p = (p[0], _circ(p[0] + p[1]))
        elif k == "morse_smale":
            p = (morse_smale_map(p[0]),)
        elif k == "denjoy":
            p = (denjoy_step(denjoy_model(sys), p[0]),)
        elif k == "annulus_transient":
            p = (morse_smale_map(p[0]), _circ(p[1] + annulus_alpha(p[0])))
        elif k == "pinched":
            a, e, w = float(sys.get("alpha")), float(sys.get("eps")), float(sys.get("omega"))
            p = (_circ(p[0] + w), min(1.0, max(0.0, pinched_fibre(p[0], p[1], a, e))))
    return p


def circle_distance(a, b):
    d = abs(float(a) - float(b)) % 1.0
    return min(d, 1.0 - d)


def metric(sys, p, q, max_window=64):
    """Maximum metric over the coordinates of ``sys``."""
    if sys.kind == "product":
        a, b = sys.children
        da = a.dim
        sa = (lambda t: t[0]) if a.symbolic else (lambda t: t[:da])
        sb = (lambda t: t[da]) if b.symbolic else (lambda t: t[da:])
        return max(metric(a, sa(p), sa(q), max_window), metric(b, sb(p), sb(q), max_window))
    if sys.symbolic:
        from .symbolic import cantor_distance, sequence_for
        seq = sequence_for(sys)
        return cantor_distance(seq.shifted(int(p)), seq.shifted(int(q)), max_window)
    out = 0.0
    for kind, a, b in zip(sys.layout, p, q):
        d = circle_distance(a, b) if kind == "c" else abs(float(a) - float(b))
        out = max(out, d)
    return out


# ---------------------------------------------------------------------------
# Denjoy homeomorphism

def _gap_weight_sum():
    # sum over n in Z of 1/(|n|+2)^2
    return math.pi ** 2 / 3.0 - 2.25


@dataclass(frozen=True)
class DenjoyModel:
    """Denjoy circle homeomorphism obtained by blowing up a rotation orbit.

    The orbit point ``k * alpha`` (``|k| <= terms``) is replaced by a gap of
    length ``c / (|k| + 2)**2`` where ``c`` makes all weights over the integers
    sum to ``total``.  The unbounded tail is folded into the linear part of
    the Cantor function, so ``cantor(H(xi)) = xi`` exactly for the truncated
    model and the discarded tail mass is the model error.
    """

    alpha: Fraction = _fixed.GOLDEN
    terms: int = 1 << 15
    total: float = 0.5

    @cached_property
    def alpha128(self):
        return _fixed.fixed128(self.alpha)

    @cached_property
    def alpha64(self):
        return self.alpha128 >> 64

    @cached_property
    def scale(self):
        return self.total / _gap_weight_sum()

    @cached_property
    def tables(self):
        K = self.terms
        ks = np.arange(-K, K + 1, dtype=np.int64)
        a128 = self.alpha128
        pos = np.array([((int(k) * a128) % _fixed.ONE128) >> 64 for k in ks], dtype=np.uint64)
        weights = self.scale / (np.abs(ks).astype(np.float64) + 2.0) ** 2
        order = np.argsort(pos, kind="stable")
        spos = pos[order]
        sw = weights[order]
        cum = np.concatenate(([0.0], np.cumsum(sw)))
        kept = float(cum[-1])
        slope = 1.0 - kept
        xi = _fixed.to_float(spos)
        left = slope * xi + cum[:-1]
        rank = np.empty(len(ks), dtype=np.int64)
        rank[order] = np.arange(len(ks))
        return {
            "k": ks, "pos": pos, "weight": weights, "order": order,
            "sorted_pos": spos, "sorted_weight": sw, "cum": cum,
            "slope": slope, "left_sorted": left, "rank": rank,
        }

    @property
    def tail_mass(self):
        return self.total - float(self.tables["cum"][-1])

    def _index(self, k):
        return int(k) + self.terms

    def gap(self, k):
        """``(a_k, b_k)`` end points of the gap blown up from ``k * alpha``."""
        t = self.tables
        r = t["rank"][self._index(k)]
        a = float(t["left_sorted"][r])
        return a, a + float(t["sorted_weight"][r])

    def weight(self, k):
        return float(self.tables["weight"][self._index(k)])

    def embed(self, xi64):
        """Cantor-set point over the rotation coordinate ``xi`` (uint64 array).

        Uses the left limit, so orbit positions map to left gap end points.
        """
        t = self.tables
        xi64 = np.asarray(xi64, dtype=np.uint64)
        idx = np.searchsorted(t["sorted_pos"], xi64, side="left")
        return t["slope"] * _fixed.to_float(xi64) + t["cum"][idx]

    def cantor(self, x):
        """The semiconjugacy ``p``: circle point -> rotation coordinate."""
        return self.locate(np.atleast_1d(np.asarray(x, dtype=np.float64)))[0] * 1.0

    def locate(self, x):
        """Decompose circle points into ``(xi_float, xi64, gap_k, s)``.

        ``gap_k`` is -1 for points of the Cantor set; otherwise ``s`` in
        ``[0, 1)`` is the relative position inside gap ``gap_k``.
        """
        t = self.tables
        x = np.mod(np.asarray(x, dtype=np.float64), 1.0)
        left = t["left_sorted"]
        right = left + t["sorted_weight"]
        i = np.searchsorted(left, x, side="right") - 1
        inside = (i >= 0) & (x < right[np.maximum(i, 0)])
        ii = np.maximum(i, 0)
        gap = np.where(inside, t["k"][t["order"][ii]], -1)
        s = np.where(inside, (x - left[ii]) / t["sorted_weight"][ii], 0.0)
        # outside gaps: solve slope * xi + cum = x
        j = np.searchsorted(right, x, side="right")
        xi_f = np.where(inside, _fixed.to_float(t["sorted_pos"][ii]), (x - t["cum"][j]) / t["slope"])
        xi_f = np.clip(xi_f, 0.0, np.nextafter(1.0, 0.0))
        xi64 = np.where(inside, t["sorted_pos"][ii], _fixed.to_fixed64(xi_f))
        return xi_f, xi64.astype(np.uint64), gap.astype(np.int64), s

    def position(self, xi64, gap, s):
        """Circle coordinate of the state ``(xi, gap, s)``."""
        t = self.tables
        x = self.embed(xi64)
        g = np.asarray(gap)
        inside = (g != -1) & (np.abs(g) <= self.terms)
        gi = np.where(inside, g + self.terms, 0)
        return np.mod(x + np.where(inside, s * t["weight"][gi], 0.0), 1.0)

    def advance(self, xi64, gap, s):
        """One application of the homeomorphism on states."""
        xi64 = np.asarray(xi64, dtype=np.uint64) + np.uint64(self.alpha64)
        gap = np.asarray(gap, dtype=np.int64)
        nxt = np.where(gap == -1, -1, gap + 1)
        # gaps beyond the table collapse to points (their length is in the tail)
        nxt = np.where(nxt > self.terms, -1, nxt)
        s = np.where(nxt == -1, 0.0, s)
        return xi64, nxt, s

    def check(self, tolerance):
        if self.tail_mass > tolerance:
            raise AccuracyError(
                f"tail mass {self.tail_mass:.3g} exceeds tolerance {tolerance:.3g}; "
                f"increase terms (now {self.terms})")


_MODELS = {}


def denjoy_model(sys):
    key = (sys.get("alpha"), int(sys.get("terms")))
    if key not in _MODELS:
        _MODELS[key] = DenjoyModel(alpha=key[0], terms=key[1])
    return _MODELS[key]


def denjoy_step(model, x, tolerance=1e-4):
    """Image of the circle point ``x`` under the Denjoy homeomorphism.

    Gap points move affinely onto the next gap; Cantor-set points follow the
    rotation through the Cantor function.  Raises :class:`AccuracyError` when
    the truncated tail exceeds ``tolerance``.
    """
    model.check(tolerance)
    _, xi64, gap, s = model.locate(np.array([x], dtype=np.float64))
    xi64, gap, s = model.advance(xi64, gap, s)
    return float(model.position(xi64, gap, s)[0])
