"""Vectorised orbit engines.

An engine advances a whole sample of points in lockstep.  Its state is a dict
of arrays (a tuple of child states for products).  :meth:`Engine.observe`
returns the coordinates that enter the metric: circle coordinates as uint64
fixed point, interval coordinates as float64 and, for subshifts, the current
shift offset into the generating sequence.
"""
from __future__ import annotations

import math

import numpy as np

from . import _fixed
from .symbolic import sequence_for, window_keys
from .systems import annulus_alpha, denjoy_model, parse_spec, SystemSpec

_U = np.uint64


def splitmix64(x):
    """SplitMix64 finaliser on uint64 arrays (wrapping arithmetic)."""
    z = np.asarray(x, dtype=np.uint64) + _U(0x9E3779B97F4A7C15)
    z = (z ^ (z >> _U(30))) * _U(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> _U(27))) * _U(0x94D049BB133111EB)
    return z ^ (z >> _U(31))


def rng_for(seed, *keys):
    """Counter-based generator for one task, independent of scheduling."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))


def _grid_count(n):
    return (n + 1) // 2


def _circle_sample(n, rng):
    g = _grid_count(n)
    off = _fixed.SILVER128 >> 64
    step = _fixed.ONE64 // g
    grid = np.array([(i * step + off // g) % _fixed.ONE64 for i in range(g)], dtype=np.uint64)
    rand = rng.integers(0, _fixed.ONE64, size=n - g, dtype=np.uint64, endpoint=False)
    return np.concatenate([grid, rand])


def _interval_sample(n, rng):
    g = _grid_count(n)
    grid = np.linspace(0.0, 1.0, g) if g > 1 else np.array([0.5])
    return np.concatenate([grid, rng.random(n - g)])


def _plane_sample(n, rng, kinds):
    """Product grid on two coordinates plus uniform random points."""
    g = int(math.isqrt(_grid_count(n)))
    cols = []
    for axis, kind in enumerate(kinds):
        if kind == "c":
            base = (np.arange(g, dtype=np.float64) + float(_fixed.SILVER)) / g
        else:
            base = np.linspace(0.0, 1.0, g) if g > 1 else np.array([0.5])
        grid = np.repeat(base, g) if axis == 0 else np.tile(base, g)
        cols.append(np.concatenate([grid, rng.random(n - g * g)]))
    return cols


class Engine:
    nc = 0
    ni = 0
    ns = 0

    def __init__(self, sys):
        self.sys = sys
        self.power = sys.power if sys.kind != "product" else 1

    def take(self, state, idx):
        return {k: (v[idx] if isinstance(v, np.ndarray) else v) for k, v in state.items()}

    def size(self, state):
        return len(next(v for v in state.values() if isinstance(v, np.ndarray)))

    def advance(self, state, steps=1):
        for _ in range(steps * self.power):
            state = self._step(state)
        return state

    def observe(self, state):
        raise NotImplementedError

    def coords(self, state):
        """Float coordinates ``(M, dim)`` for reporting and reference checks."""
        raise NotImplementedError

    def keys(self, offsets, window):
        raise NotImplementedError


def _empty(m, d, dtype):
    return np.zeros((m, d), dtype=dtype)


class RotationEngine(Engine):
    nc = 1

    def __init__(self, sys):
        super().__init__(sys)
        self.alpha64 = _U(_fixed.fixed64(sys.get("alpha")))

    def sample(self, n, rng):
        return {"x": _circle_sample(n, rng)}

    def from_coords(self, c):
        return {"x": _fixed.to_fixed64(np.asarray(c, dtype=np.float64).reshape(-1))}

    def _step(self, s):
        return {"x": s["x"] + self.alpha64}

    def observe(self, s):
        m = len(s["x"])
        return s["x"][:, None], _empty(m, 0, np.float64), _empty(m, 0, np.int64)

    def coords(self, s):
        return _fixed.to_float(s["x"])[:, None]


class DoublingEngine(Engine):
    """Doubling map on 64-bit windows of binary expansions.

    The state holds the leading 64 binary digits of each point.  Each step
    shifts out the top digit and appends the next digit of the point's
    expansion, drawn from a keyed counter hash of ``(point id, digit index)``.
    The stored window is therefore exact at every time.
    """

    nc = 1

    def __init__(self, sys, seed=0):
        super().__init__(sys)
        self.seed = _U(int(seed) & _fixed.MASK64)

    def sample(self, n, rng):
        return {"x": _circle_sample(n, rng), "id": np.arange(n, dtype=np.uint64), "t": 0}

    def from_coords(self, c):
        x = _fixed.to_fixed64(np.asarray(c, dtype=np.float64).reshape(-1))
        return {"x": x, "id": np.arange(len(x), dtype=np.uint64), "t": 0}

    def _digit(self, ids, t):
        block = splitmix64(ids * _U(0xD1B54A32D192ED03) ^ self.seed ^ _U(t // 64))
        return (block >> _U(t % 64)) & _U(1)

    def _step(self, s):
        x = (s["x"] << _U(1)) | self._digit(s["id"], s["t"])
        return {"x": x, "id": s["id"], "t": s["t"] + 1}

    def observe(self, s):
        m = len(s["x"])
        return s["x"][:, None], _empty(m, 0, np.float64), _empty(m, 0, np.int64)

    def coords(self, s):
        return _fixed.to_float(s["x"])[:, None]


class TorusShearEngine(Engine):
    nc = 2

    def sample(self, n, rng):
        cx, cy = _plane_sample(n, rng, ("c", "c"))
        return {"x": _fixed.to_fixed64(cx), "y": _fixed.to_fixed64(cy)}

    def from_coords(self, c):
        c = np.asarray(c, dtype=np.float64).reshape(-1, 2)
        return {"x": _fixed.to_fixed64(c[:, 0]), "y": _fixed.to_fixed64(c[:, 1])}

    def _step(self, s):
        return {"x": s["x"], "y": s["y"] + s["x"]}

    def observe(self, s):
        m = len(s["x"])
        return np.stack([s["x"], s["y"]], axis=1), _empty(m, 0, np.float64), _empty(m, 0, np.int64)

    def coords(self, s):
        return np.stack([_fixed.to_float(s["x"]), _fixed.to_float(s["y"])], axis=1)


class MorseSmaleEngine(Engine):
    ni = 1

    def sample(self, n, rng):
        return {"x": _interval_sample(n, rng)}

    def from_coords(self, c):
        return {"x": np.asarray(c, dtype=np.float64).reshape(-1).copy()}

    def _step(self, s):
        return {"x": s["x"] * s["x"]}

    def observe(self, s):
        m = len(s["x"])
        return _empty(m, 0, np.uint64), s["x"][:, None], _empty(m, 0, np.int64)

    def coords(self, s):
        return s["x"][:, None]


class DenjoyEngine(Engine):
    nc = 1

    def __init__(self, sys):
        super().__init__(sys)
        self.model = denjoy_model(sys)

    def sample(self, n, rng):
        # grid and random points in the rotation coordinate, lifted to the
        # Cantor set: gap interiors carry no separation of their own
        xi = _circle_sample(n, rng)
        return {"xi": xi, "gap": np.full(n, -1, dtype=np.int64), "s": np.zeros(n)}

    def from_coords(self, c):
        _, xi64, gap, s = self.model.locate(np.asarray(c, dtype=np.float64).reshape(-1))
        return {"xi": xi64, "gap": gap, "s": s}

    def _step(self, s):
        xi, gap, rel = self.model.advance(s["xi"], s["gap"], s["s"])
        return {"xi": xi, "gap": gap, "s": rel}

    def observe(self, s):
        m = len(s["xi"])
        x = self.model.position(s["xi"], s["gap"], s["s"])
        return _fixed.to_fixed64(x)[:, None], _empty(m, 0, np.float64), _empty(m, 0, np.int64)

    def coords(self, s):
        return self.model.position(s["xi"], s["gap"], s["s"])[:, None]


def annulus_alpha_array(x, x0=0.5):
    """Vectorised :func:`amorph.systems.annulus_alpha`."""
    x = np.asarray(x, dtype=np.float64)
    x1 = x0 * x0
    out = np.zeros_like(x)
    live = (x > 0.0) & (x <= x0)
    base = np.where(live, x, x0)
    level = np.ones_like(x)
    while True:
        low = live & (base <= x1)
        if not low.any():
            break
        base = np.where(low, np.sqrt(base), base)
        level = level + low
    base = np.minimum(base, x0)
    mid = 0.5 * (x0 + x1)
    out[live] = (1.0 - 2.0 * np.abs(mid - base[live]) / (x0 - x1)) / level[live]
    return out


class AnnulusEngine(Engine):
    ni = 1
    nc = 1

    def sample(self, n, rng):
        cx, cy = _plane_sample(n, rng, ("i", "c"))
        return {"x": cx, "y": _fixed.to_fixed64(cy)}

    def from_coords(self, c):
        c = np.asarray(c, dtype=np.float64).reshape(-1, 2)
        return {"x": c[:, 0].copy(), "y": _fixed.to_fixed64(c[:, 1])}

    def _step(self, s):
        turn = _fixed.to_fixed64(annulus_alpha_array(s["x"]))
        return {"x": s["x"] * s["x"], "y": s["y"] + turn}

    def observe(self, s):
        return s["y"][:, None], s["x"][:, None], _empty(len(s["x"]), 0, np.int64)

    def coords(self, s):
        return np.stack([s["x"], _fixed.to_float(s["y"])], axis=1)


class PinchedEngine(Engine):
    """``(theta, x) -> (theta + omega, tanh(alpha x) (sin(pi theta) + eps))``, clipped to [0, 1]."""

    nc = 1
    ni = 1

    def __init__(self, sys):
        super().__init__(sys)
        self.alpha = float(sys.get("alpha"))
        self.eps = float(sys.get("eps"))
        self.omega64 = _U(_fixed.fixed64(sys.get("omega")))

    def sample(self, n, rng):
        ct, cx = _plane_sample(n, rng, ("c", "i"))
        return {"theta": _fixed.to_fixed64(ct), "x": cx}

    def from_coords(self, c):
        c = np.asarray(c, dtype=np.float64).reshape(-1, 2)
        return {"theta": _fixed.to_fixed64(c[:, 0]), "x": c[:, 1].copy()}

    def _step(self, s):
        th = _fixed.to_float(s["theta"])
        x = np.tanh(self.alpha * s["x"]) * (np.sin(np.pi * th) + self.eps)
        return {"theta": s["theta"] + self.omega64, "x": np.clip(x, 0.0, 1.0)}

    def observe(self, s):
        return s["theta"][:, None], s["x"][:, None], _empty(len(s["x"]), 0, np.int64)

    def coords(self, s):
        return np.stack([_fixed.to_float(s["theta"]), s["x"]], axis=1)


class ShiftEngine(Engine):
    """Shift on the orbit closure of one generating sequence.

    A point is an offset ``o``; it stands for the shifted sequence
    ``sigma^o x``.  Samples are the first ``M`` shifts.
    """

    ns = 1

    def __init__(self, sys):
        super().__init__(sys)
        self.seq = sequence_for(sys)
        self._keys = {}
        self._symbols = np.zeros(0, dtype=np.uint8)

    def sample(self, n, rng):
        return {"o": np.arange(n, dtype=np.int64)}

    def from_coords(self, c):
        return {"o": np.asarray(c, dtype=np.int64).reshape(-1).copy()}

    def _step(self, s):
        return {"o": s["o"] + 1}

    def advance(self, state, steps=1):
        return {"o": state["o"] + steps * self.power}

    def observe(self, s):
        m = len(s["o"])
        return _empty(m, 0, np.uint64), _empty(m, 0, np.float64), s["o"][:, None]

    def coords(self, s):
        return s["o"][:, None].astype(np.float64)

    def symbols(self, n):
        if len(self._symbols) < n:
            self._symbols = self.seq.prefix(max(n, 2 * len(self._symbols)))
            self._keys.clear()
        return self._symbols

    def keys(self, limit, window):
        """Window keys valid for every offset below ``limit``."""
        have = self._keys.get(window)
        if have is None or len(have) < limit:
            sym = self.symbols(limit + window)
            self._keys[window] = window_keys(sym, window, self.seq.bits)
        return self._keys[window]


class ProductEngine(Engine):
    def __init__(self, sys, seed=0):
        super().__init__(sys)
        self.children = [engine_for(c, seed) for c in sys.children]
        self.nc = sum(c.nc for c in self.children)
        self.ni = sum(c.ni for c in self.children)
        self.ns = sum(c.ns for c in self.children)

    def sample(self, n, rng):
        a = self.children[0].sample(n, rng)
        b = self.children[1].sample(n, rng)
        perm = rng.permutation(n)
        return (a, self.children[1].take(b, perm))

    def take(self, state, idx):
        return tuple(c.take(s, idx) for c, s in zip(self.children, state))

    def size(self, state):
        return self.children[0].size(state[0])

    def from_coords(self, c):
        c = np.asarray(c)
        d0 = self.sys.children[0].dim
        return (self.children[0].from_coords(c[:, :d0]), self.children[1].from_coords(c[:, d0:]))

    def advance(self, state, steps=1):
        return tuple(c.advance(s, steps) for c, s in zip(self.children, state))

    def observe(self, state):
        parts = [c.observe(s) for c, s in zip(self.children, state)]
        return tuple(np.concatenate([p[i] for p in parts], axis=1) for i in range(3))

    def coords(self, state):
        return np.concatenate([c.coords(s) for c, s in zip(self.children, state)], axis=1)

    @property
    def shift_children(self):
        out = []
        for c in self.children:
            out.extend(c.shift_children if isinstance(c, ProductEngine) else ([c] if c.ns else []))
        return out


_ENGINES = {
    "rotation": RotationEngine,
    "torus_shear": TorusShearEngine,
    "morse_smale": MorseSmaleEngine,
    "denjoy": DenjoyEngine,
    "annulus_transient": AnnulusEngine,
    "pinched": PinchedEngine,
}


def engine_for(sys, seed=0):
    if isinstance(sys, str):
        sys = parse_spec(sys)
    if sys.kind == "product":
        return ProductEngine(sys, seed)
    if sys.kind == "doubling":
        return DoublingEngine(sys, seed)
    if sys.symbolic:
        return ShiftEngine(sys)
    return _ENGINES[sys.kind](sys)
