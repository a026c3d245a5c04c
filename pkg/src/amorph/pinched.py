"""Pinched skew products ``(theta, x) -> (theta + omega, tanh(alpha x) (sin(pi theta) + eps))``.

Boundary lines are evaluated pointwise: ``phi_n(theta)`` is the fibre
coordinate reached after ``n`` steps from ``(theta - n*omega, 1)``.  Base
points are uint64 fixed point, so every ``phi_n`` and ``phi_{n+1}`` at the same
``theta`` share their last ``n`` base positions exactly; this makes the
monotonicity ``phi_{n+1} <= phi_n`` hold exactly in floating point.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import _fixed
from .scaling import SweepPlan, fit_exponent, run_tasks
from .separation import max_separated_set, min_spanning_set, pair_frequencies, sample_from_coords
from .systems import make_spec

_U = np.uint64


class ConstantsError(ValueError):
    """A configured peak constant violates one of the required inequalities."""


def _omega64(omega):
    return _U(_fixed.fixed64(Fraction(omega)))


def fibre(theta64, x, alpha, eps):
    """One fibre map, clipped to ``[0, 1]``; ``theta64`` is uint64 fixed point."""
    th = _fixed.to_float(theta64)
    th = np.minimum(th, 1.0 - th)
    return np.clip(np.tanh(alpha * x) * (np.sin(np.pi * th) + eps), 0.0, 1.0)


def iterate_line(theta64, n, alpha, eps, omega64, x0=1.0):
    """``phi_n`` at the given base points: ``n`` fibre steps from ``theta - n*omega``."""
    theta64 = np.asarray(theta64, dtype=np.uint64)
    th = theta64 - _U((n * int(omega64)) % _fixed.ONE64)
    x = np.full(theta64.shape, float(x0))
    for _ in range(n):
        x = fibre(th, x, alpha, eps)
        th = th + omega64
    return x


@dataclass
class BoundaryLineGrid:
    theta: np.ndarray          # uint64 fixed point, grid then any inserted points
    values: np.ndarray         # (N + 1, len(theta)); row n is phi_n, row 0 is 1
    alpha: float
    eps: float
    omega: Fraction
    grid_size: int
    inserted: dict = field(default_factory=dict)   # label -> column index

    @property
    def depth(self):
        return self.values.shape[0] - 1

    @property
    def theta_float(self):
        return _fixed.to_float(self.theta)

    @property
    def grid_values(self):
        return self.values[:, :self.grid_size]

    def rows(self, every=1):
        """(theta, n, value) triples on the regular grid."""
        th = self.theta_float[:self.grid_size]
        for n in range(1, self.depth + 1, every):
            for t, v in zip(th, self.values[n, :self.grid_size]):
                yield float(t), n, float(v)


def boundary_lines(alpha, eps, omega, G, N, offset=None, insert_peaks=True):
    """Iterated boundary lines ``phi_1 .. phi_N`` on ``G`` equally spaced base points.

    The grid is shifted by an irrational fraction of a cell unless ``offset``
    is given.  With ``insert_peaks`` the exact points ``tau_k = k*omega``
    (``k <= N``) are appended after the grid.
    """
    if G < 1024 or N < 1:
        raise ValueError("need G >= 1024 and N >= 1")
    omega = Fraction(omega)
    w64 = _omega64(omega)
    off = (_fixed.SILVER128 >> 64) // G if offset is None else _fixed.fixed64(Fraction(offset))
    step = _fixed.ONE64 // G
    theta = [(i * step + off) % _fixed.ONE64 for i in range(G)]
    inserted = {}
    if insert_peaks:
        for k in range(1, N + 1):
            inserted[f"tau_{k}"] = len(theta)
            theta.append((k * int(w64)) % _fixed.ONE64)
    theta = np.array(theta, dtype=np.uint64)
    values = np.empty((N + 1, len(theta)))
    values[0] = 1.0
    for n in range(1, N + 1):
        values[n] = iterate_line(theta, n, float(alpha), float(eps), w64)
    return BoundaryLineGrid(theta, values, float(alpha), float(eps), omega, G, inserted)


def monotonicity_violations(grid):
    """Count of ``phi_{n+1}(theta) > phi_n(theta)`` over all points and depths."""
    v = grid.values
    return int(np.count_nonzero(v[1:] > v[:-1]))


def lipschitz_violations(grid, slack=1e-12):
    """Adjacent grid points where ``|phi_n - phi_n'| > pi alpha^n d(theta, theta')``."""
    th = grid.theta[:grid.grid_size]
    d = _fixed.to_float(_fixed.circle_dist64(np.roll(th, -1), th))
    bad = 0
    for n in range(1, grid.depth + 1):
        v = grid.values[n, :grid.grid_size]
        diff = np.abs(np.roll(v, -1) - v)
        bound = math.pi * grid.alpha ** n * d
        bad += int(np.count_nonzero(diff > bound * (1 + slack) + slack))
    return bad


def zero_violations(grid, tol=1e-12, max_n=30):
    """For ``eps = 0``: entries ``phi_n(tau_k) >= tol`` with ``k <= n <= max_n``."""
    bad = 0
    for label, col in grid.inserted.items():
        k = int(label.split("_")[1])
        for n in range(k, min(grid.depth, max_n) + 1):
            bad += int(grid.values[n, col] >= tol)
    return bad


def invariance_error(grid, n=None):
    """Max of ``|f_theta(phi_n(theta)) - phi_{n+1}(theta + omega)|`` over the grid."""
    n = grid.depth - 1 if n is None else n
    w64 = _omega64(grid.omega)
    th = grid.theta[:grid.grid_size]
    img = fibre(th, grid.values[n, :grid.grid_size], grid.alpha, grid.eps)
    nxt = iterate_line(th + w64, n + 1, grid.alpha, grid.eps, w64)
    return float(np.max(np.abs(img - nxt)))


def cauchy_change(grid, last=5, exclude=None):
    """Max change of ``phi_n`` over the last ``last`` depths, optionally off a mask."""
    v = grid.grid_values
    ch = np.abs(np.diff(v[-(last + 1):], axis=0)).max(axis=0)
    if exclude is not None:
        ch = ch[~exclude]
    return float(ch.max()) if ch.size else 0.0


# ---------------------------------------------------------------------------
# Lyapunov exponent of the zero line

def lyapunov_zero_line(alpha, eps, omega, T, start=None, floor=1e-300):
    """Birkhoff average of ``log(alpha (sin(pi theta_k) + eps))`` along a base orbit.

    The base orbit starts at an irrational offset so it never meets the
    pinched fibre exactly; ``floor`` guards the logarithm regardless.
    """
    if T < 10 ** 4:
        raise ValueError("T must be at least 10^4")
    w64 = _omega64(omega)
    s64 = _U(_fixed.SILVER128 >> 64) if start is None else _U(_fixed.fixed64(Fraction(start)))
    total = 0.0
    chunk = 1 << 16
    for k0 in range(0, int(T), chunk):
        k = np.arange(k0, min(int(T), k0 + chunk), dtype=np.uint64)
        th = _fixed.to_float(s64 + k * w64)
        th = np.minimum(th, 1.0 - th)
        total += float(np.sum(np.log(np.maximum(alpha * (np.sin(np.pi * th) + eps), floor))))
    return total / int(T)


# ---------------------------------------------------------------------------
# peak geometry

@dataclass
class PeakCensus:
    omega: Fraction
    a: float
    b: float
    m: int
    gamma: float
    tau: np.ndarray
    radii: np.ndarray
    fresh: np.ndarray
    density: np.ndarray

    @property
    def density_liminf(self):
        """Minimum of ``j / n_j`` over the second half of the fresh peaks."""
        if len(self.density) == 0:
            return 0.0
        return float(self.density[len(self.density) // 2:].min())


def peak_radii(a, b, m, N):
    n = np.arange(1, N + 1, dtype=np.float64)
    return (b / 2.0) * a ** (-(n - 1) / m)


def diophantine_constant(omega, d=1.0, N=10000):
    """``min_n n^d * dist(n*omega, 0)`` over ``n <= N``."""
    w64 = _omega64(omega)
    n = np.arange(1, N + 1, dtype=np.uint64)
    dist = _fixed.to_float(_fixed.circle_dist64(n * w64, np.zeros(N, dtype=np.uint64)))
    return float(np.min(n.astype(np.float64) ** d * dist))


def validate_constants(omega, gamma=1.0, m=44, a=45.0, b=0.01, d=1.0, c=None,
                       alpha=None, L0=None, eps=0.0, samples=20000, seed=0):
    """Check the inequalities on the peak constants that can be checked.

    Arithmetic conditions are exact; the contraction and reference-system
    bounds are checked on random ``(theta, x)`` samples when ``alpha`` and
    ``L0`` are given.  Raises :class:`ConstantsError` naming the first
    violated inequality.
    """
    if c is None:
        c = diophantine_constant(omega, d)
    if m < 22 * (1 + 1 / gamma):
        raise ConstantsError(f"m >= 22(1 + 1/gamma) fails: m={m}, gamma={gamma}")
    if a < (m + 1) ** d:
        raise ConstantsError(f"a >= (m+1)^d fails: a={a}, (m+1)^d={(m + 1) ** d}")
    if b > c:
        raise ConstantsError(f"b <= c fails: b={b}, c={c:.6g}")
    w64 = _omega64(omega)
    for n in range(1, m):
        dist = float(_fixed.to_float(_fixed.circle_dist64(np.array([n * int(w64) % _fixed.ONE64], dtype=np.uint64),
                                                          np.zeros(1, dtype=np.uint64)))[0])
        if not b < dist:
            raise ConstantsError(f"b < d(n omega, 0) fails at n={n}: b={b}, d={dist:.6g}")
    report = {"c": c, "checked": ["m", "a", "b<=c", "b<d(n omega,0)"]}
    if alpha is not None and L0 is not None:
        rng = np.random.default_rng(seed)
        th = rng.integers(0, _fixed.ONE64, size=samples, dtype=np.uint64, endpoint=False)
        x = L0 + (1 - L0) * rng.random(samples)
        y = L0 + (1 - L0) * rng.random(samples)
        lhs = np.abs(fibre(th, x, alpha, eps) - fibre(th, y, alpha, eps))
        if np.any(lhs > alpha ** (-gamma) * np.abs(x - y) + 1e-15):
            raise ConstantsError("contraction |f(x)-f(y)| <= alpha^-gamma |x-y| on [L0,1] fails")
        z = rng.random(samples)
        dth = _fixed.to_float(_fixed.circle_dist64(th, np.zeros(samples, dtype=np.uint64)))
        rhs = np.minimum(L0, a * z) * np.minimum(1.0, 2 * dth / b)
        if np.any(fibre(th, z, alpha, eps) < rhs - 1e-15):
            raise ConstantsError("reference-system bound f(x) >= min(L0, a x) min(1, 2 d(theta,0)/b) fails")
        report["checked"] += ["contraction", "reference_system"]
    return report


def peak_census(omega, a=45.0, b=0.01, m=44, N=10000, gamma=1.0, d=1.0, validate=True):
    """Fresh peaks among ``tau_n = n*omega``, ``n <= N``.

    Peak ``j`` is fresh when ``B(tau_j, 2 r_j)`` misses every earlier
    ``B(tau_l, r_l)``, i.e. ``d(tau_j, tau_l) >= 2 r_j + r_l`` for ``l < j``.
    """
    if validate:
        validate_constants(omega, gamma, m, a, b, d)
    w64 = _omega64(omega)
    n = np.arange(1, N + 1, dtype=np.uint64)
    tau = n * w64
    r = peak_radii(a, b, m, N)
    fresh = [1]
    for j in range(2, N + 1):
        dist = _fixed.to_float(_fixed.circle_dist64(tau[:j - 1], tau[j - 1]))
        if np.all(dist >= 2 * r[j - 1] + r[:j - 1]):
            fresh.append(j)
    fresh = np.array(fresh, dtype=np.int64)
    density = np.arange(1, len(fresh) + 1) / fresh
    return PeakCensus(Fraction(omega), a, b, m, gamma, _fixed.to_float(tau), r, fresh, density)


def peak_mask(theta64, omega, q, a=45.0, b=0.01, m=44):
    """True where ``theta`` lies in one of the first ``q`` peak neighbourhoods."""
    w64 = _omega64(omega)
    r = peak_radii(a, b, m, q)
    mask = np.zeros(len(theta64), dtype=bool)
    for j in range(1, q + 1):
        centre = _U((j * int(w64)) % _fixed.ONE64)
        dist = _fixed.to_float(_fixed.circle_dist64(theta64, np.full(len(theta64), centre, dtype=np.uint64)))
        mask |= dist < r[j - 1]
    return mask


# ---------------------------------------------------------------------------
# classification

@dataclass
class Verdict:
    label: str
    zero_graph: bool
    q90: float
    peak_min: float
    grid_min: float
    converged: bool

    def line(self):
        return (f"verdict={self.label} zero_graph={int(self.zero_graph)} q90={self.q90:.6g} "
                f"peak_min={self.peak_min:.6g} grid_min={self.grid_min:.6g} converged={int(self.converged)}")


def sna_detect(grid, high=0.1, zero=1e-6, floor=0.01, tolerance=1e-6, q=3):
    """Classify the attractor above the zero line from ``phi_N``.

    * ``continuous`` with ``zero_graph`` when the 0.9-quantile of ``phi_N`` is
      below ``zero`` (everything collapses onto the zero line);
    * ``SNA`` when the 0.9-quantile exceeds ``high`` while ``phi_N`` is below
      ``zero`` at the inserted points ``tau_k``;
    * ``continuous`` when ``phi_N`` stays above ``floor`` on the whole grid;
    * ``undecided`` otherwise, and whenever ``phi_N`` has not settled off
      the first ``q`` peak neighbourhoods (change over the last five depths
      at least ``tolerance``).
    """
    last = grid.values[-1]
    g = last[:grid.grid_size]
    q90 = float(np.quantile(g, 0.9))
    cols = list(grid.inserted.values())
    peak_min = float(last[cols].min()) if cols else float("nan")
    grid_min = float(g.min())
    mask = peak_mask(grid.theta[:grid.grid_size], grid.omega, q)
    converged = grid.depth > 5 and cauchy_change(grid, 5, mask) < tolerance
    if q90 < zero:
        return Verdict("continuous", True, q90, peak_min, grid_min, converged)
    if not converged:
        return Verdict("undecided", False, q90, peak_min, grid_min, converged)
    if q90 > high and cols and peak_min < zero:
        return Verdict("SNA", False, q90, peak_min, grid_min, converged)
    if grid_min > floor:
        return Verdict("continuous", False, q90, peak_min, grid_min, converged)
    return Verdict("undecided", False, q90, peak_min, grid_min, converged)


# ---------------------------------------------------------------------------
# separation along the invariant graph

def graph_points(alpha, eps, omega, M, N=60, q=3):
    """Base grid minus the first ``q`` peak neighbourhoods, lifted to ``phi_N``."""
    w64 = _omega64(omega)
    off = (_fixed.SILVER128 >> 64) // M
    step = _fixed.ONE64 // M
    theta = np.array([(i * step + off) % _fixed.ONE64 for i in range(M)], dtype=np.uint64)
    keep = ~peak_mask(theta, omega, q)
    theta = theta[keep]
    x = iterate_line(theta, N, float(alpha), float(eps), w64)
    return theta, x


def _graph_cell(task):
    alpha, eps, omega, delta, M, T, N, q, nus, mode = task
    theta, x = graph_points(alpha, eps, omega, M, N, q)
    spec = make_spec("pinched", alpha=alpha, eps=eps, omega=omega)
    smp = sample_from_coords(spec, np.stack([_fixed.to_float(theta), x], axis=1))
    # keep the exact fixed-point base coordinates
    smp.state["theta"] = theta
    rec = pair_frequencies(smp, delta, T, mode)
    seps = [len(max_separated_set(rec, float(nu))) for nu in nus]
    spans = [len(min_spanning_set(rec, float(nu))) for nu in nus]
    return (delta, M), seps, spans, len(theta)


def graph_separation_exponent(alpha, eps, omega, plan, N=60, q=3, workers=1, window="tail"):
    """Separation exponent restricted to points of the invariant graph.

    Sample points are ``(theta_i, phi_N(theta_i))`` on a shifted base grid
    with the first ``q`` peak neighbourhoods removed.  The fit reads the
    smallest-``nu`` end of each stable window (``window="tail"``) since the
    quantity of interest is a ``nu -> 0`` limit; ``window="largest"`` uses
    the longest stable window instead.

    Returns ``(estimate, rows)``.
    """
    alpha, eps, omega = Fraction(alpha), Fraction(eps), Fraction(omega)
    plan.check_budget()
    tasks = [(alpha, eps, omega, d, M, plan.horizon, N, q, plan.nus, plan.mode)
             for d in plan.deltas for M in plan.samples]
    results = {key: (seps, spans, size) for key, seps, spans, size in run_tasks(_graph_cell, tasks, workers)}
    text = make_spec("pinched", alpha=alpha, eps=eps, omega=omega).text
    rows = []
    for d in plan.deltas:
        prev = None
        for M in plan.samples:
            seps, spans, size = results[(d, M)]
            for k, nu in enumerate(plan.nus):
                sat = seps[k] >= size
                if prev is not None and prev[0] * 2 == M and seps[k] > 1.1 * prev[1][k]:
                    sat = True
                rows.append({"system": text, "delta": d, "nu": nu, "M": M, "T": plan.horizon,
                             "sep_est": seps[k], "span_est": spans[k], "saturated": int(sat)})
            prev = (M, seps)
    return fit_exponent(rows, window=window), rows
