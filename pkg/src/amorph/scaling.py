"""Sweeps over (delta, nu) grids, exponent fits and regime diagnostics."""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .separation import (DEFAULT_MAX_SAMPLES, first_separation_times, max_separated_set,
                         min_spanning_set, pair_frequencies, sample_from_coords, sample_points)
from .systems import SystemSpec, parse_spec

GROWTH = 0.10          # saturation threshold per sample-size doubling
BOUNDED_SLOPE = 0.05


class BudgetError(RuntimeError):
    """Requested work exceeds the configured budget."""


def dyadic_grid(a, b):
    """``[2**-a, ..., 2**-b]`` as exact fractions."""
    step = 1 if b >= a else -1
    return [Fraction(1, 2 ** k) for k in range(a, b + step, step)]


@dataclass
class SweepPlan:
    deltas: list
    nus: list = field(default_factory=lambda: dyadic_grid(1, 12))
    samples: list = field(default_factory=lambda: [256])
    horizon: int = 4096
    seed: int = 0
    mode: str = "suffix_max"
    max_samples: int = DEFAULT_MAX_SAMPLES

    def __post_init__(self):
        self.deltas = sorted((Fraction(d) for d in self.deltas), reverse=True)
        self.nus = sorted((Fraction(v) for v in self.nus), reverse=True)
        self.samples = sorted(int(m) for m in self.samples)
        if len(set(self.deltas)) != len(self.deltas) or len(set(self.nus)) != len(self.nus):
            raise ValueError("grids must be strictly monotone")
        if len(set(self.samples)) != len(self.samples):
            raise ValueError("sample sizes must be distinct")
        if len(self.nus) < 4:
            raise ValueError("at least 4 nu values are needed for a regression")
        if not self.deltas or not self.samples:
            raise ValueError("empty grid")

    def check_budget(self):
        cap = os.environ.get("AMORPH_BUDGET_CELLS")
        top = max(self.samples)
        if top > self.max_samples:
            raise BudgetError(f"sample size {top} exceeds the cap {self.max_samples}")
        if cap:
            cost = top * top * self.horizon
            if cost > float(cap):
                raise BudgetError(f"M^2 T = {cost:.3g} exceeds AMORPH_BUDGET_CELLS={cap}")

    def config(self):
        return {"deltas": [str(d) for d in self.deltas], "nus": [str(v) for v in self.nus],
                "samples": self.samples, "horizon": self.horizon, "seed": self.seed, "mode": self.mode}


def default_deltas(sys):
    """One delta for subshifts, a dyadic range for everything else."""
    if isinstance(sys, str):
        sys = parse_spec(sys)
    if sys.symbolic:
        return [Fraction(1)]
    return dyadic_grid(1, 5)


# ---------------------------------------------------------------------------
# sweep

def _cell(task):
    text, delta, M, T, seed, mode, nus = task
    smp = sample_points(text, M, seed)
    rec = pair_frequencies(smp, delta, T, mode)
    seps = [len(max_separated_set(rec, float(nu))) for nu in nus]
    spans = [len(min_spanning_set(rec, float(nu))) for nu in nus]
    return (delta, M), seps, spans


def run_tasks(fn, tasks, workers=1):
    """Map ``fn`` over ``tasks``; results come back in task order."""
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


def sweep(sys, plan, workers=1):
    """Greedy Sep and Span estimates for every (delta, M, nu) cell.

    Rows are ordered by delta (descending), sample size (ascending) and nu
    (descending).  ``saturated`` marks cells whose estimate equals the sample
    size or grew by more than 10% since the previous (half as large) sample.
    """
    if isinstance(sys, str):
        sys = parse_spec(sys)
    plan.check_budget()
    tasks = [(sys.text, d, M, plan.horizon, plan.seed, plan.mode, plan.nus)
             for d in plan.deltas for M in plan.samples]
    results = dict((key, (seps, spans)) for key, seps, spans in run_tasks(_cell, tasks, workers))
    rows = []
    for d in plan.deltas:
        prev = None
        for M in plan.samples:
            seps, spans = results[(d, M)]
            for k, nu in enumerate(plan.nus):
                sat = seps[k] >= M
                if prev is not None and prev[0] * 2 == M and seps[k] > (1 + GROWTH) * prev[1][k]:
                    sat = True
                rows.append({"system": sys.text, "delta": d, "nu": nu, "M": M, "T": plan.horizon,
                             "sep_est": seps[k], "span_est": spans[k], "saturated": int(sat)})
            prev = (M, seps)
    return rows


SWEEP_COLUMNS = ["system", "delta", "nu", "M", "T", "sep_est", "span_est", "saturated"]


def rows_to_csv(rows, meta=()):
    from .io import csv_text
    data = [[r["system"], float(r["delta"]), float(r["nu"]), r["M"], r["T"], r["sep_est"],
             r["span_est"], r["saturated"]] for r in rows]
    return csv_text(SWEEP_COLUMNS, data, meta)


# ---------------------------------------------------------------------------
# regression

@dataclass
class DeltaFit:
    delta: float
    nus: list
    seps: list
    window: tuple = ()
    slope: float | None = None
    intercept: float | None = None
    r2: float | None = None
    local_slopes: list = field(default_factory=list)
    lower: float | None = None
    upper: float | None = None
    dropped: list = field(default_factory=list)
    flags: set = field(default_factory=set)


@dataclass
class ScalingEstimate:
    per_delta: dict
    slope: float | None
    lower: float | None
    upper: float | None
    flags: set

    @property
    def r2(self):
        best = self.best
        return None if best is None else best.r2

    @property
    def best(self):
        fits = [f for f in self.per_delta.values() if f.slope is not None]
        return max(fits, key=lambda f: f.slope) if fits else None

    def summary(self):
        lines = []
        for d, f in sorted(self.per_delta.items(), reverse=True):
            s = "-" if f.slope is None else f"{f.slope:.4f}"
            r = "-" if f.r2 is None else f"{f.r2:.4f}"
            win = "-" if not f.window else f"{f.window[0]:.6g}..{f.window[1]:.6g}"
            lines.append(f"delta={d:.6g} slope={s} r2={r} window={win} flags={','.join(sorted(f.flags)) or '-'}")
        s = "-" if self.slope is None else f"{self.slope:.4f}"
        lo = "-" if self.lower is None else f"{self.lower:.4f}"
        hi = "-" if self.upper is None else f"{self.upper:.4f}"
        lines.append(f"overall slope={s} lower={lo} upper={hi} flags={','.join(sorted(self.flags)) or '-'}")
        return lines


def least_squares(x, y):
    """Slope, intercept and R^2 of an ordinary least-squares line."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if np.ptp(y) == 0.0:
        return 0.0, float(y[0]), 1.0
    xm, ym = x.mean(), y.mean()
    sxx = float(((x - xm) ** 2).sum())
    slope = float(((x - xm) * (y - ym)).sum() / sxx)
    intercept = float(ym - slope * xm)
    resid = y - (slope * x + intercept)
    syy = float(((y - ym) ** 2).sum())
    r2 = 1.0 if syy == 0.0 else 1.0 - float((resid ** 2).sum()) / syy
    return slope, intercept, r2


def _longest_run(ok):
    best = (0, -1)
    start = None
    for k, v in enumerate(list(ok) + [False]):
        if v and start is None:
            start = k
        if not v and start is not None:
            if k - start > best[1] - best[0] + 1:
                best = (start, k - 1)
            start = None
    return best


def fit_delta(delta, nus, seps, saturated=None, min_points=4, sub_window=4, window="largest"):
    """Fit one delta row; ``nus`` descending.

    ``window="largest"`` fits the whole longest stable run of cells;
    ``window="tail"`` fits only its last ``min_points`` cells (smallest ``nu``).
    """
    if window not in ("largest", "tail"):
        raise ValueError(f"unknown window rule {window!r}")
    nus = [float(v) for v in nus]
    seps = [float(s) for s in seps]
    sat = [bool(s) for s in (saturated or [False] * len(nus))]
    fit = DeltaFit(float(delta), nus, seps)
    ok = []
    running = 0.0
    for k, s in enumerate(seps):
        bad = sat[k] or s <= 0
        if s < running - 1:
            fit.dropped.append(nus[k])
            bad = True
        running = max(running, s)
        ok.append(not bad)
    if any(sat):
        fit.flags.add("saturated_by_sample")
    a, b = _longest_run(ok)
    if b - a + 1 < min_points:
        if all(sat):
            fit.flags.add("infinite_suspected")
        else:
            fit.flags.add("too_few_points")
        return fit
    if window == "tail":
        a = b - min_points + 1
    x = [-math.log(v) for v in nus[a:b + 1]]
    y = [math.log(s) for s in seps[a:b + 1]]
    fit.window = (nus[a], nus[b])
    fit.slope, fit.intercept, fit.r2 = least_squares(x, y)
    fit.local_slopes = [(y[k + 1] - y[k]) / (x[k + 1] - x[k]) for k in range(len(x) - 1)]
    w = min(sub_window, len(x))
    subs = [least_squares(x[k:k + w], y[k:k + w])[0] for k in range(len(x) - w + 1)]
    fit.lower, fit.upper = min(subs), max(subs)
    if fit.slope <= BOUNDED_SLOPE:
        fit.flags.add("bounded")
    return fit


def fit_exponent(rows, min_points=4, window="largest"):
    """Per-delta fits on the largest sample size; overall value is the max over delta."""
    by_delta = {}
    for r in rows:
        by_delta.setdefault(float(r["delta"]), []).append(r)
    per = {}
    for d, rs in by_delta.items():
        top = max(r["M"] for r in rs)
        rs = sorted((r for r in rs if r["M"] == top), key=lambda r: -float(r["nu"]))
        per[d] = fit_delta(d, [r["nu"] for r in rs], [r["sep_est"] for r in rs],
                           [r.get("saturated", 0) for r in rs], min_points, window=window)
    fits = [f for f in per.values() if f.slope is not None]
    flags = set()
    for f in per.values():
        flags |= f.flags & {"saturated_by_sample", "infinite_suspected"}
    if not fits:
        flags.add("infinite_suspected")
        return ScalingEstimate(per, None, None, None, flags)
    slope = max(f.slope for f in fits)
    if slope <= BOUNDED_SLOPE:
        flags.add("bounded")
    return ScalingEstimate(per, slope, max(f.lower for f in fits), max(f.upper for f in fits), flags)


# ---------------------------------------------------------------------------
# diagnostics

def saturation_probe(sys, delta, nu, samples, horizon, seed=0, workers=1):
    """Sep estimates across increasing sample sizes.

    Returns ``(infinite_suspected, curve)``; the flag is set when the last
    sample-size step still grows the estimate by more than 10%.
    """
    samples = sorted(int(m) for m in samples)
    if len(samples) < 3:
        raise ValueError("need at least three sample sizes")
    if isinstance(sys, SystemSpec):
        sys = sys.text
    tasks = [(sys, Fraction(delta), M, int(horizon), seed, "suffix_max", [Fraction(nu)]) for M in samples]
    curve = [seps[0] for _, seps, _ in run_tasks(_cell, tasks, workers)]
    flag = curve[-1] > (1 + GROWTH) * curve[-2]
    return flag, list(zip(samples, curve))


def repeller_refined_coords(size, span=36.0):
    """Interval points ``exp(-exp(v))`` with ``v`` uniform on ``[-span, 2]``.

    Under ``x -> x**2`` the coordinate ``v`` moves by ``log 2`` per step, so
    this grid resolves the slow escape from the repelling end point.
    """
    v = np.linspace(-span, 2.0, size)
    return np.exp(-np.exp(v))


def power_entropy_est(sys, deltas, n_grid, samples=512, seed=0):
    """Greedy Bowen-Dinaburg separated-set sizes and their log-log slope in ``n``."""
    if isinstance(sys, str):
        sys = parse_spec(sys)
    n_grid = sorted(int(n) for n in n_grid)
    if len(n_grid) < 4:
        raise ValueError("need at least four times")
    if sys.kind == "morse_smale":
        smp = sample_from_coords(sys, repeller_refined_coords(samples), seed)
    else:
        smp = sample_points(sys, samples, seed)
    out = {}
    for d in deltas:
        hit = first_separation_times(smp, Fraction(d), n_grid[-1])
        sizes = []
        for n in n_grid:
            sep = ((hit >= 0) & (hit < n)).astype(np.float64)
            sizes.append(len(max_separated_set(sep, 0.5)))
        slope, _, r2 = least_squares(np.log(n_grid), np.log(sizes))
        out[float(d)] = {"n": n_grid, "sizes": sizes, "slope": slope, "r2": r2}
    return out


def exponent(sys, plan, workers=1):
    rows = sweep(sys, plan, workers)
    return fit_exponent(rows), rows


def property_checks(sys, plan, other=None, power=2, workers=1):
    """Exponent of ``f`` against ``f**power`` and, with ``other``, of ``f x other``."""
    if isinstance(sys, str):
        sys = parse_spec(sys)
    base, _ = exponent(sys, plan, workers)
    powered, _ = exponent(sys.with_power(power), plan, workers)
    report = {"system": sys.text, "slope": base.slope, f"slope_power{power}": powered.slope}
    if base.slope is not None and powered.slope is not None:
        report["power_deviation"] = abs(base.slope - powered.slope)
    if other is not None:
        if isinstance(other, str):
            other = parse_spec(other)
        prod = SystemSpec("product", (), (sys, other))
        est_other, _ = exponent(other, plan, workers)
        est_prod, _ = exponent(prod, plan, workers)
        report.update({"other": other.text, "slope_other": est_other.slope,
                       "slope_product": est_prod.slope})
        if None not in (base.slope, est_other.slope, est_prod.slope):
            report["product_deviation"] = abs(est_prod.slope - base.slope - est_other.slope)
    return report


def toeplitz_upper_bound_check(nus, seps, predicted, margin=0.1, tail=4):
    """Whether ``sep / nu**-(predicted+margin)`` avoids a monotone rise over the last points."""
    s = predicted + margin
    ratio = [float(v) ** s * float(c) for v, c in zip(nus, seps)][-tail:]
    rising = all(b > a for a, b in zip(ratio, ratio[1:]))
    return not rising, ratio
