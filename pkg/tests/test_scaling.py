import math
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from amorph.scaling import (BudgetError, SweepPlan, default_deltas, dyadic_grid, fit_delta, fit_exponent,
                            least_squares, power_entropy_est, property_checks, rows_to_csv,
                            saturation_probe, sweep, toeplitz_upper_bound_check)


def _rows(nus, seps, M=10 ** 6, delta=1, saturated=None):
    saturated = saturated or [0] * len(nus)
    return [{"system": "synthetic", "delta": delta, "nu": nu, "M": M, "T": 1, "sep_est": s,
             "span_est": s, "saturated": z} for nu, s, z in zip(nus, seps, saturated)]


NUS = dyadic_grid(1, 10)


# ---------------------------------------------------------------- grids and plans

def test_dyadic_grid():
    assert dyadic_grid(1, 3) == [Fraction(1, 2), Fraction(1, 4), Fraction(1, 8)]
    assert dyadic_grid(0, 0) == [Fraction(1)]


def test_plan_validation():
    with pytest.raises(ValueError):
        SweepPlan(deltas=[1], nus=dyadic_grid(1, 3))
    with pytest.raises(ValueError):
        SweepPlan(deltas=[1, 1], nus=NUS)
    with pytest.raises(ValueError):
        SweepPlan(deltas=[1], nus=NUS, samples=[64, 64])
    plan = SweepPlan(deltas=[Fraction(1, 4), Fraction(1, 2)], nus=list(reversed(NUS)))
    assert plan.deltas[0] > plan.deltas[1] and plan.nus[0] > plan.nus[-1]


def test_budget_cap(monkeypatch):
    with pytest.raises(BudgetError):
        SweepPlan(deltas=[1], nus=NUS, samples=[8192]).check_budget()
    monkeypatch.setenv("AMORPH_BUDGET_CELLS", "1e6")
    with pytest.raises(BudgetError):
        SweepPlan(deltas=[1], nus=NUS, samples=[256], horizon=4096).check_budget()
    SweepPlan(deltas=[1], nus=NUS, samples=[16], horizon=1000).check_budget()


def test_default_deltas():
    assert default_deltas("sturmian") == [Fraction(1)]
    assert default_deltas("rotation") == dyadic_grid(1, 5)


# ---------------------------------------------------------------- regression

def test_fit_inverse_law():
    est = fit_exponent(_rows(NUS, [math.ceil(1 / nu) for nu in NUS]))
    assert est.slope == pytest.approx(1.0, abs=0.01)


def test_fit_constant():
    est = fit_exponent(_rows(NUS, [7] * len(NUS)))
    assert est.slope == 0.0
    assert "bounded" in est.flags


def test_fit_fractional_law():
    est = fit_exponent(_rows(NUS, [math.ceil(float(nu) ** -1.553) for nu in NUS]))
    assert est.slope == pytest.approx(1.553, abs=0.02)


@given(st.integers(1, 3), st.integers(0, 5))
def test_exact_power_law_has_zero_residual(a, b):
    seps = [2 ** (a * k + b) for k in range(1, 11)]
    slope, _, r2 = least_squares([k * math.log(2) for k in range(1, 11)], [math.log(s) for s in seps])
    assert slope == pytest.approx(a, abs=1e-12)
    assert r2 == pytest.approx(1.0, abs=1e-12)


def test_fit_drops_saturated_and_nonmonotone():
    seps = [2, 4, 8, 16, 32, 64, 20, 256, 512, 1000]
    sat = [0] * 9 + [1]
    f = fit_delta(1, NUS, seps, sat)
    assert float(NUS[6]) in f.dropped
    assert f.window == (0.5, float(NUS[5]))
    assert f.slope == pytest.approx(1.0)
    assert "saturated_by_sample" in f.flags


def test_fit_all_saturated():
    est = fit_exponent(_rows(NUS, [100] * 10, saturated=[1] * 10))
    assert est.slope is None
    assert "infinite_suspected" in est.flags


def test_fit_too_few_points():
    f = fit_delta(1, NUS[:5], [1, 2, 4, 8, 16], [0, 0, 1, 0, 0])
    assert f.slope is None and "too_few_points" in f.flags


def test_tail_window():
    seps = [2, 4, 8, 16, 20, 20, 20, 20, 20, 20]
    assert fit_delta(1, NUS, seps).slope > 0.2
    assert fit_delta(1, NUS, seps, window="tail").slope == 0.0
    with pytest.raises(ValueError):
        fit_delta(1, NUS, seps, window="middle")


def test_overall_is_max_over_delta():
    rows = _rows(NUS, [2 ** k for k in range(1, 11)], delta=0.5) + _rows(NUS, [5] * 10, delta=0.25)
    est = fit_exponent(rows)
    assert est.slope == pytest.approx(1.0)
    assert set(est.per_delta) == {0.5, 0.25}
    assert len(est.summary()) == 3


def test_lower_upper_from_subwindows():
    seps = [2 ** k for k in range(1, 6)] + [2 ** 5 * 4 ** k for k in range(1, 6)]
    est = fit_exponent(_rows(NUS, seps))
    assert est.lower == pytest.approx(1.0)
    assert est.upper == pytest.approx(2.0)


# ---------------------------------------------------------------- sweeps

def test_sweep_rows_and_order():
    plan = SweepPlan(deltas=[Fraction(1, 4), Fraction(1, 2)], nus=dyadic_grid(1, 4), samples=[16, 32],
                     horizon=256)
    rows = sweep("rotation:alpha=golden", plan)
    assert len(rows) == 2 * 2 * 4
    assert [r["delta"] for r in rows[:8]] == [Fraction(1, 2)] * 8
    assert [r["M"] for r in rows[:8]] == [16] * 4 + [32] * 4
    for r in rows:
        assert r["span_est"] <= r["sep_est"] or r["sep_est"] >= 1


def test_sweep_monotone_in_nu():
    plan = SweepPlan(deltas=[Fraction(1, 8)], nus=dyadic_grid(1, 8), samples=[64], horizon=512)
    rows = sweep("doubling", plan)
    seps = [r["sep_est"] for r in rows]
    assert all(b >= a - 1 for a, b in zip(seps, seps[1:]))


def test_sweep_worker_count_invariant():
    plan = SweepPlan(deltas=[Fraction(1, 4), Fraction(1, 8)], nus=dyadic_grid(1, 5), samples=[16, 32],
                     horizon=300, seed=3)
    a = rows_to_csv(sweep("torus_shear", plan, workers=1))
    b = rows_to_csv(sweep("torus_shear", plan, workers=3))
    assert a == b


def test_rows_to_csv_format():
    text = rows_to_csv(_rows(NUS[:4], [1, 2, 3, 4]), meta=["x=1"])
    lines = text.split("\n")
    assert lines[0] == "# x=1"
    assert lines[1] == "system,delta,nu,M,T,sep_est,span_est,saturated"
    assert lines[2] == "synthetic,1,0.5,1000000,1,1,1,0"
    assert text.endswith("\n") and "\r" not in text


# ---------------------------------------------------------------- diagnostics

def test_saturation_probe_doubling():
    flag, curve = saturation_probe("doubling", Fraction(1, 10), Fraction(1, 10), [64, 128, 256, 512], 256)
    assert flag
    assert [c for _, c in curve] == [64, 128, 256, 512]


def test_saturation_probe_rotation():
    flag, curve = saturation_probe("rotation:alpha=golden", Fraction(1, 10), Fraction(1, 10),
                                   [64, 128, 256, 512], 512)
    assert not flag
    # greedy packing of a 0.1-separated set: at most floor(1/delta), at most one unit short
    assert all(9 <= c <= 10 for _, c in curve[1:])


def test_saturation_probe_needs_three_sizes():
    with pytest.raises(ValueError):
        saturation_probe("rotation", 0.1, 0.1, [64, 128], 256)


def test_power_entropy_rotation():
    res = power_entropy_est("rotation:alpha=golden", [Fraction(1, 4), Fraction(1, 8)], [16, 32, 64, 128],
                            samples=128)
    assert all(v["slope"] == pytest.approx(0.0, abs=1e-12) for v in res.values())


def test_power_entropy_morse_smale():
    # escape times from the repelling end point are resolvable up to about 50 steps in float64
    res = power_entropy_est("morse_smale", [Fraction(1, 4), Fraction(1, 8)], [16, 24, 32, 40, 48], samples=512)
    for v in res.values():
        assert 0.8 <= v["slope"] <= 1.2


def test_power_entropy_torus_shear():
    res = power_entropy_est("torus_shear", [Fraction(1, 4), Fraction(1, 8)], [16, 32, 64, 128, 256],
                            samples=256)
    assert all(v["slope"] <= 1.05 for v in res.values())


def test_property_checks_isometry_product():
    plan = SweepPlan(deltas=[Fraction(1, 4), Fraction(1, 8)], nus=dyadic_grid(1, 6), samples=[64], horizon=512)
    rep = property_checks("product(rotation:alpha=golden,rotation:alpha=1/3)", plan)
    assert rep["slope"] == pytest.approx(0.0, abs=0.05)
    assert rep["power_deviation"] <= 0.05


def test_toeplitz_upper_bound_check():
    nus = [float(v) for v in dyadic_grid(1, 8)]
    ok, _ = toeplitz_upper_bound_check(nus, [v ** -1.5 for v in nus], 1.5)
    assert ok
    bad, _ = toeplitz_upper_bound_check(nus, [v ** -2.0 for v in nus], 1.5)
    assert not bad
