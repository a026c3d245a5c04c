import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from amorph import _fixed
from amorph.pinched import (ConstantsError, boundary_lines, cauchy_change, diophantine_constant, fibre,
                            graph_points, graph_separation_exponent, invariance_error, iterate_line,
                            lipschitz_violations, lyapunov_zero_line, monotonicity_violations, peak_census,
                            peak_mask, peak_radii, sna_detect, validate_constants, zero_violations)
from amorph.scaling import SweepPlan, dyadic_grid, least_squares

GOLDEN = Fraction(_fixed.GOLDEN128, 1 << 128)
G = 4096


@pytest.fixture(scope="module")
def sna_grid():
    return boundary_lines(3, 0, GOLDEN, G, 60)


@pytest.fixture(scope="module")
def smooth_grid():
    return boundary_lines(3, Fraction(1, 20), GOLDEN, G, 60)


# ---------------------------------------------------------------- boundary lines

@pytest.mark.parametrize("eps", [0.0, 0.05, 0.5])
def test_first_line_formula(eps):
    grid = boundary_lines(3, eps, GOLDEN, 1024, 1)
    th = grid.theta_float
    expect = np.clip(math.tanh(3) * (np.sin(np.pi * ((th - float(GOLDEN)) % 1.0)) + eps), 0, 1)
    assert np.allclose(grid.values[1], expect, atol=1e-12)


def test_first_line_vanishes_at_omega():
    grid = boundary_lines(3, 0, GOLDEN, 1024, 1)
    assert grid.values[1, grid.inserted["tau_1"]] == 0.0


def test_preconditions():
    with pytest.raises(ValueError):
        boundary_lines(3, 0, GOLDEN, 512, 10)
    with pytest.raises(ValueError):
        boundary_lines(3, 0, GOLDEN, 1024, 0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 64 - 1), st.floats(0, 1), st.floats(0.5, 4), st.floats(0, 0.5))
def test_fibre_monotone_in_x(theta, x, alpha, eps):
    th = np.array([theta], dtype=np.uint64)
    y = min(1.0, x + 0.01)
    assert fibre(th, np.array([x]), alpha, eps)[0] <= fibre(th, np.array([y]), alpha, eps)[0]


def test_iterate_line_recursion():
    # phi_n(theta) = f_{theta - omega}(phi_{n-1}(theta - omega))
    w64 = np.uint64(_fixed.fixed64(GOLDEN))
    th = np.array([12345678901234567, 2 ** 63 + 17], dtype=np.uint64)
    for n in (1, 5, 20):
        prev = iterate_line(th - w64, n - 1, 3.0, 0.0, w64)
        assert np.array_equal(iterate_line(th, n, 3.0, 0.0, w64), fibre(th - w64, prev, 3.0, 0.0))


@pytest.mark.parametrize("fixture", ["sna_grid", "smooth_grid"])
def test_audits_clean(fixture, request):
    grid = request.getfixturevalue(fixture)
    assert monotonicity_violations(grid) == 0
    assert lipschitz_violations(grid) == 0
    assert invariance_error(grid) < 1e-12
    assert np.all((grid.values >= 0) & (grid.values <= 1))


def test_zeros_at_peak_points(sna_grid):
    assert zero_violations(sna_grid) == 0
    for k in (1, 7, 30):
        assert sna_grid.values[30, sna_grid.inserted[f"tau_{k}"]] < 1e-12


def test_off_peak_geometric_convergence(sna_grid):
    mask = peak_mask(sna_grid.theta[:G], GOLDEN, 3)
    diffs = np.abs(np.diff(sna_grid.grid_values, axis=0))[:, ~mask].max(axis=1)
    n = np.arange(1, len(diffs) + 1)
    keep = (n >= 20) & (diffs > 1e-14)
    slope, _, _ = least_squares(n[keep].astype(float), np.log(diffs[keep]))
    lam = -slope / math.log(3)
    assert lam > 0
    assert cauchy_change(sna_grid, 5, mask) < 1e-6


def test_rows_format(smooth_grid):
    rows = list(smooth_grid.rows())
    assert len(rows) == G * 60
    th, n, v = rows[0]
    assert n == 1 and 0 <= th < 1 and v == smooth_grid.values[1, 0]


# ---------------------------------------------------------------- Lyapunov exponent

def test_lyapunov_closed_form():
    assert lyapunov_zero_line(3, 0, GOLDEN, 10 ** 6) == pytest.approx(math.log(3) - math.log(2), abs=1e-3)


def test_lyapunov_boundary_case():
    assert lyapunov_zero_line(2, 0, GOLDEN, 10 ** 6) == pytest.approx(0.0, abs=1e-3)


def test_lyapunov_against_quadrature():
    exact = float(mpmath.quad(lambda t: mpmath.log(mpmath.sin(mpmath.pi * t) + 1), [0, 0.5, 1]))
    assert lyapunov_zero_line(1, 1, GOLDEN, 10 ** 6) == pytest.approx(exact, abs=1e-4)


def test_lyapunov_horizon_precondition():
    with pytest.raises(ValueError):
        lyapunov_zero_line(3, 0, GOLDEN, 1000)


# ---------------------------------------------------------------- peaks

def test_peak_radii():
    r = peak_radii(45, 0.01, 44, 3)
    assert r[0] == 0.005
    assert r[1] == pytest.approx(0.005 * 45 ** (-1 / 44))


def test_diophantine_constant_golden():
    # n * ||n g|| is smallest at n = 1; along Fibonacci denominators it tends to 1/sqrt(5)
    assert diophantine_constant(GOLDEN, 1.0, 10000) == pytest.approx(1 - float(GOLDEN), abs=1e-12)


@pytest.fixture(scope="module")
def census():
    return peak_census(GOLDEN, N=10000)


def test_first_peak_fresh(census):
    assert census.fresh[0] == 1


def test_fresh_rule_direct(census):
    tau = np.array([(n * float(GOLDEN)) % 1.0 for n in range(1, 201)])
    r = census.radii
    fresh = [j for j in range(1, 201)
             if all(min(abs(tau[j - 1] - tau[l - 1]), 1 - abs(tau[j - 1] - tau[l - 1])) >= 2 * r[j - 1] + r[l - 1]
                    for l in range(1, j))]
    assert fresh == [int(f) for f in census.fresh if f <= 200]


def test_fresh_density_positive(census):
    assert census.density_liminf > 0
    assert np.all(census.density <= 1)


def test_validate_constants_errors():
    with pytest.raises(ConstantsError, match="b <= c"):
        validate_constants(GOLDEN, b=0.5)
    with pytest.raises(ConstantsError, match="m >= 22"):
        validate_constants(GOLDEN, m=10)
    with pytest.raises(ConstantsError, match=r"a >= \(m\+1\)\^d"):
        validate_constants(GOLDEN, a=10)
    with pytest.raises(ConstantsError):
        peak_census(GOLDEN, b=0.5, N=10)


def test_validate_constants_sampled():
    # with a = 45, b = 0.01 the lower reference bound needs alpha * pi >= 2 a / b
    rep = validate_constants(GOLDEN, alpha=1e4, L0=0.01)
    assert "contraction" in rep["checked"] and "reference_system" in rep["checked"]
    with pytest.raises(ConstantsError, match="contraction"):
        validate_constants(GOLDEN, alpha=3.0, L0=0.0)
    with pytest.raises(ConstantsError, match="reference-system"):
        validate_constants(GOLDEN, alpha=1000.0, L0=0.1)


# ---------------------------------------------------------------- classification

def test_sna_detected(sna_grid):
    v = sna_detect(sna_grid)
    assert v.label == "SNA" and v.converged and not v.zero_graph
    assert v.line().startswith("verdict=SNA ")


def test_smooth_continuous(smooth_grid):
    v = sna_detect(smooth_grid)
    assert v.label == "continuous" and not v.zero_graph
    assert v.grid_min > 0.01


def test_subcritical_zero_graph():
    v = sna_detect(boundary_lines(1.5, 0, GOLDEN, G, 60))
    assert v.label == "continuous" and v.zero_graph


def test_undecided_when_shallow():
    v = sna_detect(boundary_lines(3, 0, GOLDEN, G, 8))
    assert v.label == "undecided" and not v.converged


# ---------------------------------------------------------------- separation along the graph

def test_graph_points_avoid_peaks():
    theta, x = graph_points(3, 0, GOLDEN, 512)
    assert len(theta) < 512
    assert not peak_mask(theta, GOLDEN, 3).any()
    assert np.all((x >= 0) & (x <= 1))


def test_graph_exponent_subcritical():
    plan = SweepPlan(deltas=[Fraction(1, 2), Fraction(1, 4)], nus=dyadic_grid(1, 10), samples=[128, 256],
                     horizon=2048)
    est, rows = graph_separation_exponent(Fraction(3, 2), 0, GOLDEN, plan)
    assert est.slope == pytest.approx(0.0, abs=0.05)
    assert len(rows) == 2 * 2 * 10
