"""``amorph`` command line.

Exit status: 0 on success, 1 on invalid input or a failed check, 2 when a
run would exceed the work budget.
"""
from __future__ import annotations

import argparse
import re
import sys
from fractions import Fraction

from . import __version__, _fixed
from .io import atomic_write, csv_text, header

SCHEMA = {
    "sweep": [
        ("system", "canonical system text"),
        ("delta", "distance threshold"),
        ("nu", "separation-frequency threshold"),
        ("M", "sample size"),
        ("T", "orbit horizon"),
        ("sep_est", "greedy separated-set size"),
        ("span_est", "greedy spanning-set size"),
        ("saturated", "1 when sep_est equals M or grew by more than 10% since M/2"),
    ],
    "estimate": [
        ("delta", "distance threshold; the row 'overall' aggregates over delta"),
        ("slope", "least-squares slope of log sep_est against -log nu"),
        ("r2", "coefficient of determination of that fit"),
        ("lower", "smallest slope over 4-point sub-windows"),
        ("upper", "largest slope over 4-point sub-windows"),
        ("nu_hi", "largest nu in the fitted window"),
        ("nu_lo", "smallest nu in the fitted window"),
        ("flags", "bounded, saturated_by_sample, infinite_suspected, too_few_points"),
    ],
    "toeplitz": [
        ("level", "expansion depth l"),
        ("period", "p^l / d^(l-1)"),
        ("density", "skeleton density 1 - q^l/p^l as an exact fraction"),
        ("density_float", "the same density as a float"),
    ],
    "besicovitch": [
        ("system", "canonical system text"),
        ("delta", "Cantor-metric scale 2^-m"),
        ("nu", "pseudo-distance threshold"),
        ("M", "number of orbit points"),
        ("T", "horizon"),
        ("sep_est", "greedy separated-set size through the orbit engine"),
        ("packing", "greedy packing count through direct pseudo-distances"),
        ("metric", "besicovitch:<delta>"),
    ],
    "pinched": [
        ("theta", "base point"),
        ("n", "depth of the iterated boundary line"),
        ("value", "phi_n(theta)"),
    ],
    "pinched-separation": [
        ("system", "canonical system text"),
        ("delta", "distance threshold"),
        ("nu", "separation-frequency threshold"),
        ("M", "base grid size before peak exclusion"),
        ("T", "orbit horizon"),
        ("sep_est", "greedy separated-set size on graph points"),
        ("span_est", "greedy spanning-set size on graph points"),
        ("saturated", "as for sweep, relative to the number of kept points"),
    ],
    "props": [("key", "report field"), ("value", "report value")],
    "selftest": [("key", "oracle-suite counter"), ("value", "count or rate")],
}


class UsageError(ValueError):
    pass


_POW = re.compile(r"^2\^(-?\d+)$")


def parse_value(text):
    """``2^-k``, ``a/b``, a decimal literal or ``golden`` as an exact fraction."""
    t = text.strip()
    if t == "golden":
        return Fraction(_fixed.GOLDEN128, 1 << 128)
    m = _POW.match(t)
    if m:
        return Fraction(2) ** int(m.group(1))
    try:
        return Fraction(t)
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"cannot read a number from {text!r}") from None


def parse_grid(text):
    """Comma list of values; an item ``2^-a..2^-b`` expands to every power in between."""
    out = []
    for item in text.split(","):
        item = item.strip()
        if ".." in item:
            lo, hi = (parse_value(s) for s in item.split("..", 1))
            a, b = _exponent(lo), _exponent(hi)
            step = 1 if b >= a else -1
            out += [Fraction(1, 2 ** k) if k >= 0 else Fraction(2 ** -k) for k in range(a, b + step, step)]
        elif item:
            out.append(parse_value(item))
    if not out:
        raise UsageError("empty grid")
    return out


def _exponent(v):
    if v <= 0:
        raise UsageError("range ends must be powers of two")
    k = 0
    while v < 1:
        v *= 2
        k += 1
    while v > 1:
        v /= 2
        k -= 1
    if v != 1:
        raise UsageError("range ends must be powers of two")
    return k


def _int_list(text):
    try:
        return [int(float(s)) for s in text.split(",") if s.strip()]
    except ValueError:
        raise UsageError(f"cannot read integers from {text!r}") from None


def _emit(args, text):
    if args.out:
        atomic_write(args.out, text)
    else:
        sys.stdout.write(text)


def _plan(args, deltas=None, nus="2^-1..2^-12", samples="256", horizon=4096):
    from .scaling import SweepPlan
    return SweepPlan(deltas=deltas if args.deltas is None else parse_grid(args.deltas),
                     nus=parse_grid(args.nus or nus),
                     samples=_int_list(args.samples or samples),
                     horizon=int(float(args.horizon or horizon)),
                     seed=args.seed, mode=args.mode)


def _plan_flags(p):
    p.add_argument("--system", help="system text, e.g. sturmian:alpha=golden")
    p.add_argument("--deltas", help="comma list or dyadic range 2^-a..2^-b")
    p.add_argument("--nus", help="comma list or dyadic range 2^-a..2^-b")
    p.add_argument("--samples", help="comma list of sample sizes")
    p.add_argument("--horizon", help="orbit horizon T")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", default="suffix_max", choices=["suffix_max", "terminal"])
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", help="output path (default: standard output)")


def _need_system(args):
    from .systems import parse_spec
    if not args.system:
        raise UsageError("--system is required")
    return parse_spec(args.system)


# ---------------------------------------------------------------------------
# commands

def cmd_sweep(args):
    from .scaling import default_deltas, rows_to_csv, sweep
    system = _need_system(args)
    plan = _plan(args, default_deltas(system))
    rows = sweep(system, plan, args.workers)
    cfg = {"command": "sweep", "system": system.text, **plan.config()}
    _emit(args, rows_to_csv(rows, [header(cfg, plan.seed)]))
    return 0


def cmd_estimate(args):
    from .scaling import default_deltas, fit_exponent, rows_to_csv, sweep
    system = _need_system(args)
    plan = _plan(args, default_deltas(system))
    rows = sweep(system, plan, args.workers)
    est = fit_exponent(rows, window=args.window)
    cfg = {"command": "estimate", "system": system.text, "window": args.window, **plan.config()}
    data = []
    for d, f in sorted(est.per_delta.items(), reverse=True):
        win = f.window or (None, None)
        data.append([float(d), _num(f.slope), _num(f.r2), _num(f.lower), _num(f.upper),
                     _num(win[0]), _num(win[1]), ";".join(sorted(f.flags))])
    data.append(["overall", _num(est.slope), _num(est.r2), _num(est.lower), _num(est.upper), "", "",
                 ";".join(sorted(est.flags))])
    text = csv_text([c for c, _ in SCHEMA["estimate"]], data, [header(cfg, plan.seed)])
    if args.sweep_out:
        atomic_write(args.sweep_out, rows_to_csv(rows, [header(cfg, plan.seed)]))
    _emit(args, text)
    for line in est.summary():
        print(line, file=sys.stderr)
    return 0


def _num(v):
    return "" if v is None else float(v)


def cmd_toeplitz(args):
    from .symbolic import ToeplitzWord, density_table, is_periodic, predicted_ac
    w = ToeplitzWord.from_word(args.word, args.m)
    table = density_table(w, args.depth)
    cfg = {"command": "toeplitz", "word": w.word, "m": w.m, "depth": args.depth}
    data = [[k + 1, p, str(d), float(d)] for k, (p, d) in enumerate(zip(table.periods, table.densities))]
    text = csv_text([c for c, _ in SCHEMA["toeplitz"]], data, [header(cfg, 0)])
    _emit(args, text)
    periodic = is_periodic(w)
    lines = [f"word={w.word} p={w.p} q={w.q} d={w.d} periodic={int(periodic)}",
             "densities=(" + ", ".join(str(d) for d in table.densities) + ")"]
    if not periodic:
        lines.append(f"predicted_ac={predicted_ac(w):.12g}")
    print("\n".join(lines), file=sys.stderr if args.out is None else sys.stdout)
    return 0


def cmd_besicovitch(args):
    from .besicovitch import sep_packing_identity, total_boundedness_probe
    from .symbolic import sequence_for
    system = _need_system(args)
    deltas = [Fraction(1)] if args.deltas is None else parse_grid(args.deltas)
    nus = parse_grid(args.nus or "2^-1..2^-8")
    samples = _int_list(args.samples or "256")
    T = int(float(args.horizon or 8192))
    cfg = {"command": "besicovitch", "system": system.text, "deltas": [str(d) for d in deltas],
           "nus": [str(v) for v in nus], "samples": samples, "horizon": T, "seed": args.seed,
           "probe_eps": args.probe_eps}
    data = []
    ok = True
    for d in deltas:
        for M in samples:
            seps, packs = sep_packing_identity(system, M, T, nus, d, args.seed)
            ok &= seps == packs
            data += [[system.text, float(d), float(nu), M, T, s, k, f"besicovitch:{d}"]
                     for nu, s, k in zip(nus, seps, packs)]
    _emit(args, csv_text([c for c, _ in SCHEMA["besicovitch"]], data, [header(cfg, args.seed)]))
    msg = [f"identity={'ok' if ok else 'mismatch'}"]
    if args.probe_eps is not None:
        flag, curve = total_boundedness_probe(sequence_for(system), float(parse_value(args.probe_eps)),
                                              samples, T, deltas[0])
        msg.append(f"not_totally_bounded={int(flag)} curve=" + ",".join(f"{m}:{c}" for m, c in curve))
    print("\n".join(msg), file=sys.stderr if args.out is None else sys.stdout)
    return 0 if ok else 1


def cmd_pinched(args):
    from . import pinched as P
    alpha, eps, omega = parse_value(args.alpha), parse_value(args.eps), parse_value(args.omega)
    grid = P.boundary_lines(float(alpha), float(eps), omega, args.grid, args.depth)
    verdict = P.sna_detect(grid)
    cfg = {"command": "pinched", "alpha": str(alpha), "eps": str(eps), "omega": str(omega),
           "grid": args.grid, "depth": args.depth}
    lines = [verdict.line(),
             f"lyapunov_zero_line={P.lyapunov_zero_line(float(alpha), float(eps), omega, int(float(args.lyapunov_horizon))):.12g}",
             f"monotonicity_violations={P.monotonicity_violations(grid)}",
             f"lipschitz_violations={P.lipschitz_violations(grid)}"]
    if eps == 0:
        lines.append(f"zero_violations={P.zero_violations(grid)}")
    if args.out:
        text = csv_text([c for c, _ in SCHEMA["pinched"]], grid.rows(), [header(cfg, 0)])
        atomic_write(args.out, text)
    if args.separation_out:
        from .scaling import rows_to_csv
        plan = _plan(args, [Fraction(1, 2), Fraction(1, 4)], samples="256,512", horizon=8192)
        est, rows = P.graph_separation_exponent(alpha, eps, omega, plan, workers=args.workers)
        atomic_write(args.separation_out, rows_to_csv(rows, [header({**cfg, **plan.config()}, plan.seed)]))
        lines += est.summary()
    print("\n".join(lines))
    return 0


def cmd_props(args):
    from .scaling import default_deltas, property_checks
    system = _need_system(args)
    plan = _plan(args, default_deltas(system))
    report = property_checks(system, plan, args.other, args.power, args.workers)
    cfg = {"command": "props", "system": system.text, "other": args.other, "power": args.power, **plan.config()}
    data = [[k, v if not isinstance(v, float) else float(v)] for k, v in report.items()]
    _emit(args, csv_text(["key", "value"], data, [header(cfg, plan.seed)]))
    return 0


def cmd_selftest(args):
    from .separation import oracle_suite
    res = oracle_suite(args.instances, args.seed)
    cfg = {"command": "selftest", "instances": args.instances}
    _emit(args, csv_text(["key", "value"], list(res.items()), [header(cfg, args.seed)]))
    return 0 if res["violations"] == 0 else 1


def schema_text(command=None):
    names = [command] if command in SCHEMA else list(SCHEMA)
    out = []
    for n in names:
        out.append(f"[{n}]")
        out += [f"  {c}: {doc}" for c, doc in SCHEMA[n]]
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------

def build_parser():
    ap = argparse.ArgumentParser(prog="amorph", description="Separation-number scaling experiments.")
    ap.add_argument("--version", action="version", version=f"amorph {__version__}")
    ap.add_argument("--schema", action="store_true", help="describe every output column and exit")
    sub = ap.add_subparsers(dest="command")

    p = sub.add_parser("sweep", help="Sep/Span estimates over a (delta, nu, M) grid")
    _plan_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("estimate", help="sweep and fit the scaling exponent")
    _plan_flags(p)
    p.add_argument("--window", default="largest", choices=["largest", "tail"])
    p.add_argument("--sweep-out", help="also write the sweep rows here")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("toeplitz", help="periodic structure and predicted exponent of a 0^m 1 v word")
    p.add_argument("--word", required=True, help='full word such as "0001*1*"')
    p.add_argument("--m", type=int, help="number of leading zeros (inferred when omitted)")
    p.add_argument("--depth", type=int, default=3)
    p.add_argument("--out")
    p.set_defaults(func=cmd_toeplitz)

    p = sub.add_parser("besicovitch", help="Sep against packing counts of pseudo-distances")
    _plan_flags(p)
    p.add_argument("--probe-eps", help="also probe total boundedness at this distance")
    p.set_defaults(func=cmd_besicovitch)

    p = sub.add_parser("pinched", help="boundary lines, classification and graph separation")
    _plan_flags(p)
    p.add_argument("--alpha", default="3")
    p.add_argument("--eps", default="0")
    p.add_argument("--omega", default="golden")
    p.add_argument("--grid", type=int, default=4096)
    p.add_argument("--depth", type=int, default=60)
    p.add_argument("--lyapunov-horizon", default="1000000")
    p.add_argument("--separation-out", help="run the graph separation sweep and write its rows here")
    p.set_defaults(func=cmd_pinched)

    p = sub.add_parser("props", help="power and product checks on fitted exponents")
    _plan_flags(p)
    p.add_argument("--other", help="second factor for the product check")
    p.add_argument("--power", type=int, default=2)
    p.set_defaults(func=cmd_props)

    p = sub.add_parser("selftest", help="exact-oracle suite on small instances")
    p.add_argument("--instances", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_selftest)

    for name, sp in sub.choices.items():
        sp.add_argument("--schema", action="store_true", help="describe this command's output columns and exit")
    return ap


def main(argv=None):
    from .scaling import BudgetError
    from .systems import SpecError

    ap = build_parser()
    args = ap.parse_args(argv)
    if args.schema:
        sys.stdout.write(schema_text(args.command))
        return 0
    if args.command is None:
        ap.print_help(sys.stderr)
        return 1
    try:
        return args.func(args)
    except BudgetError as exc:
        print(f"amorph: budget exceeded: {exc}", file=sys.stderr)
        return 2
    except (SpecError, UsageError, ValueError) as exc:
        print(f"amorph: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
