"""Command-line front end for fixture generation, validation, and reporting.

Exit codes: 0 = every checked residual is zero, 1 = some residual is
nonzero, 2 = input or format problem, 3 = internal inconsistency such as a
solver contradiction.  All verbs are deterministic: the same inputs produce
byte-identical outputs.
"""

from __future__ import annotations

import argparse
import sys
from fractions import Fraction
from pathlib import Path

from .algebra import JetPoly, JetOverflowError, phivar, vvar
from .bigphase import (
    BigSeries,
    TheoryData,
    Truncation,
    restrict_window,
    series_eq,
)
from .genus0 import (
    NoSolutionError,
    SeedError,
    solve_closed_order_by_order,
    solve_open_order_by_order,
    two_point_table,
    validate_closed_genus0,
    validate_open_genus0,
)
from .genus1 import (
    f1_closed_form,
    f1o_closed_form,
    solve_f1o,
    validate_closed_genus1,
    validate_open_genus1,
)
from .laxpde import (
    PstIntegrationError,
    build_boundary_op,
    build_interior_op,
    linear_evolution_residual,
    pst_generate,
    qpoly,
    qpoly_truncation,
)
from . import serialize
from .serialize import ParseError

EXIT_OK = 0
EXIT_RESIDUAL = 1
EXIT_INPUT = 2
EXIT_INTERNAL = 3


class CliInputError(Exception):
    pass


def _default_theory(degree: int, amax: int) -> TheoryData:
    return TheoryData.rank1(Truncation.of(degree, amax))


def _load(path: str):
    try:
        return serialize.load(path)
    except FileNotFoundError:
        raise CliInputError(f"{path}: no such file")
    except ParseError as exc:
        raise CliInputError(f"{path}: {exc}")


def _load_series(path: str) -> tuple[BigSeries, TheoryData]:
    value, theory = _load(path)
    if not isinstance(value, BigSeries):
        raise CliInputError(f"{path}: expected a bigseries file")
    return value, theory


def _shrink(value: BigSeries, theory: TheoryData, args) -> tuple[BigSeries, TheoryData]:
    degree = getattr(args, "degree", None)
    amax = getattr(args, "amax", None)
    if degree is None and amax is None:
        return value, theory
    tr = theory.trunc
    new_deg = tr.deg_max if degree is None else degree
    new_amax = tr.level_max if amax is None else amax
    if new_deg > tr.deg_max or new_amax > tr.level_max:
        raise CliInputError("truncation overrides may only shrink the window")
    new_tr = Truncation(new_deg, new_amax, min(tr.deg0_max, new_deg),
                        tr.jet_max, tr.eps_max)
    theory2 = TheoryData.build(theory.n, theory.eta, theory.avec, new_tr)
    return restrict_window(value, new_tr), theory2


def _report_exit(report, out: str | None, theory: TheoryData) -> int:
    print(report.summary())
    if out:
        serialize.dump(report, theory, out)
    return EXIT_OK if report.all_zero else EXIT_RESIDUAL


def _go_poly(name: str, theory: TheoryData) -> JetPoly:
    jt = theory.trunc.jet()
    phi = JetPoly.var(phivar(0), jt)
    v = JetPoly.var(vvar(1, 0), jt)
    if name == "zero":
        return JetPoly.zero(jt)
    if name == "phi3":
        return phi * phi * phi * Fraction(1, 6)
    if name == "vphi":
        return v * phi
    raise CliInputError(f"unknown initial data name {name!r}")


def cmd_gen_example(args) -> int:
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    theory = _default_theory(args.degree, args.amax)
    jt = theory.trunc.jet()
    v = JetPoly.var(vvar(1, 0), jt)
    phi = JetPoly.var(phivar(0), jt)
    if args.name == "witten-rank1":
        f0 = solve_closed_order_by_order(v * v * v * Fraction(1, 6), theory).series
        serialize.dump(f0, theory, outdir / "f0.ottr")
        print(f"wrote {outdir / 'f0.ottr'}")
        return EXIT_OK
    if args.name == "witten-n2":
        from .bigphase import relabel_component
        theory2 = TheoryData.build(2, [[1, 0], [0, 1]], [1, 1], theory.trunc)
        f0_1 = solve_closed_order_by_order(v * v * v * Fraction(1, 6), theory).series
        f0 = (relabel_component(f0_1, 1, theory.trunc)
              + relabel_component(f0_1, 2, theory.trunc))
        serialize.dump(f0, theory2, outdir / "f0.ottr")
        print(f"wrote {outdir / 'f0.ottr'}")
        return EXIT_OK
    if args.name == "open-rank1":
        f0 = solve_closed_order_by_order(v * v * v * Fraction(1, 6), theory).series
        f0o = solve_open_order_by_order(
            f0, v * phi + phi * phi * phi * Fraction(1, 6), theory).series
        serialize.dump(f0, theory, outdir / "f0.ottr")
        serialize.dump(f0o, theory, outdir / "f0o.ottr")
        print(f"wrote {outdir / 'f0.ottr'}")
        print(f"wrote {outdir / 'f0o.ottr'}")
        return EXIT_OK
    if args.name == "genus1-rank1":
        f0 = solve_closed_order_by_order(v * v * v * Fraction(1, 6), theory).series
        f0o = solve_open_order_by_order(
            f0, v * phi + phi * phi * phi * Fraction(1, 6), theory).series
        go = _go_poly(args.go, theory)
        f1o = f1o_closed_form(f0, f0o, go, theory)
        f1 = f1_closed_form(f0, JetPoly.zero(jt), theory)
        serialize.dump(f0, theory, outdir / "f0.ottr")
        serialize.dump(f0o, theory, outdir / "f0o.ottr")
        serialize.dump(f1o, theory, outdir / "f1o.ottr")
        serialize.dump(f1, theory, outdir / "f1.ottr")
        for name in ("f0", "f0o", "f1o", "f1"):
            print(f"wrote {outdir / (name + '.ottr')}")
        return EXIT_OK
    raise CliInputError(f"unknown example {args.name!r}")


def cmd_validate_genus0(args) -> int:
    f0, theory = _load_series(args.f0)
    f0, theory = _shrink(f0, theory, args)
    return _report_exit(validate_closed_genus0(f0, theory), args.out, theory)


def cmd_validate_open(args) -> int:
    f0, theory = _load_series(args.f0)
    f0o, theory_o = _load_series(args.f0o)
    if theory_o != theory:
        raise CliInputError("f0 and f0o carry different theory blocks")
    f0, theory_s = _shrink(f0, theory, args)
    f0o, _ = _shrink(f0o, theory, args)
    return _report_exit(validate_open_genus0(f0, f0o, theory_s), args.out, theory_s)


def cmd_derive_genus1(args) -> int:
    f0, theory = _load_series(args.f0)
    f0o, theory_o = _load_series(args.f0o)
    if theory_o != theory:
        raise CliInputError("f0 and f0o carry different theory blocks")
    if args.go_file:
        go, _ = _load(args.go_file)
        if not isinstance(go, JetPoly):
            raise CliInputError(f"{args.go_file}: expected a jetpoly file")
    else:
        go = _go_poly(args.go, theory)
    if args.method == "formula":
        f1o = f1o_closed_form(f0, f0o, go, theory)
    elif args.method == "solve":
        f1o = solve_f1o(f0, f0o, go, theory)
    else:
        f1o = f1o_closed_form(f0, f0o, go, theory)
        other = solve_f1o(f0, f0o, go, theory)
        if not series_eq(f1o, other):
            print("derivations disagree", file=sys.stderr)
            return EXIT_INTERNAL
        print("solver and closed form agree on the shared window")
    serialize.dump(f1o, theory, args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_check_genus1(args) -> int:
    f0, theory = _load_series(args.f0)
    if args.f1o:
        if not args.f0o:
            raise CliInputError("open check needs --f0o")
        f0o, _ = _load_series(args.f0o)
        f1o, _ = _load_series(args.f1o)
        return _report_exit(validate_open_genus1(f0, f0o, f1o, theory),
                            args.out, theory)
    if not args.f1:
        raise CliInputError("pass --f1 (closed) or --f0o/--f1o (open)")
    f1, _ = _load_series(args.f1)
    return _report_exit(validate_closed_genus1(f0, f1, theory), args.out, theory)


def cmd_qpoly(args) -> int:
    q = qpoly(args.index)
    theory = TheoryData.rank1(Truncation(
        0, 0, 0, qpoly_truncation(args.index).jet_max,
        qpoly_truncation(args.index).eps_max))
    print(q)
    if args.out:
        serialize.dump(q, theory, args.out)
        print(f"wrote {args.out}")
    return EXIT_OK


def cmd_build_operators(args) -> int:
    f0, theory = _load_series(args.f0)
    f0o, _ = _load_series(args.f0o)
    if args.go_file:
        go, _ = _load(args.go_file)
    else:
        go = _go_poly(args.go, theory)
    table = two_point_table(f0, f0o, theory)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    amax = theory.trunc.level_max
    for alpha in range(1, theory.n + 1):
        for a in range(amax + 1):
            op = build_interior_op(alpha, a, table, go, theory)
            op.check_homogeneity()
            path = outdir / f"Lint_{alpha}_{a}.ottr"
            serialize.dump(op, theory, path)
            print(f"wrote {path}")
    for a in range(amax + 1):
        op = build_boundary_op(a, table, go, theory)
        op.check_homogeneity()
        path = outdir / f"Lboun_{a}.ottr"
        serialize.dump(op, theory, path)
        print(f"wrote {path}")
    return EXIT_OK


def cmd_check_evolution(args) -> int:
    f0, theory = _load_series(args.f0)
    f0o, _ = _load_series(args.f0o)
    f1o, _ = _load_series(args.f1o)
    report = linear_evolution_residual(f0, f0o, f1o, theory)
    return _report_exit(report, args.out, theory)


def cmd_gen_pst(args) -> int:
    theory = _default_theory(args.degree, args.amax)
    result = pst_generate(theory)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    serialize.dump(result.f0, theory, outdir / "f0.ottr")
    serialize.dump(result.f0o, theory, outdir / "f0o.ottr")
    serialize.dump(result.f1o, theory, outdir / "f1o.ottr")
    serialize.dump(result.report, theory, outdir / "flows.report.ottr")
    for name in ("f0", "f0o", "f1o", "flows.report"):
        print(f"wrote {outdir / (name + '.ottr')}")
    return EXIT_OK


def cmd_compare(args) -> int:
    a, theory_a = _load_series(args.first)
    b, theory_b = _load_series(args.second)
    if theory_a.trunc != theory_b.trunc:
        raise CliInputError("cannot compare across truncations; restrict first")
    same = series_eq(a, b, up_to=args.up_to_degree)
    print("equal on the shared reliable window" if same else "values differ")
    return EXIT_OK if same else EXIT_RESIDUAL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ottr",
        description="exact verification of open topological recursion data")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("gen-example", help="generate fixture potentials")
    p.add_argument("name", choices=["witten-rank1", "witten-n2", "open-rank1",
                                    "genus1-rank1"])
    p.add_argument("--degree", type=int, default=8)
    p.add_argument("--amax", type=int, default=3)
    p.add_argument("--go", default="zero", help="initial data: zero|phi3|vphi")
    p.add_argument("--outdir", default=".")
    p.set_defaults(func=cmd_gen_example)

    p = sub.add_parser("validate-genus0", help="check the closed genus-0 axioms")
    p.add_argument("f0")
    p.add_argument("--degree", type=int)
    p.add_argument("--amax", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_validate_genus0)

    p = sub.add_parser("validate-open", help="check the open genus-0 axioms")
    p.add_argument("f0")
    p.add_argument("f0o")
    p.add_argument("--degree", type=int)
    p.add_argument("--amax", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_validate_open)

    p = sub.add_parser("derive-genus1", help="produce the open genus-1 potential")
    p.add_argument("--f0", required=True)
    p.add_argument("--f0o", required=True)
    p.add_argument("--go", default="zero")
    p.add_argument("--go-file")
    p.add_argument("--method", choices=["formula", "solve", "both"], default="both")
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_derive_genus1)

    p = sub.add_parser("check-genus1", help="check genus-1 recursion relations")
    p.add_argument("--f0", required=True)
    p.add_argument("--f1")
    p.add_argument("--f0o")
    p.add_argument("--f1o")
    p.add_argument("--out")
    p.set_defaults(func=cmd_check_genus1)

    p = sub.add_parser("qpoly", help="print an exponential-conjugation polynomial")
    p.add_argument("index", type=int)
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_qpoly)

    p = sub.add_parser("build-operators", help="emit interior/boundary operators")
    p.add_argument("--f0", required=True)
    p.add_argument("--f0o", required=True)
    p.add_argument("--go", default="zero")
    p.add_argument("--go-file")
    p.add_argument("--outdir", default=".")
    p.set_defaults(func=cmd_build_operators)

    p = sub.add_parser("check-evolution",
                       help="check the first-order evolution system")
    p.add_argument("--f0", required=True)
    p.add_argument("--f0o", required=True)
    p.add_argument("--f1o", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_check_evolution)

    p = sub.add_parser("gen-pst", help="integrate the rank-1 Lax flows")
    p.add_argument("--degree", type=int, default=6)
    p.add_argument("--amax", type=int, default=2)
    p.add_argument("--outdir", default=".")
    p.set_defaults(func=cmd_gen_pst)

    p = sub.add_parser("compare", help="compare two series files")
    p.add_argument("first")
    p.add_argument("second")
    p.add_argument("--up-to-degree", type=int)
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (NoSolutionError, PstIntegrationError, JetOverflowError) as exc:
        print(f"internal inconsistency: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except CliInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (SeedError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
