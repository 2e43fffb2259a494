"""Command-line front end: ``bkpmoments <command> [flags]``.

Exit codes: 0 success, 1 a verified relation has a nonzero residual,
2 usage error, 3 refusal because a resource cap or quadrature budget was hit.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Sequence

from . import quadrature, reduce, relations, wick
from .series import parse_fraction

SCHEMA_VERSION = "1.0"

EXIT_OK, EXIT_FAILED, EXIT_USAGE, EXIT_REFUSED = 0, 1, 2, 3


class UsageError(ValueError):
    pass


def _int_list(text: str) -> list[int]:
    try:
        out = []
        for part in text.split(","):
            base, _, mult = part.partition("^")
            out += [int(base)] * int(mult or 1)
        return out
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad partition {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="file of key=value lines supplying default flags")
    common.add_argument("--output", "-o", help="write output here instead of stdout")
    common.add_argument("--format", choices=("json", "text"), default="json")

    field = argparse.ArgumentParser(add_help=False)
    field.add_argument("--lambdas", "--lambda", dest="lambdas", help="comma-separated eigenvalues of Lambda")
    field.add_argument("--N", type=int, help="matrix size (seeded random lambdas if --lambdas is absent)")
    field.add_argument("--seed", type=int, default=0)

    p = argparse.ArgumentParser(prog="bkpmoments", description="Moment relations for the BKP external-field matrix model.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", parents=[common], help="generate a relation family at one order")
    g.add_argument("--family", choices=relations.FAMILIES + ("all",), required=True)
    g.add_argument("--order", type=int, required=True)

    v = sub.add_parser("verify", parents=[common, field], help="check relations against exact moments")
    v.add_argument("--family", choices=relations.FAMILIES + ("all",), required=True)
    v.add_argument("--order", type=int, required=True)
    v.add_argument("--g-order", type=int, default=0)
    v.add_argument("--cap", type=int, default=wick.DEFAULT_DEGREE_CAP)

    r = sub.add_parser("reduce", parents=[common], help="reduce bilinear relations modulo the linear span")
    r.add_argument("--order", type=int, required=True)
    r.add_argument("--closure-degree", type=int, default=1)
    r.add_argument("--strategy", choices=reduce.PIVOT_STRATEGIES, default="min_denominator")
    r.add_argument("--cap", type=int, default=reduce.DEFAULT_BASIS_CAP)
    r.add_argument("--probe", action="store_true",
                   help="reduce every order 8..ORDER and check completeness of the linear relations")

    z = sub.add_parser("z-eval", parents=[common, field], help="partition function by Pfaffian quadrature")
    z.add_argument("--g", type=float, default=0.0)
    z.add_argument("--tol", type=float, default=1e-10)

    m = sub.add_parser("moments", parents=[common, field], help="exact perturbative moment M_partition")
    m.add_argument("--partition", type=_int_list, required=True, help='e.g. "3,1" or "3^2,1^2"')
    m.add_argument("--g-order", type=int, default=0)
    m.add_argument("--cap", type=int, default=wick.DEFAULT_DEGREE_CAP)

    c = sub.add_parser("residue-check", parents=[common, field], help="both sides of the residue identity at N=2")
    c.add_argument("--k", type=int, action="append", help="may be repeated; default 2 and 4")
    c.add_argument("--tol", type=float, default=1e-12)
    return p


def _config_args(argv: list[str]) -> list[str]:
    """Turn ``--config`` key=value lines into flags placed before the user's own."""
    path = None
    for i, a in enumerate(argv):
        if a == "--config" and i + 1 < len(argv):
            path = argv[i + 1]
        elif a.startswith("--config="):
            path = a.split("=", 1)[1]
    if path is None:
        return argv
    extra = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key = key.strip().replace("_", "-")
        if key in ("command", "config"):
            continue
        extra += [f"--{key}", value.strip()]
    return argv[:1] + extra + argv[1:]


def _field(args, required_even: bool = False) -> wick.ExternalField:
    if args.lambdas:
        fld = wick.ExternalField.parse(args.lambdas)
        if args.N is not None and args.N != fld.N:
            raise UsageError(f"--N {args.N} disagrees with {fld.N} lambdas")
    elif args.N:
        fld = wick.ExternalField.random(args.N, args.seed)
    else:
        raise UsageError("give --lambdas or --N")
    if required_even and fld.N % 2:
        raise UsageError("N must be even")
    return fld


def _families(name: str) -> Sequence[str]:
    return relations.FAMILIES if name == "all" else (name,)


def cmd_gen(args):
    sets = [relations.generate(f, args.order) for f in _families(args.family)]
    payload = {"relation_sets": [s.to_json() for s in sets]}
    text = []
    for s in sets:
        text.append(f"family {s.family}, order {s.order}: {len(s.relations)} relations")
        if s.chain:
            text.append(f"  chain (scale {s.chain_scale}):")
            text += [f"    {line}" for line in s.chain]
        for b in s.blocks:
            text.append(f"  block {b.prefactor} * ({b.polynomial_text()}) * [{b.expr}]")
        text += [f"  0 = {r}" for r in s.relations]
    return payload, text, EXIT_OK


def cmd_verify(args):
    fld = _field(args)
    reports = []
    for fam in _families(args.family):
        for rel in relations.generate(fam, args.order).relations:
            rep = relations.verify(rel, fld, args.g_order, cap=args.cap)
            reports.append({"family": fam, **rep.to_json()})
    ok = all(r["holds"] for r in reports)
    payload = {"N": fld.N, "lambdas": fld.to_json(), "g_order": args.g_order, "all_hold": ok, "reports": reports}
    text = [f"N={fld.N} lambdas={','.join(fld.to_json())} g-order={args.g_order}"]
    text += [f"  [{'ok' if r['holds'] else 'FAIL'}] {r['family']}: {r['relation']}" for r in reports]
    return payload, text, EXIT_OK if ok else EXIT_FAILED


def cmd_reduce(args):
    if args.probe:
        summary = reduce.probe_open_question(args.order, args.closure_degree, args.strategy, args.cap, True)
        return {"probe": summary.to_json()}, summary.summary_lines(), EXIT_OK
    rep = reduce.reduce_quadratic(args.order, None, args.closure_degree, args.strategy, args.cap)
    return {"report": rep.to_json()}, rep.summary_lines(), EXIT_OK


def cmd_z_eval(args):
    if not args.lambdas:
        raise UsageError("z-eval needs --lambdas")
    lams = [float(parse_fraction(x)) for x in args.lambdas.split(",") if x.strip()]
    rep = quadrature.z_eval(lams, args.g, args.tol)
    payload = rep.to_json()
    payload["value"] = float(payload["value"])
    payload["error_estimate"] = float(payload["error_estimate"])
    text = [f"Z = {payload['value']!r} +- {payload['error_estimate']:.2e}"]
    if rep.warning:
        text.append(f"warning: {rep.warning}")
    return {"z_report": payload}, text, EXIT_OK


def cmd_moments(args):
    fld = _field(args)
    key = tuple(sorted(args.partition, reverse=True))
    value = wick.moment(key, fld, args.g_order, cap=args.cap)
    payload = wick.moment_json(key, fld, args.g_order, value)
    return payload, [f"M{list(key)} = " + " + ".join(f"({c}) g^{i}" for i, c in enumerate(payload["coefficients"]))], EXIT_OK


def cmd_residue_check(args):
    if not args.lambdas:
        raise UsageError("residue-check needs --lambdas")
    lams = [parse_fraction(x) for x in args.lambdas.split(",") if x.strip()]
    reps = [quadrature.residue_side_check(k, lams, args.tol).to_json() for k in (args.k or [2, 4])]
    text = [f"k={r['k']}: lhs={r['lhs']!r} rhs={r['rhs']!r} ratio={r['ratio']!r}" for r in reps]
    return {"checks": reps}, text, EXIT_OK


COMMANDS = {
    "gen": cmd_gen,
    "verify": cmd_verify,
    "reduce": cmd_reduce,
    "z-eval": cmd_z_eval,
    "moments": cmd_moments,
    "residue-check": cmd_residue_check,
}


def run(argv: Sequence[str] | None = None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(_config_args(argv))
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    except (UsageError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        payload, text, code = COMMANDS[args.command](args)
    except (wick.CapExceeded, reduce.BasisTooLarge, quadrature.QuadratureError) as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_REFUSED
    except (UsageError, ValueError, ZeroDivisionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.format == "json":
        out = json.dumps({"schema_version": SCHEMA_VERSION, "command": args.command, **payload}, indent=2) + "\n"
    else:
        out = "\n".join(text) + "\n"
    if args.output:
        Path(args.output).write_text(out)
    else:
        stdout.write(out)
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
