"""Command line front end: ``dtl <command> ...``.

Every command prints one JSON document on stdout (``export-dot`` prints DOT).
Exit codes: 0 a verdict was produced, 2 the budget ran out or the answer is
unknown, 64 bad usage, 65 unparsable or invalid input.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import io
from .finite_model import OracleStatus, evaluate, oracle_refute, validate_model
from .formula import ParseError, closure_of, enumerate_types, parse, subformulas, to_json, to_text
from .frames import FrameError
from .quasimodel import satisfies, validate_quasimodel
from .search import FamilyStatus, decide_validity, find_satisfying_quasimodel
from .temporal import check_relation

EXIT_OK, EXIT_UNKNOWN, EXIT_USAGE, EXIT_INPUT = 0, 2, 64, 65

log = logging.getLogger("dtl")


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _emit(doc) -> None:
    print(json.dumps(doc, indent=2, default=str))


def _formula(text: str):
    return parse(text)


def cmd_parse(args) -> int:
    phi = _formula(args.formula)
    subs = subformulas(phi)
    _emit({"verdict": "PARSED", "certificate": None, "formula": to_text(phi), "ast": to_json(phi),
           "subformulas": [to_text(f) for f in subs], "length": len(subs)})
    return EXIT_OK


def cmd_types(args) -> int:
    phi = _formula(args.formula)
    c = closure_of(phi)
    types = [[to_text(f) for f in t] for t in enumerate_types(c)]
    _emit({"verdict": "TYPES", "certificate": None, "formula": to_text(phi),
           "closure": [to_text(f) for f in c.signed], "count": len(types), "types": types})
    return EXIT_OK


def cmd_check_quasimodel(args) -> int:
    phi = _formula(args.formula)
    Q = io.load_quasimodel(args.file, phi)
    report = validate_quasimodel(Q)
    w = satisfies(Q, phi)
    _emit({"verdict": "VALID_QUASIMODEL" if report.ok else "INVALID_QUASIMODEL",
           "certificate": None, "report": report.to_json(),
           "satisfied_at": Q.name(w) if w is not None else None})
    return EXIT_OK if report.ok else EXIT_INPUT


def cmd_check_relation(args) -> int:
    phi = _formula(args.formula) if args.formula else None
    rel = io.load_relation(args.file, phi)
    report = check_relation(rel)
    _emit({"verdict": "SUCCESSOR_WITNESS" if report.ok else "NOT_A_WITNESS",
           "certificate": None, "report": report.to_json()})
    return EXIT_OK if report.ok else EXIT_INPUT


def cmd_eval(args) -> int:
    M = io.load_model(args.file)
    report = validate_model(M)
    if not report.ok:
        _emit({"verdict": "INVALID_MODEL", "certificate": None, "report": report.to_json()})
        return EXIT_INPUT
    phi = _formula(args.formula)
    sets = evaluate(M, phi)
    holds = sorted(sets[closure_of(phi).formula])
    _emit({"verdict": "TRUE_EVERYWHERE" if len(holds) == M.n else "FALSE_SOMEWHERE",
           "certificate": None, "points": holds,
           "sets": {to_text(f): sorted(s) for f, s in sets.items()}})
    return EXIT_OK


def cmd_oracle(args) -> int:
    phi = _formula(args.formula)
    res = oracle_refute(phi, args.max_points, args.budget_units, args.workers)
    if res.status is OracleStatus.FOUND:
        _emit({"verdict": "COUNTERMODEL", "certificate": {"model": res.model.to_json(), "point": res.point},
               "units": res.units})
        return EXIT_OK
    if res.status is OracleStatus.EXHAUSTED:
        _emit({"verdict": "NO_FINITE_COUNTERMODEL", "certificate": None, "max_points": args.max_points,
               "units": res.units,
               "note": f"no countermodel with at most {args.max_points} points; "
                       "this does not mean the formula is valid"})
        return EXIT_OK
    _emit({"verdict": "UNKNOWN", "certificate": None, "status": "budget", "units": res.units})
    return EXIT_UNKNOWN


def cmd_sat(args) -> int:
    psi = _formula(args.formula)
    res = find_satisfying_quasimodel(psi, args.max_worlds, args.budget_units, args.workers)
    if res.quasimodel is not None:
        _emit({"verdict": "SATISFIABLE", "certificate": io.quasimodel_to_json(res.quasimodel),
               "units": res.units})
        return EXIT_OK
    if res.status is FamilyStatus.EXHAUSTED:
        _emit({"verdict": "NO_QUASIMODEL", "certificate": None, "max_worlds": args.max_worlds,
               "units": res.units,
               "note": f"no quasimodel with at most {args.max_worlds} worlds; larger ones may exist"})
        return EXIT_OK
    _emit({"verdict": "UNKNOWN", "certificate": None, "status": "budget", "units": res.units})
    return EXIT_UNKNOWN


def cmd_valid(args) -> int:
    phi = _formula(args.formula)
    v = decide_validity(phi, args.max_depth, args.budget_units, args.max_worlds, args.workers)
    _emit(v.to_json())
    return EXIT_UNKNOWN if v.verdict == "UNKNOWN" else EXIT_OK


def cmd_export_dot(args) -> int:
    phi = _formula(args.formula) if args.formula else None
    doc = io.read_json(args.file)
    if "g" in doc:
        obj = io.load_quasimodel(doc, phi)
    elif "root" in doc:
        obj = io.load_local_frame(doc, phi)
    else:
        obj = io.load_frame(doc, phi)
    sys.stdout.write(io.to_dot(obj))
    return EXIT_OK


def build_parser() -> Parser:
    p = Parser(prog="dtl", description="Dynamic topological logic: quasimodels, finite models and validity search.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", parser_class=Parser)

    s = sub.add_parser("parse", help="parse a formula and list its subformulas")
    s.add_argument("formula")
    s.set_defaults(func=cmd_parse)

    s = sub.add_parser("types", help="list every type over the closure of a formula")
    s.add_argument("formula")
    s.set_defaults(func=cmd_types)

    s = sub.add_parser("check-quasimodel", help="validate a quasimodel document")
    s.add_argument("file")
    s.add_argument("formula")
    s.set_defaults(func=cmd_check_quasimodel)

    s = sub.add_parser("check-relation", help="check a relation between two local frames")
    s.add_argument("file")
    s.add_argument("formula", nargs="?")
    s.set_defaults(func=cmd_check_relation)

    s = sub.add_parser("eval", help="evaluate a formula on a finite model")
    s.add_argument("file")
    s.add_argument("formula")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("oracle", help="search finite countermodels")
    s.add_argument("formula")
    s.add_argument("--max-points", type=int, default=3)
    s.add_argument("--budget-units", type=int, default=None)
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=cmd_oracle)

    s = sub.add_parser("sat", help="search a small quasimodel satisfying a formula")
    s.add_argument("formula")
    s.add_argument("--max-worlds", type=int, default=3)
    s.add_argument("--budget-units", type=int, default=10 ** 7)
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=cmd_sat)

    s = sub.add_parser("valid", help="semi-decide validity by iterative deepening")
    s.add_argument("formula")
    s.add_argument("--max-depth", type=int, default=2)
    s.add_argument("--budget-units", type=int, default=10 ** 6)
    s.add_argument("--max-worlds", type=int, default=3)
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=cmd_valid)

    s = sub.add_parser("export-dot", help="render a frame or quasimodel document as DOT")
    s.add_argument("file")
    s.add_argument("--formula", default=None)
    s.set_defaults(func=cmd_export_dot)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("dtl: a command is required")
        for name in ("max_points", "max_worlds", "workers"):
            if getattr(args, name, 1) is not None and getattr(args, name, 1) < 1:
                raise UsageError(f"dtl: --{name.replace('_', '-')} must be at least 1")
        if getattr(args, "max_depth", 0) < 0:
            raise UsageError("dtl: --max-depth must be non-negative")
    except UsageError as exc:
        print(exc, file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"dtl: parse error at byte {exc.offset}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (io.FormatError, FrameError, ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"dtl: invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
