"""Command-line entry point.

Exit status of ``solve``: 0 optimal, 10 infeasible, 20 timed out, 1 error.
"""

from __future__ import annotations

import argparse
import functools
import logging
import os
import sys
from pathlib import Path

from . import bench
from .cudf import CudfParseError, parse_configuration, parse_document, write_configuration, write_document
from .emitters import ExternalSolverError, ExternalSolverSpec, emit_lp, emit_opb, opb_name_map, run_external
from .encoder import build_model, criteria_values, decode
from .solver import INFEASIBLE, OPTIMAL, TIMED_OUT, lexicographic_solve, solve
from .validator import check_consistency, check_request, diff_configurations

log = logging.getLogger("cudfmilp")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INFEASIBLE = 10
EXIT_TIMEOUT = 20

CRITERIA = {"aggregate": "aggregate", "c1": "criterion1", "c2": "criterion2", "lex": "lex"}


class CliError(Exception):
    pass


def _read(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise CliError(f"{path}: {e.strerror}") from None


def _load(path: str):
    try:
        return parse_document(_read(path))
    except CudfParseError as e:
        raise CliError(f"{path}: {e}") from None


def _write(text: str, out: str | None) -> None:
    if out and out != "-":
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def solver_from_arg(arg: str):
    """``builtin`` or ``external:opb:<cmd>`` / ``external:lp:<cmd>``."""
    if arg == "builtin":
        return solve
    if arg.startswith("external:"):
        try:
            spec = ExternalSolverSpec.parse(arg[len("external:"):])
        except ValueError as e:
            raise CliError(str(e)) from None
        return functools.partial(run_external, spec)
    raise CliError(f"unknown solver {arg!r}")


def _solver_label(arg: str) -> str:
    if arg == "builtin":
        return arg
    command = arg.split(":", 2)[-1].split()
    return os.path.basename(command[0]) if command else arg


def cmd_solve(args) -> int:
    u, r = _load(args.file)
    init = u.initial_configuration()
    fn = solver_from_arg(args.solver)
    if args.criteria == "lex":
        out = lexicographic_solve(u, init, r, args.timeout, solver=fn)
    else:
        model = build_model(u, init, r, CRITERIA[args.criteria], args.paper_exact_weight)
        out = fn(model, args.timeout)

    if out.assignment is None:
        sys.stdout.write(write_configuration(None, failed=True))
        log.info("status %s", out.status)
        return EXIT_INFEASIBLE if out.status == INFEASIBLE else EXIT_TIMEOUT

    final = decode(out.assignment)
    report = check_consistency(u, final)
    request_report = check_request(u, init, r, final)
    if not (report.ok and request_report.ok):
        for v in report.violations + request_report.violations:
            print(f"internal error: {v}", file=sys.stderr)
        raise CliError("solver answer rejected by the validator")
    sys.stdout.write(write_configuration(final))
    z1, z2 = criteria_values(u, init, final)
    log.info("status %s objective %s criteria (%d, %d)", out.status, out.objective, z1, z2)
    return EXIT_OK if out.status == OPTIMAL else EXIT_TIMEOUT


def cmd_encode(args) -> int:
    u, r = _load(args.file)
    mode = CRITERIA[args.criteria]
    if mode == "lex":
        raise CliError("encode needs a single objective; use aggregate, c1 or c2")
    model = build_model(u, u.initial_configuration(), r, mode, args.paper_exact_weight)
    if args.format == "lp":
        _write(emit_lp(model), args.output)
    else:
        _write(emit_opb(model), args.output)
        if args.names:
            Path(args.names).write_text(opb_name_map(model), encoding="utf-8")
    return EXIT_OK


def cmd_validate(args) -> int:
    u, r = _load(args.file)
    init = u.initial_configuration()
    try:
        final = parse_configuration(_read(args.solution))
    except CudfParseError as e:
        raise CliError(f"{args.solution}: {e}") from None
    if final is None:
        out = solve(build_model(u, init, r), args.timeout)
        if out.status == INFEASIBLE:
            print("declared unsolvable: confirmed, the problem is infeasible")
            return EXIT_OK
        if out.status == TIMED_OUT and out.assignment is None:
            print("declared unsolvable: could not confirm within the time limit")
        else:
            print("declared unsolvable: wrong, a solution exists")
        return EXIT_ERROR
    violations = check_consistency(u, final).violations + check_request(u, init, r, final).violations
    for v in violations:
        print(v)
    removed, changed = diff_configurations(init, final, u)
    print(f"removed functionalities: {removed}")
    print(f"changed units: {changed}")
    print("ok" if not violations else f"{len(violations)} violation(s)")
    return EXIT_OK if not violations else EXIT_ERROR


def cmd_gen(args) -> int:
    u, _ = _load(args.base)
    init = u.initial_configuration()
    if args.count > 1 and not args.out_dir:
        raise CliError("--count > 1 needs --out-dir")
    for k in range(args.count):
        seed = args.seed + k
        try:
            req = bench.gen_random((u, init), args.install, args.upgrade, seed)
        except ValueError as e:
            raise CliError(str(e)) from None
        text = write_document(u, req)
        if args.out_dir:
            Path(args.out_dir).mkdir(parents=True, exist_ok=True)
            (Path(args.out_dir) / f"{args.prefix}{seed}.cudf").write_text(text, encoding="utf-8")
        else:
            sys.stdout.write(text)
    return EXIT_OK


def cmd_synth(args) -> int:
    u = bench.synth_universe(args.units, seed=args.seed, n_installed=args.installed)
    _write(write_document(u), args.output)
    return EXIT_OK


def cmd_bench(args) -> int:
    mode = CRITERIA[args.criteria]
    if mode == "lex":
        raise CliError("bench needs a single objective; use aggregate, c1 or c2")
    instances = []
    for path in args.files:
        u, r = _load(path)
        instances.append((Path(path).stem, build_model(u, u.initial_configuration(), r, mode)))
    solvers = {}
    for arg in args.solver or ["builtin"]:
        solvers[_solver_label(arg)] = solver_from_arg(arg)
    records, stats = bench.run_bench(instances, solvers, args.timeout, args.jobs)
    if args.records:
        _write(bench.format_records(records), args.records)
    sys.stdout.write(bench.format_table(args.title, stats))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cudfmilp", description="Solve CUDF upgradeability problems as 0-1 programs.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
    sub = p.add_subparsers(dest="command", required=True)

    def criteria(sp):
        sp.add_argument("--criteria", choices=sorted(CRITERIA), default="aggregate")
        sp.add_argument(
            "--paper-exact-weight",
            action="store_true",
            help="weight criterion 1 by Card(P) instead of Card(P)+1",
        )

    sp = sub.add_parser("solve", parents=[common], help="solve a CUDF problem and print the final configuration")
    sp.add_argument("file", help="CUDF file, or - for stdin")
    criteria(sp)
    sp.add_argument("--solver", default="builtin", help="builtin, external:opb:<cmd> or external:lp:<cmd>")
    sp.add_argument("--timeout", type=float, default=300.0)
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("encode", parents=[common], help="write the 0-1 program as LP or OPB")
    sp.add_argument("file")
    sp.add_argument("--format", choices=("lp", "opb"), default="lp")
    criteria(sp)
    sp.add_argument("-o", "--output")
    sp.add_argument("--names", help="write the OPB variable name map here")
    sp.set_defaults(func=cmd_encode)

    sp = sub.add_parser("validate", parents=[common], help="check a solution file against a CUDF problem")
    sp.add_argument("file")
    sp.add_argument("solution")
    sp.add_argument("--timeout", type=float, default=300.0, help="time limit to confirm a FAIL answer")
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("gen", parents=[common], help="random install/upgrade requests over a base installation")
    sp.add_argument("base")
    sp.add_argument("--install", type=int, default=0)
    sp.add_argument("--upgrade", type=int, default=0)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--count", type=int, default=1)
    sp.add_argument("--out-dir")
    sp.add_argument("--prefix", default="rand-")
    sp.set_defaults(func=cmd_gen)

    sp = sub.add_parser("synth", parents=[common], help="generate a synthetic package universe")
    sp.add_argument("--units", type=int, required=True)
    sp.add_argument("--installed", type=int, default=0)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("-o", "--output")
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("bench", parents=[common], help="run solvers over instances and print statistics")
    sp.add_argument("files", nargs="+")
    sp.add_argument("--solver", action="append", help="repeatable; default builtin")
    sp.add_argument("--criteria", choices=("aggregate", "c1", "c2"), default="aggregate")
    sp.add_argument("--timeout", type=float, default=300.0)
    sp.add_argument("--jobs", type=int, default=1)
    sp.add_argument("--records", help="write tab-separated run records here")
    sp.add_argument("--title", default="instances")
    sp.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(format="%(message)s")
    log.setLevel(logging.INFO if args.verbose else logging.WARNING)
    if getattr(args, "timeout", 1) <= 0:
        print("cudfmilp: --timeout must be positive", file=sys.stderr)
        return EXIT_ERROR
    try:
        return args.func(args)
    except (CliError, ExternalSolverError) as e:
        print(f"cudfmilp: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
