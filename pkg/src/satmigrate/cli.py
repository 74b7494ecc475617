"""Command-line front end.

Subcommands: migrate, explain, check, stats, emit. Inputs are local
Packages files for the testing and unstable repositories; all diagnostics
go to stderr and exit codes are fixed for scripting:

0 success, 1 usage/parse/IO error, 2 unsolvable, 3 timeout,
4 check found violations.
"""

from __future__ import annotations

import argparse
import difflib
import shlex
import statistics
import sys
from pathlib import Path

from . import controlfile, encoder, engine, repo, satcore
from .closure import ClosureIndex
from .encoder import PolicyRules
from .engine import Budgets, MigrationRequest
from .repo import Package, Universe

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_UNSOLVABLE = 2
EXIT_TIMEOUT = 3
EXIT_VIOLATIONS = 4


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return EXIT_ERROR


def _load_universe(args) -> Universe:
    repos = []
    for path in (args.testing, args.unstable):
        repos.append(controlfile.parse_packages_stream(Path(path).read_bytes()))
    return repo.build_universe(repos[0], repos[1])


def _parse_policy_literal(token: str) -> tuple[int, Package]:
    sign = 1
    if token.startswith("+"):
        token = token[1:]
    elif token.startswith("-"):
        sign = -1
        token = token[1:]
    return sign, Package.parse(token)


def load_policy(text: str) -> PolicyRules:
    """Line-oriented policy file: `group: [+|-]name/ver ...` and
    `clause: [+|-]name/ver ...`; blank lines and '#' comments ignored."""
    rules = PolicyRules()
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, rest = line.partition(":")
        if not sep or key.strip() not in ("group", "clause"):
            raise ValueError(f"policy line {number}: cannot parse {line!r}")
        literals = [_parse_policy_literal(tok) for tok in rest.split()]
        if not literals:
            raise ValueError(f"policy line {number}: empty rule")
        if key.strip() == "group":
            rules.groups.append(literals)
        else:
            rules.extra_clauses.append(literals)
    return rules


def _request_from_args(args, mode: str, target: Package | None = None) -> MigrationRequest:
    encoding = {"p5": "p5-pruned", "p2-oracle": "p2-oracle"}.get(
        args.encoding, args.encoding)
    policy = None
    if args.policy:
        policy = load_policy(Path(args.policy).read_text())
    solver = shlex.split(args.solver) if args.solver else None
    budgets = Budgets()
    if args.timeout is not None:
        budgets = Budgets(sat_timeout=args.timeout, pmax_timeout=args.timeout)
    return MigrationRequest(mode=mode, target=target, encoding=encoding,
                            policy=policy, solver_command=solver,
                            budgets=budgets)


def _print_structured(document: dict):
    sys.stdout.write(engine.dump_structured(document))


def cmd_migrate(args) -> int:
    try:
        universe = _load_universe(args)
        mode = {"max": "max", "min": "min-nontrivial", "target": "target"}[args.mode]
        target = Package.parse(args.target) if args.target else None
        if mode == "target" and target is None:
            return _fail("--mode target needs --target NAME/VER")
        request = _request_from_args(args, mode, target)
        if args.all_deltas:
            results = engine.alternative_optima(request, universe, args.all_deltas)
        else:
            results = [engine.solve_migration(request, universe)]
    except engine.Unsolvable as exc:
        print(f"unsolvable: {exc}", file=sys.stderr)
        return EXIT_UNSOLVABLE
    except engine.SolveTimedOut as exc:
        print(f"timeout: {exc}", file=sys.stderr)
        return EXIT_TIMEOUT
    except (OSError, ValueError, controlfile.ControlFileError, repo.RepoError,
            encoder.EncoderError, engine.EngineError, satcore.SatCoreError) as exc:
        return _fail(str(exc))
    if args.format == "structured":
        documents = [engine.structured_report(r) for r in results]
        _print_structured(documents[0] if len(documents) == 1
                          else {"alternatives": documents})
    else:
        for i, result in enumerate(results):
            if i:
                print(f"--- alternative {i} ---")
            sys.stdout.write(engine.render_report(result))
            hints = engine.render_hints(result)
            print("hints:")
            sys.stdout.write(hints)
    return EXIT_OK


def cmd_explain(args) -> int:
    try:
        universe = _load_universe(args)
        target = Package.parse(args.package)
    except (OSError, ValueError, controlfile.ControlFileError,
            repo.RepoError) as exc:
        return _fail(str(exc))
    if target not in universe.packages:
        close = difflib.get_close_matches(
            target.name, {p.name for p in universe.packages}, n=3)
        hint = f"; did you mean: {', '.join(close)}" if close else ""
        return _fail(f"unknown package {target}{hint}")
    try:
        request = _request_from_args(args, "target", target)
        idx = ClosureIndex(universe) \
            if request.encoding not in ("p1", "p2", "p2-oracle") else None
        try:
            result = engine.solve_migration(request, universe)
        except engine.Unsolvable:
            explanation = engine.explain_non_migration(target, universe, idx, request)
            if args.format == "structured":
                _print_structured({"package": str(target), "migrates": False,
                                   "explanation": list(explanation.facts)})
            else:
                sys.stdout.write(explanation.render())
            return EXIT_OK
    except engine.SolveTimedOut as exc:
        print(f"timeout: {exc}", file=sys.stderr)
        return EXIT_TIMEOUT
    except (ValueError, OSError, encoder.EncoderError, engine.EngineError,
            satcore.SatCoreError) as exc:
        return _fail(str(exc))
    if args.format == "structured":
        _print_structured({"package": str(target), "migrates": True,
                           "delta": result.delta,
                           "report": engine.structured_report(result)})
    else:
        print(f"{target} migrates with delta {result.delta}")
        sys.stdout.write(engine.render_report(result))
    return EXIT_OK


def cmd_check(args) -> int:
    try:
        universe = _load_universe(args)
        violations = repo.check_testing(universe)
    except (OSError, ValueError, controlfile.ControlFileError,
            repo.RepoError) as exc:
        return _fail(str(exc))
    entries = []
    for violation in violations:
        entry = {"kind": violation.kind, "detail": violation.detail,
                 "packages": [str(p) for p in violation.subjects],
                 "explanation": None}
        if violation.kind == "trimmedness":
            pkg = violation.subjects[0]
            clauses, info, ctx = repo.installability_clauses(
                pkg, universe.testing, universe)
            mus = satcore.extract_mus(clauses, num_vars=len(ctx))
            entry["explanation"] = [engine.describe_clause(info[i])
                                    for i in mus.core]
        entries.append(entry)
    if args.format == "structured":
        _print_structured({"clean": not entries, "violations": entries})
    elif not entries:
        print("testing is trimmed and unique")
    else:
        for entry in entries:
            print(f"{entry['kind']}: {entry['detail']}")
            for fact in entry["explanation"] or ():
                print(f"  - {fact}")
    return EXIT_OK if not entries else EXIT_VIOLATIONS


def _stats_rows(universe: Universe, idx: ClosureIndex) -> list[dict]:
    rows = []
    names = (["p1"] if not universe.conflicts else []) + \
        ["p3", "p4", "p5-strict", "p5-pruned"]
    for name in names:
        problem = encoder.build_encoding(universe, idx, name)
        stats = encoder.instance_stats(problem)
        rows.append({
            "encoding": stats.encoding_id,
            "atoms": stats.atoms_total,
            "package_atoms": stats.package_atoms,
            "inst_atoms": stats.inst_atoms,
            "clauses": stats.hard_clauses,
            "by_family": stats.by_family,
        })
    return rows


def cmd_stats(args) -> int:
    try:
        universe = _load_universe(args)
        idx = ClosureIndex(universe)
        rows = _stats_rows(universe, idx)
    except (OSError, ValueError, controlfile.ControlFileError, repo.RepoError,
            encoder.EncoderError) as exc:
        return _fail(str(exc))
    def _distribution(values):
        return {"min": min(values, default=0),
                "median": int(statistics.median(values)) if values else 0,
                "max": max(values, default=0)}

    sizes = sorted(idx.closure_sizes().items(), key=lambda kv: (-kv[1], kv[0]))
    closure_dist = _distribution([s for _, s in sizes])
    connecting_dist = _distribution([len(idx.connecting(p))
                                     for p in idx.packages])
    top = [{"package": str(p), "closure_size": s} for p, s in sizes[:5]]
    if args.format == "structured":
        _print_structured({
            "packages": len(universe.packages),
            "easy": len(idx.easy),
            "closure_size_distribution": closure_dist,
            "connecting_size_distribution": connecting_dist,
            "largest_closures": top,
            "encodings": rows,
        })
        return EXIT_OK
    print(f"packages: {len(universe.packages)}")
    print(f"easy packages: {len(idx.easy)}")
    print("closure sizes: min {min} median {median} max {max}".format(**closure_dist))
    print("connecting sizes: min {min} median {median} max {max}".format(
        **connecting_dist))
    for entry in top:
        print(f"  top closure: {entry['package']} ({entry['closure_size']})")
    print(f"{'encoding':<10} {'atoms':>8} {'inst':>8} {'clauses':>8}")
    for row in rows:
        print(f"{row['encoding']:<10} {row['atoms']:>8} {row['inst_atoms']:>8} "
              f"{row['clauses']:>8}")
    return EXIT_OK


def cmd_emit(args) -> int:
    try:
        universe = _load_universe(args)
        mode = {"max": "max", "min": "min-nontrivial", "target": "target"}[args.mode]
        target = Package.parse(args.target) if args.target else None
        if mode == "target" and target is None:
            return _fail("--mode target needs --target NAME/VER")
        request = _request_from_args(args, mode, target)
        idx = ClosureIndex(universe) \
            if request.encoding not in ("p1", "p2", "p2-oracle") else None
        problem = engine.build_problem(request, universe, idx)
        engine.attach_objective(request, universe, problem)
        if args.kind == "cnf" and problem.soft:
            return _fail("cnf cannot carry the soft clauses of this objective")
        payload = satcore.emit_dimacs(problem.hard,
                                      problem.soft if args.kind == "wcnf" else None,
                                      num_vars=problem.num_vars, kind=args.kind)
        out = Path(args.out)
        out.write_bytes(payload)
        map_path = Path(str(out) + ".map")
        map_path.write_text(problem.atoms.render_map())
    except (OSError, ValueError, controlfile.ControlFileError, repo.RepoError,
            encoder.EncoderError, engine.EngineError) as exc:
        return _fail(str(exc))
    if args.format == "structured":
        _print_structured({"instance": str(out), "atom_map": str(map_path),
                           "kind": args.kind,
                           "atoms": problem.num_vars,
                           "hard_clauses": len(problem.hard),
                           "soft_clauses": len(problem.soft)})
    else:
        print(f"wrote {out} and {map_path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--testing", required=True, help="Packages file for testing")
    common.add_argument("--unstable", required=True, help="Packages file for unstable")
    common.add_argument("--encoding", default="p5",
                        choices=["p1", "p3", "p4", "p5", "p5-strict", "p2-oracle"])
    common.add_argument("--policy", help="policy rules file")
    common.add_argument("--solver", help="external solver command")
    common.add_argument("--timeout", type=float, help="solver budget in seconds")
    common.add_argument("--format", default="text", choices=["text", "structured"])
    common.add_argument("--seed", type=int, default=0,
                        help="seed for test-instance generation (reserved)")
    modeful = argparse.ArgumentParser(add_help=False)
    modeful.add_argument("--mode", default="max", choices=["max", "min", "target"])
    modeful.add_argument("--target", help="candidate package as NAME/VER")

    parser = argparse.ArgumentParser(
        prog="satmigrate",
        description="Decide which packages may migrate from unstable to "
                    "testing while keeping every package installable.")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("migrate", parents=[common, modeful],
                       help="solve the migration and print report and hints")
    p.add_argument("--all-deltas", type=int, default=0, metavar="K",
                   help="also report up to K alternative optima")
    p.set_defaults(func=cmd_migrate)
    p = sub.add_parser("explain", parents=[common],
                       help="explain why a package does or does not migrate")
    p.add_argument("package", help="candidate package as NAME/VER")
    p.set_defaults(func=cmd_explain)
    p = sub.add_parser("check", parents=[common],
                       help="verify that testing is trimmed and unique")
    p.set_defaults(func=cmd_check)
    p = sub.add_parser("stats", parents=[common],
                       help="print per-encoding instance sizes")
    p.set_defaults(func=cmd_stats)
    p = sub.add_parser("emit", parents=[common, modeful],
                       help="write the instance as DIMACS plus an atom map")
    p.add_argument("out", help="output path for the DIMACS file")
    p.add_argument("--kind", default="wcnf", choices=["cnf", "wcnf"])
    p.set_defaults(func=cmd_emit)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
