"""Migration pipeline.

Builds the requested encoding and objective over a universe, solves with
the embedded solver or an external executable, decodes the package atoms
back into a candidate repository, re-verifies admissibility from the raw
model data, and renders reports, hints and non-migration explanations.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from . import encoder, repo, satcore
from .closure import ClosureIndex
from .encoder import EncodedProblem, PolicyRules
from .repo import Package, Universe
from .satcore import SolveStatus

MODES = ("max", "min-nontrivial", "target")


class EngineError(Exception):
    """Base class for pipeline failures."""


class Unsolvable(EngineError):
    """Hard clauses are unsatisfiable.

    Without a target clause this indicates a malformed policy, since the
    trivial migration satisfies everything else; in target mode it means
    the requested package cannot migrate (explanations start here).
    """


class SolveTimedOut(EngineError):
    pass


class ActuallySolvable(EngineError):
    """An explanation was requested for a package that does migrate."""


class RefuseUnverified(EngineError):
    """Hints were requested for a result that failed verification."""


class VerificationFailed(EngineError):
    """The decoded repository failed the independent admissibility check."""


class OptimumMismatch(EngineError):
    """An external solver's claims disagree with the engine's own recount."""


@dataclass
class Budgets:
    sat_timeout: float = satcore.DEFAULT_SAT_TIMEOUT
    pmax_timeout: float = satcore.DEFAULT_PMAX_TIMEOUT


@dataclass
class MigrationRequest:
    mode: str = "max"
    target: Package | None = None
    encoding: str = "p5-pruned"
    policy: PolicyRules | None = None
    solver_command: list[str] | None = None
    budgets: Budgets = field(default_factory=Budgets)
    p2_bound: int = encoder.DEFAULT_P2_BOUND
    abort_on_broken_testing: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "target" and self.target is None:
            raise ValueError("target mode needs a target package")


@dataclass
class Explanation:
    package: Package
    core: tuple[int, ...]
    facts: tuple[str, ...]

    def render(self) -> str:
        lines = [f"{self.package} cannot migrate; minimal blocking facts:"]
        lines += [f"  - {fact}" for fact in self.facts]
        return "\n".join(lines) + "\n"


@dataclass
class MigrationResult:
    t_prime: frozenset[Package]
    migrated_in: tuple[Package, ...]
    removed: tuple[Package, ...]
    delta: int
    verified: bool
    optimum: int
    externally_claimed: bool
    encoding_id: str
    warnings: tuple[str, ...] = ()
    explanation: Explanation | None = None


def build_problem(req: MigrationRequest, u: Universe,
                  idx: ClosureIndex | None = None) -> EncodedProblem:
    return encoder.build_encoding(u, idx, req.encoding, req.policy,
                                  p2_bound=req.p2_bound)


def attach_objective(req: MigrationRequest, u: Universe, problem: EncodedProblem):
    """Attach the mode's hard additions and soft units to the problem."""
    atoms = problem.atoms
    if req.mode == "max":
        problem.soft, problem.soft_info = encoder.soft_max(u, atoms)
        return
    if req.mode == "min-nontrivial":
        (clause, info), (soft, soft_info) = \
            encoder.soft_min_with_nontriviality(u, atoms)
        problem.hard.append(clause)
        problem.info.append(info)
        problem.soft, problem.soft_info = soft, soft_info
        return
    clause, info = encoder.target_clause(req.target, u, atoms)
    problem.hard.append(clause)
    problem.info.append(info)
    problem.soft, problem.soft_info = encoder.soft_min_units(u, atoms)


def decode_solution(true_atoms, atoms: encoder.AtomTable) -> frozenset[Package]:
    """Project an assignment onto the package atoms; installation atoms are
    ignored."""
    return frozenset(atoms.atom(i).package
                     for i in range(1, atoms.num_package_atoms + 1)
                     if i in true_atoms)


def _solve(req: MigrationRequest, problem: EncodedProblem) -> satcore.SolveResult:
    if req.solver_command is None:
        return satcore.solve_pmaxsat(problem.hard, problem.soft,
                                     num_vars=problem.num_vars,
                                     timeout=req.budgets.pmax_timeout)
    return satcore.run_external(req.solver_command, problem.hard, problem.soft,
                                num_vars=problem.num_vars, kind="wcnf",
                                timeout=req.budgets.pmax_timeout)


def _restore_shared(t_prime: frozenset[Package], u: Universe,
                    policy) -> frozenset[Package]:
    """Re-add dropped packages that carry no objective weight.

    Packages present in both repositories are invisible to every soft set,
    so solver tie-breaking may omit them although keeping them costs
    nothing. Re-adding such a package preserves the objective value and the
    installability of everything already chosen (growing a repository never
    invalidates an installation witness), so only the package's own
    installability, uniqueness and the policy need re-checking.
    """
    current = set(t_prime)
    names = {p.name for p in current}
    for p in sorted((u.testing & u.unstable) - t_prime):
        if p.name in names:
            continue
        candidate = frozenset(current | {p})
        if not repo.is_installable(p, candidate, u):
            continue
        if not repo.policy_satisfied(candidate, policy):
            continue
        current.add(p)
        names.add(p.name)
    return frozenset(current)


def solve_migration(req: MigrationRequest, u: Universe) -> MigrationResult:
    warnings = []
    for violation in repo.check_testing(u):
        warnings.append(f"testing violates assumptions: {violation.detail}")
    if warnings and req.abort_on_broken_testing:
        raise EngineError("; ".join(warnings))
    idx = ClosureIndex(u) if req.encoding not in ("p1", "p2", "p2-oracle") else None
    problem = build_problem(req, u, idx)
    attach_objective(req, u, problem)
    result = _solve(req, problem)
    if result.status is SolveStatus.UNSAT:
        raise Unsolvable(f"hard clauses of {problem.encoding_id} are unsatisfiable")
    if result.status is SolveStatus.TIMEOUT:
        raise SolveTimedOut(f"solver exceeded {req.budgets.pmax_timeout}s")
    model = result.true_atoms
    recount = satcore.count_satisfied(problem.soft, model)
    if result.satisfied_soft is not None and result.satisfied_soft != recount:
        raise OptimumMismatch(
            f"solver reported {result.satisfied_soft} satisfied soft clauses,"
            f" recount says {recount}")
    if result.claimed_cost is not None and \
            len(problem.soft) - recount != result.claimed_cost:
        raise OptimumMismatch(
            f"solver claimed cost {result.claimed_cost}, recount implies"
            f" {len(problem.soft) - recount}")
    if result.status is SolveStatus.SAT:
        warnings.append("external solver returned a model without an"
                        " optimality claim")
    t_prime = _restore_shared(decode_solution(model, problem.atoms), u,
                              req.policy)
    verdict = repo.is_admissible(t_prime, u, req.policy)
    if not verdict:
        raise VerificationFailed(
            f"decoded repository failed verification: {verdict.detail}")
    migrated_in = tuple(sorted(t_prime - u.testing))
    removed = tuple(sorted(u.testing - t_prime))
    return MigrationResult(
        t_prime=t_prime,
        migrated_in=migrated_in,
        removed=removed,
        delta=len(migrated_in) + len(removed),
        verified=True,
        optimum=recount,
        externally_claimed=result.externally_claimed,
        encoding_id=problem.encoding_id,
        warnings=tuple(problem.warnings + warnings),
    )


def alternative_optima(req: MigrationRequest, u: Universe,
                       limit: int) -> list[MigrationResult]:
    """Diagnostic re-solving: exclude each found optimum with a blocking
    clause over the candidate package atoms, up to `limit` alternatives with
    the same objective value. Embedded solver only."""
    if req.solver_command is not None:
        raise EngineError("alternative enumeration needs the embedded solver")
    results = [solve_migration(req, u)]
    idx = ClosureIndex(u) if req.encoding not in ("p1", "p2", "p2-oracle") else None
    problem = build_problem(req, u, idx)
    attach_objective(req, u, problem)
    incoming, outgoing = encoder.migration_candidates(u)
    candidates = incoming + outgoing
    while len(results) < limit + 1:
        blocked = results[-1].t_prime
        lits = tuple(-problem.atoms.pkg(p) if p in blocked else problem.atoms.pkg(p)
                     for p in candidates)
        if not lits:
            break
        problem.hard.append(lits)
        problem.info.append(("blocking",))
        result = satcore.solve_pmaxsat(problem.hard, problem.soft,
                                       num_vars=problem.num_vars,
                                       timeout=req.budgets.pmax_timeout)
        if result.status is not SolveStatus.OPTIMAL:
            break
        count = satcore.count_satisfied(problem.soft, result.true_atoms)
        if count != results[0].optimum:
            break
        t_prime = _restore_shared(decode_solution(result.true_atoms,
                                                  problem.atoms), u, req.policy)
        if not repo.is_admissible(t_prime, u, req.policy):
            raise VerificationFailed("alternative failed verification")
        migrated_in = tuple(sorted(t_prime - u.testing))
        removed = tuple(sorted(u.testing - t_prime))
        results.append(MigrationResult(
            t_prime=t_prime, migrated_in=migrated_in, removed=removed,
            delta=len(migrated_in) + len(removed), verified=True,
            optimum=count, externally_claimed=False,
            encoding_id=problem.encoding_id))
    return results


# ---------------------------------------------------------------------------
# Explanations


def describe_clause(info: tuple) -> str:
    """Render one clause's provenance as a domain-level statement."""
    family = info[0]
    if family == "u":
        _, a, b = info
        return f"only one version of '{a.name}' may be present: {a} vs {b}"
    if family == "v":
        _, kind, desc = info
        return f"policy {kind}: {desc}"
    if family == "e":
        _, context, member = info
        return (f"{member} can only join the installation for {context}"
                f" if it is in the repository")
    if family == "i":
        (_, p) = info
        return f"{p} needs an installation containing itself"
    if family == "d":
        _, context, owner, disjunction = info
        options = ", ".join(str(q) for q in sorted(disjunction)) or "nothing"
        where = f"in the installation for {context}" if context else "in the repository"
        return f"{owner} requires one of [{options}] {where}"
    if family == "c":
        _, context, a, b = info
        return f"{a} conflicts with {b} (installation for {context})"
    if family == "nt":
        return "at least one candidate package must change"
    if family == "target":
        (_, p) = info
        return f"the migration of {p} was requested"
    if family == "inst-target":
        (_, p) = info
        return f"{p} must be part of the installation"
    if family == "inst-dep":
        _, owner, disjunction = info
        options = ", ".join(str(q) for q in sorted(disjunction)) or "nothing"
        return f"{owner} requires one of [{options}]"
    if family == "inst-conflict":
        _, a, b = info
        return f"{a} conflicts with {b}"
    return f"constraint {family}"


def explain_non_migration(p: Package, u: Universe, idx: ClosureIndex | None,
                          req: MigrationRequest) -> Explanation:
    """Minimal unsatisfiable core of the targeted migration, mapped back to
    domain statements via the per-clause provenance tags."""
    problem = build_problem(req, u, idx)
    clause, info = encoder.target_clause(p, u, problem.atoms)
    problem.hard.append(clause)
    problem.info.append(info)
    check = satcore.solve_sat(problem.hard, num_vars=problem.num_vars,
                              timeout=req.budgets.sat_timeout)
    if check.status is SolveStatus.SAT:
        raise ActuallySolvable(f"{p} migrates; nothing to explain")
    if check.status is SolveStatus.TIMEOUT:
        raise SolveTimedOut("satisfiability check timed out")
    mus = satcore.extract_mus(problem.hard, num_vars=problem.num_vars,
                              timeout=req.budgets.sat_timeout)
    facts = tuple(describe_clause(problem.info[i]) for i in mus.core)
    return Explanation(package=p, core=mus.core, facts=facts)


# ---------------------------------------------------------------------------
# Rendering


def render_hints(result: MigrationResult) -> str:
    """Hint lines for the incumbent migration tooling.

    One `easy` line lists everything that migrates (a version replacement is
    implied by the incoming package); `remove` lines name removals with no
    incoming replacement.
    """
    if not result.verified:
        raise RefuseUnverified("refusing to render hints for unverified result")
    lines = []
    if result.migrated_in:
        lines.append("easy " + " ".join(str(p) for p in result.migrated_in))
    replaced = {p.name for p in result.migrated_in}
    lines += [f"remove {p}" for p in result.removed if p.name not in replaced]
    return "".join(line + "\n" for line in lines)


def render_report(result: MigrationResult) -> str:
    lines = [
        f"encoding: {result.encoding_id}",
        f"delta: {result.delta}",
        "optimum: {}{}".format(result.optimum,
                               " (externally claimed)" if result.externally_claimed
                               else ""),
        "migrated-in: " + (" ".join(map(str, result.migrated_in)) or "(none)"),
        "removed: " + (" ".join(map(str, result.removed)) or "(none)"),
        "t-prime: " + (" ".join(map(str, sorted(result.t_prime))) or "(empty)"),
        f"verified: {'yes' if result.verified else 'no'}",
    ]
    lines += [f"warning: {w}" for w in result.warnings]
    return "\n".join(lines) + "\n"


def structured_report(result: MigrationResult) -> dict:
    return {
        "t_prime": [str(p) for p in sorted(result.t_prime)],
        "migrated_in": [str(p) for p in result.migrated_in],
        "removed": [str(p) for p in result.removed],
        "delta": result.delta,
        "verified": result.verified,
        "optimum": {"count": result.optimum,
                    "externally_claimed": result.externally_claimed},
        "explanation": list(result.explanation.facts) if result.explanation else None,
        "encoding": result.encoding_id,
        "warnings": list(result.warnings),
        "hints": render_hints(result) if result.verified else None,
    }


def dump_structured(document: dict) -> str:
    return json.dumps(document, sort_keys=True, indent=2) + "\n"


def parse_structured_report(text: str) -> dict:
    document = json.loads(text)
    if not isinstance(document, dict):
        raise ValueError("structured report must be a JSON object")
    return document
