"""Clause systems for the migration problem.

Five encodings share the uniqueness clauses (one per duplicate-name pair)
and the pluggable policy clauses:

* p1        — packages only; sound exactly when there are no conflicts.
* p2        — installation atoms for every package pair; the tiny-scale
              reference semantics, quadratic and capped by default.
* p3        — installation atoms restricted to dependency closures.
* p4        — closures further restricted to hard packages; dependencies on
              easy packages point at package atoms directly.
* p5        — installation atoms only for connecting dependencies; strict
              mode keeps every seed atom p@p, pruned mode drops contexts
              without relevant conflicts and encodes them p1-style.

Atoms are numbered deterministically: package atoms first (sorted), then
installation atoms sorted by (context, member).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import satcore
from .closure import ClosureIndex
from .repo import Package, Universe, unique_pairs

DEFAULT_P2_BOUND = 10

ENCODING_NAMES = ("p1", "p2", "p3", "p4", "p5-strict", "p5-pruned")


class EncoderError(Exception):
    """Base class for encoding failures."""


class ConflictsPresent(EncoderError):
    """p1 requested although the universe declares conflicts."""


class UniverseTooLarge(EncoderError):
    """p2 requested beyond its configured package bound."""


class UnknownPackage(EncoderError):
    """A policy rule references a package outside the universe."""


class NoChangeCandidates(EncoderError):
    """The minimal-nontrivial objective needs at least one candidate."""


class NotAMigrationCandidate(EncoderError):
    """Targeted migration needs a package from unstable that is not in
    testing."""


@dataclass(frozen=True, order=True)
class Atom:
    """A package atom ("p is in T'") or an installation atom
    ("p is in the installation for context")."""

    package: Package
    context: Package | None = None

    @property
    def is_package_atom(self) -> bool:
        return self.context is None

    def __str__(self) -> str:
        if self.context is None:
            return str(self.package)
        return f"{self.package} @ {self.context}"


class AtomTable:
    """Dense, deterministic bijection between atoms and 1-based indices."""

    def __init__(self, packages, inst_pairs=()):
        pkg_atoms = [Atom(p) for p in sorted(packages)]
        inst_atoms = [Atom(member, context) for context, member in
                      sorted((c, m) for m, c in inst_pairs)]
        self.atoms: tuple[Atom, ...] = tuple(pkg_atoms + inst_atoms)
        self.num_package_atoms = len(pkg_atoms)
        self.num_inst_atoms = len(inst_atoms)
        self._index = {atom: i + 1 for i, atom in enumerate(self.atoms)}

    def __len__(self) -> int:
        return len(self.atoms)

    def pkg(self, p: Package) -> int:
        return self._index[Atom(p)]

    def inst(self, member: Package, context: Package) -> int:
        return self._index[Atom(member, context)]

    def has_inst(self, member: Package, context: Package) -> bool:
        return Atom(member, context) in self._index

    def atom(self, index: int) -> Atom:
        return self.atoms[index - 1]

    def render_map(self) -> str:
        lines = []
        for i, atom in enumerate(self.atoms, start=1):
            if atom.is_package_atom:
                lines.append(f"{i} pkg {atom.package}")
            else:
                lines.append(f"{i} inst {atom.package} @ {atom.context}")
        return "\n".join(lines) + ("\n" if lines else "")


def parse_atom_map(text: str) -> AtomTable:
    """Inverse of AtomTable.render_map for round-trip checks."""
    packages = []
    inst_pairs = []
    for line in text.splitlines():
        parts = line.split()
        if not parts:
            continue
        if parts[1] == "pkg":
            packages.append(Package.parse(parts[2]))
        elif parts[1] == "inst" and parts[3] == "@":
            inst_pairs.append((Package.parse(parts[2]), Package.parse(parts[4])))
        else:
            raise ValueError(f"bad atom map line {line!r}")
    return AtomTable(packages, inst_pairs)


@dataclass
class PolicyRules:
    """Validness rules: all-or-none groups plus raw extra clauses, both over
    signed package literals (+1 means "in T'")."""

    groups: list[list[tuple[int, Package]]] = field(default_factory=list)
    extra_clauses: list[list[tuple[int, Package]]] = field(default_factory=list)

    def referenced(self):
        for group in self.groups:
            yield from (pkg for _, pkg in group)
        for clause in self.extra_clauses:
            yield from (pkg for _, pkg in clause)


@dataclass
class EncodedProblem:
    encoding_id: str
    atoms: AtomTable
    hard: list[tuple[int, ...]] = field(default_factory=list)
    info: list[tuple] = field(default_factory=list)
    soft: list[tuple[int, ...]] = field(default_factory=list)
    soft_info: list[tuple] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def num_vars(self) -> int:
        return len(self.atoms)

    def add(self, literals, info: tuple):
        clause = satcore.normalize_clause(literals)
        if clause is None:
            return
        if not clause:
            self.warnings.append(f"empty clause from {info[0]}: instance is unsatisfiable")
        self.hard.append(clause)
        self.info.append(info)

    def family_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for info in self.info:
            counts[info[0]] = counts.get(info[0], 0) + 1
        return counts


@dataclass
class InstanceStats:
    encoding_id: str
    atoms_total: int
    package_atoms: int
    inst_atoms: int
    hard_clauses: int
    soft_clauses: int
    by_family: dict[str, int]


def instance_stats(problem: EncodedProblem) -> InstanceStats:
    return InstanceStats(
        encoding_id=problem.encoding_id,
        atoms_total=problem.num_vars,
        package_atoms=problem.atoms.num_package_atoms,
        inst_atoms=problem.atoms.num_inst_atoms,
        hard_clauses=len(problem.hard),
        soft_clauses=len(problem.soft),
        by_family=problem.family_counts(),
    )


# ---------------------------------------------------------------------------
# Shared clause families


def uniqueness_clauses(u: Universe, problem: EncodedProblem):
    """One binary clause per unordered duplicate-name pair."""
    done = set()
    for a, b in sorted(unique_pairs(u)):
        key = (min(a, b), max(a, b))
        if key in done:
            continue
        done.add(key)
        problem.add((-problem.atoms.pkg(key[0]), -problem.atoms.pkg(key[1])),
                    ("u", key[0], key[1]))


def policy_clauses(rules: PolicyRules, u: Universe, problem: EncodedProblem):
    """All-or-none groups become implications between every ordered pair of
    literals; extra clauses pass through."""
    for pkg in rules.referenced():
        if pkg not in u.packages:
            raise UnknownPackage(f"policy references unknown package {pkg}")

    def lit(sign: int, pkg: Package) -> int:
        return sign * problem.atoms.pkg(pkg)

    for group in rules.groups:
        desc = " ".join(f"{'+' if s > 0 else '-'}{p}" for s, p in group)
        for si, pi in group:
            for sj, pj in group:
                if (si, pi) != (sj, pj):
                    problem.add((-lit(si, pi), lit(sj, pj)), ("v", "group", desc))
    for clause in rules.extra_clauses:
        desc = " ".join(f"{'+' if s > 0 else '-'}{p}" for s, p in clause)
        problem.add(tuple(lit(s, p) for s, p in clause), ("v", "clause", desc))


def _finish(problem: EncodedProblem, u: Universe, rules: PolicyRules | None):
    if rules is not None:
        policy_clauses(rules, u, problem)
    return problem


# ---------------------------------------------------------------------------
# Encodings


def encode_p1(u: Universe, rules: PolicyRules | None = None) -> EncodedProblem:
    """Package atoms only; dependencies become direct implications.

    Sound only without conflicts, which affect installations rather than
    repositories and therefore cannot be stated over package atoms.
    """
    if u.conflicts:
        raise ConflictsPresent("p1 requires a conflict-free universe")
    problem = EncodedProblem("p1", AtomTable(u.packages))
    atoms = problem.atoms
    uniqueness_clauses(u, problem)
    for p in u.sorted_packages():
        for disjunction in u.dep.get(p, ()):
            problem.add([-atoms.pkg(p)] + [atoms.pkg(q) for q in sorted(disjunction)],
                        ("d", None, p, disjunction))
    return _finish(problem, u, rules)


def encode_p2(u: Universe, rules: PolicyRules | None = None,
              bound: int = DEFAULT_P2_BOUND) -> EncodedProblem:
    """Installation atoms for every package pair: the reference semantics.

    Size is quadratic in the universe, so this encoding is capped and only
    serves as a small-scale oracle against which the others are checked.
    """
    pkgs = u.sorted_packages()
    if len(pkgs) > bound:
        raise UniverseTooLarge(f"{len(pkgs)} packages exceed the p2 bound {bound}")
    pairs = [(member, context) for context in pkgs for member in pkgs]
    problem = EncodedProblem("p2", AtomTable(u.packages, pairs))
    atoms = problem.atoms
    uniqueness_clauses(u, problem)
    for context in pkgs:
        for member in pkgs:
            problem.add((-atoms.inst(member, context), atoms.pkg(member)),
                        ("e", context, member))
    for p in pkgs:
        problem.add((-atoms.pkg(p), atoms.inst(p, p)), ("i", p))
    for context in pkgs:
        for p in pkgs:
            for disjunction in u.dep.get(p, ()):
                problem.add([-atoms.inst(p, context)] +
                            [atoms.inst(q, context) for q in sorted(disjunction)],
                            ("d", context, p, disjunction))
    for context in pkgs:
        for a, b in sorted(u.conflicts):
            if a < b:
                problem.add((-atoms.inst(a, context), -atoms.inst(b, context)),
                            ("c", context, a, b))
    return _finish(problem, u, rules)


def encode_p3(u: Universe, idx: ClosureIndex,
              rules: PolicyRules | None = None) -> EncodedProblem:
    """Installation atoms restricted to each context's dependency closure."""
    pkgs = u.sorted_packages()
    closures = {p: idx.closure(p) for p in pkgs}
    pairs = [(member, context) for context in pkgs
             for member in sorted(closures[context])]
    problem = EncodedProblem("p3", AtomTable(u.packages, pairs))
    atoms = problem.atoms
    uniqueness_clauses(u, problem)
    for context in pkgs:
        for member in sorted(closures[context]):
            problem.add((-atoms.inst(member, context), atoms.pkg(member)),
                        ("e", context, member))
    for p in pkgs:
        problem.add((-atoms.pkg(p), atoms.inst(p, p)), ("i", p))
    for context in pkgs:
        for p in sorted(closures[context]):
            for disjunction in u.dep.get(p, ()):
                problem.add([-atoms.inst(p, context)] +
                            [atoms.inst(q, context) for q in sorted(disjunction)],
                            ("d", context, p, disjunction))
    for context in pkgs:
        closure = closures[context]
        for a, b in sorted(u.conflicts):
            if a < b and a in closure and b in closure:
                problem.add((-atoms.inst(a, context), -atoms.inst(b, context)),
                            ("c", context, a, b))
    return _finish(problem, u, rules)


def encode_p4(u: Universe, idx: ClosureIndex,
              rules: PolicyRules | None = None) -> EncodedProblem:
    """Hard-restricted closures; easy dependencies use package atoms.

    An easy package in a dependency disjunction never needs per-context
    tracking: its presence in T' suffices, so the split in the d-family
    references the package atom directly.
    """
    pkgs = u.sorted_packages()
    hard_closures = {p: idx.hard_closure(p) for p in pkgs}
    easy = idx.easy
    pairs = [(member, context) for context in pkgs
             for member in sorted(hard_closures[context])]
    problem = EncodedProblem("p4", AtomTable(u.packages, pairs))
    atoms = problem.atoms
    uniqueness_clauses(u, problem)
    for context in pkgs:
        for member in sorted(hard_closures[context]):
            problem.add((-atoms.inst(member, context), atoms.pkg(member)),
                        ("e", context, member))
    for p in pkgs:
        problem.add((-atoms.pkg(p), atoms.inst(p, p)), ("i", p))
    for context in pkgs:
        for p in sorted(hard_closures[context]):
            for disjunction in u.dep.get(p, ()):
                lits = [-atoms.inst(p, context)]
                for q in sorted(disjunction):
                    if q in easy:
                        lits.append(atoms.pkg(q))
                    else:
                        lits.append(atoms.inst(q, context))
                problem.add(lits, ("d", context, p, disjunction))
    for context in pkgs:
        closure = hard_closures[context]
        for a, b in sorted(u.conflicts):
            if a < b and a in closure and b in closure:
                problem.add((-atoms.inst(a, context), -atoms.inst(b, context)),
                            ("c", context, a, b))
    return _finish(problem, u, rules)


def encode_p5(u: Universe, idx: ClosureIndex, rules: PolicyRules | None = None,
              mode: str = "pruned") -> EncodedProblem:
    """Installation atoms only for connecting dependencies.

    strict mode follows the formal definition, keeping the seed atom p@p
    for every package; pruned mode omits the seed (and its i-clause) for
    contexts without relevant conflicts and encodes their dependencies over
    package atoms, p1-style.
    """
    if mode not in ("strict", "pruned"):
        raise ValueError(f"unknown p5 mode {mode!r}")
    pkgs = u.sorted_packages()
    connecting = {p: idx.connecting(p) for p in pkgs}
    tracked = {p: (mode == "strict" or bool(idx.relevant_conflicts(p)))
               for p in pkgs}
    pairs = [(member, context) for context in pkgs if tracked[context]
             for member in sorted(connecting[context])]
    problem = EncodedProblem(f"p5-{mode}", AtomTable(u.packages, pairs))
    atoms = problem.atoms
    uniqueness_clauses(u, problem)
    for context in pkgs:
        if not tracked[context]:
            continue
        for member in sorted(connecting[context]):
            problem.add((-atoms.inst(member, context), atoms.pkg(member)),
                        ("e", context, member))
    for p in pkgs:
        if tracked[p]:
            problem.add((-atoms.pkg(p), atoms.inst(p, p)), ("i", p))
    for context in pkgs:
        if tracked[context]:
            members = connecting[context]
            for p in sorted(members):
                for disjunction in u.dep.get(p, ()):
                    lits = [-atoms.inst(p, context)]
                    for q in sorted(disjunction):
                        if q in members:
                            lits.append(atoms.inst(q, context))
                        else:
                            lits.append(atoms.pkg(q))
                    problem.add(lits, ("d", context, p, disjunction))
        else:
            for disjunction in u.dep.get(context, ()):
                problem.add([-atoms.pkg(context)] +
                            [atoms.pkg(q) for q in sorted(disjunction)],
                            ("d", None, context, disjunction))
    for context in pkgs:
        if not tracked[context]:
            continue
        members = connecting[context]
        for a, b in sorted(u.conflicts):
            if a < b and a in members and b in members:
                problem.add((-atoms.inst(a, context), -atoms.inst(b, context)),
                            ("c", context, a, b))
    return _finish(problem, u, rules)


def build_encoding(u: Universe, idx: ClosureIndex | None, name: str,
                   rules: PolicyRules | None = None,
                   p2_bound: int = DEFAULT_P2_BOUND) -> EncodedProblem:
    """Dispatch by encoding name; p5 without suffix means pruned."""
    if name == "p1":
        return encode_p1(u, rules)
    if name in ("p2", "p2-oracle"):
        return encode_p2(u, rules, bound=p2_bound)
    if idx is None:
        idx = ClosureIndex(u)
    if name == "p3":
        return encode_p3(u, idx, rules)
    if name == "p4":
        return encode_p4(u, idx, rules)
    if name in ("p5", "p5-pruned"):
        return encode_p5(u, idx, rules, mode="pruned")
    if name == "p5-strict":
        return encode_p5(u, idx, rules, mode="strict")
    raise ValueError(f"unknown encoding {name!r}")


# ---------------------------------------------------------------------------
# Objectives


def migration_candidates(u: Universe) -> tuple[list[Package], list[Package]]:
    """(incoming, outgoing): unstable-only and testing-only packages."""
    return sorted(u.unstable - u.testing), sorted(u.testing - u.unstable)


def soft_max(u: Universe, atoms: AtomTable):
    """Soft units whose satisfied count is the number of changed candidates:
    one positive unit per possible migration, one negative per possible
    removal of an outdated package."""
    incoming, outgoing = migration_candidates(u)
    soft = [(atoms.pkg(p),) for p in incoming]
    soft += [(-atoms.pkg(p),) for p in outgoing]
    info = [("soft-in", p) for p in incoming] + [("soft-out", p) for p in outgoing]
    return soft, info


def soft_min_units(u: Universe, atoms: AtomTable):
    incoming, outgoing = migration_candidates(u)
    soft = [(-atoms.pkg(p),) for p in incoming]
    soft += [(atoms.pkg(p),) for p in outgoing]
    info = [("soft-keep-out", p) for p in incoming]
    info += [("soft-keep-in", p) for p in outgoing]
    return soft, info


def soft_min_with_nontriviality(u: Universe, atoms: AtomTable):
    """Inverted soft units plus the hard clause forcing some change."""
    incoming, outgoing = migration_candidates(u)
    if not incoming and not outgoing:
        raise NoChangeCandidates("testing and unstable offer no change")
    nontrivial = tuple([atoms.pkg(p) for p in incoming] +
                       [-atoms.pkg(p) for p in outgoing])
    soft, info = soft_min_units(u, atoms)
    return (satcore.normalize_clause(nontrivial), ("nt",)), (soft, info)


def target_clause(p: Package, u: Universe, atoms: AtomTable):
    """Unit clause forcing one candidate into the migration."""
    if p not in u.packages:
        raise NotAMigrationCandidate(f"{p} is not in the universe")
    if p not in u.unstable - u.testing:
        raise NotAMigrationCandidate(f"{p} is not a migration candidate")
    return (atoms.pkg(p),), ("target", p)
