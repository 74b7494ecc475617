from __future__ import annotations

import random

import pytest

from satmigrate import satcore
from satmigrate.closure import ClosureIndex
from satmigrate.encoder import (AtomTable, ConflictsPresent,
                                NoChangeCandidates, NotAMigrationCandidate,
                                PolicyRules, UniverseTooLarge, UnknownPackage,
                                build_encoding, encode_p1, encode_p2,
                                encode_p3, encode_p4, encode_p5,
                                instance_stats, parse_atom_map, soft_max,
                                soft_min_with_nontriviality, target_clause)
from satmigrate.repo import admissible_masks, make_universe
from satmigrate.satcore import SolveStatus

from .generators import P, projected_solutions, random_universe, tiny_universe


def _clauses(problem, family):
    return [clause for clause, info in zip(problem.hard, problem.info)
            if info[0] == family]


# -- uniqueness ---------------------------------------------------------------

def test_uniqueness_clause_per_duplicate_pair():
    u = tiny_universe(["a/1", "a/2"])
    problem = encode_p1(u)
    a1, a2 = problem.atoms.pkg(P("a/1")), problem.atoms.pkg(P("a/2"))
    assert _clauses(problem, "u") == [tuple(sorted((-a1, -a2),
                                                   key=lambda l: (abs(l), l)))]


def test_no_duplicates_no_uniqueness_clauses():
    u = tiny_universe(["a/1", "b/1"])
    assert _clauses(encode_p1(u), "u") == []


def test_three_versions_three_clauses():
    u = tiny_universe(["a/1", "a/2", "a/3"])
    assert len(_clauses(encode_p1(u), "u")) == 3  # C(3,2)


# -- policy ---------------------------------------------------------------------

def test_policy_group_becomes_biconditional():
    u = tiny_universe(["b1/2", "b2/2"])
    rules = PolicyRules(groups=[[(1, P("b1/2")), (1, P("b2/2"))]])
    problem = encode_p1(u, rules)
    i1, i2 = problem.atoms.pkg(P("b1/2")), problem.atoms.pkg(P("b2/2"))
    assert set(_clauses(problem, "v")) == {
        satcore.normalize_clause((-i1, i2)),
        satcore.normalize_clause((-i2, i1))}


def test_empty_policy_no_clauses():
    u = tiny_universe(["a/1"])
    assert _clauses(encode_p1(u, PolicyRules()), "v") == []


def test_mixed_sign_group_two_implications():
    u = tiny_universe(["b/1", "b/2"])
    rules = PolicyRules(groups=[[(1, P("b/2")), (-1, P("b/1"))]])
    problem = encode_p1(u, rules)
    assert len(_clauses(problem, "v")) == 2


def test_policy_unknown_package_rejected():
    u = tiny_universe(["a/1"])
    with pytest.raises(UnknownPackage):
        encode_p1(u, PolicyRules(extra_clauses=[[(1, P("ghost/1"))]]))


# -- p1 ----------------------------------------------------------------------------

def test_p1_isolated_package():
    u = tiny_universe(["a/1"])
    problem = encode_p1(u)
    assert problem.num_vars == 1
    assert _clauses(problem, "d") == []


def test_p1_dependency_is_implication():
    u = tiny_universe(["a/1", "b/1"], dep={"a/1": [["b/1"]]})
    problem = encode_p1(u)
    a, b = problem.atoms.pkg(P("a/1")), problem.atoms.pkg(P("b/1"))
    assert _clauses(problem, "d") == [satcore.normalize_clause((-a, b))]


def test_p1_empty_disjunction_forces_removal():
    u = tiny_universe(["a/1"], dep={"a/1": [[]]})
    problem = encode_p1(u)
    assert _clauses(problem, "d") == [(-problem.atoms.pkg(P("a/1")),)]


def test_p1_rejects_conflicts():
    u = tiny_universe(["a/1", "b/1"], conflicts=[("a/1", "b/1")])
    with pytest.raises(ConflictsPresent):
        encode_p1(u)


# -- p2 ----------------------------------------------------------------------------

def test_p2_atom_count_is_n_plus_n_squared():
    for n in range(1, 6):
        u = tiny_universe([f"x{i}/1" for i in range(n)])
        assert encode_p2(u).num_vars == n + n * n


def test_p2_isolated_package_clauses():
    u = tiny_universe(["a/1"])
    problem = encode_p2(u)
    a = problem.atoms.pkg(P("a/1"))
    aa = problem.atoms.inst(P("a/1"), P("a/1"))
    assert _clauses(problem, "e") == [satcore.normalize_clause((-aa, a))]
    assert _clauses(problem, "i") == [satcore.normalize_clause((-a, aa))]


def test_p2_conflict_clause_per_context():
    u = tiny_universe(["p/1", "q/1"], conflicts=[("p/1", "q/1")])
    problem = encode_p2(u)
    atoms = problem.atoms
    expected = {
        satcore.normalize_clause((-atoms.inst(P("p/1"), ctx),
                                  -atoms.inst(P("q/1"), ctx)))
        for ctx in (P("p/1"), P("q/1"))}
    assert set(_clauses(problem, "c")) == expected


def test_p2_bound_enforced():
    u = tiny_universe([f"x{i}/1" for i in range(4)])
    with pytest.raises(UniverseTooLarge):
        encode_p2(u, bound=3)


def test_p2_d_clause_count_matches_direct_summation():
    rng = random.Random(59)
    for _ in range(10):
        u = random_universe(rng, max_size=6, dep_density=0.8)
        problem = encode_p2(u)
        n = len(u.packages)
        expected = n * sum(len(u.dep[p]) for p in u.packages)
        assert len(_clauses(problem, "d")) == expected


# -- p3 ----------------------------------------------------------------------------

def test_p3_inst_atoms_follow_closure_sizes():
    u = tiny_universe(["p/1", "q/1", "r/1"],
                      dep={"p/1": [["q/1"]], "q/1": [["r/1"]]})
    problem = encode_p3(u, ClosureIndex(u))
    assert problem.atoms.num_inst_atoms == 3 + 2 + 1


def test_p3_isolated_package_single_inst_atom():
    u = tiny_universe(["p/1"])
    problem = encode_p3(u, ClosureIndex(u))
    assert problem.atoms.num_inst_atoms == 1


def test_p3_conflicts_restricted_to_closures():
    u = tiny_universe(["p/1", "q/1", "r/1"],
                      dep={"p/1": [["q/1"]]},
                      conflicts=[("q/1", "r/1")])
    problem = encode_p3(u, ClosureIndex(u))
    contexts = {info[1] for info in problem.info if info[0] == "c"}
    # only contexts whose closure holds both endpoints: q and r alone do not
    # reach each other; no closure contains both except none here
    assert contexts == set()


# -- p4 ----------------------------------------------------------------------------

def test_p4_all_easy_keeps_only_seed_atoms():
    u = tiny_universe(["p/1", "q/1"], dep={"p/1": [["q/1"]]})
    problem = encode_p4(u, ClosureIndex(u))
    assert problem.atoms.num_inst_atoms == 2  # p@p and q@q
    for clause, info in zip(problem.hard, problem.info):
        if info[0] == "d":
            # all positive references are package atoms
            assert all(problem.atoms.atom(l).is_package_atom
                       for l in clause if l > 0)


def test_p4_easy_dependency_referenced_as_package_atom():
    u = tiny_universe(["p/1", "e/1", "x/1"],
                      dep={"p/1": [["e/1"]]},
                      conflicts=[("p/1", "x/1")])
    idx = ClosureIndex(u)
    assert idx.is_easy(P("e/1")) and not idx.is_easy(P("p/1"))
    problem = encode_p4(u, idx)
    atoms = problem.atoms
    expected = satcore.normalize_clause(
        (-atoms.inst(P("p/1"), P("p/1")), atoms.pkg(P("e/1"))))
    assert expected in _clauses(problem, "d")


# -- p5 ----------------------------------------------------------------------------

def test_p5_pruned_collapses_to_p1_without_conflicts():
    u = tiny_universe(["a/1", "b/1", "a/2"], dep={"a/1": [["b/1"]]})
    pruned = encode_p5(u, ClosureIndex(u), mode="pruned")
    p1 = encode_p1(u)
    assert pruned.atoms.num_inst_atoms == 0
    assert sorted(pruned.hard) == sorted(p1.hard)


def test_p5_strict_keeps_seed_atoms():
    u = tiny_universe(["a/1", "b/1"], dep={"a/1": [["b/1"]]})
    strict = encode_p5(u, ClosureIndex(u), mode="strict")
    assert strict.atoms.num_inst_atoms == 2


def test_p5_tracks_conflicting_alternatives_and_blocks_package():
    u = tiny_universe(["p/1", "q/1", "r/1"],
                      dep={"p/1": [["q/1"], ["r/1"]]},
                      conflicts=[("q/1", "r/1")])
    problem = encode_p5(u, ClosureIndex(u), mode="pruned")
    atoms = problem.atoms
    for member in ("p/1", "q/1", "r/1"):
        assert atoms.has_inst(P(member), P("p/1"))
    # brute-force enumeration: no assignment makes PkgVar p true
    blocked = satcore.brute_force_solve(
        problem.hard + [(atoms.pkg(P("p/1")),)], num_vars=problem.num_vars)
    assert blocked.status is SolveStatus.UNSAT


# -- objectives ---------------------------------------------------------------------

def test_soft_max_units():
    u = tiny_universe(["a/1", "a/2"], testing=["a/1"], unstable=["a/2"])
    problem = encode_p1(u)
    soft, _ = soft_max(u, problem.atoms)
    assert soft == [(problem.atoms.pkg(P("a/2")),),
                    (-problem.atoms.pkg(P("a/1")),)]


def test_soft_max_empty_when_repositories_equal():
    u = tiny_universe(["a/1"])
    problem = encode_p1(u)
    assert soft_max(u, problem.atoms)[0] == []


def test_soft_max_set_differences():
    u = tiny_universe(["a/1", "a/2", "b/1"], testing=["a/1", "b/1"],
                      unstable=["a/2", "b/1"])
    problem = encode_p1(u)
    soft, _ = soft_max(u, problem.atoms)
    assert soft == [(problem.atoms.pkg(P("a/2")),),
                    (-problem.atoms.pkg(P("a/1")),)]


def test_soft_min_with_nontriviality():
    u = tiny_universe(["a/1", "a/2"], testing=["a/1"], unstable=["a/2"])
    problem = encode_p1(u)
    (clause, info), (soft, _) = soft_min_with_nontriviality(u, problem.atoms)
    a1, a2 = problem.atoms.pkg(P("a/1")), problem.atoms.pkg(P("a/2"))
    assert clause == satcore.normalize_clause((a2, -a1))
    assert info == ("nt",)
    assert soft == [(-a2,), (a1,)]


def test_soft_min_outgoing_only():
    u = tiny_universe(["a/1"], testing=[], unstable=["a/1"])
    problem = encode_p1(u)
    (clause, _), (soft, _) = soft_min_with_nontriviality(u, problem.atoms)
    assert clause == (problem.atoms.pkg(P("a/1")),)
    assert soft == [(-problem.atoms.pkg(P("a/1")),)]


def test_soft_min_three_candidates():
    u = tiny_universe(["a/1", "b/1", "c/1"], testing=["a/1"],
                      unstable=["b/1", "c/1"])
    problem = encode_p1(u)
    (clause, _), (soft, _) = soft_min_with_nontriviality(u, problem.atoms)
    assert len(clause) == 3
    assert len(soft) == 3


def test_soft_min_requires_candidates():
    u = tiny_universe(["a/1"])
    problem = encode_p1(u)
    with pytest.raises(NoChangeCandidates):
        soft_min_with_nontriviality(u, problem.atoms)


def test_target_clause_unit():
    u = tiny_universe(["a/1", "a/2"], testing=["a/1"], unstable=["a/2"])
    problem = encode_p1(u)
    clause, info = target_clause(P("a/2"), u, problem.atoms)
    assert clause == (problem.atoms.pkg(P("a/2")),)
    assert info == ("target", P("a/2"))


def test_target_must_be_candidate():
    u = tiny_universe(["a/1", "a/2"], testing=["a/1"], unstable=["a/2"])
    problem = encode_p1(u)
    with pytest.raises(NotAMigrationCandidate):
        target_clause(P("a/1"), u, problem.atoms)
    with pytest.raises(NotAMigrationCandidate):
        target_clause(P("ghost/9"), u, problem.atoms)


# -- stats / atom table ----------------------------------------------------------------

def test_clause_hygiene_dedup_and_empty_reporting():
    u = tiny_universe(["a/1"])
    problem = encode_p1(u)
    a = problem.atoms.pkg(P("a/1"))
    before = len(problem.hard)
    problem.add((a, a, -a), ("d", None, P("a/1"), frozenset()))
    assert len(problem.hard) == before  # tautology dropped
    problem.add((a, a), ("d", None, P("a/1"), frozenset()))
    assert problem.hard[-1] == (a,)  # duplicate literal removed
    assert not problem.warnings
    problem.add((), ("d", None, P("a/1"), frozenset()))
    assert problem.hard[-1] == ()
    assert any("unsatisfiable" in w for w in problem.warnings)


def test_stats_zero_for_empty_universe():
    u = make_universe([], {}, [], [], [])
    stats = instance_stats(encode_p1(u))
    assert (stats.atoms_total, stats.hard_clauses, stats.soft_clauses) == (0, 0, 0)


def test_stats_counts_by_family():
    u = tiny_universe(["a/1", "a/2", "b/1"], dep={"a/1": [["b/1"]]},
                      conflicts=[("a/2", "b/1")])
    problem = encode_p2(u)
    stats = instance_stats(problem)
    assert stats.package_atoms == 3
    assert stats.inst_atoms == 9
    by_family = stats.by_family
    assert by_family["u"] == 1
    assert by_family["e"] == 9
    assert by_family["i"] == 3
    assert by_family["c"] == 3  # one conflict pair, three contexts


def test_atom_numbering_packages_first_then_context_member():
    u = tiny_universe(["b/1", "a/1"], dep={"a/1": [["b/1"]]})
    problem = encode_p3(u, ClosureIndex(u))
    atoms = problem.atoms
    assert [str(atoms.atom(i)) for i in range(1, len(atoms) + 1)] == [
        "a/1", "b/1", "a/1 @ a/1", "b/1 @ a/1", "b/1 @ b/1"]


def test_atom_map_round_trip():
    u = tiny_universe(["a/1", "b/1"], dep={"a/1": [["b/1"]]})
    problem = encode_p3(u, ClosureIndex(u))
    parsed = parse_atom_map(problem.atoms.render_map())
    assert parsed.atoms == problem.atoms.atoms


def test_atom_table_orders_inst_by_context_then_member():
    table = AtomTable([P("a/1"), P("b/1")],
                      [(P("b/1"), P("a/1")), (P("a/1"), P("a/1")),
                       (P("a/1"), P("b/1"))])
    rendered = [str(a) for a in table.atoms]
    assert rendered == ["a/1", "b/1", "a/1 @ a/1", "b/1 @ a/1", "a/1 @ b/1"]


# -- cross-encoding behaviour ------------------------------------------------------------


def _all_encodings(u, idx):
    problems = [encode_p2(u), encode_p3(u, idx), encode_p4(u, idx),
                encode_p5(u, idx, mode="strict"),
                encode_p5(u, idx, mode="pruned")]
    if not u.conflicts:
        problems.append(encode_p1(u))
    return problems


def test_projection_equivalence_small_scale():
    rng = random.Random(61)
    for _ in range(25):
        u = random_universe(rng, max_size=6, dep_density=0.6,
                            conflict_density=0.7)
        idx = ClosureIndex(u)
        _, masks = admissible_masks(u)
        expected = set(masks)
        for problem in _all_encodings(u, idx):
            assert projected_solutions(problem, u) == expected, problem.encoding_id


def test_size_monotonicity_small_scale():
    rng = random.Random(67)
    for _ in range(25):
        u = random_universe(rng, max_size=7, dep_density=0.6,
                            conflict_density=0.7)
        idx = ClosureIndex(u)
        p2 = encode_p2(u)
        p3 = encode_p3(u, idx)
        p4 = encode_p4(u, idx)
        p5s = encode_p5(u, idx, mode="strict")
        p5p = encode_p5(u, idx, mode="pruned")
        chain = [p5p, p5s, p4, p3, p2]
        for smaller, larger in zip(chain, chain[1:]):
            assert smaller.num_vars <= larger.num_vars
            assert len(smaller.hard) <= len(larger.hard)


def test_trivial_migration_extends_for_every_encoding():
    rng = random.Random(71)
    found = 0
    for _ in range(40):
        u = random_universe(rng, max_size=6, conflict_density=0.5)
        from satmigrate.repo import is_admissible
        if not is_admissible(u.testing, u).ok:
            continue
        found += 1
        idx = ClosureIndex(u)
        pkgs = u.sorted_packages()
        mask = sum(1 << i for i, p in enumerate(pkgs) if p in u.testing)
        for problem in _all_encodings(u, idx):
            assert mask in projected_solutions(problem, u)
    assert found > 10


def test_soft_max_count_equals_symmetric_difference():
    # quality of a solution is |T △ T'| whenever the solution keeps the
    # packages shared by both repositories (no soft covers those)
    rng = random.Random(79)
    checked = 0
    for _ in range(30):
        u = random_universe(rng, max_size=7, conflict_density=0.5)
        problem = encode_p2(u)
        soft, _ = soft_max(u, problem.atoms)
        shared = u.testing & u.unstable
        from satmigrate.repo import admissible_sets
        for t_prime in admissible_sets(u):
            if not shared <= t_prime:
                continue
            checked += 1
            true_atoms = {problem.atoms.pkg(p) for p in t_prime}
            count = sum(1 for (lit,) in soft
                        if (lit > 0) == (abs(lit) in true_atoms))
            assert count == len(u.testing ^ t_prime)
    assert checked > 50


def test_identical_inputs_identical_dimacs():
    rng = random.Random(73)
    u = random_universe(rng, max_size=7, conflict_density=0.8)
    pkgs = list(u.packages)
    rng.shuffle(pkgs)
    permuted = make_universe(pkgs,
                             {p: [list(d) for d in u.dep[p]] for p in pkgs},
                             sorted(u.conflicts), u.testing, u.unstable)
    for name in ("p2", "p3", "p4", "p5-strict", "p5-pruned"):
        first = build_encoding(u, None, name)
        second = build_encoding(permuted, None, name)
        assert satcore.emit_dimacs(first.hard, num_vars=first.num_vars) == \
            satcore.emit_dimacs(second.hard, num_vars=second.num_vars)
