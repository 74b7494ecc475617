from __future__ import annotations

import random

from satmigrate.closure import (ClosureIndex, connecting_dependencies,
                                dependency_closure, easy_packages,
                                hard_closure, may_depend,
                                relevant_conflicts)
from satmigrate.repo import make_universe

from .generators import P, random_universe, tiny_universe


# -- may depend ----------------------------------------------------------------

def test_may_depend_is_union_of_disjunctions():
    u = tiny_universe(["p/1", "a/1", "b/1", "c/1"],
                      dep={"p/1": [["a/1", "b/1"], ["c/1"]]})
    assert may_depend(u)[P("p/1")] == {P("a/1"), P("b/1"), P("c/1")}


def test_may_depend_empty_without_dependencies():
    u = tiny_universe(["p/1"])
    assert may_depend(u)[P("p/1")] == frozenset()


def test_empty_disjunction_contributes_nothing():
    u = tiny_universe(["p/1"], dep={"p/1": [[]]})
    assert may_depend(u)[P("p/1")] == frozenset()


# -- dependency closure -----------------------------------------------------------

def test_closure_of_chain():
    u = tiny_universe(["p/1", "q/1", "r/1"],
                      dep={"p/1": [["q/1"]], "q/1": [["r/1"]]})
    closure = dependency_closure(u)
    assert closure[P("p/1")] == {P("p/1"), P("q/1"), P("r/1")}
    assert closure[P("q/1")] == {P("q/1"), P("r/1")}


def test_closure_of_cycle_is_whole_component():
    u = tiny_universe(["p/1", "q/1"],
                      dep={"p/1": [["q/1"]], "q/1": [["p/1"]]})
    closure = dependency_closure(u)
    assert closure[P("p/1")] == closure[P("q/1")] == {P("p/1"), P("q/1")}


def test_closure_of_isolated_package_is_reflexive():
    u = tiny_universe(["p/1"])
    assert dependency_closure(u)[P("p/1")] == {P("p/1")}


def test_closure_is_transitive_and_idempotent():
    rng = random.Random(3)
    for _ in range(25):
        u = random_universe(rng, max_size=8, dep_density=0.7)
        idx = ClosureIndex(u)
        for p in idx.packages:
            closure = idx.closure(p)
            assert p in closure
            for q in closure:
                assert idx.closure(q) <= closure  # transitive, hence idempotent


# -- easy packages -----------------------------------------------------------------

def test_everything_easy_without_conflicts():
    u = tiny_universe(["p/1", "q/1"], dep={"p/1": [["q/1"]]})
    idx = ClosureIndex(u)
    assert easy_packages(idx) == u.packages


def test_conflict_in_closure_makes_packages_hard():
    u = tiny_universe(["p/1", "q/1", "r/1"],
                      dep={"p/1": [["q/1"]]},
                      conflicts=[("q/1", "r/1")])
    idx = ClosureIndex(u)
    # closure(p)={p,q} meets {q,r}; q and r are endpoints themselves
    assert easy_packages(idx) == frozenset()


def test_isolated_package_stays_easy_despite_remote_conflict():
    u = tiny_universe(["p/1", "q/1", "r/1"], conflicts=[("q/1", "r/1")])
    idx = ClosureIndex(u)
    assert P("p/1") in easy_packages(idx)


# -- hard closure -----------------------------------------------------------------

def test_hard_closure_reduces_to_seed_when_all_easy():
    u = tiny_universe(["p/1", "q/1"], dep={"p/1": [["q/1"]]})
    idx = ClosureIndex(u)
    assert hard_closure(idx) == {P("p/1"): {P("p/1")}, P("q/1"): {P("q/1")}}


def test_hard_closure_excludes_easy_successors():
    # p -> q (both hard through the conflict), q -> e with e easy
    u = tiny_universe(["p/1", "q/1", "e/1", "x/1"],
                      dep={"p/1": [["q/1"]], "q/1": [["e/1"]]},
                      conflicts=[("p/1", "q/1")])
    idx = ClosureIndex(u)
    assert P("e/1") in idx.easy
    assert idx.hard_closure(P("p/1")) == {P("p/1"), P("q/1")}


def test_hard_package_without_dependencies_closes_to_itself():
    u = tiny_universe(["p/1", "q/1"], conflicts=[("p/1", "q/1")])
    idx = ClosureIndex(u)
    assert idx.hard_closure(P("p/1")) == {P("p/1")}


# -- relevant conflicts -------------------------------------------------------------

def test_conflict_with_endpoint_outside_closure_is_irrelevant():
    u = tiny_universe(["p/1", "q/1", "r/1"],
                      dep={"p/1": [["q/1"]]},
                      conflicts=[("q/1", "r/1")])
    idx = ClosureIndex(u)
    assert relevant_conflicts(idx, P("p/1")) == frozenset()


def test_conflict_inside_closure_is_relevant_both_ways():
    u = tiny_universe(["p/1", "q/1", "r/1"],
                      dep={"p/1": [["q/1"], ["r/1"]]},
                      conflicts=[("q/1", "r/1")])
    idx = ClosureIndex(u)
    assert relevant_conflicts(idx, P("p/1")) == {
        (P("q/1"), P("r/1")), (P("r/1"), P("q/1"))}


def test_no_conflicts_nothing_relevant():
    rng = random.Random(5)
    u = random_universe(rng, max_size=6, conflict_density=0.0)
    idx = ClosureIndex(u)
    assert all(relevant_conflicts(idx, p) == frozenset() for p in idx.packages)


# -- connecting dependencies ----------------------------------------------------------

def test_connecting_is_only_the_seed_without_relevant_conflicts():
    u = tiny_universe(["p/1", "q/1"], dep={"p/1": [["q/1"]]})
    idx = ClosureIndex(u)
    assert connecting_dependencies(idx, P("p/1")) == {P("p/1")}


def test_connecting_includes_both_conflict_sides():
    u = tiny_universe(["p/1", "q/1", "r/1"],
                      dep={"p/1": [["q/1"], ["r/1"]]},
                      conflicts=[("q/1", "r/1")])
    idx = ClosureIndex(u)
    assert connecting_dependencies(idx, P("p/1")) == {
        P("p/1"), P("q/1"), P("r/1")}


def test_connecting_tracks_paths_to_conflict_endpoints():
    # p -> q -> s, conflict (s, t), t also in p's closure
    u = tiny_universe(["p/1", "q/1", "s/1", "t/1"],
                      dep={"p/1": [["q/1"], ["t/1"]], "q/1": [["s/1"]]},
                      conflicts=[("s/1", "t/1")])
    idx = ClosureIndex(u)
    assert P("q/1") in connecting_dependencies(idx, P("p/1"))


# -- cross-cutting invariants ----------------------------------------------------------

def test_containment_chain_and_easy_relevance():
    rng = random.Random(17)
    for _ in range(30):
        u = random_universe(rng, max_size=8, dep_density=0.7,
                            conflict_density=0.8)
        idx = ClosureIndex(u)
        for p in idx.packages:
            connecting = idx.connecting(p)
            hard = idx.hard_closure(p)
            closure = idx.closure(p)
            assert p in connecting
            assert connecting <= hard <= closure
            if p in idx.easy:
                assert idx.relevant_conflicts(p) == frozenset()
                assert hard == {p}


def test_results_independent_of_insertion_order():
    rng = random.Random(29)
    for _ in range(10):
        u = random_universe(rng, max_size=8, conflict_density=0.7)
        pkgs = list(u.packages)
        rng.shuffle(pkgs)
        permuted = make_universe(pkgs,
                                 {p: [list(d) for d in u.dep[p]] for p in pkgs},
                                 sorted(u.conflicts), u.testing, u.unstable)
        a, b = ClosureIndex(u), ClosureIndex(permuted)
        assert a.easy == b.easy
        for p in a.packages:
            assert a.closure(p) == b.closure(p)
            assert a.hard_closure(p) == b.hard_closure(p)
            assert a.connecting(p) == b.connecting(p)
