"""Dependency-closure index.

Precomputes the "may depend" relation, its reflexive-transitive closure,
the easy packages (whose closure touches no conflict endpoint), the closure
restricted to hard packages, and — lazily — the relevant conflicts and
connecting dependencies of individual packages.

Closures are computed bottom-up over the condensation of the may-depend
graph into strongly connected components; package sets are held as integer
bitmasks internally and exposed as frozensets.
"""

from __future__ import annotations

from .repo import Package, Universe


def _scc_closures(n: int, succ: list[list[int]]) -> list[int]:
    """Per-node reachability masks (reflexive) via iterative Tarjan.

    SCCs are emitted children-first, so the closure of a component is its
    own mask joined with the already-final closures of its successors.
    """
    order = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    stack: list[int] = []
    closures = [0] * n
    counter = 0
    for root in range(n):
        if order[root] != -1:
            continue
        work = [(root, 0)]
        while work:
            v, pi = work[-1]
            if pi == 0:
                order[v] = low[v] = counter
                counter += 1
                stack.append(v)
                on_stack[v] = True
            advanced = False
            for i in range(pi, len(succ[v])):
                w = succ[v][i]
                if order[w] == -1:
                    work[-1] = (v, i + 1)
                    work.append((w, 0))
                    advanced = True
                    break
                if on_stack[w] and order[w] < low[v]:
                    low[v] = order[w]
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                if low[v] < low[parent]:
                    low[parent] = low[v]
            if low[v] == order[v]:
                component = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    component.append(w)
                    if w == v:
                        break
                members = set(component)
                mask = 0
                for w in component:
                    mask |= 1 << w
                closure = mask
                for w in component:
                    for x in succ[w]:
                        if x not in members:
                            closure |= closures[x]
                for w in component:
                    closures[w] = closure
    return closures


class ClosureIndex:
    """Immutable closure data for one universe."""

    def __init__(self, universe: Universe):
        self.universe = universe
        self._pkgs = universe.sorted_packages()
        self._index = {p: i for i, p in enumerate(self._pkgs)}
        n = len(self._pkgs)
        succ: list[list[int]] = []
        for p in self._pkgs:
            union: set[int] = set()
            for disjunction in universe.dep.get(p, ()):
                union.update(self._index[q] for q in disjunction)
            succ.append(sorted(union))
        self._succ = succ
        self._closure = _scc_closures(n, succ)
        ends = 0
        for a, b in universe.conflicts:
            ends |= 1 << self._index[a]
            ends |= 1 << self._index[b]
        self._conflict_ends = ends
        easy_mask = 0
        for i in range(n):
            if not self._closure[i] & ends:
                easy_mask |= 1 << i
        self._easy_mask = easy_mask
        hard_succ = [[w for w in succ[v] if not easy_mask >> w & 1]
                     if not easy_mask >> v & 1 else []
                     for v in range(n)]
        self._hard_closure = _scc_closures(n, hard_succ)
        for i in range(n):
            if easy_mask >> i & 1:
                self._hard_closure[i] = 1 << i
        self._relevant: dict[int, frozenset] = {}
        self._connecting: dict[int, int] = {}

    # -- helpers -------------------------------------------------------------

    def _mask_to_set(self, mask: int) -> frozenset[Package]:
        pkgs = self._pkgs
        out = []
        while mask:
            low = mask & -mask
            out.append(pkgs[low.bit_length() - 1])
            mask ^= low
        return frozenset(out)

    # -- public surface -------------------------------------------------------

    @property
    def packages(self) -> list[Package]:
        return list(self._pkgs)

    def may_dep(self, p: Package) -> frozenset[Package]:
        return frozenset(self._pkgs[w] for w in self._succ[self._index[p]])

    def closure(self, p: Package) -> frozenset[Package]:
        return self._mask_to_set(self._closure[self._index[p]])

    def closure_size(self, p: Package) -> int:
        return self._closure[self._index[p]].bit_count()

    @property
    def easy(self) -> frozenset[Package]:
        return self._mask_to_set(self._easy_mask)

    def is_easy(self, p: Package) -> bool:
        return bool(self._easy_mask >> self._index[p] & 1)

    def hard_closure(self, p: Package) -> frozenset[Package]:
        return self._mask_to_set(self._hard_closure[self._index[p]])

    def relevant_conflicts(self, p: Package) -> frozenset[tuple[Package, Package]]:
        """Conflicts with both endpoints inside p's dependency closure."""
        i = self._index[p]
        cached = self._relevant.get(i)
        if cached is None:
            mask = self._closure[i]
            idx = self._index
            cached = frozenset(
                (a, b) for a, b in self.universe.conflicts
                if mask >> idx[a] & 1 and mask >> idx[b] & 1)
            self._relevant[i] = cached
        return cached

    def _connecting_mask(self, p: Package) -> int:
        i = self._index[p]
        cached = self._connecting.get(i)
        if cached is None:
            ends = 0
            for a, b in self.relevant_conflicts(p):
                ends |= 1 << self._index[a]
                ends |= 1 << self._index[b]
            cached = 1 << i
            if ends:
                mask = self._closure[i]
                mm = mask
                while mm:
                    low = mm & -mm
                    w = low.bit_length() - 1
                    if self._closure[w] & ends:
                        cached |= low
                    mm ^= low
            self._connecting[i] = cached
        return cached

    def connecting(self, p: Package) -> frozenset[Package]:
        """Closure members whose own closure reaches a relevant-conflict
        endpoint, plus p itself."""
        return self._mask_to_set(self._connecting_mask(p))

    def closure_sizes(self) -> dict[Package, int]:
        return {p: self._closure[i].bit_count()
                for i, p in enumerate(self._pkgs)}


# Operation-style wrappers around the index.

def may_depend(u: Universe) -> dict[Package, frozenset[Package]]:
    idx = ClosureIndex(u)
    return {p: idx.may_dep(p) for p in idx.packages}


def dependency_closure(u: Universe) -> dict[Package, frozenset[Package]]:
    idx = ClosureIndex(u)
    return {p: idx.closure(p) for p in idx.packages}


def easy_packages(idx: ClosureIndex) -> frozenset[Package]:
    return idx.easy


def hard_closure(idx: ClosureIndex) -> dict[Package, frozenset[Package]]:
    return {p: idx.hard_closure(p) for p in idx.packages}


def relevant_conflicts(idx: ClosureIndex, p: Package):
    return idx.relevant_conflicts(p)


def connecting_dependencies(idx: ClosureIndex, p: Package):
    return idx.connecting(p)
