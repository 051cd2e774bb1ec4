"""The cuckoo bipartite graph, a maximum-matching oracle and an exhaustive
Hall-violation search for small instances.

Left vertices are items, right vertices are slots numbered as in
:meth:`CuckooParams.slot_index`. Allocations are matchings.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .errors import InputError, ParameterError, SizeError
from .hashing import CuckooParams, HashKey, entry_table

HALL_SEARCH_LIMIT = 24


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.int64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class CuckooGraph:
    """Bipartite graph with ``n`` items and ``b*ell + s`` slots.

    Stored implicitly: ``entries[u, i]`` is the global entry chosen for item
    ``u`` in sub-table ``i``; every item is also adjacent to all stash slots.
    """

    params: CuckooParams
    entries: np.ndarray

    @classmethod
    def from_entries(cls, params: CuckooParams, entries) -> "CuckooGraph":
        """Build from per-sub-table entry indices (``entries[u][i]`` in ``[0, b/k)``)."""
        local = np.asarray(entries, dtype=np.int64).reshape(-1, params.k)
        m = params.entries_per_table
        if local.size and (local.min() < 0 or local.max() >= m):
            raise ParameterError(f"entry indices must lie in [0, {m})")
        glob = local + np.arange(params.k, dtype=np.int64) * m
        return cls(params.with_n(local.shape[0]), _frozen(glob))

    def __post_init__(self):
        if self.entries.shape != (self.params.n, self.params.k):
            raise ParameterError("entries shape must be (n, k)")
        if self.params.n:
            m = self.params.entries_per_table
            tables = self.entries // m
            if not (tables == np.arange(self.params.k)).all():
                raise ParameterError("entry i of every item must lie in sub-table i")

    @property
    def left_count(self) -> int:
        return self.params.n

    @property
    def right_count(self) -> int:
        return self.params.num_slots

    def neighbors(self, u: int) -> list[int]:
        p = self.params
        out = [int(g) * p.ell + c for g in self.entries[u] for c in range(p.ell)]
        out.extend(range(p.b * p.ell, p.b * p.ell + p.s))
        return out

    @property
    def adjacency(self) -> list[list[int]]:
        """Ordered right-vertex list of every item (canonical probe order)."""
        return [self.neighbors(u) for u in range(self.left_count)]

    def local_entries(self) -> np.ndarray:
        """Entry index within each sub-table, shape ``(n, k)``."""
        return self.entries - np.arange(self.params.k) * self.params.entries_per_table


def build_graph(params: CuckooParams, ids: Sequence[bytes], key: HashKey) -> CuckooGraph:
    if len(ids) != params.n:
        raise InputError(f"expected {params.n} ids, got {len(ids)}")
    if len(set(ids)) != len(ids):
        raise InputError("ids must be pairwise distinct")
    return CuckooGraph(params, _frozen(entry_table(key, ids, params)))


@dataclass(frozen=True, eq=False)
class Allocation:
    """Item -> slot assignment; ``-1`` marks an unassigned item."""

    assignment: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "assignment", _frozen(self.assignment))

    @property
    def size(self) -> int:
        return int((self.assignment >= 0).sum())

    @property
    def is_left_perfect(self) -> bool:
        return bool((self.assignment >= 0).all())

    def mapping(self) -> dict[int, int]:
        return {u: int(r) for u, r in enumerate(self.assignment) if r >= 0}

    def is_valid_for(self, graph: CuckooGraph) -> bool:
        """Every assignment is an edge and no slot is used twice."""
        used = [r for r in self.assignment if r >= 0]
        if len(used) != len(set(used)):
            return False
        return all(r < 0 or int(r) in graph.neighbors(u) for u, r in enumerate(self.assignment))


def max_left_matching(graph: CuckooGraph) -> Allocation:
    """Maximum-cardinality matching (Hopcroft-Karp)."""
    p = graph.params
    assign, _ = _kernels.hopcroft_karp(graph.entries, p.b, p.ell, p.s)
    return Allocation(assign)


def _components(graph: CuckooGraph, vertices: np.ndarray) -> list[np.ndarray]:
    # items are linked when they share a table entry
    parent = list(range(len(vertices)))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    owner: dict[int, int] = {}
    for pos, u in enumerate(vertices):
        for g in graph.entries[u]:
            other = owner.setdefault(int(g), pos)
            ra, rb = find(pos), find(other)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
    groups: dict[int, list[int]] = {}
    for pos, u in enumerate(vertices):
        groups.setdefault(find(pos), []).append(int(u))
    return [np.array(g, np.int64) for g in groups.values()]


def find_hall_violation(graph: CuckooGraph, t_max: int) -> Optional[tuple[int, ...]]:
    """Smallest item set ``X`` with ``|X| <= t_max`` and ``|N(X)| < |X|``, or None.

    Exhaustive; sizes are tried in ascending order so the witness returned is
    a smallest one (lexicographically first among those). Without a stash a
    smallest witness never spans two entry-disjoint groups of items, so each
    such group is searched on its own.
    """
    p = graph.params
    n = graph.left_count
    if n > HALL_SEARCH_LIMIT:
        raise SizeError(f"exhaustive Hall search limited to n <= {HALL_SEARCH_LIMIT}, got {n}")
    if t_max > n:
        raise ParameterError(f"t_max={t_max} exceeds n={n}")
    everyone = np.arange(n, dtype=np.int64)
    groups = _components(graph, everyone) if p.s == 0 else [everyone]
    for t in range(p.query_overhead + 1, t_max + 1):
        for group in groups:
            if len(group) < t:
                continue
            found = _kernels.hall_search_size(graph.entries, p.ell, p.s, p.b, group, t)
            if found.size:
                return tuple(sorted(int(u) for u in found))
    return None


def neighborhood_size(graph: CuckooGraph, items: Sequence[int]) -> int:
    p = graph.params
    distinct = {int(g) for u in items for g in graph.entries[u]}
    return p.ell * len(distinct) + p.s if items else 0
