"""Perfect construction algorithms.

All four algorithms succeed exactly when the cuckoo graph has a left-perfect
matching; they differ only in which allocation they return and how much work
they do. Items are inserted in input order. Ties (BFS neighbour order, LSA
minimum label, random-walk free cell) go to the lowest sub-table, then entry,
then cell.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Optional, Sequence

import numpy as np

from . import _kernels
from .errors import ParameterError, UnsupportedParameterError
from .graph import Allocation, CuckooGraph, build_graph
from .hashing import CuckooParams, HashKey

Algorithm = Literal["bfs", "random_walk", "lsa", "matching"]

ALGORITHMS: dict[str, int] = {
    "bfs": _kernels.ALGO_BFS,
    "random_walk": _kernels.ALGO_RANDOM_WALK,
    "lsa": _kernels.ALGO_LSA,
    "matching": _kernels.ALGO_MATCHING,
}

WALK_STEPS_PER_ITEM = 4


@dataclass(frozen=True)
class ConstructionStats:
    steps: int = 0
    evictions: int = 0
    fallback_used: bool = False
    max_label: int = 0


@dataclass(frozen=True)
class ConstructionResult:
    algorithm: str
    allocation: Optional[Allocation]
    stats: ConstructionStats = field(default_factory=ConstructionStats)
    failed_item: Optional[int] = None

    @property
    def success(self) -> bool:
        return self.allocation is not None


def check_algorithm(algorithm: str, params: CuckooParams) -> int:
    try:
        code = ALGORITHMS[algorithm]
    except KeyError:
        raise ParameterError(f"unknown algorithm {algorithm!r}; choose from {sorted(ALGORITHMS)}") from None
    if code == _kernels.ALGO_LSA and params.ell != 1:
        raise UnsupportedParameterError("local search allocation requires ell = 1")
    return code


def default_max_steps(n: int) -> int:
    return max(1, WALK_STEPS_PER_ITEM * n)


def construct_graph(
    graph: CuckooGraph,
    algorithm: Algorithm = "bfs",
    rng_seed: int = 0,
    max_steps: Optional[int] = None,
) -> ConstructionResult:
    p = graph.params
    code = check_algorithm(algorithm, p)
    if max_steps is None:
        max_steps = default_max_steps(p.n)
    if max_steps < 1:
        raise ParameterError("max_steps must be >= 1")
    assign, st = _kernels.construct_kernel(
        graph.entries, p.b, p.ell, p.s, code, int(max_steps), np.uint64(rng_seed)
    )
    stats = ConstructionStats(
        steps=int(st[_kernels.ST_STEPS]),
        evictions=int(st[_kernels.ST_EVICTIONS]),
        fallback_used=bool(st[_kernels.ST_FALLBACK]),
        max_label=int(st[_kernels.ST_MAX_LABEL]),
    )
    if st[_kernels.ST_SUCCESS]:
        return ConstructionResult(algorithm, Allocation(assign), stats)
    failed = int(st[_kernels.ST_FAILED_ITEM])
    return ConstructionResult(algorithm, None, stats, failed if failed >= 0 else None)


def construct(
    params: CuckooParams,
    key: HashKey,
    ids: Sequence[bytes],
    algorithm: Algorithm = "bfs",
    rng_seed: int = 0,
    max_steps: Optional[int] = None,
) -> ConstructionResult:
    """Allocate ``ids`` into ``CH(k, b, ell, s)`` under ``key``."""
    check_algorithm(algorithm, params)
    return construct_graph(build_graph(params, ids, key), algorithm, rng_seed, max_steps)


# --------------------------------------------------------------------------
# step-level operations on an explicit partial allocation
# --------------------------------------------------------------------------


class TableState:
    """Mutable partial allocation for one construction run (not thread-safe)."""

    def __init__(self, graph: CuckooGraph):
        p = graph.params
        self.graph = graph
        self.occupant = np.full(p.num_slots, -1, np.int64)
        self.assign = np.full(p.n, -1, np.int64)
        self.labels = np.zeros(p.b, np.int64)
        self.stash_used = 0
        self._mark = np.zeros(p.num_slots, np.int64)
        self._epoch = 0
        self._parent = np.full(p.num_slots, -1, np.int64)
        self._queue = np.empty(p.n + 1, np.int64)

    def allocation(self) -> Allocation:
        return Allocation(self.assign.copy())

    def place(self, item: int, slot: int) -> None:
        if self.occupant[slot] != -1:
            raise ParameterError(f"slot {slot} already occupied")
        if slot not in self.graph.neighbors(item):
            raise ParameterError(f"slot {slot} is not a neighbour of item {item}")
        if self.assign[item] >= 0:
            self.occupant[self.assign[item]] = -1
        self.occupant[slot] = item
        self.assign[item] = slot


@dataclass(frozen=True)
class AugmentingPath:
    """Alternating path ``items[0] -> slots[0] -> items[1] -> ... -> slots[-1]``.

    ``items[0]`` is the new item and ``slots[-1]`` is free; ``len`` counts edges.
    """

    items: tuple[int, ...]
    slots: tuple[int, ...]

    def __len__(self) -> int:
        return 2 * len(self.items) - 1

    def apply(self, state: TableState) -> None:
        for item, slot in zip(reversed(self.items), reversed(self.slots)):
            state.assign[item] = slot
            state.occupant[slot] = item


def bfs_insert(state: TableState, item: int) -> Optional[AugmentingPath]:
    """Shortest augmenting path from ``item`` to a free slot, or None.

    The path is returned, not applied.
    """
    p = state.graph.params
    state._epoch += 1
    free, _ = _kernels.bfs_augment(
        state.graph.entries, p.ell, p.s, p.b * p.ell, state.occupant, item,
        state._mark, state._epoch, state._parent, state._queue,
    )
    if free < 0:
        return None
    slots = [int(free)]
    items = []
    r = int(free)
    while True:
        u = int(state._parent[r])
        items.append(u)
        if u == item:
            break
        r = int(state.assign[u])
        slots.append(r)
    return AugmentingPath(tuple(reversed(items)), tuple(reversed(slots)))


def random_walk_insert(state: TableState, item: int, max_steps: int, rng: np.ndarray) -> tuple[str, int]:
    """Eviction walk; returns ``("placed", -1)`` or ``("exhausted", homeless)``.

    ``rng`` is a one-element uint64 array holding the walk's generator state.
    After ``"exhausted"`` the caller is expected to run :func:`bfs_insert` for
    the homeless item.
    """
    if max_steps < 1:
        raise ParameterError("max_steps must be >= 1")
    p = state.graph.params
    homeless, _ = _kernels.random_walk_insert(
        state.graph.entries, p.ell, p.s, p.b * p.ell, state.occupant, state.assign,
        item, int(max_steps), rng,
    )
    if homeless < 0:
        return "placed", -1
    return "exhausted", int(homeless)


def lsa_insert(state: TableState, item: int) -> str:
    """Local search allocation step; ``"placed"`` or ``"failure"``."""
    p = state.graph.params
    if p.ell != 1:
        raise UnsupportedParameterError("local search allocation requires ell = 1")
    stats = np.zeros(_kernels.N_STATS, np.int64)
    used = _kernels.lsa_insert(
        state.graph.entries, p.b, p.s, state.labels, state.occupant[: p.b],
        state.assign, state.stash_used, item, stats,
    )
    if used < 0:
        return "failure"
    for j in range(state.stash_used, used):
        state.occupant[p.b + j] = int(np.flatnonzero(state.assign == p.b + j)[0])
    state.stash_used = int(used)
    return "placed"


def new_rng(seed: int) -> np.ndarray:
    return np.array([seed], dtype=np.uint64)
