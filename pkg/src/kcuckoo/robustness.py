"""A concrete first-half adversary and harnesses for measuring robustness.

The adversary enumerates decimal ids ``"0", "1", ...`` and keeps those whose
entry in every sub-table falls in the first ``floor(n / (2*ell*k))`` entries.
``n`` such ids fit in at most ``n/2`` table slots, so with ``s < n/2`` no
allocation exists.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .construct import construct
from .estimator import wilson_interval
from .graph import CuckooGraph, build_graph, find_hall_violation
from .hashing import CuckooParams, HashKey, child_seed, pack_ids, sample_key
from .errors import ParameterError

SCAN_BATCH = 4096


@dataclass(frozen=True)
class AttackResult:
    """``collected`` holds the ids found so far; the attack succeeded when it has ``n``."""

    n: int
    collected: tuple[bytes, ...]
    hash_evaluations_used: int

    @property
    def outcome(self) -> str:
        return "found" if self.found is not None else "exhausted"

    @property
    def found(self) -> Optional[tuple[bytes, ...]]:
        return self.collected if self.n and len(self.collected) == self.n else None


def first_half_threshold(params: CuckooParams) -> int:
    return params.n // (2 * params.ell * params.k)


def _decimal_ids(start: int, stop: int) -> list[bytes]:
    return [str(c).encode() for c in range(start, stop)]


def attack_first_half(
    key: HashKey,
    params: CuckooParams,
    budget: int,
    candidates: Optional[Sequence[bytes]] = None,
) -> AttackResult:
    """Run the adversary with at most ``budget`` hash evaluations.

    Each candidate costs ``k`` evaluations. ``candidates`` replaces the
    decimal enumeration with a fixed universe, scanned in order.
    """
    if budget < 0:
        raise ParameterError("budget must be >= 0")
    threshold = first_half_threshold(params)
    if threshold < 1 or budget < params.k:
        return AttackResult(params.n, (), 0)
    limit = budget // params.k
    if candidates is not None:
        limit = min(limit, len(candidates))
    k0, k1 = key._sip
    found: list[bytes] = []
    examined = 0
    while examined < limit and len(found) < params.n:
        stop = min(limit, examined + SCAN_BATCH)
        batch = list(candidates[examined:stop]) if candidates is not None else _decimal_ids(examined, stop)
        buf, offsets = pack_ids(batch)
        mask = _kernels.first_half_scan(k0, k1, buf, offsets, params.k, params.entries_per_table, threshold)
        for pos in np.flatnonzero(mask):
            found.append(batch[pos])
            if len(found) == params.n:
                examined += int(pos) + 1
                break
        else:
            examined = stop
    return AttackResult(params.n, tuple(found), examined * params.k)


@dataclass(frozen=True)
class AttackEvaluation:
    runs: int
    found: int
    successes: int

    @property
    def rate(self) -> float:
        return self.successes / self.runs

    @property
    def interval(self) -> tuple[float, float]:
        return wilson_interval(self.successes, self.runs)


def run_key(master_seed: int, run: int) -> HashKey:
    return sample_key(child_seed(master_seed, run))


def evaluate_attack(
    params: CuckooParams,
    budget: int,
    runs: int,
    master_seed: int = 0,
    algorithm: str = "bfs",
) -> AttackEvaluation:
    """Fraction of independent keys for which the attack yields a failing set."""
    if runs < 1:
        raise ParameterError("runs must be >= 1")
    found = successes = 0
    for r in range(runs):
        key = run_key(master_seed, r)
        result = attack_first_half(key, params, budget)
        if result.found is None:
            continue
        found += 1
        if not construct(params, key, list(result.found), algorithm).success:
            successes += 1
    return AttackEvaluation(runs, found, successes)


@dataclass(frozen=True)
class Certificate:
    certified: bool
    witness: Optional[tuple[bytes, ...]] = None


def certify_no_violation(key: HashKey, params: CuckooParams, queried_ids: Sequence[bytes]) -> Certificate:
    """Exhaustively check that no subset of ``queried_ids`` of size ``<= n`` is unallocatable.

    Limited to 24 ids (raises :class:`SizeError` beyond).
    """
    ids = list(queried_ids)
    if not ids:
        return Certificate(True)
    graph: CuckooGraph = build_graph(params.with_n(len(ids)), ids, key)
    witness = find_hall_violation(graph, min(params.n, len(ids)))
    if witness is None:
        return Certificate(True)
    return Certificate(False, tuple(ids[u] for u in witness))
