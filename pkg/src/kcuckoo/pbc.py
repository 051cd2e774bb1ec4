"""Systematic probabilistic batch codes built from cuckoo hashing.

Every database index ``j`` (encoded as 8 big-endian bytes) is copied into
its entry bucket in each of the ``k`` sub-tables, and every stash bucket
holds the whole database. A batch ``Q`` of ``q`` indices is scheduled by
allocating ``Q`` in ``CH(k, b, ell, s)``: each assigned slot becomes one read
from the matching bucket. When the chosen ``k`` would exceed ``q``, the code
falls back to plain replication into ``q`` buckets.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Literal, Optional, Sequence, Union

import numpy as np

from .construct import construct
from .errors import DecodeError, InputError, ParameterError, ScheduleFailure
from .hashing import CuckooParams, HashKey, entry_table, sample_key
from .params import calibrated, k_for_failure, k_robust, round_up

Mode = Literal["standard", "robust"]


def encode_index(j: int) -> bytes:
    return int(j).to_bytes(8, "big")


@dataclass(frozen=True)
class Replication:
    q: int


@dataclass(frozen=True, eq=False)
class CuckooCode:
    """Cuckoo parameters over ``q`` items plus the bucket layout of ``[n]``.

    ``positions[j, i]`` is the position of index ``j`` inside its bucket of
    sub-table ``i``; buckets list indices in increasing order.
    """

    params: CuckooParams
    key: HashKey
    entries: np.ndarray = field(repr=False)
    positions: np.ndarray = field(repr=False)
    sizes: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, params: CuckooParams, key: HashKey, n: int) -> "CuckooCode":
        entries = entry_table(key, [encode_index(j) for j in range(n)], params)
        positions = np.empty_like(entries)
        sizes = np.zeros(params.b, np.int64)
        for i in range(params.k):
            # stable sort keeps indices ascending inside each bucket
            order = np.argsort(entries[:, i], kind="stable")
            col = entries[order, i]
            starts = np.searchsorted(col, col, side="left")
            positions[order, i] = np.arange(n) - starts
            sizes += np.bincount(entries[:, i], minlength=params.b)
        for a in (entries, positions, sizes):
            a.setflags(write=False)
        return cls(params, key, entries, positions, sizes)

    @property
    def stash_buckets(self) -> int:
        return -(-self.params.s // self.params.ell)


@dataclass(frozen=True)
class PbcParams:
    n: int
    q: int
    lam: int
    mode: str
    inner: Union[Replication, CuckooCode]

    @property
    def is_replication(self) -> bool:
        return isinstance(self.inner, Replication)

    @property
    def reads_per_bucket(self) -> int:
        return 1 if self.is_replication else self.inner.params.ell

    @property
    def m(self) -> int:
        """Bucket count."""
        if self.is_replication:
            return self.q
        return self.inner.params.b + self.inner.stash_buckets

    @property
    def N(self) -> int:
        """Total number of codewords."""
        if self.is_replication:
            return self.q * self.n
        return (self.inner.params.k + self.inner.stash_buckets) * self.n

    def bucket_sizes(self) -> list[int]:
        if self.is_replication:
            return [self.n] * self.q
        return [int(x) for x in self.inner.sizes] + [self.n] * self.inner.stash_buckets

    def with_key(self, key: HashKey) -> "PbcParams":
        if self.is_replication:
            return self
        return replace(self, inner=CuckooCode.build(self.inner.params, key, self.n))


def pbc_init(
    n: int,
    q: int,
    lam: int,
    mode: Mode = "standard",
    master_seed: int = 0,
    k: Optional[int] = None,
    ell: int = 1,
    s: int = 0,
    c: Optional[float] = None,
) -> PbcParams:
    """Choose a batch code with target error ``2**-lam`` for batches of ``q`` out of ``n``.

    ``k`` overrides the formula choice. Replication is used whenever the
    chosen ``k`` exceeds ``q`` or ``q < 2``.
    """
    for name, v in (("n", n), ("q", q), ("lam", lam)):
        if not isinstance(v, (int, np.integer)) or isinstance(v, bool):
            raise ParameterError(f"{name} must be an integer")
    if not 1 <= q <= n:
        raise ParameterError(f"need 1 <= q <= n, got q={q}, n={n}")
    if lam < 1:
        raise ParameterError(f"lambda must be >= 1, got {lam}")
    if mode not in ("standard", "robust"):
        raise ParameterError(f"unknown mode {mode!r}")
    eps = 2.0 ** -lam
    if k is None and q >= 2:
        if mode == "standard":
            k = k_for_failure(q, eps, calibrated("k_for_failure") if c is None else c)
        else:
            k = k_robust(2.0 ** lam, eps, calibrated("k_robust") if c is None else c)
    if k is None or k > q or q < 2:
        return PbcParams(n, q, lam, mode, Replication(q))
    base = 2 * q if ell == 1 else -(-2 * q // ell)
    params = CuckooParams(q, k, max(k, round_up(base, k)), ell, s)
    return PbcParams(n, q, lam, mode, CuckooCode.build(params, sample_key(master_seed), n))


@dataclass(frozen=True)
class Buckets:
    """``m`` buckets of ``(index, value)`` codewords."""

    buckets: tuple[tuple[tuple[int, bytes], ...], ...]

    def __len__(self) -> int:
        return len(self.buckets)

    def __getitem__(self, i):
        return self.buckets[i]

    @property
    def sizes(self) -> list[int]:
        return [len(b) for b in self.buckets]

    @property
    def total(self) -> int:
        return sum(self.sizes)

    @property
    def max_load(self) -> int:
        return max(self.sizes, default=0)


def pbc_encode(prms: PbcParams, db: Sequence[bytes]) -> Buckets:
    if len(db) != prms.n:
        raise InputError(f"database must have {prms.n} entries, got {len(db)}")
    everything = tuple((j, bytes(db[j])) for j in range(prms.n))
    if prms.is_replication:
        return Buckets((everything,) * prms.q)
    code = prms.inner
    lists: list[list] = [[] for _ in range(code.params.b)]
    for j in range(prms.n):
        for g in code.entries[j]:
            lists[g].append(everything[j])
    out = [tuple(x) for x in lists] + [everything] * code.stash_buckets
    return Buckets(tuple(out))


def dump_buckets(buckets: Buckets) -> str:
    """One line per bucket with its comma-separated indices."""
    return "".join(",".join(str(j) for j, _ in b) + "\n" for b in buckets.buckets)


@dataclass(frozen=True)
class Schedule:
    """``reads[i]`` lists positions read from bucket ``i``; ``plan[x]`` locates ``Q[x]``."""

    reads: tuple[tuple[int, ...], ...]
    plan: tuple[tuple[int, int], ...]


def _check_query(prms: PbcParams, Q: Sequence[int]) -> list[int]:
    Q = [int(x) for x in Q]
    if len(Q) != prms.q:
        raise InputError(f"batch must have {prms.q} indices, got {len(Q)}")
    if len(set(Q)) != len(Q):
        raise InputError("batch indices must be distinct")
    if any(not 0 <= x < prms.n for x in Q):
        raise InputError(f"batch indices must lie in [0, {prms.n})")
    return Q


def pbc_schedule(prms: PbcParams, Q: Sequence[int], algorithm: str = "bfs") -> Schedule:
    """Reads for batch ``Q``; raises :class:`ScheduleFailure` when allocation fails."""
    Q = _check_query(prms, Q)
    if prms.is_replication:
        return Schedule(tuple((x,) for x in Q), tuple((i, x) for i, x in enumerate(Q)))
    code = prms.inner
    p = code.params
    result = construct(p, code.key, [encode_index(x) for x in Q], algorithm)
    if not result.success:
        raise ScheduleFailure(f"cuckoo allocation of the batch failed (item {result.failed_item})")
    reads: list[list[int]] = [[] for _ in range(prms.m)]
    plan = []
    bl = p.b * p.ell
    for x, r in zip(Q, result.allocation.assignment):
        r = int(r)
        if r < bl:
            g = r // p.ell
            bucket, pos = g, int(code.positions[x, g // p.entries_per_table])
        else:
            bucket, pos = p.b + (r - bl) // p.ell, x
        reads[bucket].append(pos)
        plan.append((bucket, pos))
    return Schedule(tuple(tuple(r) for r in reads), tuple(plan))


def fetch(buckets: Buckets, schedule: Schedule) -> list[list[tuple[int, bytes]]]:
    """Read the scheduled codewords directly (no privacy)."""
    return [[buckets[i][pos] for pos in reads] for i, reads in enumerate(schedule.reads)]


def pbc_decode(
    prms: PbcParams,
    Q: Sequence[int],
    schedule: Schedule,
    retrieved: Sequence[Sequence[tuple[int, bytes]]],
) -> list[bytes]:
    """Values of ``Q`` in order; ``retrieved[i]`` follows ``schedule.reads[i]``."""
    Q = _check_query(prms, Q)
    out = []
    for x, (bucket, pos) in zip(Q, schedule.plan):
        try:
            rank = schedule.reads[bucket].index(pos)
            index, value = retrieved[bucket][rank]
        except (IndexError, ValueError):
            raise DecodeError(f"missing codeword for index {x}") from None
        if index != x:
            raise DecodeError(f"bucket {bucket} returned index {index}, expected {x}")
        out.append(value)
    return out


def load_envelope(prms: PbcParams, c: Optional[float] = None) -> float:
    """``c * max(n*k/q, lambda)``, the expected shape of the largest bucket.

    Replication buckets always hold exactly ``n`` codewords.
    """
    if prms.is_replication:
        return float(prms.n)
    if c is None:
        c = calibrated("pbc_load")
    return c * max(prms.n * prms.inner.params.k / prms.q, prms.lam)
