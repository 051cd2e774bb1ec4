"""Seeded hash family: one entry per sub-table for every item identifier.

The keyed hash is SipHash-2-4 with 128-bit output over
``i.to_bytes(4, "big") + id``; the 128-bit value is reduced modulo the
sub-table size.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from . import _kernels
from .errors import ParameterError

MAX_SUBTABLE = 1 << 32


@dataclass(frozen=True)
class CuckooParams:
    """The tuple ``(n, k, b, ell, s)``.

    ``n`` items, ``k`` disjoint sub-tables splitting ``b`` entries evenly,
    ``ell`` cells per entry and a stash of ``s`` slots. ``b * ell + s < n`` is
    allowed: construction simply fails.
    """

    n: int
    k: int
    b: int
    ell: int = 1
    s: int = 0

    def __post_init__(self):
        for name in ("n", "k", "b", "ell", "s"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or isinstance(value, bool):
                raise ParameterError(f"{name} must be an integer, got {value!r}")
        if self.n < 0:
            raise ParameterError(f"n must be >= 0, got {self.n}")
        if self.k < 1:
            raise ParameterError(f"k must be >= 1, got {self.k}")
        if self.b < self.k:
            raise ParameterError(f"b must be >= k, got b={self.b}, k={self.k}")
        if self.b % self.k:
            raise ParameterError(f"k={self.k} must divide b={self.b}")
        if self.b // self.k >= MAX_SUBTABLE:
            raise ParameterError("sub-tables are limited to 2**32 - 1 entries")
        if self.ell < 1:
            raise ParameterError(f"ell must be >= 1, got {self.ell}")
        if self.s < 0:
            raise ParameterError(f"s must be >= 0, got {self.s}")

    @property
    def entries_per_table(self) -> int:
        return self.b // self.k

    @property
    def query_overhead(self) -> int:
        return self.k * self.ell + self.s

    @property
    def storage_overhead(self) -> int:
        return self.b * self.ell + self.s

    @property
    def num_slots(self) -> int:
        return self.b * self.ell + self.s

    def with_n(self, n: int) -> "CuckooParams":
        return CuckooParams(n, self.k, self.b, self.ell, self.s)

    def slot_index(self, slot: "SlotId") -> int:
        """Right-vertex index of ``slot`` (table cells first, stash last)."""
        if slot.kind == "stash":
            if not 0 <= slot.index < self.s:
                raise ParameterError(f"stash index {slot.index} out of range")
            return self.b * self.ell + slot.index
        if not (0 <= slot.table < self.k and 0 <= slot.entry < self.entries_per_table
                and 0 <= slot.index < self.ell):
            raise ParameterError(f"{slot} out of range for {self}")
        return (slot.table * self.entries_per_table + slot.entry) * self.ell + slot.index

    def slot_at(self, r: int) -> "SlotId":
        """Inverse of :meth:`slot_index`."""
        r = int(r)
        if not 0 <= r < self.num_slots:
            raise ParameterError(f"slot index {r} out of range")
        bl = self.b * self.ell
        if r >= bl:
            return SlotId.stash(r - bl)
        g, cell = divmod(r, self.ell)
        table, entry = divmod(g, self.entries_per_table)
        return SlotId.cell(table, entry, cell)


class SlotId(NamedTuple):
    """A table cell ``(table, entry, index)`` or a stash slot ``index``."""

    kind: str
    table: int
    entry: int
    index: int

    @classmethod
    def cell(cls, table: int, entry: int, cell: int) -> "SlotId":
        return cls("table", table, entry, cell)

    @classmethod
    def stash(cls, index: int) -> "SlotId":
        return cls("stash", -1, -1, index)


@dataclass(frozen=True)
class HashKey:
    """256-bit opaque hash key."""

    seed: bytes
    _sip: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not isinstance(self.seed, (bytes, bytearray)) or len(self.seed) != 32:
            raise ParameterError("HashKey seed must be 32 bytes")
        object.__setattr__(self, "seed", bytes(self.seed))
        k0, k1 = _kernels.fold_key(np.frombuffer(self.seed, np.uint8))
        object.__setattr__(self, "_sip", (np.uint64(k0), np.uint64(k1)))

    def hex(self) -> str:
        return self.seed.hex()

    @classmethod
    def fromhex(cls, text: str) -> "HashKey":
        return cls(bytes.fromhex(text))


def _check_seed(master_seed: int) -> int:
    if not isinstance(master_seed, (int, np.integer)) or not 0 <= master_seed < 1 << 64:
        raise ParameterError(f"seed must be an integer in [0, 2**64), got {master_seed!r}")
    return int(master_seed)


def sample_key(master_seed: int) -> HashKey:
    """Deterministically expand a 64-bit seed into a :class:`HashKey`."""
    seed = _kernels.expand_seed(np.uint64(_check_seed(master_seed)))
    return HashKey(bytes(seed))


def child_seed(master_seed: int, index: int) -> int:
    """64-bit child seed ``PRF(master_seed, index)``; used for trials and runs."""
    return int(_kernels.trial_seed(np.uint64(_check_seed(master_seed)), np.uint64(index)))


def pack_ids(ids: Sequence[bytes]) -> tuple[np.ndarray, np.ndarray]:
    """Flatten byte strings into ``(buffer, offsets)`` for the kernels."""
    lengths = np.fromiter((len(x) for x in ids), dtype=np.int64, count=len(ids))
    offsets = np.zeros(len(ids) + 1, np.int64)
    np.cumsum(lengths, out=offsets[1:])
    buf = np.frombuffer(b"".join(ids), np.uint8) if offsets[-1] else np.zeros(1, np.uint8)
    return buf, offsets


def entry_table(key: HashKey, ids: Sequence[bytes], params: CuckooParams) -> np.ndarray:
    """``(len(ids), k)`` array of global entry indices (``i * b/k + entry``)."""
    if len(ids) == 0:
        return np.zeros((0, params.k), np.int64)
    buf, offsets = pack_ids(ids)
    k0, k1 = key._sip
    return _kernels.hash_entries(k0, k1, buf, offsets, params.k, params.entries_per_table)


def entry_index(key: HashKey, i: int, id: bytes, params: CuckooParams) -> int:
    """Entry of ``id`` inside sub-table ``i``, in ``[0, b/k)``."""
    if not 0 <= i < params.k:
        raise ParameterError(f"sub-table index {i} out of range [0, {params.k})")
    buf = np.frombuffer(id, np.uint8) if id else np.zeros(1, np.uint8)
    k0, k1 = key._sip
    lo, hi = _kernels.siphash128(k0, k1, i, buf, 0, len(id))
    return int(_kernels.mod128(np.uint64(lo), np.uint64(hi), params.entries_per_table))


def probe_set(key: HashKey, id: bytes, params: CuckooParams) -> list[SlotId]:
    """Every slot that may hold ``id``, in canonical order; ``k*ell + s`` long."""
    slots = []
    for i in range(params.k):
        e = entry_index(key, i, id, params)
        slots.extend(SlotId.cell(i, e, c) for c in range(params.ell))
    slots.extend(SlotId.stash(j) for j in range(params.s))
    return slots
