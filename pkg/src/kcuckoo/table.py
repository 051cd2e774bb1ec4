"""User-facing ``CH(k, b, ell, s)`` table: build, query, (de)serialize."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Optional, Sequence

from .construct import Algorithm, construct
from .errors import ConstructionFailure, InputError, ParameterError
from .hashing import CuckooParams, HashKey, SlotId, probe_set

MAGIC = b"KCKT\x01"
_HEADER = struct.Struct(">5QI")


@dataclass(frozen=True)
class CuckooTable:
    """``slots`` has ``b*ell + s`` entries in slot order; ``None`` marks an empty slot."""

    params: CuckooParams
    key: HashKey
    value_len: int
    slots: tuple

    def slot(self, slot: SlotId) -> Optional[tuple[bytes, bytes]]:
        return self.slots[self.params.slot_index(slot)]

    def __len__(self) -> int:
        return sum(1 for x in self.slots if x is not None)

    @property
    def stash_occupancy(self) -> int:
        bl = self.params.b * self.params.ell
        return sum(1 for x in self.slots[bl:] if x is not None)


def build_table(
    params: CuckooParams,
    key: HashKey,
    items: Sequence[tuple[bytes, bytes]],
    algorithm: Algorithm = "bfs",
    rng_seed: int = 0,
    value_len: Optional[int] = None,
) -> CuckooTable:
    """Allocate ``(id, value)`` pairs; raises :class:`ConstructionFailure` on failure.

    ``params.n`` must equal ``len(items)``. All values share one length.
    """
    ids = [bytes(i) for i, _ in items]
    if len(set(ids)) != len(ids):
        raise InputError("duplicate ids")
    lengths = {len(v) for _, v in items}
    if value_len is None:
        value_len = lengths.pop() if lengths else 0
        if lengths:
            raise InputError("all values must have the same length")
    elif lengths - {value_len}:
        raise InputError(f"all values must be {value_len} bytes")
    result = construct(params, key, ids, algorithm, rng_seed)
    if not result.success:
        raise ConstructionFailure(result)
    slots: list = [None] * params.num_slots
    for (id_, value), r in zip(items, result.allocation.assignment):
        slots[int(r)] = (bytes(id_), bytes(value))
    return CuckooTable(params, key, value_len, tuple(slots))


def query(table: CuckooTable, id: bytes, trace: Optional[list] = None) -> Optional[bytes]:
    """Value stored for ``id`` or None.

    The probe set depends only on ``(key, id, params)``. When ``trace`` is a
    list, every probed slot is appended to it, including the ones after a hit.
    """
    found = None
    for slot in probe_set(table.key, id, table.params):
        if trace is None and found is not None:
            break
        if trace is not None:
            trace.append(slot)
        cell = table.slots[table.params.slot_index(slot)]
        if found is None and cell is not None and cell[0] == id:
            found = cell[1]
    return found


def dumps(table: CuckooTable) -> bytes:
    """Header ``(n, k, b, ell, s, value_len, key)`` then every slot in order.

    A slot is ``0x00`` when empty, else ``0x01``, a big-endian u32 id length,
    the id and the value.
    """
    p = table.params
    out = [MAGIC, _HEADER.pack(p.n, p.k, p.b, p.ell, p.s, table.value_len), table.key.seed]
    for cell in table.slots:
        if cell is None:
            out.append(b"\x00")
        else:
            id_, value = cell
            out.append(b"\x01" + struct.pack(">I", len(id_)) + id_ + value)
    return b"".join(out)


def loads(data: bytes) -> CuckooTable:
    if not data.startswith(MAGIC):
        raise InputError("not a serialized cuckoo table")
    pos = len(MAGIC)
    n, k, b, ell, s, value_len = _HEADER.unpack_from(data, pos)
    pos += _HEADER.size
    key = HashKey(data[pos:pos + 32])
    pos += 32
    params = CuckooParams(n, k, b, ell, s)
    slots = []
    try:
        for _ in range(params.num_slots):
            flag = data[pos]
            pos += 1
            if flag == 0:
                slots.append(None)
                continue
            (length,) = struct.unpack_from(">I", data, pos)
            pos += 4
            id_ = data[pos:pos + length]
            value = data[pos + length:pos + length + value_len]
            if len(value) != value_len:
                raise InputError("truncated table")
            pos += length + value_len
            slots.append((id_, value))
    except (IndexError, struct.error) as exc:
        raise InputError("truncated table") from exc
    if pos != len(data):
        raise InputError("trailing bytes after table")
    table = CuckooTable(params, key, value_len, tuple(slots))
    for r, cell in enumerate(slots):
        if cell is not None and params.slot_at(r) not in probe_set(key, cell[0], params):
            raise ParameterError(f"slot {r} holds an id that does not hash there")
    return table
