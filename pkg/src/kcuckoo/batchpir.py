"""Batch PIR: one two-server XOR PIR query per batch-code bucket.

The client sends a random subset ``S`` of the bucket to one server and
``S xor {target}`` to the other; each server returns the XOR of the selected
values. Every non-empty bucket is queried exactly ``ell`` times per batch
(unused queries read position 0), so the servers see the same access
pattern for any batch.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import InputError, ParameterError, ScheduleFailure
from .hashing import child_seed
from .pbc import PbcParams, Buckets, encode_index, pbc_decode, pbc_encode, pbc_schedule
from .robustness import attack_first_half, run_key

DEFAULT_VALUE_LEN = 32


@dataclass(frozen=True)
class CostReport:
    """Costs summed over both servers and every queried bucket.

    ``server_entry_touches`` counts entries XORed into an answer;
    ``entries_scanned`` counts bucket entries each server walks over, i.e.
    the bucket size once per query. ``bucket_sizes`` and
    ``queries_per_bucket`` hold one value per bucket.
    """

    upload_bits: int
    download_bits: int
    server_entry_touches: int
    entries_scanned: int
    bucket_sizes: tuple[int, ...]
    queries_per_bucket: tuple[int, ...] = ()

    @staticmethod
    def expected(bucket_sizes: Sequence[int], value_len: int, reads: int = 1) -> tuple[int, int, int]:
        """Closed-form ``(upload_bits, download_bits, entries_scanned)`` for
        ``reads`` queries to every non-empty bucket."""
        total = int(sum(bucket_sizes))
        busy = sum(1 for w in bucket_sizes if w)
        return 2 * reads * total, 2 * 8 * value_len * reads * busy, reads * total

    def __add__(self, other: "CostReport") -> "CostReport":
        return CostReport(
            self.upload_bits + other.upload_bits,
            self.download_bits + other.download_bits,
            self.server_entry_touches + other.server_entry_touches,
            self.entries_scanned + other.entries_scanned,
            self.bucket_sizes + other.bucket_sizes,
            self.queries_per_bucket + other.queries_per_bucket,
        )


def _add_counts(a: CostReport, b: CostReport) -> CostReport:
    return CostReport(a.upload_bits + b.upload_bits, a.download_bits + b.download_bits,
                      a.server_entry_touches + b.server_entry_touches,
                      a.entries_scanned + b.entries_scanned, a.bucket_sizes, a.queries_per_bucket)


def _as_matrix(bucket) -> np.ndarray:
    if isinstance(bucket, np.ndarray):
        return bucket
    values = [bytes(v) for v in bucket]
    if len({len(v) for v in values}) > 1:
        raise InputError("bucket values must share one length")
    width = len(values[0]) if values else 0
    return np.frombuffer(b"".join(values), np.uint8).reshape(len(values), width)


def _server_answer(matrix: np.ndarray, select: np.ndarray) -> np.ndarray:
    chosen = matrix[select]
    if not len(chosen):
        return np.zeros(matrix.shape[1], np.uint8)
    return np.bitwise_xor.reduce(chosen, axis=0)


def xor_pir_retrieve(bucket, target: int, rng: np.random.Generator) -> tuple[bytes, CostReport]:
    """Privately read ``bucket[target]``.

    ``bucket`` is a sequence of equal-length byte strings or a ``(w, L)``
    uint8 matrix.
    """
    matrix = _as_matrix(bucket)
    w = matrix.shape[0]
    if w == 0:
        raise ParameterError("cannot query an empty bucket")
    if not 0 <= target < w:
        raise ParameterError(f"target {target} out of range [0, {w})")
    s1 = rng.integers(0, 2, size=w).astype(bool)
    s2 = s1.copy()
    s2[target] ^= True
    value = _server_answer(matrix, s1) ^ _server_answer(matrix, s2)
    touches = int(s1.sum() + s2.sum())
    cost = CostReport(2 * w, 2 * 8 * matrix.shape[1], touches, w, (w,), (1,))
    return value.tobytes(), cost


class BatchPirServer:
    """A database encoded once into buckets, ready for batch queries."""

    def __init__(self, prms: PbcParams, db: Sequence[bytes]):
        self.prms = prms
        self.buckets: Buckets = pbc_encode(prms, db)
        lengths = {len(v) for v in db}
        if len(lengths) > 1:
            raise InputError("database values must share one length")
        self.value_len = lengths.pop() if lengths else 0
        self._matrices = []
        for b in self.buckets.buckets:
            raw = b"".join(v for _, v in b)
            self._matrices.append(np.frombuffer(raw, np.uint8).reshape(len(b), self.value_len))
        self._index = [np.fromiter((j for j, _ in b), np.int64, len(b)) for b in self.buckets.buckets]

    def retrieve(self, Q: Sequence[int], rng: np.random.Generator) -> tuple[list[bytes], CostReport]:
        """Raises :class:`ScheduleFailure` when the batch cannot be scheduled."""
        schedule = pbc_schedule(self.prms, Q)
        retrieved = []
        total: Optional[CostReport] = None
        t = self.prms.reads_per_bucket
        for i, matrix in enumerate(self._matrices):
            reads = schedule.reads[i]
            w = matrix.shape[0]
            got = []
            bucket = CostReport(0, 0, 0, 0, (w,), (t if w else 0,))
            # dummy reads of position 0 pad every bucket to t queries
            for j, pos in enumerate(list(reads) + [0] * (t - len(reads)) if w else []):
                value, cost = xor_pir_retrieve(matrix, pos, rng)
                if j < len(reads):
                    got.append((int(self._index[i][pos]), value))
                bucket = _add_counts(bucket, cost)
            total = bucket if total is None else total + bucket
            retrieved.append(got)
        return pbc_decode(self.prms, Q, schedule, retrieved), total


def batch_retrieve(prms: PbcParams, db: Sequence[bytes], Q: Sequence[int], seed: int = 0):
    """Encode ``db``, then privately fetch the batch ``Q``."""
    return BatchPirServer(prms, db).retrieve(Q, np.random.default_rng(seed))


def random_database(n: int, value_len: int = DEFAULT_VALUE_LEN, seed: int = 0) -> list[bytes]:
    raw = np.random.default_rng(seed).integers(0, 256, size=n * value_len, dtype=np.uint8).tobytes()
    return [raw[j * value_len:(j + 1) * value_len] for j in range(n)]


@dataclass(frozen=True)
class BenchResult:
    runs: int
    failures: int

    @property
    def rate(self) -> float:
        return self.failures / self.runs


def adversarial_batch(prms: PbcParams, budget: int, rng: np.random.Generator) -> list[int]:
    """Batch chosen by the first-half attacker against the published key.

    The attacker scans database indices in order; its set is truncated or
    padded with random distinct indices to ``q`` entries.
    """
    chosen: list[int] = []
    if not prms.is_replication:
        code = prms.inner
        universe = [encode_index(j) for j in range(prms.n)]
        result = attack_first_half(code.key, code.params, budget, universe)
        chosen = [int.from_bytes(x, "big") for x in result.collected][: prms.q]
    rest = np.setdiff1d(np.arange(prms.n), chosen)
    extra = rng.choice(rest, size=prms.q - len(chosen), replace=False)
    return chosen + [int(x) for x in extra]


def adversarial_error_bench(prms: PbcParams, budget: int, runs: int, master_seed: int = 0) -> BenchResult:
    """Schedule-failure rate of attacker-chosen batches over fresh keys."""
    if runs < 1:
        raise ParameterError("runs must be >= 1")
    failures = 0
    for r in range(runs):
        keyed = prms.with_key(run_key(master_seed, r))
        rng = np.random.default_rng(child_seed(master_seed, r))
        try:
            pbc_schedule(keyed, adversarial_batch(keyed, budget, rng))
        except ScheduleFailure:
            failures += 1
    return BenchResult(runs, failures)
