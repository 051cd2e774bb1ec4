import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

import oracle
import siphash_ref
from kcuckoo import _kernels
from kcuckoo.errors import ParameterError
from kcuckoo.hashing import (
    CuckooParams, HashKey, SlotId, child_seed, entry_index, entry_table, probe_set, sample_key,
)

KEY = bytes(range(16))
GOLDEN_KEY_7 = "f9fe207ab2f3e4d89814bc7567a51dfaca7ef66e52033d723939f81df8465c19"


# published SipHash-2-4 test vectors (key 00..0f, message 00..len-1)
@pytest.mark.parametrize("msg_len, out_bytes, expected", [
    (0, 8, "310e0edd47db6f72"),
    (15, 8, "e545be4961ca29a1"),
    (0, 16, "a3817f04ba25a8e66df67214c7550293"),
    (1, 16, "da87c1d86b99af44347659119b22fc45"),
])
def test_reference_siphash_vectors(msg_len, out_bytes, expected):
    assert siphash_ref.siphash(KEY, bytes(range(msg_len)), out_bytes).hex() == expected


@given(st.binary(max_size=40), st.integers(0, 2**32 - 1), st.binary(min_size=16, max_size=16))
def test_kernel_matches_reference(msg, tag, key):
    k0 = np.uint64(int.from_bytes(key[:8], "little"))
    k1 = np.uint64(int.from_bytes(key[8:], "little"))
    buf = np.frombuffer(msg, np.uint8) if msg else np.zeros(1, np.uint8)
    lo, hi = _kernels.siphash128(k0, k1, tag, buf, 0, len(msg))
    ref = siphash_ref.siphash(key, tag.to_bytes(4, "big") + msg, 16)
    assert int(lo) + (int(hi) << 64) == int.from_bytes(ref, "little")


def test_sample_key_golden_and_deterministic():
    assert sample_key(7).hex() == GOLDEN_KEY_7
    assert sample_key(0) == sample_key(0)
    assert sample_key(0) != sample_key(1)


@given(st.integers(0, 2**64 - 1))
def test_sample_key_matches_oracle(seed):
    assert sample_key(seed).seed == oracle.key_bytes(seed)


def test_sample_key_rejects_bad_seed():
    with pytest.raises(ParameterError):
        sample_key(-1)
    with pytest.raises(ParameterError):
        sample_key(2**64)


def test_hashkey_hex_roundtrip_and_validation():
    key = sample_key(3)
    assert HashKey.fromhex(key.hex()) == key
    with pytest.raises(ParameterError):
        HashKey(b"short")


def test_entry_index_golden():
    p = CuckooParams(0, 3, 12)
    assert entry_index(sample_key(7), 1, b"item-0", p) == 3


@given(st.integers(0, 2**64 - 1), st.binary(max_size=24), st.integers(1, 5), st.integers(1, 40))
def test_entry_index_matches_oracle_and_range(seed, id_, k, m):
    key = sample_key(seed)
    p = CuckooParams(0, k, k * m)
    for i in range(k):
        e = entry_index(key, i, id_, p)
        assert 0 <= e < m
        assert e == oracle.entry(key.seed, i, id_, m)


def test_entry_index_single_entry_range():
    p = CuckooParams(0, 2, 2)
    assert {entry_index(sample_key(s), i, b"x%d" % s, p) for s in range(20) for i in range(2)} == {0}


def test_entry_index_rejects_bad_table():
    with pytest.raises(ParameterError):
        entry_index(sample_key(0), 3, b"a", CuckooParams(0, 3, 12))


def test_entry_table_agrees_with_entry_index_and_is_deterministic():
    rng = np.random.default_rng(5)
    ids = [bytes(rng.integers(0, 256, size=int(rng.integers(0, 20)), dtype=np.uint8)) for _ in range(2000)]
    ids = list(dict.fromkeys(ids))
    p = CuckooParams(len(ids), 4, 4 * 37)
    key = sample_key(11)
    table = entry_table(key, ids, p)
    assert np.array_equal(table, entry_table(key, ids, p))
    for u in range(0, len(ids), 97):
        assert [table[u, i] - i * 37 for i in range(4)] == [entry_index(key, i, ids[u], p) for i in range(4)]


def test_determinism_over_many_inputs():
    ids = [b"id-%d" % j for j in range(100_000)]
    p = CuckooParams(len(ids), 3, 3 * 1000)
    key = sample_key(42)
    assert np.array_equal(entry_table(key, ids, p), entry_table(sample_key(42), ids, p))


def test_uniformity_chi_square():
    m = 16
    ids = [j.to_bytes(8, "big") for j in range(1_000_000)]
    cells = entry_table(sample_key(1), ids, CuckooParams(len(ids), 1, m))[:, 0]
    counts = np.bincount(cells, minlength=m)
    chi2 = stats.chisquare(counts).statistic
    assert chi2 < stats.chi2.ppf(0.999, m - 1)


def test_child_seeds_distinct_and_match_oracle():
    seeds = [child_seed(9, t) for t in range(10_000)]
    assert len(set(seeds)) == len(seeds)
    assert all(child_seed(9, t) == oracle.child(9, t) for t in range(20))


def test_probe_set_shapes():
    key = sample_key(2)
    p = CuckooParams(0, 3, 12)
    probes = probe_set(key, b"a", p)
    assert len(probes) == 3
    assert [s.table for s in probes] == [0, 1, 2]
    p = CuckooParams(0, 2, 8, ell=2, s=1)
    probes = probe_set(key, b"a", p)
    assert len(probes) == 5
    assert probes[-1] == SlotId.stash(0)
    assert probes[0].entry == probes[1].entry and [s.index for s in probes[:4]] == [0, 1, 0, 1]


@given(st.integers(1, 4), st.integers(1, 6), st.integers(1, 3), st.integers(0, 3))
def test_slot_numbering_is_a_bijection(k, m, ell, s):
    p = CuckooParams(0, k, k * m, ell, s)
    slots = [p.slot_at(r) for r in range(p.num_slots)]
    assert len(set(slots)) == p.num_slots == p.b * ell + s
    assert all(p.slot_index(x) == r for r, x in enumerate(slots))


@pytest.mark.parametrize("args", [
    (-1, 2, 4), (1, 0, 4), (1, 3, 2), (1, 3, 10), (1, 2, 4, 0), (1, 2, 4, 1, -1), (1.0, 2, 4),
])
def test_params_validation(args):
    with pytest.raises(ParameterError):
        CuckooParams(*args)


def test_params_overheads():
    p = CuckooParams(10, 2, 8, 3, 2)
    assert p.query_overhead == 8
    assert p.storage_overhead == p.num_slots == 26
    assert p.entries_per_table == 4
