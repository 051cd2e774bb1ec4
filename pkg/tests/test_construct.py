import numpy as np
import pytest
from hypothesis import given, strategies as st

from kcuckoo.construct import (
    ALGORITHMS, AugmentingPath, TableState, bfs_insert, construct, construct_graph, lsa_insert,
    new_rng, random_walk_insert,
)
from kcuckoo.errors import InputError, ParameterError, UnsupportedParameterError
from kcuckoo.graph import CuckooGraph, build_graph, max_left_matching
from kcuckoo.hashing import CuckooParams, sample_key

CRAFTED_SEED = 4  # item-0..2 all land on entry 1 of both sub-tables at k=2, b=4


def ids(n):
    return [f"item-{i}".encode() for i in range(n)]


def algos_for(p):
    return [a for a in ALGORITHMS if a != "lsa" or p.ell == 1]


@st.composite
def instances(draw, max_n=24):
    k = draw(st.integers(1, 4))
    m = draw(st.integers(1, 6))
    ell = draw(st.integers(1, 2))
    s = draw(st.integers(0, 2))
    n = draw(st.integers(0, max_n))
    local = draw(st.lists(st.lists(st.integers(0, m - 1), min_size=k, max_size=k), min_size=n, max_size=n))
    return CuckooGraph.from_entries(CuckooParams(n, k, k * m, ell, s), np.array(local, np.int64).reshape(n, k))


@given(instances(), st.integers(0, 2**64 - 1))
def test_all_algorithms_are_perfect(g, seed):
    perfect = max_left_matching(g).is_left_perfect
    for algo in algos_for(g.params):
        r = construct_graph(g, algo, rng_seed=seed)
        assert r.success == perfect, algo
        if r.success:
            assert r.allocation.is_left_perfect and r.allocation.is_valid_for(g)
        else:
            assert r.allocation is None


@given(instances(max_n=10), st.randoms(use_true_random=False))
def test_verdict_is_insertion_order_independent(g, rnd):
    order = list(range(g.left_count))
    rnd.shuffle(order)
    shuffled = CuckooGraph.from_entries(g.params, g.local_entries()[order])
    for algo in algos_for(g.params):
        assert construct_graph(g, algo).success == construct_graph(shuffled, algo).success


def test_crafted_hall_violation_fails_everywhere():
    p = CuckooParams(3, 2, 4)
    g = build_graph(p, ids(3), sample_key(CRAFTED_SEED))
    assert g.local_entries().tolist() == [[1, 1]] * 3
    for algo in ALGORITHMS:
        assert not construct(p, sample_key(CRAFTED_SEED), ids(3), algo).success
    lsa = construct(p, sample_key(CRAFTED_SEED), ids(3), "lsa")
    assert lsa.stats.max_label >= p.b and lsa.failed_item is not None


@given(st.integers(1, 5), st.integers(1, 4), st.integers(1, 2), st.integers(0, 2), st.integers(0, 2**64 - 1))
def test_small_sets_always_allocate(k, m, ell, s, seed):
    p = CuckooParams(k * ell + s, k, k * m, ell, s)
    for algo in algos_for(p):
        assert construct(p, sample_key(seed), ids(p.n), algo, rng_seed=seed).success


def test_determinism():
    p = CuckooParams(40, 3, 60, 1, 1)
    key = sample_key(3)
    for algo in ALGORITHMS:
        a, b = construct(p, key, ids(40), algo, 9), construct(p, key, ids(40), algo, 9)
        assert np.array_equal(a.allocation.assignment, b.allocation.assignment)
        assert a.stats == b.stats


def test_parameter_errors():
    key = sample_key(0)
    with pytest.raises(UnsupportedParameterError):
        construct(CuckooParams(2, 2, 4, ell=2), key, ids(2), "lsa")
    with pytest.raises(ParameterError):
        construct(CuckooParams(2, 2, 4), key, ids(2), "cuckoo")
    with pytest.raises(ParameterError):
        construct(CuckooParams(2, 2, 4), key, ids(2), "random_walk", max_steps=0)
    with pytest.raises(InputError):
        construct(CuckooParams(2, 2, 4), key, [b"a", b"a"], "bfs")


def test_bfs_hand_trace():
    # seed 4, k=2, b=6: item-5 probes slots 0 and 3, held by item-0 and item-1;
    # item-0's other slot 5 is free, so the path is 5 -> slot 0, 0 -> slot 5
    g = build_graph(CuckooParams(6, 2, 6), ids(6), sample_key(4))
    assert g.local_entries().tolist() == [[0, 2], [0, 0], [1, 0], [1, 1], [2, 1], [0, 0]]
    state = TableState(g)
    for u in range(5):
        path = bfs_insert(state, u)
        assert len(path) == 1
        path.apply(state)
    assert state.assign.tolist()[:5] == [0, 3, 1, 4, 2]
    path = bfs_insert(state, 5)
    assert path == AugmentingPath((5, 0), (0, 5))
    assert len(path) == 3
    path.apply(state)
    assert state.assign.tolist() == [5, 3, 1, 4, 2, 0]
    assert state.allocation().is_valid_for(g)


def test_bfs_insert_first_free_probe_and_saturated():
    g = CuckooGraph.from_entries(CuckooParams(3, 2, 4), [[1, 1]] * 3)
    state = TableState(g)
    path = bfs_insert(state, 0)
    assert path == AugmentingPath((0,), (1,))
    path.apply(state)
    bfs_insert(state, 1).apply(state)
    assert bfs_insert(state, 2) is None


def test_random_walk_insert_bounds():
    g = CuckooGraph.from_entries(CuckooParams(3, 2, 4), [[1, 1]] * 3)
    state = TableState(g)
    rng = new_rng(1)
    assert random_walk_insert(state, 0, 1, rng) == ("placed", -1)
    assert random_walk_insert(state, 1, 1, rng) == ("placed", -1)
    outcome, homeless = random_walk_insert(state, 2, 1, rng)
    assert outcome == "exhausted" and homeless in (0, 1, 2)
    with pytest.raises(ParameterError):
        random_walk_insert(state, 2, 0, rng)


def test_lsa_fresh_table_tie_break():
    g = CuckooGraph.from_entries(CuckooParams(1, 3, 9), [[2, 0, 1]])
    state = TableState(g)
    assert lsa_insert(state, 0) == "placed"
    assert state.assign[0] == 2  # sub-table 0, entry 2
    assert state.labels.tolist() == [0, 0, 1, 0, 0, 0, 0, 0, 0]


def test_lsa_step_failure_and_stash():
    g = CuckooGraph.from_entries(CuckooParams(3, 2, 4, s=1), [[1, 1]] * 3)
    state = TableState(g)
    assert [lsa_insert(state, u) for u in range(3)] == ["placed"] * 3
    assert state.stash_used == 1 and state.allocation().is_valid_for(g)
    g = CuckooGraph.from_entries(CuckooParams(3, 2, 4), [[1, 1]] * 3)
    state = TableState(g)
    assert [lsa_insert(state, u) for u in range(3)] == ["placed", "placed", "failure"]


def test_lsa_labels_monotone_and_bounded():
    p = CuckooParams(200, 3, 300)
    g = build_graph(p, ids(200), sample_key(8))
    state = TableState(g)
    prev = state.labels.copy()
    for u in range(p.n):
        assert lsa_insert(state, u) == "placed"
        assert (state.labels >= prev).all()
        prev = state.labels.copy()
    assert prev.max() <= p.b
    assert construct(p, sample_key(8), ids(200), "lsa").stats.max_label == prev.max()


def test_random_walk_fallback_is_used_on_hard_instances():
    p = CuckooParams(3, 2, 4)
    r = construct(p, sample_key(CRAFTED_SEED), ids(3), "random_walk", max_steps=1)
    assert not r.success and r.stats.fallback_used


def test_dense_instances_against_matching():
    # small tables so that roughly half of the instances are infeasible
    rng = np.random.default_rng(12)
    infeasible = 0
    for trial in range(3000):
        k, m = int(rng.integers(1, 6)), int(rng.integers(1, 7))
        ell, s = int(rng.integers(1, 3)), int(rng.integers(0, 4))
        p = CuckooParams(0, k, k * m, ell, s)
        n = int(rng.integers(1, p.num_slots + 3))
        g = CuckooGraph.from_entries(p.with_n(n), rng.integers(0, m, size=(n, k)))
        truth = max_left_matching(g).is_left_perfect
        infeasible += not truth
        for algo in algos_for(p):
            assert construct_graph(g, algo, rng_seed=trial).success == truth, (algo, trial)
    assert infeasible > 500
