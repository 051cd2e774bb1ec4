"""Compiled inner loops.

Everything here works on flat numpy arrays so that Monte Carlo runs with
hundreds of thousands of trials stay tractable. The Python modules wrap these
kernels with typed objects; nothing outside the package should import this.

Conventions shared by all kernels:

* ``entries`` is an ``(n, k)`` int64 array of *global* entry indices: item
  ``u`` may go to entry ``entries[u, i]`` of sub-table ``i``, with global index
  ``i * (b // k) + e``.
* Right vertex (slot) numbering: cell ``c`` of global entry ``g`` is
  ``g * ell + c``; stash slot ``j`` is ``b * ell + j``.
* The probe order of an item is sub-table ascending, cell ascending, then
  the stash.
"""

import numpy as np
from numba import njit

U64 = np.uint64
MASK8 = np.uint64(0xFF)

_IV0 = np.uint64(0x736F6D6570736575)
_IV1 = np.uint64(0x646F72616E646F6D)
_IV2 = np.uint64(0x6C7967656E657261)
_IV3 = np.uint64(0x7465646279746573)

# Fixed domain-separation keys (ASCII labels read little-endian).
SEED_KEY0 = np.uint64(int.from_bytes(b"kcuckoo.", "little"))
SEED_KEY1 = np.uint64(int.from_bytes(b"seed-exp", "little"))
TRIAL_KEY0 = np.uint64(int.from_bytes(b"kcuckoo.", "little"))
TRIAL_KEY1 = np.uint64(int.from_bytes(b"trialprf", "little"))
IDS_KEY0 = np.uint64(int.from_bytes(b"kcuckoo.", "little"))
IDS_KEY1 = np.uint64(int.from_bytes(b"trialids", "little"))

ALGO_BFS = 0
ALGO_RANDOM_WALK = 1
ALGO_LSA = 2
ALGO_MATCHING = 3

# stats layout returned by construct_kernel
ST_STEPS = 0
ST_EVICTIONS = 1
ST_FALLBACK = 2
ST_MAX_LABEL = 3
ST_SUCCESS = 4
ST_FAILED_ITEM = 5
N_STATS = 6


# --------------------------------------------------------------------------
# SipHash-2-4 with 128-bit output
# --------------------------------------------------------------------------


@njit(cache=True)
def _rotl(x, b):
    return (x << U64(b)) | (x >> U64(64 - b))


@njit(cache=True)
def _sipround(v0, v1, v2, v3):
    v0 = v0 + v1
    v1 = _rotl(v1, 13)
    v1 ^= v0
    v0 = _rotl(v0, 32)
    v2 = v2 + v3
    v3 = _rotl(v3, 16)
    v3 ^= v2
    v0 = v0 + v3
    v3 = _rotl(v3, 21)
    v3 ^= v0
    v2 = v2 + v1
    v1 = _rotl(v1, 17)
    v1 ^= v2
    v2 = _rotl(v2, 32)
    return v0, v1, v2, v3


@njit(cache=True)
def _msg_byte(tag, buf, start, j):
    # message = 4-byte big-endian tag || buf[start:end]
    if j < 4:
        return (tag >> U64(8 * (3 - j))) & MASK8
    return U64(buf[start + j - 4])


@njit(cache=True)
def siphash128(k0, k1, tag, buf, start, end):
    """SipHash-2-4-128 of ``tag.to_bytes(4, 'big') + buf[start:end]``.

    Returns the two little-endian output words ``(lo, hi)``.
    """
    tag = U64(tag)
    v0 = k0 ^ _IV0
    v1 = k1 ^ _IV1 ^ U64(0xEE)
    v2 = k0 ^ _IV2
    v3 = k1 ^ _IV3
    length = 4 + end - start
    nblocks = length // 8
    for blk in range(nblocks):
        m = U64(0)
        for j in range(8):
            m |= _msg_byte(tag, buf, start, blk * 8 + j) << U64(8 * j)
        v3 ^= m
        v0, v1, v2, v3 = _sipround(v0, v1, v2, v3)
        v0, v1, v2, v3 = _sipround(v0, v1, v2, v3)
        v0 ^= m
    last = (U64(length) & MASK8) << U64(56)
    for j in range(length - nblocks * 8):
        last |= _msg_byte(tag, buf, start, nblocks * 8 + j) << U64(8 * j)
    v3 ^= last
    v0, v1, v2, v3 = _sipround(v0, v1, v2, v3)
    v0, v1, v2, v3 = _sipround(v0, v1, v2, v3)
    v0 ^= last
    v2 ^= U64(0xEE)
    for _ in range(4):
        v0, v1, v2, v3 = _sipround(v0, v1, v2, v3)
    lo = v0 ^ v1 ^ v2 ^ v3
    v1 ^= U64(0xDD)
    for _ in range(4):
        v0, v1, v2, v3 = _sipround(v0, v1, v2, v3)
    hi = v0 ^ v1 ^ v2 ^ v3
    return lo, hi


@njit(cache=True)
def mod128(lo, hi, m):
    """``(hi * 2**64 + lo) % m`` for ``1 <= m < 2**32``."""
    m = U64(m)
    r64 = (U64(0xFFFFFFFFFFFFFFFF) % m + U64(1)) % m
    return np.int64(((hi % m) * r64 % m + lo % m) % m)


@njit(cache=True)
def _put_be64(x, out, off):
    x = U64(x)
    for j in range(8):
        out[off + j] = np.uint8((x >> U64(8 * (7 - j))) & MASK8)


@njit(cache=True)
def _put_le64(x, out, off):
    for j in range(8):
        out[off + j] = np.uint8((x >> U64(8 * j)) & MASK8)


@njit(cache=True)
def _get_le64(buf, off):
    x = U64(0)
    for j in range(8):
        x |= U64(buf[off + j]) << U64(8 * j)
    return x


@njit(cache=True)
def expand_seed(master):
    """Expand a 64-bit seed into the 32 bytes of a hash key."""
    msg = np.empty(8, np.uint8)
    _put_be64(master, msg, 0)
    out = np.empty(32, np.uint8)
    for c in range(2):
        lo, hi = siphash128(SEED_KEY0, SEED_KEY1, c, msg, 0, 8)
        _put_le64(lo, out, 16 * c)
        _put_le64(hi, out, 16 * c + 8)
    return out


@njit(cache=True)
def fold_key(seed):
    """Derive the 128-bit SipHash key used for entry hashing."""
    k0 = _get_le64(seed, 0) ^ _get_le64(seed, 16)
    k1 = _get_le64(seed, 8) ^ _get_le64(seed, 24)
    return k0, k1


@njit(cache=True)
def hash_entries(k0, k1, buf, offsets, k, m):
    """Global entry index of every item in every sub-table."""
    n = offsets.shape[0] - 1
    out = np.empty((n, k), np.int64)
    for j in range(n):
        for i in range(k):
            lo, hi = siphash128(k0, k1, i, buf, offsets[j], offsets[j + 1])
            out[j, i] = i * m + mod128(lo, hi, m)
    return out


@njit(cache=True)
def hash_entries_fixed(k0, k1, buf, idlen, k, m):
    n = buf.shape[0] // idlen
    out = np.empty((n, k), np.int64)
    for j in range(n):
        for i in range(k):
            lo, hi = siphash128(k0, k1, i, buf, j * idlen, (j + 1) * idlen)
            out[j, i] = i * m + mod128(lo, hi, m)
    return out


@njit(cache=True)
def trial_seed(master, t):
    """Child seed of trial ``t``: a keyed PRF of ``(master, t)``."""
    msg = np.empty(16, np.uint8)
    _put_be64(master, msg, 0)
    _put_be64(t, msg, 8)
    lo, _ = siphash128(TRIAL_KEY0, TRIAL_KEY1, 0, msg, 0, 16)
    return lo


@njit(cache=True)
def _has_duplicate_rows16(buf, n):
    lo = np.empty(n, np.uint64)
    hi = np.empty(n, np.uint64)
    for j in range(n):
        lo[j] = _get_le64(buf, 16 * j)
        hi[j] = _get_le64(buf, 16 * j + 8)
    order = np.argsort(lo)
    for a in range(n - 1):
        x = order[a]
        y = order[a + 1]
        if lo[x] == lo[y] and hi[x] == hi[y]:
            return True
    return False


@njit(cache=True)
def trial_ids(child, n):
    """``n`` distinct 16-byte ids drawn from the stream keyed by ``child``."""
    seedmsg = np.empty(8, np.uint8)
    _put_be64(child, seedmsg, 0)
    msg = np.empty(8, np.uint8)
    buf = np.empty(16 * n, np.uint8)
    attempt = 0
    while True:
        ik0, ik1 = siphash128(IDS_KEY0, IDS_KEY1, attempt, seedmsg, 0, 8)
        for j in range(n):
            _put_be64(j, msg, 0)
            lo, hi = siphash128(ik0, ik1, 0, msg, 0, 8)
            _put_le64(lo, buf, 16 * j)
            _put_le64(hi, buf, 16 * j + 8)
        if not _has_duplicate_rows16(buf, n):
            return buf
        attempt += 1


# --------------------------------------------------------------------------
# construction algorithms
# --------------------------------------------------------------------------


@njit(cache=True)
def _slot(entries, u, idx, ell, kl, bl):
    if idx < kl:
        return entries[u, idx // ell] * ell + idx % ell
    return bl + idx - kl


@njit(cache=True)
def _splitmix(state):
    state[0] += U64(0x9E3779B97F4A7C15)
    z = state[0]
    z = (z ^ (z >> U64(30))) * U64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> U64(27))) * U64(0x94D049BB133111EB)
    return z ^ (z >> U64(31))


@njit(cache=True)
def bfs_augment(entries, ell, s, bl, occ, x, mark, epoch, parent, queue):
    """Breadth-first search for a free slot reachable from item ``x``.

    Unmatched edges run item -> slot, matched edges slot -> occupant. Slots
    are marked with ``epoch`` when first reached; ``parent[r]`` is the item
    that reached slot ``r``. Returns ``(free_slot or -1, items_expanded)``.
    """
    k = entries.shape[1]
    kl = k * ell
    deg = kl + s
    head = 0
    tail = 1
    queue[0] = x
    while head < tail:
        u = queue[head]
        head += 1
        for idx in range(deg):
            r = _slot(entries, u, idx, ell, kl, bl)
            if mark[r] == epoch:
                continue
            mark[r] = epoch
            parent[r] = u
            w = occ[r]
            if w == -1:
                return r, head
            queue[tail] = w
            tail += 1
    return -1, head


@njit(cache=True)
def apply_path(x, r, parent, occ, assign):
    """Flip the augmenting path ending at free slot ``r``; returns #evictions."""
    moved = 0
    while True:
        u = parent[r]
        prev = assign[u]
        assign[u] = r
        occ[r] = u
        if u == x:
            return moved
        moved += 1
        r = prev


@njit(cache=True)
def bfs_construct(entries, b, ell, s):
    n, k = entries.shape
    bl = b * ell
    nright = bl + s
    occ = np.full(nright, -1, np.int64)
    assign = np.full(n, -1, np.int64)
    mark = np.zeros(nright, np.int64)
    parent = np.full(nright, -1, np.int64)
    queue = np.empty(n + 1, np.int64)
    stats = np.zeros(N_STATS, np.int64)
    stats[ST_FAILED_ITEM] = -1
    for x in range(n):
        r, expanded = bfs_augment(entries, ell, s, bl, occ, x, mark, x + 1, parent, queue)
        stats[ST_STEPS] += expanded
        if r < 0:
            stats[ST_FAILED_ITEM] = x
            return assign, stats
        stats[ST_EVICTIONS] += apply_path(x, r, parent, occ, assign)
    stats[ST_SUCCESS] = 1
    return assign, stats


@njit(cache=True)
def random_walk_insert(entries, ell, s, bl, occ, assign, x, max_steps, rng):
    """Eviction walk from ``x``; returns ``(homeless item or -1, evictions)``."""
    k = entries.shape[1]
    kl = k * ell
    deg = kl + s
    cur = x
    last = -1
    steps = 0
    while True:
        for idx in range(deg):
            r = _slot(entries, cur, idx, ell, kl, bl)
            if occ[r] == -1:
                occ[r] = cur
                assign[cur] = r
                return -1, steps
        if steps >= max_steps:
            return cur, steps
        while True:
            pick = np.int64(_splitmix(rng) % U64(kl))
            r = _slot(entries, cur, pick, ell, kl, bl)
            if r != last or kl == 1:
                break
        victim = occ[r]
        occ[r] = cur
        assign[cur] = r
        assign[victim] = -1
        cur = victim
        last = r
        steps += 1


@njit(cache=True)
def random_walk_construct(entries, b, ell, s, max_steps, seed):
    n, k = entries.shape
    bl = b * ell
    nright = bl + s
    occ = np.full(nright, -1, np.int64)
    assign = np.full(n, -1, np.int64)
    mark = np.zeros(nright, np.int64)
    parent = np.full(nright, -1, np.int64)
    queue = np.empty(n + 1, np.int64)
    rng = np.empty(1, np.uint64)
    rng[0] = U64(seed)
    stats = np.zeros(N_STATS, np.int64)
    stats[ST_FAILED_ITEM] = -1
    epoch = 0
    for x in range(n):
        homeless, steps = random_walk_insert(entries, ell, s, bl, occ, assign, x, max_steps, rng)
        stats[ST_STEPS] += steps
        stats[ST_EVICTIONS] += steps
        if homeless < 0:
            continue
        stats[ST_FALLBACK] = 1
        epoch += 1
        r, expanded = bfs_augment(entries, ell, s, bl, occ, homeless, mark, epoch, parent, queue)
        stats[ST_STEPS] += expanded
        if r < 0:
            stats[ST_FAILED_ITEM] = homeless
            return assign, stats
        stats[ST_EVICTIONS] += apply_path(homeless, r, parent, occ, assign)
    stats[ST_SUCCESS] = 1
    return assign, stats


@njit(cache=True)
def lsa_insert(entries, b, s, labels, occ, assign, stash_used, x, stats):
    """Label-guided insertion of ``x`` (entries of size one).

    Returns the new stash occupancy, or -1 when the item (or an item it
    displaced) has no entry label below ``b`` and the stash is full.
    """
    k = entries.shape[1]
    cur = x
    while True:
        best_i = 0
        best = labels[entries[cur, 0]]
        for i in range(1, k):
            lab = labels[entries[cur, i]]
            if lab < best:
                best = lab
                best_i = i
        if best >= b:
            # labels lower-bound the distance to a free entry, which is < b
            # whenever one is reachable
            if stash_used < s:
                assign[cur] = b + stash_used
                return stash_used + 1
            stats[ST_FAILED_ITEM] = cur
            return -1
        other = np.int64(b)
        if k > 1:
            other = np.int64(1) << 62
            for i in range(k):
                if i != best_i and labels[entries[cur, i]] < other:
                    other = labels[entries[cur, i]]
        g = entries[cur, best_i]
        labels[g] = other + 1
        if labels[g] > stats[ST_MAX_LABEL]:
            stats[ST_MAX_LABEL] = labels[g]
        stats[ST_STEPS] += 1
        victim = occ[g]
        occ[g] = cur
        assign[cur] = g
        if victim == -1:
            return stash_used
        assign[victim] = -1
        cur = victim
        stats[ST_EVICTIONS] += 1


@njit(cache=True)
def lsa_construct(entries, b, s):
    n = entries.shape[0]
    labels = np.zeros(b, np.int64)
    occ = np.full(b, -1, np.int64)
    assign = np.full(n, -1, np.int64)
    stats = np.zeros(N_STATS, np.int64)
    stats[ST_FAILED_ITEM] = -1
    stash_used = 0
    for x in range(n):
        stash_used = lsa_insert(entries, b, s, labels, occ, assign, stash_used, x, stats)
        if stash_used < 0:
            return assign, stats
    stats[ST_SUCCESS] = 1
    return assign, stats


@njit(cache=True)
def hopcroft_karp(entries, b, ell, s):
    """Maximum matching; returns ``(assign, size)``."""
    n, k = entries.shape
    kl = k * ell
    deg = kl + s
    bl = b * ell
    nright = bl + s
    INF = np.int64(1) << 62
    match_l = np.full(n, -1, np.int64)
    match_r = np.full(nright, -1, np.int64)
    dist = np.empty(n, np.int64)
    queue = np.empty(n + 1, np.int64)
    it = np.empty(n, np.int64)
    stack_l = np.empty(n + 1, np.int64)
    stack_r = np.empty(n + 1, np.int64)
    size = 0
    while True:
        head = 0
        tail = 0
        for u in range(n):
            if match_l[u] == -1:
                dist[u] = 0
                queue[tail] = u
                tail += 1
            else:
                dist[u] = INF
        limit = INF
        while head < tail:
            u = queue[head]
            head += 1
            if dist[u] + 1 > limit:
                continue
            for idx in range(deg):
                r = _slot(entries, u, idx, ell, kl, bl)
                w = match_r[r]
                if w == -1:
                    if limit == INF:
                        limit = dist[u] + 1
                elif dist[w] == INF:
                    dist[w] = dist[u] + 1
                    queue[tail] = w
                    tail += 1
        if limit == INF:
            break
        it[:] = 0
        for u0 in range(n):
            if match_l[u0] != -1:
                continue
            sp = 0
            stack_l[0] = u0
            while sp >= 0:
                u = stack_l[sp]
                if it[u] >= deg:
                    dist[u] = INF
                    sp -= 1
                    continue
                r = _slot(entries, u, it[u], ell, kl, bl)
                it[u] += 1
                w = match_r[r]
                if w == -1:
                    if dist[u] + 1 == limit:
                        stack_r[sp] = r
                        for j in range(sp + 1):
                            match_l[stack_l[j]] = stack_r[j]
                            match_r[stack_r[j]] = stack_l[j]
                        size += 1
                        break
                elif dist[w] == dist[u] + 1:
                    stack_r[sp] = r
                    sp += 1
                    stack_l[sp] = w
    return match_l, size


@njit(cache=True)
def construct_kernel(entries, b, ell, s, algo, max_steps, seed):
    if algo == ALGO_BFS:
        return bfs_construct(entries, b, ell, s)
    if algo == ALGO_RANDOM_WALK:
        return random_walk_construct(entries, b, ell, s, max_steps, seed)
    if algo == ALGO_LSA:
        return lsa_construct(entries, b, s)
    assign, size = hopcroft_karp(entries, b, ell, s)
    stats = np.zeros(N_STATS, np.int64)
    stats[ST_FAILED_ITEM] = -1
    if size == entries.shape[0]:
        stats[ST_SUCCESS] = 1
    return assign, stats


# --------------------------------------------------------------------------
# Hall-condition search
# --------------------------------------------------------------------------


@njit(cache=True)
def hall_search_size(entries, ell, s, nentries, cand, t):
    """First (lexicographic) ``t``-subset of ``cand`` with fewer than ``t`` neighbours.

    A subset's neighbourhood has ``ell * distinct_entries + s`` slots.
    Returns the subset, or an empty array.
    """
    c = cand.shape[0]
    k = entries.shape[1]
    if t > c or t <= 0:
        return np.empty(0, np.int64)
    stamp = np.zeros(nentries, np.int64)
    epoch = 0
    idx = np.arange(t)
    while True:
        epoch += 1
        distinct = 0
        violates = True
        for a in range(t):
            u = cand[idx[a]]
            for i in range(k):
                g = entries[u, i]
                if stamp[g] != epoch:
                    stamp[g] = epoch
                    distinct += 1
            if ell * distinct + s >= t:
                violates = False
                break
        if violates:
            out = np.empty(t, np.int64)
            for a in range(t):
                out[a] = cand[idx[a]]
            return out
        p = t - 1
        while p >= 0 and idx[p] == c - t + p:
            p -= 1
        if p < 0:
            return np.empty(0, np.int64)
        idx[p] += 1
        for q in range(p + 1, t):
            idx[q] = idx[q - 1] + 1


# --------------------------------------------------------------------------
# Monte Carlo trials
# --------------------------------------------------------------------------


@njit(cache=True)
def _trial_entries(master, t, n, k, m):
    child = trial_seed(master, t)
    seed = expand_seed(child)
    k0, k1 = fold_key(seed)
    ids = trial_ids(child, n)
    return child, hash_entries_fixed(k0, k1, ids, 16, k, m)


@njit(cache=True)
def run_trials(master, trials, n, k, b, ell, s, algo, max_steps):
    """Count construction failures over the given trial indices."""
    m = b // k
    failures = 0
    for a in range(trials.shape[0]):
        child, entries = _trial_entries(master, trials[a], n, k, m)
        _, stats = construct_kernel(entries, b, ell, s, algo, max_steps, child)
        if stats[ST_SUCCESS] == 0:
            failures += 1
    return failures


@njit(cache=True)
def run_lower_bound_trials(master, trials, n, k, b, ell, s):
    """Count (bad events, failures); the bad event is items ``1..k*ell+s``
    all hashing onto item 0's ``k`` entries."""
    m = b // k
    events = 0
    failures = 0
    extra = k * ell + s
    for a in range(trials.shape[0]):
        _, entries = _trial_entries(master, trials[a], n, k, m)
        hit = True
        for j in range(1, extra + 1):
            for i in range(k):
                if entries[j, i] != entries[0, i]:
                    hit = False
                    break
            if not hit:
                break
        if hit:
            events += 1
        _, size = hopcroft_karp(entries, b, ell, s)
        if size < n:
            failures += 1
    return events, failures


@njit(cache=True)
def first_half_scan(k0, k1, buf, offsets, k, m, threshold):
    """Predicate mask: every entry index (within its sub-table) below ``threshold``."""
    n = offsets.shape[0] - 1
    out = np.zeros(n, np.bool_)
    for j in range(n):
        ok = True
        for i in range(k):
            lo, hi = siphash128(k0, k1, i, buf, offsets[j], offsets[j + 1])
            if mod128(lo, hi, m) >= threshold:
                ok = False
                break
        out[j] = ok
    return out
