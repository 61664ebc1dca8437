"""Compiled hot loop of the flip graph walk.

A scheme lives in a ``uint64[3, cap]`` array ``T`` (rows: alpha, beta,
gamma). Columns ``[0, na)`` hold the active terms (inside the current edge
constraint box), columns ``[na, r)`` the frozen ones. For every slot an
open-addressing table counts how many active terms carry each component
value; from the counts the kernel keeps

* ``W[s]``  = sum over values of c * (c - 1), the number of ordered pairs
  sharing slot ``s``,
* ``hist[s, c]`` = how many values occur exactly ``c`` times,
* ``cmax[s]`` = the exact largest count.

Flips are drawn uniformly over all valid (slot, i, j) triples by rejection:
pick a slot with weight ``cmax - 1``, a term uniformly, accept with
probability ``(c - 1) / (cmax - 1)`` and then pick one of its ``c - 1``
partners. All cached quantities are functions of the term array alone, so
a scheme, ``na`` and the RNG words are the whole state of a trajectory.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from flipgraph.rng import rand_below

# layout of the int64 state vector
R = 0
NA = 1
BEST_R = 2
LCOUNT = 3
HBITS = 4
CMAX = 5  # 5, 6, 7
WSUM = 8  # 8, 9, 10
NSTATE = 11

# counters
C_FLIPS = 0
C_PLUS = 1
C_RED1 = 2
C_RED2 = 3
C_GRED = 4
C_GREMOVED = 5
C_STUCK = 6
NCOUNTERS = 7

COUNTER_NAMES = (
    "flips",
    "plus",
    "pair_reductions_1",
    "pair_reductions_2",
    "general_reductions",
    "general_removed",
    "stuck_steps",
)

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
MAX_TRIES = 2000


@njit(cache=True, inline="always")
def _home(key, hbits):
    return np.int64((key * GOLDEN) >> np.uint64(64 - hbits))


@njit(cache=True)
def _find(keys, s, key, hbits):
    hmask = (np.int64(1) << hbits) - 1
    pos = _home(key, hbits)
    while True:
        k = keys[s, pos]
        if k == key or k == 0:
            return pos
        pos = (pos + 1) & hmask


@njit(cache=True)
def count_of(keys, cnt, st, s, key):
    pos = _find(keys, s, key, st[HBITS])
    if keys[s, pos] == 0:
        return 0
    return cnt[s, pos]


@njit(cache=True)
def _add_key(keys, cnt, hist, st, s, key):
    pos = _find(keys, s, key, st[HBITS])
    if keys[s, pos] == 0:
        keys[s, pos] = key
        cnt[s, pos] = 0
    c = cnt[s, pos]
    cnt[s, pos] = c + 1
    st[WSUM + s] += 2 * c
    if c > 0:
        hist[s, c] -= 1
    hist[s, c + 1] += 1
    if c + 1 > st[CMAX + s]:
        st[CMAX + s] = c + 1


@njit(cache=True)
def _remove_key(keys, cnt, hist, st, s, key):
    hbits = st[HBITS]
    hmask = (np.int64(1) << hbits) - 1
    pos = _find(keys, s, key, hbits)
    c = cnt[s, pos]
    st[WSUM + s] -= 2 * (c - 1)
    hist[s, c] -= 1
    if c - 1 > 0:
        hist[s, c - 1] += 1
    if c == st[CMAX + s] and hist[s, c] == 0:
        st[CMAX + s] = c - 1
    if c > 1:
        cnt[s, pos] = c - 1
        return
    # backward-shift deletion keeps probe chains intact
    i = pos
    keys[s, i] = 0
    cnt[s, i] = 0
    j = i
    while True:
        j = (j + 1) & hmask
        kj = keys[s, j]
        if kj == 0:
            return
        h = _home(kj, hbits)
        if i <= j:
            stays = i < h <= j
        else:
            stays = h > i or h <= j
        if stays:
            continue
        keys[s, i] = kj
        cnt[s, i] = cnt[s, j]
        keys[s, j] = 0
        cnt[s, j] = 0
        i = j


@njit(cache=True)
def rebuild_tables(T, keys, cnt, hist, st):
    keys[:, :] = 0
    cnt[:, :] = 0
    hist[:, :] = 0
    for s in range(3):
        st[CMAX + s] = 0
        st[WSUM + s] = 0
    for i in range(st[NA]):
        for s in range(3):
            _add_key(keys, cnt, hist, st, s, T[s, i])


@njit(cache=True)
def _set_comp(T, keys, cnt, hist, st, s, idx, value):
    _remove_key(keys, cnt, hist, st, s, T[s, idx])
    T[s, idx] = value
    _add_key(keys, cnt, hist, st, s, value)


@njit(cache=True)
def _append_active(T, keys, cnt, hist, st, a, b, c):
    r = st[R]
    na = st[NA]
    if na < r:
        for s in range(3):
            T[s, r] = T[s, na]
    T[0, na] = a
    T[1, na] = b
    T[2, na] = c
    for s in range(3):
        _add_key(keys, cnt, hist, st, s, T[s, na])
    st[NA] = na + 1
    st[R] = r + 1
    return na


@njit(cache=True)
def _delete_active(T, keys, cnt, hist, st, d):
    """Remove active term d; the last active term moves into column d."""
    for s in range(3):
        _remove_key(keys, cnt, hist, st, s, T[s, d])
    last = st[NA] - 1
    r = st[R]
    if d != last:
        for s in range(3):
            T[s, d] = T[s, last]
    if r - 1 != last:
        for s in range(3):
            T[s, last] = T[s, r - 1]
    st[NA] = last
    st[R] = r - 1
    return last


@njit(cache=True)
def reduce_around(T, keys, cnt, hist, st, ctr, k):
    """Apply pairwise reductions involving term k until none is left.

    Returns the number of reductions performed.
    """
    done = 0
    while True:
        a = T[0, k]
        b = T[1, k]
        c = T[2, k]
        multi = 0
        if count_of(keys, cnt, st, 0, a) >= 2:
            multi += 1
        if count_of(keys, cnt, st, 1, b) >= 2:
            multi += 1
        if count_of(keys, cnt, st, 2, c) >= 2:
            multi += 1
        if multi < 2:
            return done
        found = -1
        shared = 0
        for l in range(st[NA]):
            if l == k:
                continue
            sh = 0
            if T[0, l] == a:
                sh += 1
            if T[1, l] == b:
                sh += 1
            if T[2, l] == c:
                sh += 1
            if sh >= 2:
                found = l
                shared = sh
                break
        if found < 0:
            return done
        done += 1
        if shared == 3:
            hi = max(k, found)
            lo = min(k, found)
            _delete_active(T, keys, cnt, hist, st, hi)
            _delete_active(T, keys, cnt, hist, st, lo)
            ctr[C_RED2] += 1
            return done
        d = 0
        for s in range(3):
            if T[s, found] != T[s, k]:
                d = s
        _set_comp(T, keys, cnt, hist, st, d, k, T[d, k] ^ T[d, found])
        last = _delete_active(T, keys, cnt, hist, st, found)
        if k == last:
            k = found
        ctr[C_RED1] += 1


@njit(cache=True)
def _locate(T, st, a, b, c):
    for l in range(st[NA]):
        if T[0, l] == a and T[1, l] == b and T[2, l] == c:
            return l
    return -1


@njit(cache=True)
def _reduce_value(T, keys, cnt, hist, st, ctr, a, b, c):
    l = _locate(T, st, a, b, c)
    if l >= 0:
        reduce_around(T, keys, cnt, hist, st, ctr, l)


@njit(cache=True)
def reduce_all(T, keys, cnt, hist, st, ctr):
    """Pairwise-reduce the active terms until no pair shares two slots."""
    total = 0
    changed = True
    while changed:
        changed = False
        for k in range(st[NA]):
            n = reduce_around(T, keys, cnt, hist, st, ctr, k)
            if n > 0:
                total += n
                changed = True
                break
    return total


@njit(cache=True)
def _apply_flip(T, keys, cnt, hist, st, ctr, s, i, j):
    nx = (s + 1) % 3
    th = (s + 2) % 3
    _set_comp(T, keys, cnt, hist, st, nx, i, T[nx, i] ^ T[nx, j])
    _set_comp(T, keys, cnt, hist, st, th, j, T[th, j] ^ T[th, i])
    ctr[C_FLIPS] += 1
    ja = T[0, j]
    jb = T[1, j]
    jc = T[2, j]
    reduce_around(T, keys, cnt, hist, st, ctr, i)
    _reduce_value(T, keys, cnt, hist, st, ctr, ja, jb, jc)


@njit(cache=True)
def _flip_ok(T, s, i, j):
    nx = (s + 1) % 3
    th = (s + 2) % 3
    return T[s, i] == T[s, j] and T[nx, i] != T[nx, j] and T[th, i] != T[th, j]


@njit(cache=True)
def random_flip(T, keys, cnt, hist, st, ctr, rng):
    """Apply one uniformly random valid flip; False if there is none."""
    na = st[NA]
    z0 = max(st[CMAX + 0] - 1, 0)
    z1 = max(st[CMAX + 1] - 1, 0)
    z2 = max(st[CMAX + 2] - 1, 0)
    z = z0 + z1 + z2
    if z == 0 or na < 2:
        return False
    for _ in range(MAX_TRIES):
        u = rand_below(rng, z)
        if u < z0:
            s = 0
        elif u < z0 + z1:
            s = 1
        else:
            s = 2
        i = rand_below(rng, na)
        v = T[s, i]
        c = count_of(keys, cnt, st, s, v)
        if c < 2:
            continue
        if rand_below(rng, st[CMAX + s] - 1) >= c - 1:
            continue
        k = rand_below(rng, c - 1)
        j = -1
        for l in range(na):
            if l != i and T[s, l] == v:
                if k == 0:
                    j = l
                    break
                k -= 1
        if not _flip_ok(T, s, i, j):
            continue
        _apply_flip(T, keys, cnt, hist, st, ctr, s, i, j)
        return True
    # exhaustive fallback, still uniform over valid flips
    total = 0
    for s in range(3):
        for i in range(na):
            for j in range(na):
                if i != j and _flip_ok(T, s, i, j):
                    total += 1
    if total == 0:
        return False
    k = rand_below(rng, total)
    for s in range(3):
        for i in range(na):
            for j in range(na):
                if i != j and _flip_ok(T, s, i, j):
                    if k == 0:
                        _apply_flip(T, keys, cnt, hist, st, ctr, s, i, j)
                        return True
                    k -= 1
    return False


@njit(cache=True)
def _plus_ok(T, i, j):
    return T[0, i] != T[0, j] and T[1, i] != T[1, j] and T[2, i] != T[2, j]


@njit(cache=True)
def _apply_plus(T, keys, cnt, hist, st, ctr, i, j, s):
    nx = (s + 1) % 3
    th = (s + 2) % 3
    ex = np.zeros(3, dtype=np.uint64)
    ex[s] = T[s, j] ^ T[s, i]
    ex[nx] = T[nx, j]
    ex[th] = T[th, j]
    _set_comp(T, keys, cnt, hist, st, nx, i, T[nx, i] ^ T[nx, j])
    _set_comp(T, keys, cnt, hist, st, th, j, T[th, j] ^ T[th, i])
    _set_comp(T, keys, cnt, hist, st, s, j, T[s, i])
    _append_active(T, keys, cnt, hist, st, ex[0], ex[1], ex[2])
    ctr[C_PLUS] += 1
    ia = T[0, i]
    ib = T[1, i]
    ic = T[2, i]
    ja = T[0, j]
    jb = T[1, j]
    jc = T[2, j]
    _reduce_value(T, keys, cnt, hist, st, ctr, ia, ib, ic)
    _reduce_value(T, keys, cnt, hist, st, ctr, ja, jb, jc)
    _reduce_value(T, keys, cnt, hist, st, ctr, ex[0], ex[1], ex[2])


@njit(cache=True)
def random_plus(T, keys, cnt, hist, st, ctr, rng, cap):
    """Apply one uniformly random plus transition among active terms."""
    na = st[NA]
    if na < 2 or st[R] >= cap:
        return False
    for _ in range(64):
        i = rand_below(rng, na)
        j = rand_below(rng, na - 1)
        if j >= i:
            j += 1
        s = rand_below(rng, 3)
        if _plus_ok(T, i, j):
            _apply_plus(T, keys, cnt, hist, st, ctr, i, j, s)
            return True
    total = 0
    for i in range(na):
        for j in range(na):
            if i != j and _plus_ok(T, i, j):
                total += 1
    if total == 0:
        return False
    k = rand_below(rng, 3 * total)
    s = k % 3
    k //= 3
    for i in range(na):
        for j in range(na):
            if i != j and _plus_ok(T, i, j):
                if k == 0:
                    _apply_plus(T, keys, cnt, hist, st, ctr, i, j, s)
                    return True
                k -= 1
    return False


@njit(cache=True)
def general_reduce(T, keys, cnt, hist, st, ctr, lengths):
    """First rank-deficient group sharing one component, replaced by a factorization.

    Scan order: slot, then the group's first member index. Returns the
    number of terms removed (0 if no group qualifies).
    """
    na = st[NA]
    members = np.empty(na, dtype=np.int64)
    for s in range(3):
        nx = (s + 1) % 3
        th = (s + 2) % 3
        nrows = lengths[nx]
        ncols = lengths[th]
        for i in range(na):
            v = T[s, i]
            if count_of(keys, cnt, st, s, v) < 2:
                continue
            first = True
            for j in range(i):
                if T[s, j] == v:
                    first = False
                    break
            if not first:
                continue
            size = 0
            for j in range(i, na):
                if T[s, j] == v:
                    members[size] = j
                    size += 1
            mat = np.zeros(nrows, dtype=np.uint64)
            for g in range(size):
                j = members[g]
                x = T[nx, j]
                for q in range(nrows):
                    if (x >> np.uint64(q)) & np.uint64(1):
                        mat[q] ^= T[th, j]
            # reduced row echelon form, pivot columns ascending
            work = mat.copy()
            pivots = np.empty(nrows, dtype=np.int64)
            top = 0
            for col in range(ncols):
                if top == nrows:
                    break
                bit = np.uint64(1) << np.uint64(col)
                piv = -1
                for q in range(top, nrows):
                    if work[q] & bit:
                        piv = q
                        break
                if piv < 0:
                    continue
                tmp = work[top]
                work[top] = work[piv]
                work[piv] = tmp
                for q in range(nrows):
                    if q != top and (work[q] & bit):
                        work[q] ^= work[top]
                pivots[top] = col
                top += 1
            rank = top
            if rank >= size:
                continue
            new_vals = np.empty((3, rank), dtype=np.uint64)
            for l in range(rank):
                bit = np.uint64(1) << np.uint64(pivots[l])
                colv = np.uint64(0)
                for q in range(nrows):
                    if mat[q] & bit:
                        colv |= np.uint64(1) << np.uint64(q)
                new_vals[s, l] = v
                new_vals[nx, l] = colv
                new_vals[th, l] = work[l]
            for l in range(rank):
                pos = members[l]
                _set_comp(T, keys, cnt, hist, st, nx, pos, new_vals[nx, l])
                _set_comp(T, keys, cnt, hist, st, th, pos, new_vals[th, l])
            for g in range(size - 1, rank - 1, -1):
                _delete_active(T, keys, cnt, hist, st, members[g])
            ctr[C_GRED] += 1
            ctr[C_GREMOVED] += size - rank
            for l in range(rank):
                _reduce_value(
                    T, keys, cnt, hist, st, ctr, new_vals[0, l], new_vals[1, l], new_vals[2, l]
                )
            return size - rank
    return 0


@njit(cache=True)
def partition_active(T, st, masks):
    """Stable partition of the r terms into in-box (first) and out-of-box."""
    r = st[R]
    out = np.empty((3, r), dtype=np.uint64)
    na = 0
    for i in range(r):
        inside = True
        for s in range(3):
            if T[s, i] & ~masks[s]:
                inside = False
        if inside:
            for s in range(3):
                out[s, na] = T[s, i]
            na += 1
    pos = na
    for i in range(r):
        inside = True
        for s in range(3):
            if T[s, i] & ~masks[s]:
                inside = False
        if not inside:
            for s in range(3):
                out[s, pos] = T[s, i]
            pos += 1
    for s in range(3):
        for i in range(r):
            T[s, i] = out[s, i]
    st[NA] = na


@njit(cache=True)
def _record_best(T, best, st):
    r = st[R]
    if r < st[BEST_R]:
        st[BEST_R] = r
        for s in range(3):
            for i in range(r):
                best[s, i] = T[s, i]


@njit(cache=True)
def run_iterations(
    T, keys, cnt, hist, st, ctr, rng, best, lengths, cap, t0, n_iters, plus_limit, plus_on,
    gr_period, target,
):
    """Run iterations t0+1 .. t0+n_iters; returns how many were executed.

    Each iteration is one random flip followed by pairwise reductions; a
    plus transition fires once more than ``plus_limit`` consecutive
    iterations passed without a rank drop. Stops early once the best rank
    reaches ``target``.
    """
    for step in range(n_iters):
        t = t0 + step + 1
        before = st[R]
        if not random_flip(T, keys, cnt, hist, st, ctr, rng):
            ctr[C_STUCK] += 1
        if st[R] < before:
            st[LCOUNT] = 0
        else:
            st[LCOUNT] += 1
        if plus_on and st[LCOUNT] > plus_limit:
            random_plus(T, keys, cnt, hist, st, ctr, rng, cap)
            st[LCOUNT] = 0
        if gr_period > 0 and t % gr_period == 0:
            general_reduce(T, keys, cnt, hist, st, ctr, lengths)
        _record_best(T, best, st)
        if st[BEST_R] <= target:
            return step + 1
    return n_iters
