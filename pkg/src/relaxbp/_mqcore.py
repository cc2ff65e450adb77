"""Lock-striped relaxed priority queue kernels (delete-max).

m independent binary max-heaps guarded by one try-lock each. An insert
picks a uniformly random queue; a pop samples two queues, compares their
cached top priorities racily, locks the better one and pops its top.
Reprioritising a key never removes its old entry: every key carries an
epoch counter, a queued entry is fresh only while its epoch matches, and
stale entries are discarded lazily when they surface at a top (or during
compaction when a queue fills).

With m == 1 the sampling is degenerate and every operation works on one
heap under one lock, which makes the strict scheduler a special case of
this code path.

The entry order is total: higher priority first, then lower key, then
higher (newer) epoch. All kernels are nogil and safe to call from
concurrently running worker threads; `st` is a per-thread SplitMix64
lane array indexed by `lane`.
"""
import numpy as np
from numba import njit

from ._atomics import cas_i8, add_i8, load_i8, store_i8, load_f8, store_f8
from .rng import next_below

__all__ = ["alloc_queues", "mq_change", "mq_pop", "mq_estimate",
           "OK", "EMPTY", "FULL"]

OK = 0
EMPTY = 1
FULL = 2

NEG_INF = float("-inf")


def alloc_queues(m, key_count, cap=0):
    """Allocate the array bundle for m queues over key_count keys.

    Returns (heap_prio, heap_key, heap_epoch, sizes, locks, cached_top,
    epoch_of). Capacity defaults to 4x the fair share per queue so lazy
    deletion has headroom before compaction kicks in.
    """
    if cap <= 0:
        cap = max(4096, (4 * key_count) // m + 8)
    heap_prio = np.empty((m, cap), dtype=np.float64)
    heap_key = np.empty((m, cap), dtype=np.int64)
    heap_epoch = np.empty((m, cap), dtype=np.int64)
    sizes = np.zeros(m, dtype=np.int64)
    locks = np.zeros(m, dtype=np.int64)
    cached_top = np.full(m, NEG_INF)
    epoch_of = np.zeros(key_count, dtype=np.int64)
    return heap_prio, heap_key, heap_epoch, sizes, locks, cached_top, epoch_of


@njit(inline="always")
def _better(pa, ka, ea, pb, kb, eb):
    if pa != pb:
        return pa > pb
    if ka != kb:
        return ka < kb
    return ea > eb


@njit(inline="always")
def _try_lock(locks, q):
    return cas_i8(locks, q, 0, 1) == 0


@njit(inline="always")
def _spin_lock(locks, q):
    while cas_i8(locks, q, 0, 1) != 0:
        pass


@njit(inline="always")
def _unlock(locks, q):
    store_i8(locks, q, 0)


@njit(cache=True)
def _sift_up(hp, hk, he, q, i):
    p = hp[q, i]
    k = hk[q, i]
    e = he[q, i]
    while i > 0:
        par = (i - 1) >> 1
        if _better(p, k, e, hp[q, par], hk[q, par], he[q, par]):
            hp[q, i] = hp[q, par]
            hk[q, i] = hk[q, par]
            he[q, i] = he[q, par]
            i = par
        else:
            break
    hp[q, i] = p
    hk[q, i] = k
    he[q, i] = e


@njit(cache=True)
def _sift_down(hp, hk, he, q, i, n):
    p = hp[q, i]
    k = hk[q, i]
    e = he[q, i]
    while True:
        c = 2 * i + 1
        if c >= n:
            break
        r = c + 1
        if r < n and _better(hp[q, r], hk[q, r], he[q, r],
                             hp[q, c], hk[q, c], he[q, c]):
            c = r
        if _better(hp[q, c], hk[q, c], he[q, c], p, k, e):
            hp[q, i] = hp[q, c]
            hk[q, i] = hk[q, c]
            he[q, i] = he[q, c]
            i = c
        else:
            break
    hp[q, i] = p
    hk[q, i] = k
    he[q, i] = e


@njit(cache=True)
def _pop_root(hp, hk, he, sizes, q):
    n = sizes[q] - 1
    sizes[q] = n
    if n > 0:
        hp[q, 0] = hp[q, n]
        hk[q, 0] = hk[q, n]
        he[q, 0] = he[q, n]
        _sift_down(hp, hk, he, q, 0, n)


@njit(cache=True)
def _purge_stale_top(hp, hk, he, sizes, epoch_of, q):
    while sizes[q] > 0 and he[q, 0] != load_i8(epoch_of, hk[q, 0]):
        _pop_root(hp, hk, he, sizes, q)


@njit(cache=True)
def _refresh_cached(hp, sizes, cached_top, q):
    if sizes[q] > 0:
        store_f8(cached_top, q, hp[q, 0])
    else:
        store_f8(cached_top, q, NEG_INF)


@njit(cache=True)
def _compact(hp, hk, he, sizes, epoch_of, q):
    n = sizes[q]
    w = 0
    for r in range(n):
        if he[q, r] == load_i8(epoch_of, hk[q, r]):
            hp[q, w] = hp[q, r]
            hk[q, w] = hk[q, r]
            he[q, w] = he[q, r]
            w += 1
    sizes[q] = w
    for i in range(w // 2 - 1, -1, -1):
        _sift_down(hp, hk, he, q, i, w)


@njit(cache=True)
def mq_change(hp, hk, he, sizes, locks, cached_top, epoch_of,
              key, prio, st, lane):
    """Insert or reprioritise: atomic epoch bump, then push the new entry.

    Returns OK, or FULL when the chosen queue cannot hold the entry even
    after dropping its stale entries.
    """
    m = sizes.shape[0]
    cap = hp.shape[1]
    epoch = add_i8(epoch_of, key, 1) + 1
    while True:
        q = next_below(st, lane, m)
        if not _try_lock(locks, q):
            continue
        if sizes[q] >= cap:
            _compact(hp, hk, he, sizes, epoch_of, q)
            if sizes[q] >= cap:
                _refresh_cached(hp, sizes, cached_top, q)
                _unlock(locks, q)
                return FULL
        n = sizes[q]
        hp[q, n] = prio
        hk[q, n] = key
        he[q, n] = epoch
        sizes[q] = n + 1
        _sift_up(hp, hk, he, q, n)
        # the push may sit under a root this same call just staled; keep
        # cached_top a fresh-entry bound so the convergence check can trust it
        _purge_stale_top(hp, hk, he, sizes, epoch_of, q)
        _refresh_cached(hp, sizes, cached_top, q)
        _unlock(locks, q)
        return OK


@njit(cache=True)
def mq_pop(hp, hk, he, sizes, locks, cached_top, epoch_of, st, lane,
           single, out):
    """Pop the best entry the sampling finds. out[0]=priority on OK.

    Two-choice by default; `single` flips to one uniformly sampled queue.
    After m*m failed attempts (lock misses or locally empty queues) the
    slow path locks every queue, purges stale tops, and either pops the
    global best or reports EMPTY with certainty. Returns (status, key).
    """
    m = sizes.shape[0]
    attempts = 0
    limit = m * m
    while attempts < limit:
        attempts += 1
        q = next_below(st, lane, m)
        if not single:
            # strict > : an index-based tie rule would funnel equal-priority
            # pops into the low queues and starve them of entries
            q2 = next_below(st, lane, m)
            if load_f8(cached_top, q2) > load_f8(cached_top, q):
                q = q2
        if not _try_lock(locks, q):
            continue
        _purge_stale_top(hp, hk, he, sizes, epoch_of, q)
        if sizes[q] == 0:
            _refresh_cached(hp, sizes, cached_top, q)
            _unlock(locks, q)
            continue
        prio = hp[q, 0]
        key = hk[q, 0]
        _pop_root(hp, hk, he, sizes, q)
        _purge_stale_top(hp, hk, he, sizes, epoch_of, q)
        _refresh_cached(hp, sizes, cached_top, q)
        _unlock(locks, q)
        out[0] = prio
        return OK, key
    # certainty path: lock everything in index order (no deadlock: pops and
    # inserts elsewhere only try-lock, they never wait while holding)
    for q in range(m):
        _spin_lock(locks, q)
    best_q = -1
    for q in range(m):
        _purge_stale_top(hp, hk, he, sizes, epoch_of, q)
        if sizes[q] > 0:
            if best_q < 0 or _better(hp[q, 0], hk[q, 0], he[q, 0],
                                     hp[best_q, 0], hk[best_q, 0],
                                     he[best_q, 0]):
                best_q = q
    status = EMPTY
    key = -1
    if best_q >= 0:
        out[0] = hp[best_q, 0]
        key = hk[best_q, 0]
        _pop_root(hp, hk, he, sizes, best_q)
        _purge_stale_top(hp, hk, he, sizes, epoch_of, best_q)
        status = OK
    for q in range(m - 1, -1, -1):
        _refresh_cached(hp, sizes, cached_top, q)
        _unlock(locks, q)
    return status, key


@njit(cache=True)
def mq_estimate(cached_top):
    """Racy upper-bound flavour of the current best priority."""
    best = NEG_INF
    for q in range(cached_top.shape[0]):
        c = load_f8(cached_top, q)
        if c > best:
            best = c
    return best
