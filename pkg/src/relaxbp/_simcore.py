"""Simulated q-relaxed delete-max, single-threaded, adversary-driven.

One binary max-heap (reusing the striped-queue heap primitives on a
one-row view) with epoch-based lazy deletion, plus the relaxation
bookkeeping: each key carries a fairness counter that resets to zero
when the key is (re)inserted and increments every time a pop returns
some strictly worse task. A pop first extracts the window of the q best
live tasks; any window member whose counter has reached q-1 is overdue
and the best-ordered such member is returned unconditionally. Otherwise
an adversary policy picks any window member. Ranks are therefore never
worse than q, counters never exceed q-1, and q=1 degenerates to the
strict delete-max.

Builtin policies: 0 worst in window, 1 second best, 2 uniformly random
in window, 3 best (strict behaviour).
"""
import numpy as np
from numba import njit

from ._mqcore import (EMPTY, OK, _better, _pop_root, _purge_stale_top,
                      _sift_up)
from .rng import next_below

__all__ = ["alloc_sim", "sim_change", "sim_pop", "sim_peek_best",
           "POLICY_WORST", "POLICY_SECOND", "POLICY_RANDOM", "POLICY_BEST",
           "OK", "EMPTY"]

POLICY_WORST = 0
POLICY_SECOND = 1
POLICY_RANDOM = 2
POLICY_BEST = 3


def alloc_sim(key_count, q, cap=0):
    """Array bundle: heap row, size, epochs, counters, window scratch."""
    if cap <= 0:
        cap = max(4096, 4 * key_count + 8)
    hp = np.empty((1, cap), dtype=np.float64)
    hk = np.empty((1, cap), dtype=np.int64)
    he = np.empty((1, cap), dtype=np.int64)
    sizes = np.zeros(1, dtype=np.int64)
    epoch_of = np.zeros(key_count, dtype=np.int64)
    counter = np.zeros(key_count, dtype=np.int64)
    wprio = np.empty(q, dtype=np.float64)
    wkey = np.empty(q, dtype=np.int64)
    wep = np.empty(q, dtype=np.int64)
    return hp, hk, he, sizes, epoch_of, counter, wprio, wkey, wep


@njit(cache=True)
def sim_change(hp, hk, he, sizes, epoch_of, counter, key, prio):
    """Insert or reprioritise `key`; its fairness counter starts over."""
    epoch_of[key] += 1
    counter[key] = 0
    n = sizes[0]
    if n >= hp.shape[1]:
        # drop stale entries in place, then the push below must fit
        w = 0
        for r in range(n):
            if he[0, r] == epoch_of[hk[0, r]]:
                hp[0, w] = hp[0, r]
                hk[0, w] = hk[0, r]
                he[0, w] = he[0, r]
                w += 1
        sizes[0] = w
        for i in range(w // 2 - 1, -1, -1):
            _sift_down_row(hp, hk, he, i, w)
        n = w
    hp[0, n] = prio
    hk[0, n] = key
    he[0, n] = epoch_of[key]
    sizes[0] = n + 1
    _sift_up(hp, hk, he, 0, n)


@njit(cache=True)
def _sift_down_row(hp, hk, he, i, n):
    p = hp[0, i]
    k = hk[0, i]
    e = he[0, i]
    while True:
        c = 2 * i + 1
        if c >= n:
            break
        r = c + 1
        if r < n and _better(hp[0, r], hk[0, r], he[0, r],
                             hp[0, c], hk[0, c], he[0, c]):
            c = r
        if _better(hp[0, c], hk[0, c], he[0, c], p, k, e):
            hp[0, i] = hp[0, c]
            hk[0, i] = hk[0, c]
            he[0, i] = he[0, c]
            i = c
        else:
            break
    hp[0, i] = p
    hk[0, i] = k
    he[0, i] = e


@njit(cache=True)
def sim_pop(hp, hk, he, sizes, epoch_of, counter, wprio, wkey, wep,
            q, policy, st, lane, out):
    """Pop under the q-relaxed contract.

    Returns (status, key); out = [priority, rank (1-based), forced flag].
    """
    w = 0
    while w < q:
        _purge_stale_top(hp, hk, he, sizes, epoch_of, 0)
        if sizes[0] == 0:
            break
        wprio[w] = hp[0, 0]
        wkey[w] = hk[0, 0]
        wep[w] = he[0, 0]
        _pop_root(hp, hk, he, sizes, 0)
        w += 1
    if w == 0:
        out[0] = 0.0
        out[1] = 0.0
        out[2] = 0.0
        return EMPTY, -1
    t = -1
    forced = 0
    for i in range(w):
        if counter[wkey[i]] >= q - 1:
            t = i
            forced = 1
            break
    if t < 0:
        if policy == POLICY_WORST:
            t = w - 1
        elif policy == POLICY_SECOND:
            t = 1 if w > 1 else 0
        elif policy == POLICY_RANDOM:
            t = next_below(st, lane, w)
        else:
            t = 0
    for i in range(t):
        counter[wkey[i]] += 1
    for i in range(w):
        if i != t:
            n = sizes[0]
            hp[0, n] = wprio[i]
            hk[0, n] = wkey[i]
            he[0, n] = wep[i]
            sizes[0] = n + 1
            _sift_up(hp, hk, he, 0, n)
    key = wkey[t]
    counter[key] = 0
    out[0] = wprio[t]
    out[1] = float(t + 1)
    out[2] = float(forced)
    return OK, key


@njit(cache=True)
def sim_peek_best(hp, hk, he, sizes, epoch_of, out):
    """Best live priority without consuming it; EMPTY when none."""
    _purge_stale_top(hp, hk, he, sizes, epoch_of, 0)
    if sizes[0] == 0:
        out[0] = 0.0
        return EMPTY, -1
    out[0] = hp[0, 0]
    return OK, hk[0, 0]
