"""Priority schedulers: strict, striped-relaxed, and simulated q-relaxed.

All three speak the same contract:

  insert(key, priority)            new task (upserts)
  change_priority(key, priority)   same operation as insert
  approx_delete_max() -> key       most urgent task, within the
                                   implementation's relaxation
  max_priority_estimate() -> float best known priority, possibly stale

Priorities are oriented so that HIGHER means more urgent, everywhere in
this package: the pop operation is a delete-max. Ties break toward the
smaller key, and for equal keys toward the newer entry. Reprioritising
never edits an entry in place; the key's epoch advances and old entries
die lazily, which handles priority decreases and increases uniformly.

ExactScheduler serializes everything through one lock (relaxation q=1).
Multiqueue stripes entries over m try-locked heaps and is the one to use
from concurrent workers; with m=1 its pop sequence is identical to the
exact scheduler's. SimScheduler is single-threaded and exists to play
out worst-case schedules: an adversary policy picks any task within the
top-q window, except that a task that has already suffered q-1 priority
inversions is returned unconditionally.
"""
import heapq
import threading

import numpy as np
from numba import njit

from . import _mqcore, _simcore
from ._mqcore import alloc_queues, mq_change, mq_estimate, mq_pop
from .errors import CapacityExceeded, Empty, IllegalAdversaryChoice
from .rng import make_states, next_below, next_unit

_MQ_OK = _mqcore.OK

__all__ = [
    "ExactScheduler", "Multiqueue", "SimScheduler",
    "exact_insert", "exact_change_priority", "exact_delete_max",
    "mq_new", "mq_insert", "mq_change_priority", "mq_delete_max",
    "sim_new", "sim_delete_max",
    "worst_legal", "frontier_starving", "second_best", "best_legal",
    "random_legal", "multiqueue_rank_stats",
]

NEG_INF = float("-inf")


class ExactScheduler:
    """Strict delete-max over one heap; every pop is the global maximum."""

    def __init__(self):
        self._heap = []
        self._epoch = {}  # monotone per key, never reset: stale detection
        self._live = set()
        self._lock = threading.Lock()
        self.last_priority = None

    def insert(self, key, priority):
        self.change_priority(key, priority)

    def change_priority(self, key, priority):
        with self._lock:
            e = self._epoch.get(key, 0) + 1
            self._epoch[key] = e
            self._live.add(key)
            heapq.heappush(self._heap, (-priority, key, -e))

    def _purge(self):
        h = self._heap
        while h and -h[0][2] != self._epoch.get(h[0][1]):
            heapq.heappop(h)

    def approx_delete_max(self):
        with self._lock:
            self._purge()
            if not self._heap:
                raise Empty("scheduler is empty")
            negp, key, nege = heapq.heappop(self._heap)
            self._live.discard(key)
            self.last_priority = -negp
            return key

    def max_priority_estimate(self):
        with self._lock:
            self._purge()
            return -self._heap[0][0] if self._heap else NEG_INF

    def __len__(self):
        return len(self._live)


class Multiqueue:
    """m striped heaps; insert one random queue, pop the better of two tops.

    Keys must be integers in [0, key_capacity). Thread-safe: the heavy
    lifting happens in compiled kernels that only hold one per-queue
    try-lock at a time.
    """

    def __init__(self, m, seed=1, key_capacity=1024, cap=0):
        if m < 1:
            raise ValueError("need at least one queue")
        self.m = m
        self._arrays = alloc_queues(m, key_capacity, cap)
        self._st = make_states(seed, 1)
        self._out = np.empty(1)
        self.last_priority = None

    @property
    def key_capacity(self):
        return len(self._arrays[6])

    def _check_key(self, key):
        if not (0 <= key < self.key_capacity):
            raise KeyError(f"key {key} outside [0, {self.key_capacity})")

    def insert(self, key, priority):
        self.change_priority(key, priority)

    def change_priority(self, key, priority):
        self._check_key(key)
        status = mq_change(*self._arrays, key, float(priority), self._st, 0)
        if status == _mqcore.FULL:
            raise CapacityExceeded("a queue is full of live entries")

    def approx_delete_max(self, single_sample=False):
        status, key = mq_pop(*self._arrays, self._st, 0,
                             1 if single_sample else 0, self._out)
        if status == _mqcore.EMPTY:
            raise Empty("all queues are empty")
        self.last_priority = float(self._out[0])
        return int(key)

    def max_priority_estimate(self):
        return float(mq_estimate(self._arrays[5]))


def _policy_worst(window, counters):
    return window[-1][0]


def _policy_second(window, counters):
    return window[1][0] if len(window) > 1 else window[0][0]


def _policy_best(window, counters):
    return window[0][0]


worst_legal = _policy_worst
frontier_starving = _policy_worst  # worst-in-window starves the real work
second_best = _policy_second
best_legal = _policy_best


def random_legal(seed):
    """Uniformly random legal choice, deterministic for a given seed."""
    st = make_states(seed, 1)

    def policy(window, counters):
        return window[next_below(st, 0, len(window))][0]

    return policy


_POLICY_NAMES = {
    "worst_legal": _policy_worst,
    "frontier_starving": _policy_worst,
    "second_best": _policy_second,
    "best_legal": _policy_best,
}

POLICY_ENUM = {
    "worst_legal": _simcore.POLICY_WORST,
    "frontier_starving": _simcore.POLICY_WORST,
    "second_best": _simcore.POLICY_SECOND,
    "random_legal": _simcore.POLICY_RANDOM,
    "best_legal": _simcore.POLICY_BEST,
}


class SimScheduler:
    """q-relaxed delete-max driven by an adversary policy (single thread).

    The policy is consulted with (window, counters): the top-q live tasks
    as a best-first list of (key, priority) pairs, and a read-only view of
    the fairness counters. It must return one of the window keys, anything
    else raises IllegalAdversaryChoice. A window task whose counter has
    reached q-1 preempts the policy entirely. Counters are inspectable via
    `fairness_counters`; with record_trace=True every pop appends
    (op_index, rank, forced) to `trace`.
    """

    def __init__(self, q, adversary_policy="worst_legal", record_trace=False):
        if q < 1:
            raise ValueError("q must be at least 1")
        self.q = q
        if callable(adversary_policy):
            self._policy = adversary_policy
        else:
            try:
                self._policy = _POLICY_NAMES[adversary_policy]
            except KeyError:
                raise ValueError(f"unknown policy {adversary_policy!r}")
        self._heap = []
        self._epoch = {}
        self._counter = {}
        self._ops = 0
        self.record_trace = record_trace
        self.trace = []
        self.last_priority = None
        self.last_rank = None
        self.last_forced = None

    @property
    def fairness_counters(self):
        return dict(self._counter)

    def reset_fairness(self):
        """Restart every inversion budget, as a global priority refresh
        (reinserting each task at its current priority) would."""
        for key in self._counter:
            self._counter[key] = 0

    def insert(self, key, priority):
        self.change_priority(key, priority)

    def change_priority(self, key, priority):
        self._ops += 1
        e = self._epoch.get(key, 0) + 1
        self._epoch[key] = e
        self._counter[key] = 0
        heapq.heappush(self._heap, (-priority, key, -e))

    def _pop_fresh(self):
        h = self._heap
        while h:
            negp, key, nege = heapq.heappop(h)
            if -nege == self._epoch.get(key):
                return negp, key, nege
        return None

    def approx_delete_max(self):
        self._ops += 1
        window = []
        while len(window) < self.q:
            entry = self._pop_fresh()
            if entry is None:
                break
            window.append(entry)
        if not window:
            raise Empty("scheduler is empty")
        choice = None
        forced = False
        for idx, (negp, key, nege) in enumerate(window):
            if self._counter[key] >= self.q - 1:
                choice = idx
                forced = True
                break
        if choice is None:
            view = [(key, -negp) for negp, key, nege in window]
            picked = self._policy(view, self.fairness_counters)
            for idx, (negp, key, nege) in enumerate(window):
                if key == picked:
                    choice = idx
                    break
            if choice is None:
                raise IllegalAdversaryChoice(
                    f"policy chose {picked!r}, not in the top-{self.q} window")
        for idx in range(choice):
            self._counter[window[idx][1]] += 1
        for idx, entry in enumerate(window):
            if idx != choice:
                heapq.heappush(self._heap, entry)
        negp, key, nege = window[choice]
        # the key's epoch stays (monotone); only its counter record goes
        del self._counter[key]
        self.last_priority = -negp
        self.last_rank = choice + 1
        self.last_forced = forced
        if self.record_trace:
            self.trace.append((self._ops, self.last_rank, int(forced)))
        return key

    def max_priority_estimate(self):
        entry = self._pop_fresh()
        if entry is None:
            return NEG_INF
        heapq.heappush(self._heap, entry)
        return -entry[0]

    def dump_rank_trace(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("op,rank,forced\n")
            for op, rank, forced in self.trace:
                fh.write(f"{op},{rank},{forced}\n")


# Free-function spellings of the same operations.

def exact_insert(sched, key, priority):
    sched.insert(key, priority)


def exact_change_priority(sched, key, priority):
    sched.change_priority(key, priority)


def exact_delete_max(sched):
    return sched.approx_delete_max()


def mq_new(m, seed=1, key_capacity=1024):
    return Multiqueue(m, seed=seed, key_capacity=key_capacity)


def mq_insert(mq, key, priority):
    mq.insert(key, priority)


def mq_change_priority(mq, key, priority):
    mq.change_priority(key, priority)


def mq_delete_max(mq):
    return mq.approx_delete_max()


def sim_new(q, adversary_policy="worst_legal"):
    return SimScheduler(q, adversary_policy)


def sim_delete_max(sim):
    return sim.approx_delete_max()


@njit(cache=True)
def _rank_driver(hp, hk, he, sizes, locks, cached_top, epoch_of,
                 st, ops, key_count, stats):
    """Mixed random ops; true rank of every pop vs an exact shadow view."""
    live = np.zeros(key_count, dtype=np.int64)
    cur = np.zeros(key_count)
    out = np.empty(1)
    live_count = 0
    pops = 0
    total_rank = 0.0
    max_rank = 0
    for _ in range(ops):
        if live_count == 0 or next_unit(st, 0) < 0.55:
            key = next_below(st, 0, key_count)
            prio = next_unit(st, 0)
            mq_change(hp, hk, he, sizes, locks, cached_top, epoch_of,
                      key, prio, st, 0)
            if live[key] == 0:
                live[key] = 1
                live_count += 1
            cur[key] = prio
        else:
            status, key = mq_pop(hp, hk, he, sizes, locks, cached_top,
                                 epoch_of, st, 0, 0, out)
            if status != _MQ_OK:
                stats[2] = 1.0
                return
            p = out[0]
            if live[key] == 0 or cur[key] != p:
                stats[2] = 2.0
                return
            rank = 1
            for k in range(key_count):
                if live[k] == 1 and (cur[k] > p or (cur[k] == p and k < key)):
                    rank += 1
            live[key] = 0
            live_count -= 1
            pops += 1
            total_rank += rank
            if rank > max_rank:
                max_rank = rank
    stats[0] = total_rank / max(pops, 1)
    stats[1] = float(max_rank)
    stats[3] = float(pops)


def multiqueue_rank_stats(m, key_count, ops, seed):
    """(mean rank, max rank, pop count) of pops over `ops` random ops.

    Each pop's rank is measured against an exact shadow of the live set,
    so this is the statistical check that two-choice sampling keeps pops
    near the front.
    """
    arrays = alloc_queues(m, key_count)
    st = make_states(seed, 1)
    stats = np.zeros(4)
    _rank_driver(*arrays, st, ops, key_count, stats)
    if stats[2] != 0.0:
        raise AssertionError(f"shadow disagreement (code {stats[2]})")
    return float(stats[0]), int(stats[1]), int(stats[3])
