"""Single-source tree game: residual propagation as a pop-by-pop trace.

The engine's behaviour on a tree whose only initial residual sits at the
root reduces to a sequential game against the scheduler: every pop either
hits a message with non-zero residual (a useful update, clearing it and
activating the children) or a zero-residual one (a wasted update, a
no-op). Residual magnitudes only matter through their ordering, so
instances carry one synthetic residual class per downward message and the
game runs on those classes directly instead of real message vectors.

Two instance families are built here: uniform-expansion trees whose
classes strictly decrease with level, and a hard main-path/side-path
construction whose classes make the schedule walk one side path at a
time, pinning the frontier to a handful of messages. A third driver plays
the two-phase (leaves-in, root-out) schedule expressed as priorities over
all 2(n-1) directed messages.

All games are deterministic single-thread loops over the simulated
q-relaxed scheduler; traces record rank, usefulness, and frontier size
for every pop. A useful update reprioritises the whole task set (most
tasks to the value they already had), so every inversion budget restarts
there; the drivers apply that as a counter reset instead of replaying
n no-op reinsertions through the heap.
"""
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from ._simcore import (POLICY_BEST, alloc_sim, sim_change, sim_pop)
from .errors import Empty
from .rng import make_states, next_below
from .schedulers import POLICY_ENUM, SimScheduler

__all__ = [
    "TreeInstance", "GameTrace", "build_uniform_tree", "build_bad_instance",
    "run_tree_game", "OptimalTreePriorities", "optimal_tree_priorities",
    "run_optimal_game",
]


@dataclass
class TreeInstance:
    """Rooted tree (node 0) plus one residual class per downward message.

    parent[v] is v's parent and must precede v; klass[v] is the residual
    class of the message parent[v] -> v (klass[0] is unused). Height is
    the maximum root-to-leaf distance.
    """
    parent: np.ndarray
    klass: np.ndarray
    depth: np.ndarray = field(init=False)
    height: int = field(init=False)

    def __post_init__(self):
        self.parent = np.asarray(self.parent, dtype=np.int64)
        self.klass = np.asarray(self.klass, dtype=np.float64)
        n = len(self.parent)
        if n < 1 or self.parent[0] != -1:
            raise ValueError("node 0 must be the single root")
        if len(self.klass) != n:
            raise ValueError("need one class per node")
        if n > 1:
            par = self.parent[1:]
            if par.min() < 0 or np.any(par >= np.arange(1, n)):
                raise ValueError("parents must precede their children")
            if self.klass[1:].min() <= 0:
                raise ValueError("residual classes must be positive")
        depth = np.zeros(n, dtype=np.int64)
        for v in range(1, n):
            depth[v] = depth[self.parent[v]] + 1
        self.depth = depth
        self.height = int(depth.max()) if n > 1 else 0

    @property
    def n(self):
        return len(self.parent)

    def children_csr(self):
        """(offsets, ids): children of each node in index order."""
        n = self.n
        cnt = np.bincount(self.parent[1:], minlength=n) if n > 1 else \
            np.zeros(n, dtype=np.int64)
        off = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(cnt, out=off[1:])
        ids = np.argsort(self.parent[1:], kind="stable").astype(np.int64) + 1
        return off, ids


@dataclass
class GameTrace:
    """Pop-by-pop record of one game.

    ranks[t] is the 1-based rank the scheduler reported for pop t,
    flags[t] is 1 for a useful pop, and frontier[t] is the number of
    non-zero-residual messages the pop saw (before its effect).
    """
    useful: int
    wasted: int
    ranks: np.ndarray
    flags: np.ndarray
    frontier: np.ndarray
    max_frontier: int

    @property
    def total(self):
        return self.useful + self.wasted

    def dump_csv(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("step,popped_rank,useful_flag,frontier_size\n")
            for t in range(len(self.ranks)):
                fh.write(f"{t},{self.ranks[t]},{self.flags[t]},"
                         f"{self.frontier[t]}\n")


def build_uniform_tree(shape, n, seed=1):
    """Tree whose residual classes strictly decrease with message level.

    shape is "full-binary" or "random-with-max-degree-<d>" (d >= 2); the
    random shape attaches each node to a uniformly drawn node that still
    has spare degree.
    """
    if n < 1:
        raise ValueError("need at least one node")
    parent = np.full(n, -1, dtype=np.int64)
    if shape == "full-binary":
        for v in range(1, n):
            parent[v] = (v - 1) >> 1
    elif shape.startswith("random-with-max-degree-"):
        d = int(shape.rsplit("-", 1)[1])
        if d < 2:
            raise ValueError("max degree must be at least 2")
        st = make_states(seed, 1)
        # spare[v]: attachments v can still accept (root has no parent edge)
        spare = np.empty(n, dtype=np.int64)
        spare[0] = d
        open_ = np.empty(n, dtype=np.int64)
        open_[0] = 0
        navail = 1
        for v in range(1, n):
            i = next_below(st, 0, navail)
            p = open_[i]
            parent[v] = p
            spare[p] -= 1
            if spare[p] == 0:
                navail -= 1
                open_[i] = open_[navail]
            spare[v] = d - 1
            open_[navail] = v
            navail += 1
    else:
        raise ValueError(f"unknown shape {shape!r}")
    depth = np.zeros(n, dtype=np.int64)
    for v in range(1, n):
        depth[v] = depth[parent[v]] + 1
    h = int(depth.max()) if n > 1 else 1
    klass = np.zeros(n, dtype=np.float64)
    if n > 1:
        # message level is depth-1; (h - level)/h decreases strictly per level
        klass[1:] = (h - (depth[1:] - 1)) / h
    return TreeInstance(parent, klass)


def build_bad_instance(n, c=2):
    """Short tree that q-relaxation handles badly: total work grows with q.

    A main path of floor(n^(1/c)) vertices, a same-length path attached to
    every vertex of it (repeated for c > 2), and one leaf on every node
    left with degree 2. Classes put every attached path strictly above the
    path it hangs off, so the schedule drains one attachment at a time and
    the frontier never grows past a handful of messages.
    """
    if n < 16:
        raise ValueError("need n >= 16")
    if c not in (2, 3):
        raise ValueError("attachment depth c must be 2 or 3")
    length = int(n ** (1.0 / c))
    parent = [-1]
    band = [0]
    pos = [1]
    for _ in range(1, length):
        parent.append(len(parent) - 1)
        band.append(0)
        pos.append(pos[-1] + 1)
    frontier = list(range(length))
    for b in range(1, c):
        next_frontier = []
        for anchor in frontier:
            prev = anchor
            for k in range(1, length + 1):
                v = len(parent)
                parent.append(prev)
                band.append(b)
                pos.append(k)
                next_frontier.append(v)
                prev = v
        frontier = next_frontier
    # leaf fill: any node still of degree 2 gets one pendant; the half-step
    # position drains a pendant before the path advances past its anchor,
    # which is what pins the frontier to a handful of live messages
    deg = np.zeros(len(parent), dtype=np.int64)
    for v in range(1, len(parent)):
        deg[parent[v]] += 1
        deg[v] += 1
    for v in range(len(deg)):
        if deg[v] == 2:
            parent.append(v)
            band.append(band[v])
            pos.append(pos[v] + 0.5)
    parent = np.array(parent, dtype=np.int64)
    band = np.array(band, dtype=np.int64)
    pos = np.array(pos, dtype=np.float64)
    # band b lives in (4^b * 3/4, 4^b]: above all of band b-1
    klass = 4.0 ** band * (1.0 - pos / (4.0 * length))
    klass[0] = 0.0
    return TreeInstance(parent, klass)


@njit(cache=True)
def _game_driver(parent, klass, child_off, child_ids, hp, hk, he, sizes,
                 epoch_of, counter, wprio, wkey, wep, q, policy, st,
                 ranks, flags, fsize, out):
    n = parent.shape[0]
    target = n - 1
    for v in range(1, n):
        if parent[v] == 0:
            sim_change(hp, hk, he, sizes, epoch_of, counter, v, klass[v])
        else:
            sim_change(hp, hk, he, sizes, epoch_of, counter, v, 0.0)
    live = 0
    for v in range(1, n):
        if parent[v] == 0:
            live += 1
    useful = 0
    wasted = 0
    t = 0
    while useful < target:
        status, key = sim_pop(hp, hk, he, sizes, epoch_of, counter,
                              wprio, wkey, wep, q, policy, st, 0, out)
        fsize[t] = live
        ranks[t] = np.int64(out[1])
        prio = out[0]
        sim_change(hp, hk, he, sizes, epoch_of, counter, key, 0.0)
        if prio > 0.0:
            useful += 1
            live -= 1
            for idx in range(child_off[key], child_off[key + 1]):
                c = child_ids[idx]
                sim_change(hp, hk, he, sizes, epoch_of, counter, c, klass[c])
                live += 1
            counter[:] = 0
            flags[t] = 1
        else:
            wasted += 1
            flags[t] = 0
        t += 1
    return useful, wasted, t


def _finish_trace(useful, wasted, t, ranks, flags, fsize):
    ranks = ranks[:t].copy()
    flags = flags[:t].copy()
    fsize = fsize[:t].copy()
    mx = int(fsize.max()) if t else 0
    return GameTrace(int(useful), int(wasted), ranks, flags, fsize, mx)


def run_tree_game(instance, q, adversary="worst_legal", seed=1):
    """Play the single-source game to quiescence, recording every pop.

    Fairness caps the wasted pops between useful ones at q-1, so the
    trace arrays are sized for (n-1)*q pops and the loop always ends.
    Named adversaries run compiled; a callable policy runs through the
    pure-python scheduler.
    """
    if q < 1:
        raise ValueError("q must be at least 1")
    n = instance.n
    if n == 1:
        z = np.zeros(0, dtype=np.int64)
        return GameTrace(0, 0, z, z.copy(), z.copy(), 0)
    cap = (n - 1) * q + q + 8
    ranks = np.zeros(cap, dtype=np.int64)
    flags = np.zeros(cap, dtype=np.int64)
    fsize = np.zeros(cap, dtype=np.int64)
    child_off, child_ids = instance.children_csr()
    if callable(adversary):
        return _python_tree_game(instance, q, adversary, child_off,
                                 child_ids, ranks, flags, fsize)
    policy = POLICY_ENUM[adversary]  # KeyError on unknown names is fine
    arrays = alloc_sim(n, q)
    st = make_states(seed, 1)
    out = np.zeros(3)
    useful, wasted, t = _game_driver(
        instance.parent, instance.klass, child_off, child_ids, *arrays,
        q, policy, st, ranks, flags, fsize, out)
    return _finish_trace(useful, wasted, t, ranks, flags, fsize)


def _python_tree_game(instance, q, adversary, child_off, child_ids,
                      ranks, flags, fsize):
    n = instance.n
    sched = SimScheduler(q, adversary)
    for v in range(1, n):
        sched.change_priority(v, instance.klass[v]
                              if instance.parent[v] == 0 else 0.0)
    live = int((instance.parent[1:] == 0).sum())
    useful = wasted = t = 0
    while useful < n - 1:
        key = sched.approx_delete_max()
        fsize[t] = live
        ranks[t] = sched.last_rank
        prio = sched.last_priority
        sched.change_priority(key, 0.0)
        if prio > 0.0:
            useful += 1
            live -= 1
            for c in child_ids[child_off[key]:child_off[key + 1]]:
                sched.change_priority(int(c), instance.klass[c])
                live += 1
            sched.reset_fairness()
            flags[t] = 1
        else:
            wasted += 1
        t += 1
    return _finish_trace(useful, wasted, t, ranks, flags, fsize)


class OptimalTreePriorities:
    """Two-phase tree schedule (leaves in, then root out) as priorities.

    Directed message keys: 2*(v-1) is v->parent(v), 2*(v-1)+1 is
    parent(v)->v. Three rules: a message with no pending inputs starts at
    priority n (that covers leaf upward messages), a useful update drops
    its task to 0, and once the last input of a message has updated the
    message activates at (minimum update priority of its inputs) - 1.
    State per message is one counter and one running minimum.
    """

    def __init__(self, instance):
        self.instance = instance
        n = instance.n
        self.key_count = max(2 * (n - 1), 1)
        child_off, child_ids = instance.children_csr()
        self._child_off = child_off
        self._child_ids = child_ids
        nchild = (child_off[1:] - child_off[:-1]).astype(np.int64)
        self.pending = np.zeros(self.key_count, dtype=np.int64)
        self.minp = np.full(self.key_count, float(n + 1))
        for v in range(1, n):
            p = instance.parent[v]
            self.pending[2 * (v - 1)] = nchild[v]
            self.pending[2 * (v - 1) + 1] = (nchild[p] - 1) + (1 if p else 0)

    def initial(self):
        """(key, priority) seeds: zero-pending messages at n, rest at 0."""
        n = self.instance.n
        return [(k, float(n) if self.pending[k] == 0 else 0.0)
                for k in range(2 * (n - 1))]

    def on_useful(self, key, prio):
        """Reprioritisations triggered by a useful update of `key`."""
        inst = self.instance
        v = key // 2 + 1
        p = inst.parent[v]
        deps = []
        if key & 1:  # downward parent(v)->v: feeds v's outgoing downward
            for idx in range(self._child_off[v], self._child_off[v + 1]):
                deps.append(2 * (self._child_ids[idx] - 1) + 1)
        else:  # upward v->parent: feeds p's upward and v's siblings' downward
            if p != 0:
                deps.append(2 * (p - 1))
            for idx in range(self._child_off[p], self._child_off[p + 1]):
                w = self._child_ids[idx]
                if w != v:
                    deps.append(2 * (w - 1) + 1)
        fired = []
        for d in deps:
            self.pending[d] -= 1
            if prio < self.minp[d]:
                self.minp[d] = prio
            if self.pending[d] == 0:
                fired.append((d, self.minp[d] - 1.0))
        return fired


def optimal_tree_priorities(instance):
    return OptimalTreePriorities(instance)


@njit(cache=True)
def _optimal_driver(parent, child_off, child_ids, pending, minp, hp, hk, he,
                    sizes, epoch_of, counter, wprio, wkey, wep, q, policy,
                    st, ranks, flags, fsize, out):
    n = parent.shape[0]
    target = 2 * (n - 1)
    for k in range(target):
        if pending[k] == 0:
            sim_change(hp, hk, he, sizes, epoch_of, counter, k, float(n))
        else:
            sim_change(hp, hk, he, sizes, epoch_of, counter, k, 0.0)
    live = 0
    for k in range(target):
        if pending[k] == 0:
            live += 1
    useful = 0
    wasted = 0
    t = 0
    while useful < target:
        status, key = sim_pop(hp, hk, he, sizes, epoch_of, counter,
                              wprio, wkey, wep, q, policy, st, 0, out)
        fsize[t] = live
        ranks[t] = np.int64(out[1])
        prio = out[0]
        sim_change(hp, hk, he, sizes, epoch_of, counter, key, 0.0)
        if prio > 0.0:
            useful += 1
            live -= 1
            v = key // 2 + 1
            p = parent[v]
            if key & 1:
                for idx in range(child_off[v], child_off[v + 1]):
                    d = 2 * (child_ids[idx] - 1) + 1
                    pending[d] -= 1
                    if prio < minp[d]:
                        minp[d] = prio
                    if pending[d] == 0:
                        sim_change(hp, hk, he, sizes, epoch_of, counter,
                                   d, minp[d] - 1.0)
                        live += 1
            else:
                if p != 0:
                    d = 2 * (p - 1)
                    pending[d] -= 1
                    if prio < minp[d]:
                        minp[d] = prio
                    if pending[d] == 0:
                        sim_change(hp, hk, he, sizes, epoch_of, counter,
                                   d, minp[d] - 1.0)
                        live += 1
                for idx in range(child_off[p], child_off[p + 1]):
                    w = child_ids[idx]
                    if w != v:
                        d = 2 * (w - 1) + 1
                        pending[d] -= 1
                        if prio < minp[d]:
                            minp[d] = prio
                        if pending[d] == 0:
                            sim_change(hp, hk, he, sizes, epoch_of, counter,
                                       d, minp[d] - 1.0)
                            live += 1
            counter[:] = 0
            flags[t] = 1
        else:
            wasted += 1
            flags[t] = 0
        t += 1
    return useful, wasted, t


def run_optimal_game(instance, q=1, adversary="worst_legal", seed=1):
    """Play the two-phase schedule against a q-relaxed scheduler.

    Useful updates are the non-zero-priority ones; the game ends when all
    2(n-1) directed messages have had theirs.
    """
    if q < 1:
        raise ValueError("q must be at least 1")
    n = instance.n
    if n == 1:
        z = np.zeros(0, dtype=np.int64)
        return GameTrace(0, 0, z, z.copy(), z.copy(), 0)
    rule = OptimalTreePriorities(instance)
    target = 2 * (n - 1)
    cap = target * q + q + 8
    ranks = np.zeros(cap, dtype=np.int64)
    flags = np.zeros(cap, dtype=np.int64)
    fsize = np.zeros(cap, dtype=np.int64)
    if callable(adversary):
        sched = SimScheduler(q, adversary)
        for k, prio in rule.initial():
            sched.change_priority(k, prio)
        live = int((rule.pending == 0).sum())
        useful = wasted = t = 0
        while useful < target:
            key = sched.approx_delete_max()
            fsize[t] = live
            ranks[t] = sched.last_rank
            prio = sched.last_priority
            sched.change_priority(key, 0.0)
            if prio > 0.0:
                useful += 1
                live -= 1
                for d, dprio in rule.on_useful(key, prio):
                    sched.change_priority(d, dprio)
                    live += 1
                sched.reset_fairness()
                flags[t] = 1
            else:
                wasted += 1
            t += 1
        return _finish_trace(useful, wasted, t, ranks, flags, fsize)
    policy = POLICY_ENUM[adversary]
    arrays = alloc_sim(rule.key_count, q)
    st = make_states(seed, 1)
    out = np.zeros(3)
    child_off, child_ids = instance.children_csr()
    useful, wasted, t = _optimal_driver(
        instance.parent, child_off, child_ids, rule.pending, rule.minp,
        *arrays, q, policy, st, ranks, flags, fsize, out)
    return _finish_trace(useful, wasted, t, ranks, flags, fsize)


if __name__ == "__main__":
    import time

    inst = build_uniform_tree("full-binary", 10_000)
    for q in (4, 16, 64):
        t0 = time.time()
        tr = run_tree_game(inst, q, "worst_legal")
        bound = (inst.n - 1) + inst.height * q * q
        print(f"uniform n={inst.n} q={q:3d}: total={tr.total} "
              f"useful={tr.useful} bound={bound} maxF={tr.max_frontier} "
              f"[{time.time() - t0:.3f}s]")
    bad = build_bad_instance(10_000)
    prev = None
    for q in (8, 16, 32, 64):
        tr = run_tree_game(bad, q, "frontier_starving")
        ratio = "" if prev is None else f" total(2q)/total(q)={tr.total / prev:.2f}"
        print(f"bad n={bad.n} H={bad.height} q={q:3d}: total={tr.total} "
              f"maxF={tr.max_frontier}{ratio}")
        prev = tr.total
    inst = build_uniform_tree("random-with-max-degree-3", 1000, seed=7)
    exact = run_optimal_game(inst, 1)
    rel = run_optimal_game(inst, 16)
    print(f"two-phase n={inst.n}: exact total={exact.total} "
          f"(target {2 * (inst.n - 1)}), q=16 total={rel.total} "
          f"bound={2 * (inst.n - 1) + 2 * inst.height * 256}")
