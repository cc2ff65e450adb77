"""Engine variants over a shared compiled core.

Four execution styles cover the eight variants:

  run_synchronous      double-buffered full rounds with a worker barrier
  run_priority_engine  one task per directed message (residual,
                       weight_decay, no_lookahead)
  run_splash_engine    one task per node; each pop runs a depth-H splash
                       (splash, smart_splash, random_splash)
  run_bucket           rounds over the top ~10% of nodes by node residual

Scheduler selection: "exact" runs the relaxed machinery with a single
queue (which makes it a strict max-heap), "mq" uses queues_per_worker x
workers queues, and "sim" routes the priority variants through a
single-threaded reference loop driven by the simulated q-relaxed
scheduler. random_splash always uses one queue per worker with
single-sample insert and pop — the naive scheme, deliberately weaker
than best-of-two sampling.

Non-convergence at the wall-time cap is a result (converged=False in the
RunReport), not an exception.
"""
import threading
import time
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from . import _kernels as K
from ._atomics import store_i8
from ._mqcore import alloc_queues
from .errors import CapacityExceeded, Empty, ZeroVector
from .mrf import compute_message, directed_message_ids, message_residual
from .rng import make_states
from .schedulers import SimScheduler, random_legal

VARIANTS = ("synchronous", "residual", "weight_decay", "no_lookahead",
            "splash", "smart_splash", "random_splash", "bucket")
PRIORITY_VARIANTS = ("residual", "weight_decay", "no_lookahead")
SPLASH_VARIANTS = ("splash", "smart_splash", "random_splash")
SCHEDULERS = ("exact", "mq", "sim")

_PRIORITY_CODE = {"residual": K.V_RESIDUAL,
                  "weight_decay": K.V_WEIGHT_DECAY,
                  "no_lookahead": K.V_NO_LOOKAHEAD}

BUCKET_FRACTION = 0.1


@dataclass
class EngineConfig:
    variant: str = "residual"
    scheduler: str = "exact"
    workers: int = 1
    mq_queues_per_worker: int = 4
    splash_h: int = 2
    threshold: float = 1e-5
    check_interval: int = 1000
    time_cap: float = 300.0
    seed: int = 0
    sim_q: int = 1
    adversary: object = "worst_legal"
    snapshot: bool = False  # capture marginals even without convergence

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.scheduler not in SCHEDULERS:
            raise ValueError(f"unknown scheduler {self.scheduler!r}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.splash_h < 1:
            raise ValueError("splash depth must be >= 1")
        if self.threshold <= 0.0:
            raise ValueError("threshold must be positive")
        if self.check_interval < 1:
            raise ValueError("check interval must be >= 1")
        if self.time_cap <= 0.0:
            raise ValueError("time cap must be positive")
        if self.mq_queues_per_worker < 1:
            raise ValueError("queues per worker must be >= 1")
        if self.sim_q < 1:
            raise ValueError("sim relaxation q must be >= 1")
        if self.scheduler == "sim":
            if self.variant not in PRIORITY_VARIANTS:
                raise ValueError(
                    "the simulated scheduler only drives the message-"
                    "priority variants")
            if self.workers != 1:
                raise ValueError("the simulated scheduler is sequential")


@dataclass
class UpdateCounters:
    """Per-message bookkeeping shared by the priority variants."""
    update_count: np.ndarray       # applied updates per message
    accumulated_change: np.ndarray  # summed incoming change (no-lookahead)
    lookahead_value: np.ndarray    # cached next value (flat, message layout)
    lookahead_residual: np.ndarray

    @classmethod
    def allocate(cls, graph):
        return cls(np.zeros(graph.M, dtype=np.int64),
                   np.zeros(graph.M, dtype=np.float64),
                   np.zeros(graph.msg_off[-1], dtype=np.float64),
                   np.zeros(graph.M, dtype=np.float64))


@dataclass
class RunReport:
    converged: bool
    wall_time: float
    total_updates: int
    useful: int
    wasted: int
    skipped: int
    rounds: int
    variant: str
    scheduler: str
    workers: int
    threshold: float
    seed: int
    _marg: np.ndarray = field(default=None, repr=False)
    _marg_off: np.ndarray = field(default=None, repr=False)

    @property
    def stop_reason(self):
        return "converged" if self.converged else "time_cap"

    @property
    def has_marginals(self):
        return self._marg is not None

    def marginal(self, i):
        if self._marg is None:
            raise ValueError("marginals were not captured for this run")
        o = self._marg_off
        return self._marg[o[i]:o[i + 1]]

    def marginals(self):
        return [self.marginal(i) for i in range(len(self._marg_off) - 1)]

    def to_dict(self):
        return {"converged": self.converged, "wall_time": self.wall_time,
                "total_updates": self.total_updates, "useful": self.useful,
                "wasted": self.wasted, "skipped": self.skipped,
                "rounds": self.rounds, "variant": self.variant,
                "scheduler": self.scheduler, "workers": self.workers,
                "threshold": self.threshold, "seed": self.seed}


# ---------------------------------------------------------------------------
# flat graph layout
# ---------------------------------------------------------------------------

@njit(cache=True)
def _fill_mpot(edges, dom, edge_off, edge_pot, mpot_off, mpot):
    for k in range(edges.shape[0]):
        i = edges[k, 0]
        j = edges[k, 1]
        di = dom[i]
        dj = dom[j]
        base = edge_off[k]
        o0 = mpot_off[2 * k]
        o1 = mpot_off[2 * k + 1]
        for a in range(di):
            for b in range(dj):
                v = edge_pot[base + a * dj + b]
                mpot[o0 + a * dj + b] = v
                mpot[o1 + b * di + a] = v


class FlatGraph:
    """Directed-message layout: edge k yields messages 2k (forward) and
    2k+1 (reverse); the reverse of message e is e^1. Each message carries
    its own row-major potential copy oriented source-rows x target-cols."""

    __slots__ = ("n", "M", "dom", "node_off", "node_pot", "src", "dst",
                 "msg_off", "mpot", "mpot_off", "in_off", "in_msgs",
                 "out_off", "out_msgs", "maxdom")

    def __init__(self, mrf):
        n = mrf.node_count
        m = mrf.edge_count
        M = 2 * m
        self.n, self.M = n, M
        self.dom = np.ascontiguousarray(mrf.dom, dtype=np.int64)
        self.node_off = np.ascontiguousarray(mrf.node_off, dtype=np.int64)
        self.node_pot = np.ascontiguousarray(mrf.node_pot, dtype=np.float64)
        src = np.empty(M, dtype=np.int64)
        dst = np.empty(M, dtype=np.int64)
        if m:
            src[0::2] = mrf.edges[:, 0]
            src[1::2] = mrf.edges[:, 1]
            dst[0::2] = mrf.edges[:, 1]
            dst[1::2] = mrf.edges[:, 0]
        self.src, self.dst = src, dst
        self.msg_off = np.zeros(M + 1, dtype=np.int64)
        np.cumsum(self.dom[dst], out=self.msg_off[1:])
        self.mpot_off = np.zeros(M + 1, dtype=np.int64)
        np.cumsum(self.dom[src] * self.dom[dst], out=self.mpot_off[1:])
        self.mpot = np.empty(self.mpot_off[-1], dtype=np.float64)
        if m:
            _fill_mpot(np.ascontiguousarray(mrf.edges, dtype=np.int64),
                       self.dom,
                       np.ascontiguousarray(mrf.edge_off, dtype=np.int64),
                       np.ascontiguousarray(mrf.edge_pot, dtype=np.float64),
                       self.mpot_off, self.mpot)
        self.in_msgs = np.argsort(dst, kind="stable").astype(np.int64)
        self.in_off = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(dst, minlength=n), out=self.in_off[1:])
        self.out_msgs = np.argsort(src, kind="stable").astype(np.int64)
        self.out_off = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=n), out=self.out_off[1:])
        self.maxdom = int(self.dom.max()) if n else 1

    def initial_messages(self):
        """Uniform message values in the flat layout."""
        lengths = np.diff(self.msg_off)
        if self.M == 0:
            return np.zeros(0, dtype=np.float64)
        return np.repeat(1.0 / lengths, lengths)


def flatten(mrf):
    return FlatGraph(mrf)


# ---------------------------------------------------------------------------
# shared run plumbing
# ---------------------------------------------------------------------------

@njit(cache=True)
def _ctrl_store(ctrl, idx, val):
    store_i8(ctrl, idx, val)


def _guarded(fn, args, ctrl, failures):
    try:
        fn(*args)
    except BaseException as exc:  # pragma: no cover - kernel errors go via ctrl
        failures.append(exc)
        _ctrl_store(ctrl, K.STOP, K.FAILED)


def _supervise(threads, ctrl, deadline):
    for th in threads:
        th.start()
    while True:
        alive = [th for th in threads if th.is_alive()]
        if not alive:
            return
        if time.monotonic() >= deadline and int(ctrl[K.STOP]) == K.RUNNING:
            _ctrl_store(ctrl, K.STOP, K.TIMED_OUT)
        alive[0].join(0.02)


def _raise_failure(ctrl, failures):
    if failures:
        raise failures[0]
    if int(ctrl[K.STOP]) == K.FAILED:
        if int(ctrl[K.ERRCODE]) == K.ERR_CAPACITY:
            raise CapacityExceeded("a scheduler queue overflowed")
        raise ZeroVector("a message update produced a zero-mass vector")


def _capture_marginals(fg, msg_val):
    marg = np.empty(fg.node_off[-1], dtype=np.float64)
    err = K.marginals_flat(fg.dom, fg.node_off, fg.node_pot, fg.msg_off,
                           fg.in_off, fg.in_msgs, msg_val, marg, fg.node_off)
    if err:
        raise ZeroVector("a node belief normalized to zero mass")
    return marg


def _report(cfg, converged, wall, total, useful, wasted, skipped, rounds,
            fg=None, msg_val=None):
    marg = off = None
    if (converged or cfg.snapshot) and fg is not None:
        marg = _capture_marginals(fg, msg_val)
        off = fg.node_off
    return RunReport(converged=converged, wall_time=wall,
                     total_updates=total, useful=useful, wasted=wasted,
                     skipped=skipped, rounds=rounds, variant=cfg.variant,
                     scheduler=cfg.scheduler, workers=cfg.workers,
                     threshold=cfg.threshold, seed=cfg.seed,
                     _marg=marg, _marg_off=off)


def _degenerate_report(mrf, fg, cfg, t0):
    # no edges: the uniform state is already a fixed point
    cfg2 = cfg
    wall = time.monotonic() - t0
    marg = _capture_marginals(fg, fg.initial_messages())
    return RunReport(converged=True, wall_time=wall, total_updates=0,
                     useful=0, wasted=0, skipped=0, rounds=0,
                     variant=cfg2.variant, scheduler=cfg2.scheduler,
                     workers=cfg2.workers, threshold=cfg2.threshold,
                     seed=cfg2.seed, _marg=marg, _marg_off=fg.node_off)


def _scratch(p, maxdom):
    return [np.zeros((p, maxdom), dtype=np.float64) for _ in range(5)]


# ---------------------------------------------------------------------------
# synchronous engine
# ---------------------------------------------------------------------------

def run_synchronous(mrf, config):
    t0 = time.monotonic()
    fg = flatten(mrf)
    if fg.M == 0:
        return _degenerate_report(mrf, fg, config, t0)
    p = config.workers
    val_a = fg.initial_messages()
    val_b = np.empty_like(val_a)
    bar = np.zeros(2, dtype=np.int64)
    ctrl = np.zeros(16, dtype=np.int64)
    maxchg = np.zeros(p, dtype=np.float64)
    rounds = np.zeros(2, dtype=np.int64)
    upd_w = np.zeros(p, dtype=np.int64)
    pre = np.zeros((p, fg.maxdom), dtype=np.float64)
    outv = np.zeros((p, fg.maxdom), dtype=np.float64)
    failures = []
    threads = []
    for w in range(p):
        lo = w * fg.M // p
        hi = (w + 1) * fg.M // p
        args = (fg.dom, fg.node_off, fg.node_pot, fg.src, fg.dst, fg.msg_off,
                fg.mpot, fg.mpot_off, fg.in_off, fg.in_msgs,
                val_a, val_b, bar, ctrl, maxchg, rounds, upd_w,
                w, p, lo, hi, config.threshold, pre[w], outv[w])
        threads.append(threading.Thread(
            target=_guarded, args=(K.worker_sync, args, ctrl, failures),
            daemon=True))
    _supervise(threads, ctrl, t0 + config.time_cap)
    _raise_failure(ctrl, failures)
    wall = time.monotonic() - t0
    converged = int(ctrl[K.STOP]) == K.CONVERGED
    final = val_b if int(rounds[1]) == 1 else val_a
    return _report(config, converged, wall, int(upd_w.sum()), 0, 0, 0,
                   int(rounds[0]), fg, final)


# ---------------------------------------------------------------------------
# priority-family engine
# ---------------------------------------------------------------------------

def run_priority_engine(mrf, config):
    if config.variant not in PRIORITY_VARIANTS:
        raise ValueError(f"{config.variant!r} is not a message-priority "
                         "variant")
    if config.scheduler == "sim":
        return _run_reference_priority(mrf, config)
    t0 = time.monotonic()
    fg = flatten(mrf)
    if fg.M == 0:
        return _degenerate_report(mrf, fg, config, t0)
    p = config.workers
    variant = _PRIORITY_CODE[config.variant]
    m = 1 if config.scheduler == "exact" else config.mq_queues_per_worker * p
    hp, hk, he, sizes, locks, cached_top, epoch_of = alloc_queues(m, fg.M)
    st = make_states(config.seed, p + 1)
    msg_val = fg.initial_messages()
    ver = np.zeros(fg.M, dtype=np.int64)
    counters = UpdateCounters.allocate(fg)
    la_stamp = np.zeros(fg.M, dtype=np.int64)
    la_ver = np.zeros(fg.M, dtype=np.int64)
    busy = np.zeros(fg.M, dtype=np.int64)
    ctrl = np.zeros(16, dtype=np.int64)
    upd_w = np.zeros(p, dtype=np.int64)
    useful_w = np.zeros(p, dtype=np.int64)
    wasted_w = np.zeros(p, dtype=np.int64)
    skipped_w = np.zeros(p, dtype=np.int64)
    pre, inbuf, outv, outv2, curbuf = _scratch(p, fg.maxdom)
    popbuf = np.zeros((p, 1), dtype=np.float64)
    err = K.seed_priority(
        fg.dom, fg.node_off, fg.node_pot, fg.src, fg.dst, fg.msg_off,
        fg.mpot, fg.mpot_off, fg.in_off, fg.in_msgs, fg.out_off, fg.out_msgs,
        msg_val, ver, counters.lookahead_value, counters.lookahead_residual,
        la_stamp, la_ver, counters.update_count, counters.accumulated_change,
        hp, hk, he, sizes, locks, cached_top, epoch_of,
        st, p, variant, pre[0], inbuf[0], outv[0], curbuf[0])
    if err == K.ERR_CAPACITY:
        raise CapacityExceeded("a scheduler queue overflowed while seeding")
    if err:
        raise ZeroVector("a message update produced a zero-mass vector")
    failures = []
    threads = []
    for w in range(p):
        args = (fg.dom, fg.node_off, fg.node_pot, fg.src, fg.dst, fg.msg_off,
                fg.mpot, fg.mpot_off, fg.in_off, fg.in_msgs, fg.out_off,
                fg.out_msgs, msg_val, ver, counters.lookahead_value,
                counters.lookahead_residual, la_stamp, la_ver,
                counters.update_count, counters.accumulated_change,
                hp, hk, he, sizes, locks, cached_top, epoch_of,
                busy, ctrl, upd_w, useful_w, wasted_w, skipped_w,
                st, w, p, variant, config.threshold, config.check_interval,
                pre[w], inbuf[w], outv[w], outv2[w], curbuf[w], popbuf[w])
        threads.append(threading.Thread(
            target=_guarded, args=(K.worker_priority, args, ctrl, failures),
            daemon=True))
    _supervise(threads, ctrl, t0 + config.time_cap)
    _raise_failure(ctrl, failures)
    wall = time.monotonic() - t0
    converged = int(ctrl[K.STOP]) == K.CONVERGED
    return _report(config, converged, wall, int(upd_w.sum()),
                   int(useful_w.sum()), int(wasted_w.sum()),
                   int(skipped_w.sum()), 0, fg, msg_val)


def _run_reference_priority(mrf, config):
    """Single-threaded loop driven by the simulated q-relaxed scheduler.

    Mirrors the compiled engine step for step (pop, skip-if-stale is
    vacuous sequentially, apply cached value, zero own priority, refresh
    the affected neighbors) so relaxation effects can be studied with a
    scriptable adversary.
    """
    t0 = time.monotonic()
    fg = flatten(mrf)
    if fg.M == 0:
        return _degenerate_report(mrf, fg, config, t0)
    from .mrf import MessageState
    state = MessageState.uniform(mrf)
    ids = directed_message_ids(mrf)
    key_of = {id_: k for k, id_ in enumerate(ids)}
    adversary = config.adversary
    if adversary == "random_legal":  # name needs a seed to become a policy
        adversary = random_legal(config.seed)
    sched = SimScheduler(config.sim_q, adversary)
    variant = config.variant
    la = {}
    acc = {}
    upd = {}
    tau = config.threshold

    def priority_of(key, res):
        if variant == "weight_decay":
            return res / max(upd.get(key, 0), 1)
        return res

    for key, id_ in enumerate(ids):
        vec = compute_message(mrf, state, id_)
        res = message_residual(state, vec, id_)
        la[key] = (vec, res)
        acc[key] = res
        sched.insert(key, res)

    def full_scan():
        found = False
        for key, id_ in enumerate(ids):
            vec = compute_message(mrf, state, id_)
            res = message_residual(state, vec, id_)
            la[key] = (vec, res)
            if variant == "no_lookahead":
                acc[key] = res
                prio = res
            else:
                prio = priority_of(key, res)
            if prio >= tau:
                found = True
                sched.change_priority(key, prio)
        return found

    deadline = t0 + config.time_cap
    total = useful = wasted = 0
    converged = False
    while True:
        if time.monotonic() >= deadline:
            break
        try:
            key = sched.approx_delete_max()
        except Empty:
            if full_scan():
                continue
            converged = True
            break
        prio = sched.last_priority
        i, j = ids[key]
        if variant == "no_lookahead":
            vec = compute_message(mrf, state, ids[key])
            delta = message_residual(state, vec, ids[key])
        else:
            vec, _ = la[key]
            delta = 0.0
        state.replace(ids[key], vec)
        upd[key] = upd.get(key, 0) + 1
        if variant == "no_lookahead":
            acc[key] = 0.0
        else:
            la[key] = (vec, 0.0)
        sched.change_priority(key, 0.0)
        for k2, _, _ in mrf.neighbors(j):
            if k2 == i:
                continue
            fkey = key_of[(j, k2)]
            if variant == "no_lookahead":
                if delta > 0.0:
                    acc[fkey] = acc.get(fkey, 0.0) + delta
                    sched.change_priority(fkey, acc[fkey])
            else:
                fv = compute_message(mrf, state, (j, k2))
                fr = message_residual(state, fv, (j, k2))
                la[fkey] = (fv, fr)
                sched.change_priority(fkey, priority_of(fkey, fr))
        total += 1
        if prio > 0.0:
            useful += 1
        else:
            wasted += 1
        if total % config.check_interval == 0:
            if sched.max_priority_estimate() < tau:
                if not full_scan():
                    converged = True
                    break
    wall = time.monotonic() - t0
    marg = off = None
    if converged or config.snapshot:
        from .mrf import estimate_marginal
        marg = np.concatenate([estimate_marginal(mrf, state, x)
                               for x in range(mrf.node_count)])
        off = fg.node_off
    return RunReport(converged=converged, wall_time=wall,
                     total_updates=total, useful=useful, wasted=wasted,
                     skipped=0, rounds=0, variant=config.variant,
                     scheduler=config.scheduler, workers=config.workers,
                     threshold=config.threshold, seed=config.seed,
                     _marg=marg, _marg_off=off)


# ---------------------------------------------------------------------------
# splash engines
# ---------------------------------------------------------------------------

def splash(mrf, state, root, depth, smart=False):
    """One splash on a Python message state; returns the update count.

    Builds the breadth-first tree of the given depth around root, then
    updates messages in a leaves-to-root pass followed by a root-to-leaves
    pass. The standard form updates every outgoing message of each node
    visited; the smart form only the messages along tree edges.
    """
    level = {root: 0}
    parent = {root: None}
    order = [root]
    head = 0
    while head < len(order):
        u = order[head]
        head += 1
        if level[u] >= depth:
            continue
        for v, _, _ in mrf.neighbors(u):
            if v not in level:
                level[v] = level[u] + 1
                parent[v] = u
                order.append(v)
    count = 0

    def update(i, j):
        state.replace((i, j), compute_message(mrf, state, (i, j)))

    for u in reversed(order):
        if smart:
            if u != root:
                update(u, parent[u])
                count += 1
        else:
            for v, _, _ in mrf.neighbors(u):
                update(u, v)
                count += 1
    for u in order:
        if smart:
            if u != root:
                update(parent[u], u)
                count += 1
        else:
            for v, _, _ in mrf.neighbors(u):
                update(u, v)
                count += 1
    return count


def run_splash_engine(mrf, config):
    if config.variant not in SPLASH_VARIANTS:
        raise ValueError(f"{config.variant!r} is not a splash variant")
    if config.scheduler == "sim":
        raise ValueError("splash engines take the exact or mq scheduler")
    t0 = time.monotonic()
    fg = flatten(mrf)
    if fg.M == 0:
        return _degenerate_report(mrf, fg, config, t0)
    p = config.workers
    smart = 1 if config.variant == "smart_splash" else 0
    single = 1 if config.variant == "random_splash" else 0
    if config.variant == "random_splash":
        m = p
    elif config.scheduler == "exact":
        m = 1
    else:
        m = config.mq_queues_per_worker * p
    hp, hk, he, sizes, locks, cached_top, epoch_of = alloc_queues(m, fg.n)
    st = make_states(config.seed, p + 1)
    msg_val = fg.initial_messages()
    ver = np.zeros(fg.M, dtype=np.int64)
    la_res = np.zeros(fg.M, dtype=np.float64)
    upd_count = np.zeros(fg.M, dtype=np.int64)
    busy = np.zeros(fg.n, dtype=np.int64)
    ctrl = np.zeros(16, dtype=np.int64)
    upd_w = np.zeros(p, dtype=np.int64)
    useful_w = np.zeros(p, dtype=np.int64)
    wasted_w = np.zeros(p, dtype=np.int64)
    skipped_w = np.zeros(p, dtype=np.int64)
    pre, inbuf, outv, _, curbuf = _scratch(p, fg.maxdom)
    popbuf = np.zeros((p, 1), dtype=np.float64)
    bfs_nodes = np.zeros((p, fg.n), dtype=np.int64)
    up_msg = np.zeros((p, fg.n), dtype=np.int64)
    visit_tag = np.zeros((p, fg.n), dtype=np.int64)
    lev = np.zeros((p, fg.n), dtype=np.int64)
    dirty = np.zeros((p, fg.n), dtype=np.int64)
    dirty_tag = np.zeros((p, fg.n), dtype=np.int64)
    err = K.seed_splash(fg.dom, fg.node_off, fg.node_pot, fg.src, fg.dst,
                        fg.msg_off, fg.mpot, fg.mpot_off, fg.in_off,
                        fg.in_msgs, msg_val, ver, la_res,
                        hp, hk, he, sizes, locks, cached_top, epoch_of,
                        st, p, pre[0], inbuf[0], outv[0], curbuf[0])
    if err == K.ERR_CAPACITY:
        raise CapacityExceeded("a scheduler queue overflowed while seeding")
    if err:
        raise ZeroVector("a message update produced a zero-mass vector")
    failures = []
    threads = []
    for w in range(p):
        args = (fg.dom, fg.node_off, fg.node_pot, fg.src, fg.dst, fg.msg_off,
                fg.mpot, fg.mpot_off, fg.in_off, fg.in_msgs, fg.out_off,
                fg.out_msgs, msg_val, ver, la_res, upd_count,
                hp, hk, he, sizes, locks, cached_top, epoch_of,
                busy, ctrl, upd_w, useful_w, wasted_w, skipped_w,
                st, w, p, config.splash_h, smart, single, config.threshold,
                config.check_interval, bfs_nodes[w], up_msg[w], visit_tag[w],
                lev[w], dirty[w], dirty_tag[w],
                pre[w], inbuf[w], outv[w], curbuf[w], popbuf[w])
        threads.append(threading.Thread(
            target=_guarded, args=(K.worker_splash, args, ctrl, failures),
            daemon=True))
    _supervise(threads, ctrl, t0 + config.time_cap)
    _raise_failure(ctrl, failures)
    wall = time.monotonic() - t0
    converged = int(ctrl[K.STOP]) == K.CONVERGED
    return _report(config, converged, wall, int(upd_w.sum()),
                   int(useful_w.sum()), int(wasted_w.sum()),
                   int(skipped_w.sum()), 0, fg, msg_val)


# ---------------------------------------------------------------------------
# bucket engine
# ---------------------------------------------------------------------------

def run_bucket(mrf, config):
    t0 = time.monotonic()
    fg = flatten(mrf)
    if fg.M == 0:
        return _degenerate_report(mrf, fg, config, t0)
    p = config.workers
    n = fg.n
    msg_val = fg.initial_messages()
    ver = np.zeros(fg.M, dtype=np.int64)
    la_res = np.zeros(fg.M, dtype=np.float64)
    upd_count = np.zeros(fg.M, dtype=np.int64)
    pre, inbuf, outv, _, curbuf = _scratch(p, fg.maxdom)
    dirty = np.zeros((p, n), dtype=np.int64)
    dirty_tag = np.zeros((p, n), dtype=np.int64)
    out_counts = np.zeros(2 * p, dtype=np.int64)
    nodeprio = np.zeros(n, dtype=np.float64)
    idx = np.arange(n, dtype=np.int64)
    bucket = -(-n // int(1 / BUCKET_FRACTION))
    err = K.refresh_all_residuals(fg.dom, fg.node_off, fg.node_pot, fg.src,
                                  fg.dst, fg.msg_off, fg.mpot, fg.mpot_off,
                                  fg.in_off, fg.in_msgs, msg_val, ver,
                                  la_res, pre[0], inbuf[0], outv[0],
                                  curbuf[0])
    if err:
        raise ZeroVector("a message update produced a zero-mass vector")
    deadline = t0 + config.time_cap
    tag = 0
    rounds = 0
    total = 0
    converged = False
    while True:
        K.node_residuals(fg.out_off, fg.out_msgs, la_res, nodeprio)
        if nodeprio.max() < config.threshold:
            # the maintained residuals say quiet; re-verify exactly
            err = K.refresh_all_residuals(
                fg.dom, fg.node_off, fg.node_pot, fg.src, fg.dst, fg.msg_off,
                fg.mpot, fg.mpot_off, fg.in_off, fg.in_msgs, msg_val, ver,
                la_res, pre[0], inbuf[0], outv[0], curbuf[0])
            if err:
                raise ZeroVector(
                    "a message update produced a zero-mass vector")
            K.node_residuals(fg.out_off, fg.out_msgs, la_res, nodeprio)
            if nodeprio.max() < config.threshold:
                converged = True
                break
            continue
        if time.monotonic() >= deadline:
            break
        order = np.lexsort((idx, -nodeprio))
        sel = np.ascontiguousarray(order[:bucket])
        tag += 2
        threads = []
        for w in range(p):
            lo = w * len(sel) // p
            hi = (w + 1) * len(sel) // p
            args = (fg.dom, fg.node_off, fg.node_pot, fg.src, fg.dst,
                    fg.msg_off, fg.mpot, fg.mpot_off, fg.in_off, fg.in_msgs,
                    fg.out_off, fg.out_msgs, msg_val, ver, la_res, upd_count,
                    sel, lo, hi, dirty[w], dirty_tag[w], tag,
                    pre[w], inbuf[w], outv[w], curbuf[w], out_counts, w)
            if p == 1:
                K.bucket_apply(*args)
            else:
                th = threading.Thread(target=K.bucket_apply, args=args,
                                      daemon=True)
                th.start()
                threads.append(th)
        for th in threads:
            th.join()
        if any(out_counts[2 * w + 1] < 0 for w in range(p)):
            raise ZeroVector("a message update produced a zero-mass vector")
        total += int(out_counts[0::2].sum())
        threads = []
        for w in range(p):
            args = (fg.dom, fg.node_off, fg.node_pot, fg.src, fg.dst,
                    fg.msg_off, fg.mpot, fg.mpot_off, fg.in_off, fg.in_msgs,
                    fg.out_off, fg.out_msgs, msg_val, ver, la_res,
                    dirty[w], out_counts[2 * w + 1],
                    pre[w], inbuf[w], outv[w], curbuf[w])
            if p == 1:
                K.bucket_refresh(*args)
            else:
                th = threading.Thread(target=K.bucket_refresh, args=args,
                                      daemon=True)
                th.start()
                threads.append(th)
        for th in threads:
            th.join()
        rounds += 1
    wall = time.monotonic() - t0
    return _report(config, converged, wall, total, 0, 0, 0, rounds,
                   fg, msg_val)


# ---------------------------------------------------------------------------
# dispatch / convergence probe
# ---------------------------------------------------------------------------

def run(mrf, config=None, **overrides):
    """Run the configured engine variant on the model."""
    if config is None:
        config = EngineConfig(**overrides)
    elif overrides:
        raise TypeError("pass either a config object or keyword overrides")
    v = config.variant
    if v == "synchronous":
        return run_synchronous(mrf, config)
    if v in PRIORITY_VARIANTS:
        return run_priority_engine(mrf, config)
    if v in SPLASH_VARIANTS:
        return run_splash_engine(mrf, config)
    return run_bucket(mrf, config)


def check_convergence(source, threshold):
    """True iff the (possibly stale) maximum task priority is < threshold.

    Accepts a scheduler, an array of priorities, or a plain number. A
    positive probe is a candidate only — engines re-verify with a full
    exact residual scan before declaring convergence.
    """
    if hasattr(source, "max_priority_estimate"):
        est = source.max_priority_estimate()
    else:
        arr = np.asarray(source, dtype=np.float64)
        est = float(arr.max()) if arr.ndim else float(arr)
    return est < threshold
