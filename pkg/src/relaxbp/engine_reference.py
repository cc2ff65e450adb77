"""Plain-Python reference for the engine variants, at reading speed.

Single-threaded, dictionary-backed, no caching tricks: every update
recomputes from the live state. The compiled engine must agree with
these semantics on small instances (marginals, update counts, splash
operation order); tests hold the two implementations together.
"""
import numpy as np

from .mrf import (MessageState, compute_message, directed_message_ids,
                  estimate_marginal, message_residual)
from .schedulers import ExactScheduler

__all__ = ["reference_priority_run", "reference_splash",
           "reference_synchronous"]


def reference_synchronous(mrf, threshold, max_rounds=100000):
    """Jacobi-style rounds; returns (marginals, rounds, updates)."""
    state = MessageState.uniform(mrf)
    ids = directed_message_ids(mrf)
    rounds = updates = 0
    for _ in range(max_rounds):
        new = {id_: compute_message(mrf, state, id_) for id_ in ids}
        delta = max((message_residual(state, v, k) for k, v in new.items()),
                    default=0.0)
        for id_ in ids:
            state.replace(id_, new[id_])
        rounds += 1
        updates += len(ids)
        if delta < threshold:
            break
    marg = [estimate_marginal(mrf, state, i) for i in range(mrf.node_count)]
    return marg, rounds, updates


def _initial_priorities(mrf, state):
    return {id_: message_residual(state, compute_message(mrf, state, id_),
                                  id_)
            for id_ in directed_message_ids(mrf)}


def reference_priority_run(mrf, threshold, variant="residual",
                           max_updates=10**7):
    """Sequential exact-scheduler run; returns (marginals, updates, pops).

    `pops` is the ordered list of applied message ids, for replay
    comparison. Variants share the loop and differ only in how a
    message's priority is derived.
    """
    if variant not in ("residual", "weight_decay", "no_lookahead"):
        raise ValueError(f"no reference for variant {variant!r}")
    state = MessageState.uniform(mrf)
    sched = ExactScheduler()
    resid = _initial_priorities(mrf, state)
    count = {id_: 0 for id_ in resid}
    acc = dict(resid)  # no_lookahead: seeded with the true first residual

    def priority(id_):
        if variant == "residual":
            return resid[id_]
        if variant == "weight_decay":
            return resid[id_] / max(count[id_], 1)
        return acc[id_]

    for id_ in sorted(resid):
        sched.insert(id_, priority(id_))
    updates = 0
    pops = []
    while updates < max_updates:
        if sched.max_priority_estimate() < threshold:
            break
        key = sched.approx_delete_max()
        i, j = key
        new = compute_message(mrf, state, key)
        delta = message_residual(state, new, key)
        state.replace(key, new)
        updates += 1
        pops.append(key)
        count[key] += 1
        resid[key] = 0.0
        acc[key] = 0.0
        sched.change_priority(key, priority(key))
        for k, _, _ in mrf.neighbors(j):
            if k == i:
                continue
            dep = (j, k)
            resid[dep] = message_residual(
                state, compute_message(mrf, state, dep), dep)
            acc[dep] += delta
            sched.change_priority(dep, priority(dep))
    marg = [estimate_marginal(mrf, state, i) for i in range(mrf.node_count)]
    return marg, updates, pops


def reference_splash(mrf, state, root, h, smart=False):
    """One splash at `root`, updating `state` in place.

    Returns (updates, ops): ops is the applied (i, j) sequence — the
    upward leaves-to-root pass then the downward root-to-leaves pass.
    """
    order = [root]
    parent = {root: None}
    depth = {root: 0}
    for node in order:  # BFS tree of depth h
        if depth[node] == h:
            continue
        for k, _, _ in mrf.neighbors(node):
            if k not in depth:
                depth[k] = depth[node] + 1
                parent[k] = node
                order.append(k)
    ops = []

    def fire(node, upward):
        for k, _, _ in mrf.neighbors(node):
            if smart:
                down_edge = parent.get(k, None) == node and not upward
                up_edge = parent.get(node, None) == k and upward
                if not (down_edge or up_edge):
                    continue
            ops.append((node, k))
    for node in reversed(order):
        fire(node, upward=True)
    for node in order:
        fire(node, upward=False)
    for op in ops:
        state.replace(op, compute_message(mrf, state, op))
    return len(ops), ops
