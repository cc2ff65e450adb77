"""Compiled worker kernels shared by all engine variants.

Everything here runs without the GIL, so p Python threads each entering a
worker function execute truly interleaved on the shared arrays. The
synchronization toolkit is deliberately small:

  message values   one version counter per message (odd = write in
                   progress); the single writer is the worker holding the
                   message's in-process flag, readers copy-and-recheck.
  lookahead cache  same version scheme but multi-writer: writers race for
                   the odd state with a CAS and the loser spins briefly.
  in-process flag  busy[key] claimed by CAS; a worker that loses the claim
                   drops the popped task (its information is regenerated
                   by whoever caused it, or by the verification scan).
  control word     ctrl[0] stop reason (0 run, 1 converged, 2 time cap,
                   3 error), ctrl[1] verification lock, ctrl[2] quiesce
                   request, ctrl[3] parked-worker count, ctrl[5] error
                   code, ctrl[7] update total at the last failed scan.

Termination is two-phase: when a worker sees the scheduler's priority
estimate below the threshold (or pops Empty), it takes the verification
lock, asks everyone else to park, recomputes every residual exactly,
reseeds anything still at or above the threshold, and only declares
convergence when that full scan finds nothing. A failed scan sets a
cooldown (in update counts) so scans cannot dominate the run.
"""
import numpy as np
from numba import njit

from ._atomics import (add_i8, cas_i8, fadd_f8, load_f8, load_i8,
                       load_i8_sc, store_f8, store_i8)
from ._mqcore import EMPTY, FULL, OK, mq_change, mq_estimate, mq_pop

# ctrl indices
STOP = 0
VLOCK = 1
QUIESCE = 2
PARKED = 3
ERRCODE = 5
RSTOP = 6  # synchronous engine: round-stop flag, written by worker 0 only
LAST_FAIL = 7

# stop reasons
RUNNING = 0
CONVERGED = 1
TIMED_OUT = 2
FAILED = 3

# error codes
ERR_ZERO_SUM = 1
ERR_CAPACITY = 2

# priority variants
V_RESIDUAL = 0
V_WEIGHT_DECAY = 1
V_NO_LOOKAHEAD = 2

NEG_INF = float("-inf")


# ---------------------------------------------------------------------------
# message state access
# ---------------------------------------------------------------------------

@njit(inline="always")
def _read_vec(msg_val, ver, off, length, e, buf):
    while True:
        v0 = load_i8(ver, e)
        if (v0 & 1) == 0:
            for t in range(length):
                buf[t] = msg_val[off + t]
            if load_i8_sc(ver, e) == v0:
                return


@njit(inline="always")
def _write_vec(msg_val, ver, off, length, e, vec):
    # CAS into the odd state: splash workers can race on a shared message,
    # and two blind bumps would leave the counter even mid-write
    while True:
        v = load_i8(ver, e)
        if (v & 1) == 0 and cas_i8(ver, e, v, v + 1) == v:
            break
    for t in range(length):
        msg_val[off + t] = vec[t]
    add_i8(ver, e, 1)


@njit(cache=True)
def _compute(dom, node_off, node_pot, src, dst, msg_off, mpot, mpot_off,
             in_off, in_msgs, msg_val, ver, e, pre, inbuf, outv):
    """Fresh value of message e from the live state. Returns (len, ok)."""
    i = src[e]
    di = dom[i]
    dj = dom[dst[e]]
    npo = node_off[i]
    for a in range(di):
        pre[a] = node_pot[npo + a]
    rev = e ^ 1
    for t in range(in_off[i], in_off[i + 1]):
        g = in_msgs[t]
        if g == rev:
            continue
        _read_vec(msg_val, ver, msg_off[g], di, g, inbuf)
        for a in range(di):
            pre[a] *= inbuf[a]
    po = mpot_off[e]
    s = 0.0
    for b in range(dj):
        acc = 0.0
        for a in range(di):
            acc += pre[a] * mpot[po + a * dj + b]
        outv[b] = acc
        s += acc
    if s <= 0.0 or not np.isfinite(s):
        return dj, False
    inv = 1.0 / s
    for b in range(dj):
        outv[b] *= inv
    return dj, True


@njit(cache=True)
def _compute_plain(dom, node_off, node_pot, src, dst, msg_off, mpot,
                   mpot_off, in_off, in_msgs, buf_val, e, pre, outv):
    """As _compute but reading a private (round-frozen) value buffer."""
    i = src[e]
    di = dom[i]
    dj = dom[dst[e]]
    npo = node_off[i]
    for a in range(di):
        pre[a] = node_pot[npo + a]
    rev = e ^ 1
    for t in range(in_off[i], in_off[i + 1]):
        g = in_msgs[t]
        if g == rev:
            continue
        go = msg_off[g]
        for a in range(di):
            pre[a] *= buf_val[go + a]
    po = mpot_off[e]
    s = 0.0
    for b in range(dj):
        acc = 0.0
        for a in range(di):
            acc += pre[a] * mpot[po + a * dj + b]
        outv[b] = acc
        s += acc
    if s <= 0.0 or not np.isfinite(s):
        return dj, False
    inv = 1.0 / s
    for b in range(dj):
        outv[b] *= inv
    return dj, True


@njit(inline="always")
def _l2_vs_current(msg_val, ver, msg_off, e, vec, length, curbuf):
    _read_vec(msg_val, ver, msg_off[e], length, e, curbuf)
    s = 0.0
    for t in range(length):
        d = vec[t] - curbuf[t]
        s += d * d
    return np.sqrt(s)


# ---------------------------------------------------------------------------
# lookahead cache (multi-writer seqlock)
# ---------------------------------------------------------------------------

@njit(inline="always")
def _la_write(la_val, la_res, la_stamp, la_ver, msg_off, e, vec, length,
              res, stamp):
    while True:
        v = load_i8(la_ver, e)
        if (v & 1) == 0 and cas_i8(la_ver, e, v, v + 1) == v:
            break
    off = msg_off[e]
    for t in range(length):
        la_val[off + t] = vec[t]
    la_res[e] = res
    la_stamp[e] = stamp
    add_i8(la_ver, e, 1)


@njit(inline="always")
def _la_read(la_val, la_res, la_stamp, la_ver, msg_off, e, length, buf):
    while True:
        v0 = load_i8(la_ver, e)
        if (v0 & 1) == 0:
            off = msg_off[e]
            for t in range(length):
                buf[t] = la_val[off + t]
            res = la_res[e]
            stamp = la_stamp[e]
            if load_i8_sc(la_ver, e) == v0:
                return res, stamp


@njit(inline="always")
def _stamp(in_off, in_msgs, upd_count, src, e):
    """Sum of input update counts; read BEFORE the inputs themselves."""
    i = src[e]
    rev = e ^ 1
    s = 0
    for t in range(in_off[i], in_off[i + 1]):
        g = in_msgs[t]
        if g != rev:
            s += load_i8(upd_count, g)
    return s


# ---------------------------------------------------------------------------
# priority-family engine (residual / weight decay / no-lookahead)
# ---------------------------------------------------------------------------

@njit(inline="always")
def _variant_priority(variant, res, m):
    if variant == V_WEIGHT_DECAY:
        return res / max(m, 1)
    return res


@njit(cache=True, nogil=True)
def seed_priority(dom, node_off, node_pot, src, dst, msg_off, mpot,
                  mpot_off, in_off, in_msgs, out_off, out_msgs,
                  msg_val, ver, la_val, la_res, la_stamp, la_ver,
                  upd_count, acc,
                  hp, hk, he, sizes, locks, cached_top, epoch_of,
                  st, lane, variant, pre, inbuf, outv, curbuf):
    M = src.shape[0]
    for e in range(M):
        length, ok = _compute(dom, node_off, node_pot, src, dst, msg_off,
                              mpot, mpot_off, in_off, in_msgs, msg_val, ver,
                              e, pre, inbuf, outv)
        if not ok:
            return ERR_ZERO_SUM
        res = _l2_vs_current(msg_val, ver, msg_off, e, outv, length, curbuf)
        _la_write(la_val, la_res, la_stamp, la_ver, msg_off, e, outv,
                  length, res, 0)
        acc[e] = res
        status = mq_change(hp, hk, he, sizes, locks, cached_top, epoch_of,
                           e, res, st, lane)
        if status == FULL:
            return ERR_CAPACITY
    return 0


@njit(inline="always")
def _park(ctrl):
    add_i8(ctrl, PARKED, 1)
    while load_i8(ctrl, QUIESCE) == 1 and load_i8(ctrl, STOP) == RUNNING:
        pass
    add_i8(ctrl, PARKED, -1)


@njit(cache=True)
def _scan_priority(dom, node_off, node_pot, src, dst, msg_off, mpot,
                   mpot_off, in_off, in_msgs,
                   msg_val, ver, la_val, la_res, la_stamp, la_ver,
                   upd_count, acc,
                   hp, hk, he, sizes, locks, cached_top, epoch_of,
                   st, lane, variant, tau, pre, inbuf, outv, curbuf):
    """Exact residual recompute of every message; reseeds >= tau.

    Runs quiesced. Returns (found_any, err). Also resynchronizes the
    lookahead cache and the no-lookahead accumulators with the truth.
    """
    M = src.shape[0]
    found = 0
    for e in range(M):
        length, ok = _compute(dom, node_off, node_pot, src, dst, msg_off,
                              mpot, mpot_off, in_off, in_msgs, msg_val, ver,
                              e, pre, inbuf, outv)
        if not ok:
            return 0, ERR_ZERO_SUM
        res = _l2_vs_current(msg_val, ver, msg_off, e, outv, length, curbuf)
        stamp = _stamp(in_off, in_msgs, upd_count, src, e)
        if variant == V_NO_LOOKAHEAD:
            store_f8(acc, e, res)
            prio = res
        else:
            _la_write(la_val, la_res, la_stamp, la_ver, msg_off, e, outv,
                      length, res, stamp)
            prio = _variant_priority(variant, res, load_i8(upd_count, e))
        if prio >= tau:
            found = 1
            status = mq_change(hp, hk, he, sizes, locks, cached_top,
                               epoch_of, e, prio, st, lane)
            if status == FULL:
                return found, ERR_CAPACITY
    return found, 0


@njit(cache=True)
def _try_verify(dom, node_off, node_pot, src, dst, msg_off, mpot, mpot_off,
                in_off, in_msgs,
                msg_val, ver, la_val, la_res, la_stamp, la_ver,
                upd_count, acc,
                hp, hk, he, sizes, locks, cached_top, epoch_of,
                ctrl, upd_w, st, lane, p, variant, tau, cooldown,
                pre, inbuf, outv, curbuf):
    """Candidate termination. Returns 1 when the run should stop."""
    if load_i8(ctrl, STOP) != RUNNING:
        return 1
    if cas_i8(ctrl, VLOCK, 0, 1) != 0:
        return 0
    est = mq_estimate(cached_top)
    if est >= tau:
        store_i8(ctrl, VLOCK, 0)
        return 0
    tot = 0
    for x in range(p):
        tot += upd_w[x]
    last = load_i8(ctrl, LAST_FAIL)
    if est > NEG_INF and last > 0 and tot - last < cooldown:
        store_i8(ctrl, VLOCK, 0)
        return 0
    store_i8(ctrl, QUIESCE, 1)
    while load_i8(ctrl, PARKED) != p - 1:
        if load_i8(ctrl, STOP) != RUNNING:
            store_i8(ctrl, QUIESCE, 0)
            store_i8(ctrl, VLOCK, 0)
            return 1
    found, err = _scan_priority(
        dom, node_off, node_pot, src, dst, msg_off, mpot, mpot_off,
        in_off, in_msgs, msg_val, ver, la_val, la_res, la_stamp, la_ver,
        upd_count, acc, hp, hk, he, sizes, locks, cached_top, epoch_of,
        st, lane, variant, tau, pre, inbuf, outv, curbuf)
    stop = 0
    if err != 0:
        store_i8(ctrl, ERRCODE, err)
        store_i8(ctrl, STOP, FAILED)
        stop = 1
    elif found == 0:
        store_i8(ctrl, STOP, CONVERGED)
        stop = 1
    else:
        store_i8(ctrl, LAST_FAIL, tot)
    store_i8(ctrl, QUIESCE, 0)
    store_i8(ctrl, VLOCK, 0)
    return stop


@njit(cache=True, nogil=True)
def worker_priority(dom, node_off, node_pot, src, dst, msg_off, mpot,
                    mpot_off, in_off, in_msgs, out_off, out_msgs,
                    msg_val, ver, la_val, la_res, la_stamp, la_ver,
                    upd_count, acc,
                    hp, hk, he, sizes, locks, cached_top, epoch_of,
                    busy, ctrl, upd_w, useful_w, wasted_w, skipped_w,
                    st, w, p, variant, tau, check_interval,
                    pre, inbuf, outv, outv2, curbuf, popbuf):
    cooldown = 4 * check_interval
    since_check = 0
    while True:
        if load_i8(ctrl, STOP) != RUNNING:
            return
        if load_i8(ctrl, QUIESCE) == 1:
            _park(ctrl)
            continue
        status, key = mq_pop(hp, hk, he, sizes, locks, cached_top, epoch_of,
                             st, w, 0, popbuf)
        if status == EMPTY:
            if _try_verify(dom, node_off, node_pot, src, dst, msg_off, mpot,
                           mpot_off, in_off, in_msgs, msg_val, ver, la_val,
                           la_res, la_stamp, la_ver, upd_count, acc,
                           hp, hk, he, sizes, locks, cached_top, epoch_of,
                           ctrl, upd_w, st, w, p, variant, tau, cooldown,
                           pre, inbuf, outv, curbuf):
                return
            continue
        prio = popbuf[0]
        if cas_i8(busy, key, 0, 1) != 0:
            skipped_w[w] += 1
            continue
        # --- apply the update ------------------------------------------
        length = msg_off[key + 1] - msg_off[key]
        if variant == V_NO_LOOKAHEAD:
            length, ok = _compute(dom, node_off, node_pot, src, dst,
                                  msg_off, mpot, mpot_off, in_off, in_msgs,
                                  msg_val, ver, key, pre, inbuf, outv)
        else:
            s_now = _stamp(in_off, in_msgs, upd_count, src, key)
            la_r, la_s = _la_read(la_val, la_res, la_stamp, la_ver,
                                  msg_off, key, length, outv)
            ok = True
            if la_s != s_now:
                length, ok = _compute(dom, node_off, node_pot, src, dst,
                                      msg_off, mpot, mpot_off, in_off,
                                      in_msgs, msg_val, ver, key, pre,
                                      inbuf, outv)
        if not ok:
            store_i8(ctrl, ERRCODE, ERR_ZERO_SUM)
            store_i8(ctrl, STOP, FAILED)
            store_i8(busy, key, 0)
            return
        delta = 0.0
        if variant == V_NO_LOOKAHEAD:
            delta = _l2_vs_current(msg_val, ver, msg_off, key, outv, length,
                                   curbuf)
        _write_vec(msg_val, ver, msg_off[key], length, key, outv)
        add_i8(upd_count, key, 1)
        # own priority drops to zero: the just-written value has residual 0
        if variant == V_NO_LOOKAHEAD:
            store_f8(acc, key, 0.0)
        else:
            s_own = _stamp(in_off, in_msgs, upd_count, src, key)
            _la_write(la_val, la_res, la_stamp, la_ver, msg_off, key, outv,
                      length, 0.0, s_own)
        if mq_change(hp, hk, he, sizes, locks, cached_top, epoch_of,
                     key, 0.0, st, w) == FULL:
            store_i8(ctrl, ERRCODE, ERR_CAPACITY)
            store_i8(ctrl, STOP, FAILED)
            store_i8(busy, key, 0)
            return
        # --- refresh the affected outgoing messages of the target ------
        j = dst[key]
        rev = key ^ 1
        for t in range(out_off[j], out_off[j + 1]):
            f = out_msgs[t]
            if f == rev:
                continue
            if variant == V_NO_LOOKAHEAD:
                if delta > 0.0:
                    newacc = fadd_f8(acc, f, delta) + delta
                    if mq_change(hp, hk, he, sizes, locks, cached_top,
                                 epoch_of, f, newacc, st, w) == FULL:
                        store_i8(ctrl, ERRCODE, ERR_CAPACITY)
                        store_i8(ctrl, STOP, FAILED)
                        store_i8(busy, key, 0)
                        return
            else:
                s_f = _stamp(in_off, in_msgs, upd_count, src, f)
                lf, okf = _compute(dom, node_off, node_pot, src, dst,
                                   msg_off, mpot, mpot_off, in_off, in_msgs,
                                   msg_val, ver, f, pre, inbuf, outv2)
                if not okf:
                    store_i8(ctrl, ERRCODE, ERR_ZERO_SUM)
                    store_i8(ctrl, STOP, FAILED)
                    store_i8(busy, key, 0)
                    return
                resf = _l2_vs_current(msg_val, ver, msg_off, f, outv2, lf,
                                      curbuf)
                _la_write(la_val, la_res, la_stamp, la_ver, msg_off, f,
                          outv2, lf, resf, s_f)
                pf = _variant_priority(variant, resf, load_i8(upd_count, f))
                if mq_change(hp, hk, he, sizes, locks, cached_top, epoch_of,
                             f, pf, st, w) == FULL:
                    store_i8(ctrl, ERRCODE, ERR_CAPACITY)
                    store_i8(ctrl, STOP, FAILED)
                    store_i8(busy, key, 0)
                    return
        store_i8(busy, key, 0)
        upd_w[w] += 1
        if prio > 0.0:
            useful_w[w] += 1
        else:
            wasted_w[w] += 1
        since_check += 1
        if since_check >= check_interval:
            since_check = 0
            if mq_estimate(cached_top) < tau:
                if _try_verify(dom, node_off, node_pot, src, dst, msg_off,
                               mpot, mpot_off, in_off, in_msgs, msg_val,
                               ver, la_val, la_res, la_stamp, la_ver,
                               upd_count, acc, hp, hk, he, sizes, locks,
                               cached_top, epoch_of, ctrl, upd_w, st, w, p,
                               variant, tau, cooldown, pre, inbuf, outv,
                               curbuf):
                    return


# ---------------------------------------------------------------------------
# synchronous engine
# ---------------------------------------------------------------------------

@njit(inline="always")
def _barrier(bar, p, sense):
    ns = 1 - sense
    if add_i8(bar, 0, 1) == p - 1:
        store_i8(bar, 0, 0)
        store_i8(bar, 1, ns)
    else:
        while load_i8(bar, 1) != ns:
            pass
    return ns


@njit(cache=True, nogil=True)
def worker_sync(dom, node_off, node_pot, src, dst, msg_off, mpot, mpot_off,
                in_off, in_msgs,
                val_a, val_b, bar, ctrl, maxchg, rounds, upd_w,
                w, p, lo, hi, tau, pre, outv):
    """Double-buffered rounds with an in-kernel barrier; worker 0 reduces."""
    sense = 0
    parity = 0
    while True:
        if parity == 0:
            cur = val_a
            nxt = val_b
        else:
            cur = val_b
            nxt = val_a
        local_max = 0.0
        err = 0
        for e in range(lo, hi):
            length, ok = _compute_plain(dom, node_off, node_pot, src, dst,
                                        msg_off, mpot, mpot_off, in_off,
                                        in_msgs, cur, e, pre, outv)
            if not ok:
                err = ERR_ZERO_SUM
                break
            off = msg_off[e]
            s = 0.0
            for t in range(length):
                d = outv[t] - cur[off + t]
                s += d * d
                nxt[off + t] = outv[t]
            c = np.sqrt(s)
            if c > local_max:
                local_max = c
        maxchg[w] = local_max
        upd_w[w] += hi - lo
        if err != 0:
            store_i8(ctrl, ERRCODE, err)
            store_i8(ctrl, STOP, FAILED)
        sense = _barrier(bar, p, sense)
        # a lone decision point keeps the exit in lockstep: an async stop
        # request lands for everyone on the same round boundary
        if w == 0:
            g = 0.0
            for x in range(p):
                if maxchg[x] > g:
                    g = maxchg[x]
            rounds[0] += 1
            halt = 0
            if load_i8(ctrl, STOP) != RUNNING:
                halt = 1
            elif g < tau:
                store_i8(ctrl, STOP, CONVERGED)
                halt = 1
            store_i8(ctrl, RSTOP, halt)
        sense = _barrier(bar, p, sense)
        if load_i8(ctrl, RSTOP) == 1:
            rounds[1] = parity ^ 1  # which buffer holds the final state
            return
        parity ^= 1


# ---------------------------------------------------------------------------
# splash engines (standard / smart / random)
# ---------------------------------------------------------------------------

@njit(cache=True)
def _update_message(dom, node_off, node_pot, src, dst, msg_off, mpot,
                    mpot_off, in_off, in_msgs, msg_val, ver, la_res,
                    upd_count, e, pre, inbuf, outv, curbuf,
                    dirty, dirty_tag, tag, ndirty):
    """Recompute+apply e; res drops to 0; mark the target dirty on change.

    Returns (new ndirty, ok).
    """
    length, ok = _compute(dom, node_off, node_pot, src, dst, msg_off, mpot,
                          mpot_off, in_off, in_msgs, msg_val, ver, e, pre,
                          inbuf, outv)
    if not ok:
        return ndirty, False
    delta = _l2_vs_current(msg_val, ver, msg_off, e, outv, length, curbuf)
    _write_vec(msg_val, ver, msg_off[e], length, e, outv)
    add_i8(upd_count, e, 1)
    store_f8(la_res, e, 0.0)
    if delta > 0.0:
        j = dst[e]
        if dirty_tag[j] != tag:
            dirty_tag[j] = tag
            dirty[ndirty] = j
            ndirty += 1
    return ndirty, True


@njit(cache=True)
def _splash(dom, node_off, node_pot, src, dst, msg_off, mpot, mpot_off,
            in_off, in_msgs, out_off, out_msgs,
            msg_val, ver, la_res, upd_count,
            hp, hk, he, sizes, locks, cached_top, epoch_of,
            root, depth, smart, st, w, tag,
            bfs_nodes, up_msg, visit_tag, level, dirty, dirty_tag,
            pre, inbuf, outv, curbuf):
    """One splash: BFS tree of the given depth, leaf-to-root pass, then
    root-to-leaf pass; refreshes residuals around every changed message
    and reprioritises the affected nodes. Returns (updates, ok)."""
    # breadth-first tree
    cnt = 1
    bfs_nodes[0] = root
    visit_tag[root] = tag
    level[root] = 0
    up_msg[root] = -1
    head = 0
    while head < cnt:
        u = bfs_nodes[head]
        head += 1
        if level[u] >= depth:
            continue
        for t in range(out_off[u], out_off[u + 1]):
            f = out_msgs[t]
            v = dst[f]
            if visit_tag[v] != tag:
                visit_tag[v] = tag
                level[v] = level[u] + 1
                up_msg[v] = f ^ 1  # message v -> u
                bfs_nodes[cnt] = v
                cnt += 1
    updates = 0
    ndirty = 0
    ok = True
    # leaves to root
    for idx in range(cnt - 1, -1, -1):
        u = bfs_nodes[idx]
        if smart == 1:
            if u != root:
                ndirty, ok = _update_message(
                    dom, node_off, node_pot, src, dst, msg_off, mpot,
                    mpot_off, in_off, in_msgs, msg_val, ver, la_res,
                    upd_count, up_msg[u], pre, inbuf, outv, curbuf,
                    dirty, dirty_tag, tag, ndirty)
                if not ok:
                    return updates, False
                updates += 1
        else:
            for t in range(out_off[u], out_off[u + 1]):
                ndirty, ok = _update_message(
                    dom, node_off, node_pot, src, dst, msg_off, mpot,
                    mpot_off, in_off, in_msgs, msg_val, ver, la_res,
                    upd_count, out_msgs[t], pre, inbuf, outv, curbuf,
                    dirty, dirty_tag, tag, ndirty)
                if not ok:
                    return updates, False
                updates += 1
    # root to leaves
    for idx in range(cnt):
        u = bfs_nodes[idx]
        if smart == 1:
            if u != root:
                ndirty, ok = _update_message(
                    dom, node_off, node_pot, src, dst, msg_off, mpot,
                    mpot_off, in_off, in_msgs, msg_val, ver, la_res,
                    upd_count, up_msg[u] ^ 1, pre, inbuf, outv, curbuf,
                    dirty, dirty_tag, tag, ndirty)
                if not ok:
                    return updates, False
                updates += 1
        else:
            for t in range(out_off[u], out_off[u + 1]):
                ndirty, ok = _update_message(
                    dom, node_off, node_pot, src, dst, msg_off, mpot,
                    mpot_off, in_off, in_msgs, msg_val, ver, la_res,
                    upd_count, out_msgs[t], pre, inbuf, outv, curbuf,
                    dirty, dirty_tag, tag, ndirty)
                if not ok:
                    return updates, False
                updates += 1
    # refresh residuals of everything leaving a node whose inputs changed,
    # then reprioritise every node whose incoming residuals moved
    atag = tag + 1  # affected-set marker (tags advance by 2 per splash)
    na = 0
    if dirty_tag[root] != atag:
        dirty_tag[root] = atag
        bfs_nodes[na] = root  # reuse as the affected list
        na += 1
    for d in range(ndirty):
        u = dirty[d]
        for t in range(out_off[u], out_off[u + 1]):
            f = out_msgs[t]
            lf, okf = _compute(dom, node_off, node_pot, src, dst, msg_off,
                               mpot, mpot_off, in_off, in_msgs, msg_val,
                               ver, f, pre, inbuf, outv)
            if not okf:
                return updates, False
            resf = _l2_vs_current(msg_val, ver, msg_off, f, outv, lf, curbuf)
            store_f8(la_res, f, resf)
            x = dst[f]
            if dirty_tag[x] != atag:
                dirty_tag[x] = atag
                bfs_nodes[na] = x
                na += 1
        if dirty_tag[u] != atag:
            dirty_tag[u] = atag
            bfs_nodes[na] = u
            na += 1
    for a in range(na):
        x = bfs_nodes[a]
        best = 0.0
        for t in range(in_off[x], in_off[x + 1]):
            r = load_f8(la_res, in_msgs[t])
            if r > best:
                best = r
        if mq_change(hp, hk, he, sizes, locks, cached_top, epoch_of,
                     x, best, st, w) == FULL:
            return updates, False
    return updates, True


@njit(cache=True)
def _scan_splash(dom, node_off, node_pot, src, dst, msg_off, mpot, mpot_off,
                 in_off, in_msgs, msg_val, ver, la_res,
                 hp, hk, he, sizes, locks, cached_top, epoch_of,
                 st, lane, tau, pre, inbuf, outv, curbuf):
    """Exact node-residual recompute; reseeds nodes >= tau."""
    M = src.shape[0]
    for e in range(M):
        length, ok = _compute(dom, node_off, node_pot, src, dst, msg_off,
                              mpot, mpot_off, in_off, in_msgs, msg_val, ver,
                              e, pre, inbuf, outv)
        if not ok:
            return 0, ERR_ZERO_SUM
        res = _l2_vs_current(msg_val, ver, msg_off, e, outv, length, curbuf)
        store_f8(la_res, e, res)
    n = dom.shape[0]
    found = 0
    for x in range(n):
        best = 0.0
        for t in range(in_off[x], in_off[x + 1]):
            r = la_res[in_msgs[t]]
            if r > best:
                best = r
        if best >= tau:
            found = 1
            if mq_change(hp, hk, he, sizes, locks, cached_top, epoch_of,
                         x, best, st, lane) == FULL:
                return found, ERR_CAPACITY
    return found, 0


@njit(cache=True)
def _try_verify_splash(dom, node_off, node_pot, src, dst, msg_off, mpot,
                       mpot_off, in_off, in_msgs, msg_val, ver, la_res,
                       hp, hk, he, sizes, locks, cached_top, epoch_of,
                       ctrl, upd_w, st, lane, p, tau, cooldown,
                       pre, inbuf, outv, curbuf):
    if load_i8(ctrl, STOP) != RUNNING:
        return 1
    if cas_i8(ctrl, VLOCK, 0, 1) != 0:
        return 0
    est = mq_estimate(cached_top)
    if est >= tau:
        store_i8(ctrl, VLOCK, 0)
        return 0
    tot = 0
    for x in range(p):
        tot += upd_w[x]
    last = load_i8(ctrl, LAST_FAIL)
    if est > NEG_INF and last > 0 and tot - last < cooldown:
        store_i8(ctrl, VLOCK, 0)
        return 0
    store_i8(ctrl, QUIESCE, 1)
    while load_i8(ctrl, PARKED) != p - 1:
        if load_i8(ctrl, STOP) != RUNNING:
            store_i8(ctrl, QUIESCE, 0)
            store_i8(ctrl, VLOCK, 0)
            return 1
    found, err = _scan_splash(dom, node_off, node_pot, src, dst, msg_off,
                              mpot, mpot_off, in_off, in_msgs, msg_val, ver,
                              la_res, hp, hk, he, sizes, locks, cached_top,
                              epoch_of, st, lane, tau, pre, inbuf, outv,
                              curbuf)
    stop = 0
    if err != 0:
        store_i8(ctrl, ERRCODE, err)
        store_i8(ctrl, STOP, FAILED)
        stop = 1
    elif found == 0:
        store_i8(ctrl, STOP, CONVERGED)
        stop = 1
    else:
        store_i8(ctrl, LAST_FAIL, tot)
    store_i8(ctrl, QUIESCE, 0)
    store_i8(ctrl, VLOCK, 0)
    return stop


@njit(cache=True, nogil=True)
def worker_splash(dom, node_off, node_pot, src, dst, msg_off, mpot,
                  mpot_off, in_off, in_msgs, out_off, out_msgs,
                  msg_val, ver, la_res, upd_count,
                  hp, hk, he, sizes, locks, cached_top, epoch_of,
                  busy, ctrl, upd_w, useful_w, wasted_w, skipped_w,
                  st, w, p, depth, smart, single, tau, check_interval,
                  bfs_nodes, up_msg, visit_tag, level, dirty, dirty_tag,
                  pre, inbuf, outv, curbuf, popbuf):
    cooldown = 4 * check_interval
    since_check = 0
    pops = 0
    tag = 2  # per-worker visit tags advance by 2 per splash
    while True:
        if load_i8(ctrl, STOP) != RUNNING:
            return
        if load_i8(ctrl, QUIESCE) == 1:
            _park(ctrl)
            continue
        status, key = mq_pop(hp, hk, he, sizes, locks, cached_top, epoch_of,
                             st, w, single, popbuf)
        if status == EMPTY:
            if _try_verify_splash(dom, node_off, node_pot, src, dst,
                                  msg_off, mpot, mpot_off, in_off, in_msgs,
                                  msg_val, ver, la_res, hp, hk, he, sizes,
                                  locks, cached_top, epoch_of, ctrl, upd_w,
                                  st, w, p, tau, cooldown, pre, inbuf, outv,
                                  curbuf):
                return
            continue
        prio = popbuf[0]
        if cas_i8(busy, key, 0, 1) != 0:
            skipped_w[w] += 1
            continue
        pops += 1
        tag += 2
        updates, ok = _splash(dom, node_off, node_pot, src, dst, msg_off,
                              mpot, mpot_off, in_off, in_msgs, out_off,
                              out_msgs, msg_val, ver, la_res, upd_count,
                              hp, hk, he, sizes, locks, cached_top,
                              epoch_of, key, depth, smart, st, w, tag,
                              bfs_nodes, up_msg, visit_tag, level, dirty,
                              dirty_tag, pre, inbuf, outv, curbuf)
        store_i8(busy, key, 0)
        upd_w[w] += updates
        if not ok:
            if load_i8(ctrl, ERRCODE) == 0:
                store_i8(ctrl, ERRCODE, ERR_ZERO_SUM)
            store_i8(ctrl, STOP, FAILED)
            return
        if prio > 0.0:
            useful_w[w] += 1
        else:
            wasted_w[w] += 1
        since_check += updates
        if since_check >= check_interval:
            since_check = 0
            if mq_estimate(cached_top) < tau:
                if _try_verify_splash(dom, node_off, node_pot, src, dst,
                                      msg_off, mpot, mpot_off, in_off,
                                      in_msgs, msg_val, ver, la_res, hp, hk,
                                      he, sizes, locks, cached_top,
                                      epoch_of, ctrl, upd_w, st, w, p, tau,
                                      cooldown, pre, inbuf, outv, curbuf):
                    return


@njit(cache=True, nogil=True)
def seed_splash(dom, node_off, node_pot, src, dst, msg_off, mpot, mpot_off,
                in_off, in_msgs, msg_val, ver, la_res,
                hp, hk, he, sizes, locks, cached_top, epoch_of,
                st, lane, pre, inbuf, outv, curbuf):
    """Initial residuals and node priorities."""
    M = src.shape[0]
    for e in range(M):
        length, ok = _compute(dom, node_off, node_pot, src, dst, msg_off,
                              mpot, mpot_off, in_off, in_msgs, msg_val, ver,
                              e, pre, inbuf, outv)
        if not ok:
            return ERR_ZERO_SUM
        la_res[e] = _l2_vs_current(msg_val, ver, msg_off, e, outv, length,
                                   curbuf)
    n = dom.shape[0]
    for x in range(n):
        best = 0.0
        for t in range(in_off[x], in_off[x + 1]):
            r = la_res[in_msgs[t]]
            if r > best:
                best = r
        if mq_change(hp, hk, he, sizes, locks, cached_top, epoch_of,
                     x, best, st, lane) == FULL:
            return ERR_CAPACITY
    return 0


# ---------------------------------------------------------------------------
# bucket engine helpers
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def bucket_apply(dom, node_off, node_pot, src, dst, msg_off, mpot, mpot_off,
                 in_off, in_msgs, out_off, out_msgs, msg_val, ver, la_res,
                 upd_count, sel, lo, hi, dirty, dirty_tag, tag,
                 pre, inbuf, outv, curbuf, out_counts, w):
    """Update all outgoing messages of sel[lo:hi]; collect changed targets."""
    updates = 0
    ndirty = 0
    for s in range(lo, hi):
        u = sel[s]
        for t in range(out_off[u], out_off[u + 1]):
            nd, ok = _update_message(dom, node_off, node_pot, src, dst,
                                     msg_off, mpot, mpot_off, in_off,
                                     in_msgs, msg_val, ver, la_res,
                                     upd_count, out_msgs[t], pre, inbuf,
                                     outv, curbuf, dirty, dirty_tag, tag,
                                     ndirty)
            ndirty = nd
            if not ok:
                out_counts[2 * w] = updates
                out_counts[2 * w + 1] = -1
                return
            updates += 1
    out_counts[2 * w] = updates
    out_counts[2 * w + 1] = ndirty


@njit(cache=True, nogil=True)
def bucket_refresh(dom, node_off, node_pot, src, dst, msg_off, mpot,
                   mpot_off, in_off, in_msgs, out_off, out_msgs, msg_val,
                   ver, la_res, dirty, ndirty, pre, inbuf, outv, curbuf):
    """Recompute residuals of messages leaving the changed nodes."""
    for d in range(ndirty):
        u = dirty[d]
        for t in range(out_off[u], out_off[u + 1]):
            f = out_msgs[t]
            lf, ok = _compute(dom, node_off, node_pot, src, dst, msg_off,
                              mpot, mpot_off, in_off, in_msgs, msg_val, ver,
                              f, pre, inbuf, outv)
            if not ok:
                return ERR_ZERO_SUM
            la_res[f] = _l2_vs_current(msg_val, ver, msg_off, f, outv, lf,
                                       curbuf)
    return 0


@njit(cache=True)
def node_residuals(off, msgs, la_res, nodeprio):
    """Per-node max residual over a message CSR (incoming or outgoing).

    The bucket engine ranks by the outgoing direction: updating a node
    rewrites exactly its outgoing messages, so that is the residual mass
    its selection can consume. Globally the two directions share the same
    maximum (every message leaves one node and enters another)."""
    n = nodeprio.shape[0]
    for x in range(n):
        best = 0.0
        for t in range(off[x], off[x + 1]):
            r = la_res[msgs[t]]
            if r > best:
                best = r
        nodeprio[x] = best


@njit(cache=True)
def refresh_all_residuals(dom, node_off, node_pot, src, dst, msg_off, mpot,
                          mpot_off, in_off, in_msgs, msg_val, ver, la_res,
                          pre, inbuf, outv, curbuf):
    """Exact residual recompute of every message (bucket verification)."""
    M = src.shape[0]
    for e in range(M):
        length, ok = _compute(dom, node_off, node_pot, src, dst, msg_off,
                              mpot, mpot_off, in_off, in_msgs, msg_val, ver,
                              e, pre, inbuf, outv)
        if not ok:
            return ERR_ZERO_SUM
        la_res[e] = _l2_vs_current(msg_val, ver, msg_off, e, outv, length,
                                   curbuf)
    return 0


# ---------------------------------------------------------------------------
# marginals
# ---------------------------------------------------------------------------

@njit(cache=True)
def marginals_flat(dom, node_off, node_pot, msg_off, in_off, in_msgs,
                   msg_val, marg, marg_off):
    """Normalized node beliefs from the current messages."""
    n = dom.shape[0]
    for x in range(n):
        d = dom[x]
        mo = marg_off[x]
        npo = node_off[x]
        for a in range(d):
            marg[mo + a] = node_pot[npo + a]
        for t in range(in_off[x], in_off[x + 1]):
            g = in_msgs[t]
            go = msg_off[g]
            for a in range(d):
                marg[mo + a] *= msg_val[go + a]
        s = 0.0
        for a in range(d):
            s += marg[mo + a]
        if s <= 0.0:
            return ERR_ZERO_SUM
        for a in range(d):
            marg[mo + a] /= s
    return 0
