"""Scheduler contract: exact order, Multiqueue replay/statistics, and the
q-relaxed simulator's rank and fairness guarantees."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relaxbp.errors import Empty, IllegalAdversaryChoice
from relaxbp.schedulers import (ExactScheduler, Multiqueue, SimScheduler,
                                multiqueue_rank_stats)

# scripts: ("set", key, priority) upserts, ("pop",) deletes the max
ops_strategy = st.lists(
    st.one_of(
        st.tuples(st.just("set"), st.integers(0, 15),
                  st.floats(0.0, 100.0, allow_nan=False)),
        st.tuples(st.just("pop"))),
    min_size=1, max_size=120)


def drive(sched, script):
    out = []
    for op in script:
        if op[0] == "set":
            sched.change_priority(op[1], op[2])
        else:
            try:
                key = sched.approx_delete_max()
                out.append((key, sched.last_priority))
            except Empty:
                out.append(("EMPTY", None))
    return out


# --- exact scheduler --------------------------------------------------------

def test_exact_pops_strict_max():
    s = ExactScheduler()
    for key, prio in (("a", 3), ("b", 5), ("c", 4)):
        s.insert(key, prio)
    assert s.approx_delete_max() == "b"


def test_exact_change_priority_upserts():
    s = ExactScheduler()
    s.insert("a", 3)
    s.change_priority("a", 9)
    assert s.approx_delete_max() == "a"
    assert s.last_priority == 9
    assert len(s) == 0


def test_exact_tie_breaks_by_smaller_key():
    s = ExactScheduler()
    s.insert("b", 1.0)
    s.insert("a", 1.0)
    assert s.approx_delete_max() == "a"


def test_exact_empty():
    with pytest.raises(Empty):
        ExactScheduler().approx_delete_max()


@given(st.lists(st.tuples(st.integers(0, 30),
                          st.floats(0.0, 100.0, allow_nan=False)),
                min_size=1, max_size=60))
def test_exact_drain_is_non_increasing(items):
    s = ExactScheduler()
    for key, prio in items:
        s.change_priority(key, prio)
    seen = []
    while len(s):
        s.approx_delete_max()
        seen.append(s.last_priority)
    assert seen == sorted(seen, reverse=True)
    assert len(seen) == len({k for k, _ in items})


# --- multiqueue -------------------------------------------------------------

@given(ops_strategy)
@settings(max_examples=60, deadline=None)
def test_single_queue_multiqueue_replays_exact(script):
    a = drive(ExactScheduler(), script)
    b = drive(Multiqueue(1, seed=9, key_capacity=16), script)
    assert a == b


def test_multiqueue_mean_rank_small():
    mean, worst, pops = multiqueue_rank_stats(m=16, key_count=512,
                                              ops=20000, seed=3)
    assert pops > 1000
    assert mean <= 2 * 16


def test_multiqueue_empty_after_drain():
    mq = Multiqueue(4, seed=1, key_capacity=8)
    for k in range(8):
        mq.insert(k, float(k))
    got = {mq.approx_delete_max() for _ in range(8)}
    assert got == set(range(8))
    with pytest.raises(Empty):
        mq.approx_delete_max()


def test_multiqueue_estimate_upper_bounds_live_tasks():
    mq = Multiqueue(4, seed=2, key_capacity=32)
    rng = np.random.default_rng(0)
    live = {}
    for step in range(400):
        if live and rng.random() < 0.4:
            live.pop(mq.approx_delete_max(), None)
        else:
            k = int(rng.integers(0, 32))
            p = float(rng.random())
            live[k] = p
            mq.change_priority(k, p)
        if live:
            # estimate stays an upper bound for whatever remains
            assert mq.max_priority_estimate() >= max(live.values()) - 1e-12


# --- q-relaxed simulator ----------------------------------------------------

def test_window_semantics_worst_legal():
    s = SimScheduler(q=4, adversary_policy="worst_legal")
    for key, prio in enumerate((9.0, 8.0, 7.0, 6.0, 5.0)):
        s.insert(key, prio)
    got = s.approx_delete_max()
    assert s.last_priority == 6.0 and got == 3  # 4th best of five


@given(ops_strategy)
@settings(max_examples=40, deadline=None)
def test_q1_simulator_equals_exact(script):
    a = drive(ExactScheduler(), script)
    b = drive(SimScheduler(1, "worst_legal"), script)
    assert a == b


@pytest.mark.parametrize("policy", ["worst_legal", "second_best",
                                    "best_legal"])
def test_rank_and_fairness_bounds_hold(policy):
    q = 5
    s = SimScheduler(q, policy, record_trace=True)
    rng = np.random.default_rng(11)
    live = 0
    for _ in range(3000):
        if live and rng.random() < 0.45:
            s.approx_delete_max()
            live -= 1
            assert s.last_rank <= q
        else:
            s.change_priority(int(rng.integers(0, 40)), float(rng.random()))
            live = len({k for (_, k, e) in s._heap
                        if -e == s._epoch.get(k)})
        assert all(c <= q for c in s.fairness_counters.values())


def test_global_max_returned_within_q_pops():
    q = 5
    s = SimScheduler(q, "worst_legal")
    for key in range(20):
        s.insert(key, float(key))
    top = 19
    for pops in range(1, q + 1):
        if s.approx_delete_max() == top:
            break
    else:
        pytest.fail(f"max task not returned within {q} pops")


def test_forced_pop_is_flagged():
    q = 3
    s = SimScheduler(q, "worst_legal")
    for key in range(6):
        s.insert(key, float(key))
    forced_seen = False
    for _ in range(6):
        s.approx_delete_max()
        forced_seen = forced_seen or s.last_forced
    assert forced_seen


def test_illegal_policy_choice_aborts():
    s = SimScheduler(2, lambda window, counters: "nonsense")
    s.insert("a", 1.0)
    s.insert("b", 2.0)
    with pytest.raises(IllegalAdversaryChoice):
        s.approx_delete_max()


def test_reset_fairness_clears_budgets():
    s = SimScheduler(4, "worst_legal")
    for key in range(8):
        s.insert(key, float(key))
    s.approx_delete_max()
    assert any(c > 0 for c in s.fairness_counters.values())
    s.reset_fairness()
    assert all(c == 0 for c in s.fairness_counters.values())


def test_rank_trace_dump(tmp_path):
    s = SimScheduler(2, "worst_legal", record_trace=True)
    for key in range(4):
        s.insert(key, float(key))
    s.approx_delete_max()
    s.approx_delete_max()
    p = tmp_path / "trace.csv"
    s.dump_rank_trace(p)
    lines = p.read_text().strip().splitlines()
    assert lines[0] == "op,rank,forced"
    assert len(lines) == 3
