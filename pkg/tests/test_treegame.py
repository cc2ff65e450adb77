"""Tree scheduling game: instances, trace invariants, bounds, and the
two-phase optimal priority rule."""
import numpy as np
import pytest

from relaxbp import mrf as M
from relaxbp import treegame as T
from relaxbp.errors import IllegalAdversaryChoice
from relaxbp.schedulers import ExactScheduler


def random_parent_tree(rng, n):
    parent = np.empty(n, dtype=np.int64)
    parent[0] = -1
    for v in range(1, n):
        parent[v] = rng.integers(0, v)
    depth = np.zeros(n, dtype=np.int64)
    for v in range(1, n):
        depth[v] = depth[parent[v]] + 1
    h = max(1, int(depth.max()))
    klass = (h + 1 - depth).astype(np.float64)
    klass[0] = 0.0
    return T.TreeInstance(parent, klass)


# --- instances --------------------------------------------------------------

def test_full_binary_height():
    inst = T.build_uniform_tree("full-binary", 7)
    assert inst.height == 2
    assert inst.n == 7


def test_single_node_game_is_empty():
    inst = T.build_uniform_tree("full-binary", 1)
    trace = T.run_tree_game(inst, q=4)
    assert trace.useful == 0 and trace.total == 0


def test_class_strictly_decreasing_per_level():
    inst = T.build_uniform_tree("full-binary", 1023)
    depth = np.zeros(inst.n, dtype=np.int64)
    for v in range(1, inst.n):
        depth[v] = depth[inst.parent[v]] + 1
    for d in range(1, inst.height):
        this = inst.klass[depth == d]
        deeper = inst.klass[depth == d + 1]
        assert this.min() > deeper.max()


def test_random_shape_respects_degree_cap():
    inst = T.build_uniform_tree("random-with-max-degree-3", 500, seed=4)
    deg = np.zeros(inst.n, dtype=np.int64)
    for v in range(1, inst.n):
        deg[v] += 1
        deg[inst.parent[v]] += 1
    assert deg.max() <= 3


def test_cascade_residuals_decay_with_level():
    # the synthetic classes stand in for real residuals; on the matching
    # MRF (identical symmetric couplings, root-only bias) the cascade's
    # residuals are constant within a level and strictly shrink with depth
    n = 127
    node_factors = [np.array([0.9, 0.1])] + [np.array([0.5, 0.5])] * (n - 1)
    edges = [((v - 1) // 2, v) for v in range(1, n)]
    psi = np.array([[2.0, 1.0], [1.0, 2.0]])
    g = M.MarkovRandomField(node_factors, edges, [psi] * (n - 1))
    state = M.MessageState.uniform(g)
    levels = {}
    for v in range(1, n):
        id_ = ((v - 1) // 2, v)
        new = M.compute_message(g, state, id_)
        levels.setdefault(int(np.floor(np.log2(v + 1))), []).append(
            M.message_residual(state, new, id_))
        state.replace(id_, new)
    per_level = [max(levels[d]) for d in sorted(levels)]
    assert all(a > b for a, b in zip(per_level, per_level[1:]))
    assert all(abs(min(v) - max(v)) < 1e-15 for v in levels.values())


def test_instance_validation():
    with pytest.raises(ValueError):
        T.TreeInstance(np.array([0]), np.array([0.0]))  # root not -1
    with pytest.raises(ValueError):
        T.TreeInstance(np.array([-1, 2, 1]), np.zeros(3))  # child first
    with pytest.raises(ValueError):
        T.TreeInstance(np.array([-1, 0]), np.array([0.0, -1.0]))


# --- bad instance geometry ---------------------------------------------------

def test_bad_instance_arithmetic():
    inst = T.build_bad_instance(16)
    assert inst.n == 34  # main 4, four side paths of 4, leaf fill, root
    assert inst.height <= 2 * 4 + 2
    deg = np.zeros(inst.n, dtype=np.int64)
    for v in range(1, inst.n):
        deg[v] += 1
        deg[inst.parent[v]] += 1
    internal = deg[(deg > 1)]
    assert (internal == 3).all()


def test_bad_instance_side_classes_dominate():
    inst = T.build_bad_instance(100)
    kl = inst.klass[1:]
    main = kl[kl < 1.0]
    side = kl[kl >= 1.0]
    assert len(main) and len(side)
    assert side.min() > main.max()


def test_bad_instance_scales_linearly():
    for n in (64, 256, 1024):
        inst = T.build_bad_instance(n)
        L = int(n ** 0.5)
        assert inst.n == 2 * L * L + 2
        assert inst.height <= 2 * L + 2


# --- game traces -------------------------------------------------------------

def test_exact_play_never_wastes(rng):
    for n in (2, 17, 200):
        inst = random_parent_tree(rng, n)
        trace = T.run_tree_game(inst, q=1)
        assert trace.useful == n - 1
        assert trace.wasted == 0
        assert (trace.ranks == 1).all()


@pytest.mark.parametrize("adversary", ["worst_legal", "second_best",
                                       "random_legal", "best_legal"])
@pytest.mark.parametrize("q", [2, 5])
def test_trace_invariants_any_legal_adversary(adversary, q, rng):
    inst = random_parent_tree(rng, 300)
    trace = T.run_tree_game(inst, q=q, adversary=adversary, seed=3)
    n = inst.n
    assert trace.useful == n - 1
    assert trace.total == trace.useful + trace.wasted
    assert (trace.ranks[:trace.total] <= q).all()
    # a wide-open frontier leaves the adversary no wasted choice
    wide = trace.frontier >= q
    assert trace.flags[wide].all()
    # fairness: between useful pops at most q-1 wasted ones
    run = 0
    for flag in trace.flags:
        if flag:
            run = 0
        else:
            run += 1
            assert run <= q - 1
    assert trace.max_frontier == trace.frontier.max()


def test_python_and_compiled_drivers_agree():
    inst = T.build_uniform_tree("full-binary", 255)
    a = T.run_tree_game(inst, q=4, adversary="worst_legal")
    b = T.run_tree_game(inst, q=4, adversary=lambda w, c: w[-1][0])
    assert a.total == b.total
    assert a.useful == b.useful
    assert np.array_equal(a.flags, b.flags)


def test_uniform_good_case_bound():
    inst = T.build_uniform_tree("full-binary", 1023)
    bound = lambda q: (inst.n - 1) + inst.height * q * q
    for q in (2, 4, 8):
        trace = T.run_tree_game(inst, q=q, adversary="worst_legal")
        assert trace.total <= bound(q)


def test_bad_case_waste_scales_with_q():
    # the frontier is pinned at 4, so waste needs q > 4: below that the
    # whole window is useful work and the adversary has no legal waste
    inst = T.build_bad_instance(1024)
    totals = {q: T.run_tree_game(inst, q=q,
                                 adversary="frontier_starving").total
              for q in (4, 8, 16, 32)}
    assert totals[4] <= 1.05 * (inst.n - 1)
    assert 1.5 <= totals[16] / totals[8] <= 2.5
    assert 1.5 <= totals[32] / totals[16] <= 2.5


def test_illegal_adversary_propagates():
    inst = T.build_uniform_tree("full-binary", 31)
    with pytest.raises(IllegalAdversaryChoice):
        T.run_tree_game(inst, q=3, adversary=lambda w, c: "bogus")


def test_trace_csv_dump(tmp_path):
    inst = T.build_uniform_tree("full-binary", 63)
    trace = T.run_tree_game(inst, q=4, adversary="worst_legal")
    p = tmp_path / "trace.csv"
    trace.dump_csv(p)
    lines = p.read_text().strip().splitlines()
    assert lines[0] == "step,popped_rank,useful_flag,frontier_size"
    assert len(lines) == trace.total + 1


# --- two-phase optimal schedule ----------------------------------------------

def fire_height_oracle(inst):
    """Independent longest-dependency-chain computation per message."""
    n = inst.n
    child_off, child_ids = inst.children_csr()
    children = [list(child_ids[child_off[v]:child_off[v + 1]])
                for v in range(n)]
    h_up = np.zeros(n, dtype=np.int64)
    for v in range(n - 1, 0, -1):
        kids = children[v]
        h_up[v] = 1 + max((h_up[c] for c in kids), default=-1)
    h_down = np.zeros(n, dtype=np.int64)  # indexed by the child v
    order = [v for v in range(1, n)]
    for v in order:  # parents precede children, so this sweep is enough
        p = inst.parent[v]
        parts = [h_up[w] for w in children[p] if w != v]
        if p != 0:
            parts.append(h_down[p])
        h_down[v] = 1 + max(parts, default=-1)
    prio = {}
    for v in range(1, n):
        prio[2 * (v - 1)] = n - h_up[v]
        prio[2 * (v - 1) + 1] = n - h_down[v]
    return prio


def test_leaf_messages_start_at_n(rng):
    inst = random_parent_tree(rng, 40)
    rule = T.OptimalTreePriorities(inst)
    seeds = dict(rule.initial())
    child_off, _ = inst.children_csr()
    for v in range(1, inst.n):
        if child_off[v] == child_off[v + 1]:
            assert seeds[2 * (v - 1)] == inst.n


def test_exact_two_phase_fires_at_oracle_priorities(rng):
    for _ in range(5):
        inst = random_parent_tree(rng, int(rng.integers(2, 60)))
        oracle = fire_height_oracle(inst)
        rule = T.OptimalTreePriorities(inst)
        sched = ExactScheduler()
        for key, prio in rule.initial():
            sched.insert(key, prio)
        useful = 0
        while useful < 2 * (inst.n - 1):
            key = sched.approx_delete_max()
            prio = sched.last_priority
            assert prio > 0
            assert prio == oracle[key]
            useful += 1
            sched.change_priority(key, 0.0)
            for dep, p in rule.on_useful(key, prio):
                sched.change_priority(dep, p)
        assert useful == 2 * (inst.n - 1)


def test_exact_optimal_game_does_minimum_work(rng):
    for n in (2, 33, 400):
        inst = random_parent_tree(rng, n)
        trace = T.run_optimal_game(inst, q=1)
        assert trace.useful == 2 * (n - 1)
        assert trace.wasted == 0


def test_relaxed_optimal_game_bound():
    inst = T.build_uniform_tree("full-binary", 1023)
    for q in (2, 4, 8):
        trace = T.run_optimal_game(inst, q=q, adversary="worst_legal")
        assert trace.useful == 2 * (inst.n - 1)
        assert trace.total <= 2 * (inst.n - 1) + 2 * inst.height * q * q
