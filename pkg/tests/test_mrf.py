"""Core MRF container, message math, oracles, and the text format."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relaxbp import mrf as M
from relaxbp.errors import FormatError, TooLarge, ZeroVector

positive_vec = st.lists(st.floats(1e-3, 1e3), min_size=1, max_size=6).map(
    lambda xs: np.array(xs))


def random_tree_mrf(rng, n, max_dom=3):
    doms = rng.integers(2, max_dom + 1, size=n)
    node_factors = [rng.uniform(0.1, 1.0, size=d) for d in doms]
    edges = [(int(rng.integers(0, v)), v) for v in range(1, n)]
    edge_factors = [rng.uniform(0.1, 1.0, size=(doms[i], doms[j]))
                    for i, j in edges]
    return M.MarkovRandomField(node_factors, edges, edge_factors)


# --- l1_normalize -----------------------------------------------------------

@given(positive_vec)
def test_normalize_sums_to_one(v):
    out = M.l1_normalize(v)
    assert abs(out.sum() - 1.0) < 1e-12
    assert (out >= 0).all()


@given(positive_vec, st.floats(1e-6, 1e6))
def test_normalize_scale_invariant_and_idempotent(v, c):
    a = M.l1_normalize(v)
    assert np.allclose(a, M.l1_normalize(c * v), atol=1e-12)
    assert np.allclose(a, M.l1_normalize(a), atol=1e-15)


def test_normalize_rejects_zero_mass():
    with pytest.raises(ZeroVector):
        M.l1_normalize(np.zeros(3))


# --- container validation ---------------------------------------------------

def test_edge_endpoint_out_of_range_rejected():
    with pytest.raises(ValueError):
        M.MarkovRandomField([np.ones(2)] * 2, [(0, 5)], [np.ones((2, 2))])


def test_all_zero_node_factor_rejected():
    with pytest.raises(ValueError):
        M.MarkovRandomField([np.zeros(2), np.ones(2)], [(0, 1)],
                            [np.ones((2, 2))])


def test_edge_factor_shape_mismatch_rejected():
    with pytest.raises(ValueError):
        M.MarkovRandomField([np.ones(2), np.ones(3)], [(0, 1)],
                            [np.ones((2, 2))])


def test_directed_ids_distinct_and_counted():
    rng = np.random.default_rng(0)
    g = random_tree_mrf(rng, 9)
    ids = M.directed_message_ids(g)
    assert len(ids) == 2 * g.edge_count
    assert len(set(ids)) == len(ids)
    assert all((j, i) in set(ids) for i, j in ids)


# --- message math -----------------------------------------------------------

def test_residual_of_current_value_is_zero():
    rng = np.random.default_rng(1)
    g = random_tree_mrf(rng, 6)
    state = M.MessageState.uniform(g)
    for id_ in M.directed_message_ids(g):
        assert M.message_residual(state, state[id_], id_) == 0.0


def test_compute_message_is_pure():
    rng = np.random.default_rng(2)
    g = random_tree_mrf(rng, 8)
    state = M.MessageState.uniform(g)
    id_ = M.directed_message_ids(g)[0]
    a = M.compute_message(g, state, id_)
    b = M.compute_message(g, state, id_)
    assert np.array_equal(a, b)
    # untouched state: the computation must not write anything
    assert all(np.allclose(state[k], 1.0 / len(state[k]))
               for k in M.directed_message_ids(g))


def test_estimate_marginal_normalized():
    rng = np.random.default_rng(3)
    g = random_tree_mrf(rng, 7)
    state = M.MessageState.uniform(g)
    for i in range(g.node_count):
        assert abs(M.estimate_marginal(g, state, i).sum() - 1.0) < 1e-12


# --- oracles ----------------------------------------------------------------

def test_single_node_marginal_is_its_factor():
    g = M.MarkovRandomField([np.array([0.25, 0.75])], [], [])
    (m,) = M.brute_force_marginals(g)
    assert np.allclose(m, [0.25, 0.75], atol=1e-15)


def test_identity_coupled_chain_concentrates():
    # joint mass lives on (0,0) and (1,1) with weights .05 and .45
    g = M.MarkovRandomField([np.array([0.1, 0.9]), np.array([0.5, 0.5])],
                            [(0, 1)], [np.eye(2)])
    for m in M.brute_force_marginals(g):
        assert np.allclose(m, [0.1, 0.9], atol=1e-12)
    for m in M.tree_exact_marginals(g):
        assert np.allclose(m, [0.1, 0.9], atol=1e-12)


@pytest.mark.parametrize("seed", range(8))
def test_tree_solver_matches_enumeration(seed):
    rng = np.random.default_rng(seed)
    g = random_tree_mrf(rng, int(rng.integers(2, 11)))
    a = M.brute_force_marginals(g)
    b = M.tree_exact_marginals(g)
    for x, y in zip(a, b):
        assert np.allclose(x, y, atol=1e-10)


def test_enumeration_guard():
    g = M.MarkovRandomField([np.ones(2)] * 40,
                            [(i, i + 1) for i in range(39)],
                            [np.ones((2, 2))] * 39)
    with pytest.raises(TooLarge):
        M.brute_force_marginals(g)


def test_tree_solver_rejects_cycles():
    g = M.MarkovRandomField([np.ones(2)] * 3, [(0, 1), (1, 2), (0, 2)],
                            [np.ones((2, 2))] * 3)
    with pytest.raises(ValueError):
        M.tree_exact_marginals(g)


def test_node_residual_is_max_incoming():
    rng = np.random.default_rng(4)
    g = random_tree_mrf(rng, 5)
    residuals = {(k, 1): 0.25 * (k + 1)
                 for k, _, _ in g.neighbors(1)}
    top = max(residuals.values())
    assert M.node_residual(residuals, g, 1) == top


# --- MRF-TXT v1 -------------------------------------------------------------

def test_model_file_roundtrip_exact(tmp_path):
    rng = np.random.default_rng(5)
    g = random_tree_mrf(rng, 12)
    p = tmp_path / "m.mrf"
    M.save_mrf_txt(g, p)
    h = M.load_mrf_txt(p)
    assert h.node_count == g.node_count and h.edge_count == g.edge_count
    for i in range(g.node_count):
        assert np.array_equal(g.node_factor(i), h.node_factor(i))
    for k in range(g.edge_count):
        assert np.array_equal(g.edge_factor(k), h.edge_factor(k))


def test_marginals_file_roundtrip(tmp_path):
    marg = [np.array([0.25, 0.75]), np.array([0.2, 0.3, 0.5])]
    p = tmp_path / "m.marg"
    M.save_marginals_txt(marg, p)
    back = M.load_marginals_txt(p)
    assert len(back) == 2
    assert all(np.array_equal(a, b) for a, b in zip(marg, back))


@pytest.mark.parametrize("body", [
    "mrf 1\n",                                   # short header
    "mrf 1 0\nnode 0 2 0.5\n",                   # value count mismatch
    "mrf 1 0\nnode 0 2 0.5 0.5\nedge 0 0 1\n",   # trailing garbage
    "mrf 2 1\nnode 0 2 1 1\nnode 1 2 1 1\nedge 0 1 1 2 3\n",  # bad table
])
def test_parser_rejects_malformed(tmp_path, body):
    p = tmp_path / "bad.mrf"
    p.write_text(body)
    with pytest.raises(FormatError):
        M.load_mrf_txt(p)
