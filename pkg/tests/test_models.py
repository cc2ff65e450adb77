"""Seeded generators: shapes, factor laws, determinism, LDPC structure."""
import numpy as np
import pytest

from relaxbp import models as MD
from relaxbp import mrf as M
from relaxbp.errors import GraphConstructionFailed
from relaxbp.rng import SplitMix64, prng_next


# --- PRNG anchor ------------------------------------------------------------

def test_splitmix_reference_outputs():
    out1, s1 = prng_next(0)
    out2, _ = prng_next(s1)
    assert out1 == 0xE220A8397B1DCDAF
    assert out2 == 0x6E789E6AA1B965F4


def test_stream_determinism():
    a = SplitMix64(123)
    b = SplitMix64(123)
    assert [a.next_u64() for _ in range(50)] == \
           [b.next_u64() for _ in range(50)]


def test_uniform_draws_in_range():
    g = SplitMix64(9)
    xs = np.array([g.next_unit() for _ in range(1000)])
    assert (xs >= 0).all() and (xs < 1).all()
    assert 0.4 < xs.mean() < 0.6


# --- trees ------------------------------------------------------------------

def test_tree_degenerate_single_node():
    g = MD.gen_tree(1)
    assert g.edge_count == 0
    assert np.allclose(g.node_factor(0), [0.1, 0.9])


def test_tree_small_shape():
    g = MD.gen_tree(3)
    assert sorted(map(tuple, g.edges)) == [(0, 1), (0, 2)]
    assert np.allclose(g.node_factor(1), [0.5, 0.5])
    assert np.array_equal(g.edge_factor(0), np.eye(2))


def test_tree_counts_scale():
    g = MD.gen_tree(1000)
    assert g.edge_count == 999
    assert len(M.directed_message_ids(g)) == 1998


@pytest.mark.parametrize("n,d", [(1, 0), (2, 1), (7, 2), (10, 3),
                                 (10**6, 19)])
def test_tree_depth(n, d):
    assert MD.tree_depth(n) == d


# --- grids ------------------------------------------------------------------

def test_ising_degenerate():
    g = MD.gen_ising(1, 1, seed=1)
    assert g.edge_count == 0


def test_grid_edge_count_formula():
    for r, c in ((2, 2), (3, 5), (10, 7)):
        g = MD.gen_ising(r, c, seed=1)
        assert g.node_count == r * c
        assert g.edge_count == 2 * r * c - r - c


def test_ising_factor_ranges():
    g = MD.gen_ising(6, 6, seed=3)
    lo, hi = np.exp(-1.0), np.exp(1.0)
    assert g.node_pot.min() >= lo - 1e-12
    assert g.node_pot.max() <= hi + 1e-12
    assert g.edge_pot.min() >= lo - 1e-12
    assert g.edge_pot.max() <= hi + 1e-12


def test_potts_off_pattern_entries_are_one():
    g = MD.gen_potts(4, 4, seed=5)
    for k in range(g.edge_count):
        t = g.edge_factor(k)
        assert t[0, 1] == 1.0 and t[1, 0] == 1.0
        assert t[0, 0] == t[1, 1]
        assert np.exp(-2.5) - 1e-12 <= t[0, 0] <= np.exp(2.5) + 1e-12


def test_generators_bit_identical_across_runs():
    for make in (lambda: MD.gen_ising(5, 4, seed=17),
                 lambda: MD.gen_potts(5, 4, seed=17)):
        a, b = make(), make()
        assert np.array_equal(a.node_pot, b.node_pot)
        assert np.array_equal(a.edge_pot, b.edge_pot)
        assert np.array_equal(a.edges, b.edges)


def test_different_seeds_differ():
    a = MD.gen_ising(5, 5, seed=1)
    b = MD.gen_ising(5, 5, seed=2)
    assert not np.array_equal(a.node_pot, b.node_pot)


# --- LDPC -------------------------------------------------------------------

def test_ldpc_structure_biregular_simple():
    g, truth = MD.gen_ldpc(40, eps=0.07, seed=2)
    nv = 80
    assert g.node_count == nv + 40
    assert g.edge_count == 3 * nv
    deg = np.zeros(g.node_count, dtype=int)
    for i, j in g.edges:
        deg[i] += 1
        deg[j] += 1
    assert (deg[:nv] == 3).all()
    assert (deg[nv:] == 6).all()
    seen = set(map(tuple, np.sort(g.edges, axis=1)))
    assert len(seen) == g.edge_count  # simple graph


def test_ldpc_parity_factor_orientation():
    g, _ = MD.gen_ldpc(10, eps=0.1, seed=1)
    table = g.node_factor(20)  # first constraint node, domain 64
    for mask in range(64):
        want = 1.0 if bin(mask).count("1") % 2 == 0 else 0.0
        assert table[mask] == want


def test_ldpc_edge_factor_selects_bit():
    g, _ = MD.gen_ldpc(10, eps=0.1, seed=1)
    nv = 20
    slot = {c: 0 for c in range(nv, nv + 10)}
    for k in range(g.edge_count):
        i, j = g.edges[k]
        var, con = (i, j) if j >= nv else (j, i)
        b = slot[con]
        slot[con] += 1
        t = g.edge_factor(k)
        t = t if i == var else t.T  # rows indexed by the variable
        for x in (0, 1):
            for y in range(64):
                assert t[x, y] == (1.0 if ((y >> b) & 1) == x else 0.0)


def test_ldpc_truth_flip_statistics():
    g, truth = MD.gen_ldpc(500, eps=0.07, seed=6)
    assert (truth.transmitted == 0).all()
    flips = int(truth.received.sum())
    mean, sigma = 1000 * 0.07, np.sqrt(1000 * 0.07 * 0.93)
    assert abs(flips - mean) <= 4 * sigma
    factor0 = g.node_factor(0)
    want = [0.93, 0.07] if truth.received[0] == 0 else [0.07, 0.93]
    assert np.allclose(factor0, want)


def test_ldpc_truth_file_roundtrip(tmp_path):
    _, truth = MD.gen_ldpc(20, eps=0.1, seed=3)
    p = tmp_path / "t.truth"
    MD.save_ldpc_truth(truth, p)
    back = MD.load_ldpc_truth(p)
    assert np.array_equal(truth.transmitted, back.transmitted)
    assert np.array_equal(truth.received, back.received)


# --- ModelSpec dispatch -----------------------------------------------------

def test_generate_dispatch_and_validation():
    g, truth = MD.generate(MD.ModelSpec("tree", (7,)))
    assert truth is None and g.edge_count == 6
    _, truth = MD.generate(MD.ModelSpec("ldpc", (10,), seed=4, eps=0.07))
    assert truth is not None
    with pytest.raises(ValueError):
        MD.generate(MD.ModelSpec("tree", (0,)))
    with pytest.raises(ValueError):
        MD.generate(MD.ModelSpec("ldpc", (10,), eps=0.6))
    with pytest.raises(ValueError):
        MD.generate(MD.ModelSpec("nope", (3,)))
