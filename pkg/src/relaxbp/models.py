"""Seeded generators for the four benchmark MRF families.

All generators are deterministic functions of their full parameter list.
Randomness comes from one SplitMix64 stream per call with a fixed draw
order, so a (kind, size, seed) triple identifies an instance exactly:

  grids  - all node coefficients in node order, then all edge coefficients
           in edge order (edges row-major, horizontal before vertical).
  ldpc   - graph shuffles first (whole-shuffle restart on a parallel edge),
           then channel flips in variable order.
"""
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import FormatError, GraphConstructionFailed
from .mrf import MarkovRandomField
from .rng import SplitMix64, next_below, next_unit

__all__ = [
    "ModelSpec", "LdpcGroundTruth", "gen_tree", "gen_ising", "gen_potts",
    "gen_ldpc", "generate", "save_ldpc_truth", "load_ldpc_truth",
    "tree_depth",
]

LDPC_MAX_RESTARTS = 1000


@dataclass
class ModelSpec:
    """What to generate: kind, size parameters, seed, and the LDPC channel."""
    kind: str
    size: tuple = ()
    seed: int = 1
    eps: float = 0.07

    def __post_init__(self):
        if self.kind not in ("tree", "ising", "potts", "ldpc"):
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.kind == "tree" and (len(self.size) != 1 or self.size[0] < 1):
            raise ValueError("tree takes one positive node count")
        if self.kind in ("ising", "potts") and (
                len(self.size) != 2 or min(self.size) < 1):
            raise ValueError(f"{self.kind} takes positive rows and cols")
        if self.kind == "ldpc":
            if len(self.size) != 1 or self.size[0] < 1:
                raise ValueError("ldpc takes one positive constraint count")
            if not (0.0 < self.eps < 0.5):
                raise ValueError("ldpc needs 0 < eps < 0.5")


@dataclass
class LdpcGroundTruth:
    """Transmitted codeword (all zeros) and the bits after channel flips."""
    transmitted: np.ndarray
    received: np.ndarray


def generate(spec):
    """Build the instance for a ModelSpec. Returns (mrf, truth-or-None)."""
    if spec.kind == "tree":
        return gen_tree(spec.size[0]), None
    if spec.kind == "ising":
        return gen_ising(spec.size[0], spec.size[1], spec.seed), None
    if spec.kind == "potts":
        return gen_potts(spec.size[0], spec.size[1], spec.seed), None
    mrf, truth = gen_ldpc(spec.size[0], spec.eps, spec.seed)
    return mrf, truth


def gen_tree(n):
    """Full binary tree: root factor (0.1, 0.9), identity edge factors.

    Node k's children are 2k+1 and 2k+2; every non-root factor is uniform,
    so initially only the root's outgoing messages carry any residual.
    """
    if n < 1:
        raise ValueError("need at least one node")
    dom = np.full(n, 2, dtype=np.int64)
    node_off = np.arange(0, 2 * n + 1, 2, dtype=np.int64)
    node_pot = np.full(2 * n, 0.5)
    node_pot[0], node_pot[1] = 0.1, 0.9
    children = np.arange(1, n, dtype=np.int64)
    edges = np.column_stack(((children - 1) // 2, children))
    m = n - 1
    edge_off = np.arange(0, 4 * m + 1, 4, dtype=np.int64)
    edge_pot = np.tile(np.array([1.0, 0.0, 0.0, 1.0]), m)
    return MarkovRandomField.from_flat(dom, node_off, node_pot,
                                       edges, edge_off, edge_pot)


def tree_depth(n):
    """Depth (max root-to-leaf edge count) of the n-node full binary tree."""
    d = 0
    while (1 << (d + 1)) - 1 < n:
        d += 1
    return d


def _grid_edges(rows, cols):
    """Row-major grid edges, horizontal before vertical per node."""
    edges = np.empty((2 * rows * cols - rows - cols, 2), dtype=np.int64)
    k = 0
    for r in range(rows):
        base = r * cols
        for c in range(cols):
            v = base + c
            if c + 1 < cols:
                edges[k, 0], edges[k, 1] = v, v + 1
                k += 1
            if r + 1 < rows:
                edges[k, 0], edges[k, 1] = v, v + cols
                k += 1
    assert k == len(edges)
    return edges


def _draw_uniforms(seed, count, lo, hi):
    rng = SplitMix64(seed)
    out = np.empty(count)
    for i in range(count):
        out[i] = rng.next_uniform(lo, hi)
    return out


def gen_ising(rows, cols, seed):
    """Spin grid: psi_i(x) = e^{b x}, psi_ij(x,y) = e^{a x y}, x,y in {-1,+1}.

    Index 0 is spin -1. Coefficients are uniform on [-1, 1]; the node block
    of the stream comes before the edge block.
    """
    n = rows * cols
    edges = _grid_edges(rows, cols)
    m = len(edges)
    coef = _draw_uniforms(seed, n + m, -1.0, 1.0)
    beta, alpha = coef[:n], coef[n:]
    node_pot = np.empty(2 * n)
    node_pot[0::2] = np.exp(-beta)
    node_pot[1::2] = np.exp(beta)
    ea = np.exp(alpha)
    tab = np.empty((m, 4))
    tab[:, 0] = ea          # (-1,-1)
    tab[:, 1] = 1.0 / ea    # (-1,+1)
    tab[:, 2] = 1.0 / ea
    tab[:, 3] = ea
    dom = np.full(n, 2, dtype=np.int64)
    return MarkovRandomField.from_flat(
        dom, np.arange(0, 2 * n + 1, 2, dtype=np.int64), node_pot,
        edges, np.arange(0, 4 * m + 1, 4, dtype=np.int64), tab.ravel())


def gen_potts(rows, cols, seed):
    """Two-state Potts grid: psi_i = (1, e^b); psi_ij = e^a on agreement, 1 off.

    Coefficients uniform on [-2.5, 2.5], same draw order as the spin grid.
    """
    n = rows * cols
    edges = _grid_edges(rows, cols)
    m = len(edges)
    coef = _draw_uniforms(seed, n + m, -2.5, 2.5)
    beta, alpha = coef[:n], coef[n:]
    node_pot = np.empty(2 * n)
    node_pot[0::2] = 1.0
    node_pot[1::2] = np.exp(beta)
    ea = np.exp(alpha)
    tab = np.empty((m, 4))
    tab[:, 0] = ea
    tab[:, 1] = 1.0
    tab[:, 2] = 1.0
    tab[:, 3] = ea
    dom = np.full(n, 2, dtype=np.int64)
    return MarkovRandomField.from_flat(
        dom, np.arange(0, 2 * n + 1, 2, dtype=np.int64), node_pot,
        edges, np.arange(0, 4 * m + 1, 4, dtype=np.int64), tab.ravel())


@njit(cache=True)
def _ldpc_stream(st, n, max_restarts):
    """Shuffle 6n variable stubs until every constraint sees 6 distinct vars.

    Each attempt consumes one full Fisher-Yates pass from the stream; the
    caller draws channel flips from the same stream only after success.
    """
    total = 6 * n
    perm = np.empty(total, dtype=np.int64)
    attempts = 0
    ok = False
    while attempts < max_restarts and not ok:
        attempts += 1
        for s in range(total):
            perm[s] = s // 3
        for i in range(total - 1, 0, -1):
            j = next_below(st, 0, i + 1)
            t = perm[i]
            perm[i] = perm[j]
            perm[j] = t
        ok = True
        for c in range(n):
            base = 6 * c
            for a in range(6):
                va = perm[base + a]
                for b in range(a + 1, 6):
                    if va == perm[base + b]:
                        ok = False
                        break
                if not ok:
                    break
            if not ok:
                break
    return perm, attempts, ok


@njit(cache=True)
def _ldpc_flips(st, count, eps):
    received = np.zeros(count, dtype=np.int64)
    for i in range(count):
        if next_unit(st, 0) < eps:
            received[i] = 1
    return received


def gen_ldpc(n, eps, seed):
    """(3,6)-biregular code graph over a binary symmetric channel.

    2n binary variable nodes, n parity constraint nodes with domain 64 (the
    bitmask of the six incident variables, bit b = the b-th edge of the
    constraint in creation order). The all-zero codeword is transmitted and
    each bit flips independently with probability eps.
    """
    if n < 1:
        raise ValueError("need at least one constraint")
    if not (0.0 < eps < 0.5):
        raise ValueError("need 0 < eps < 0.5")
    st = np.array([seed], dtype=np.uint64)
    perm, attempts, ok = _ldpc_stream(st, n, LDPC_MAX_RESTARTS)
    if not ok:
        raise GraphConstructionFailed(
            f"no simple (3,6) graph in {LDPC_MAX_RESTARTS} restarts")
    received = _ldpc_flips(st, 2 * n, eps)
    nv = 2 * n
    # node factors: variables 2 entries, constraints 64
    dom = np.concatenate([np.full(nv, 2, dtype=np.int64),
                          np.full(n, 64, dtype=np.int64)])
    node_off = np.zeros(nv + n + 1, dtype=np.int64)
    np.cumsum(dom, out=node_off[1:])
    node_pot = np.empty(node_off[-1])
    var_block = node_pot[:2 * nv].reshape(nv, 2)
    var_block[:, 0] = np.where(received == 0, 1.0 - eps, eps)
    var_block[:, 1] = np.where(received == 0, eps, 1.0 - eps)
    y = np.arange(64, dtype=np.uint64)
    parity = np.zeros(64, dtype=np.int64)
    for b in range(6):
        parity ^= ((y >> np.uint64(b)) & np.uint64(1)).astype(np.int64)
    con_factor = np.where(parity == 0, 1.0, 0.0)
    node_pot[2 * nv:] = np.tile(con_factor, n)
    # edges in constraint-major creation order; bit b tables are shared
    m = 6 * n
    edges = np.empty((m, 2), dtype=np.int64)
    edges[:, 0] = perm
    edges[:, 1] = nv + np.repeat(np.arange(n, dtype=np.int64), 6)
    bit_tabs = np.empty((6, 2, 64))
    yb = np.arange(64)
    for b in range(6):
        bit = (yb >> b) & 1
        bit_tabs[b, 0] = (bit == 0).astype(np.float64)
        bit_tabs[b, 1] = (bit == 1).astype(np.float64)
    edge_pot = np.tile(bit_tabs.reshape(6 * 128), n)
    edge_off = np.arange(0, 128 * m + 1, 128, dtype=np.int64)
    mrf = MarkovRandomField.from_flat(dom, node_off, node_pot,
                                      edges, edge_off, edge_pot)
    truth = LdpcGroundTruth(np.zeros(nv, dtype=np.int64), received)
    return mrf, truth


# ---------------------------------------------------------------------------
# ldpc-truth v1: one line per variable, `bit <i> <transmitted> <received>`
# ---------------------------------------------------------------------------

def save_ldpc_truth(truth, path):
    with open(path, "w", encoding="utf-8") as fh:
        for i in range(len(truth.transmitted)):
            fh.write(f"bit {i} {int(truth.transmitted[i])} "
                     f"{int(truth.received[i])}\n")


def load_ldpc_truth(path):
    tx, rx = [], []
    with open(path, "r", encoding="utf-8") as fh:
        for ln, line in enumerate(fh):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 4 or parts[0] != "bit":
                raise FormatError(f"line {ln + 1}: expected 'bit <i> <t> <r>'")
            try:
                i, t, r = int(parts[1]), int(parts[2]), int(parts[3])
            except ValueError as exc:
                raise FormatError(f"line {ln + 1}: bad integers") from exc
            if i != len(tx) or t not in (0, 1) or r not in (0, 1):
                raise FormatError(f"line {ln + 1}: bad index or bit values")
            tx.append(t)
            rx.append(r)
    return LdpcGroundTruth(np.array(tx, dtype=np.int64),
                           np.array(rx, dtype=np.int64))
