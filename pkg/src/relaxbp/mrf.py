"""Pairwise Markov random fields and the sum-product primitives.

A pairwise MRF over variables x_0..x_{n-1} with per-node factors psi_i and
per-edge factors psi_ij defines

    Pr[x] proportional to  prod_i psi_i(x_i) * prod_{ij in E} psi_ij(x_i, x_j).

Belief propagation maintains one directed message per edge direction,
mu_{i->j}: D_j -> R, updated by

    mu'_{i->j}(x_j) = normalize( sum_{x_i} psi_i(x_i) psi_ij(x_i, x_j)
                                 * prod_{k in N(i) - {j}} mu_{k->i}(x_i) ).

This module is the plain-Python semantic layer: small, allocation-happy,
and convenient for oracles and tests. Engines operate on a flattened copy.
"""
import numpy as np

from .errors import FormatError, TooLarge, ZeroDistribution, ZeroVector

__all__ = [
    "MarkovRandomField", "MessageState", "directed_message_ids",
    "l1_normalize", "compute_message", "message_residual", "node_residual",
    "estimate_marginal", "brute_force_marginals", "tree_exact_marginals",
    "save_mrf_txt", "load_mrf_txt", "save_marginals_txt", "load_marginals_txt",
    "BRUTE_FORCE_GUARD",
]

BRUTE_FORCE_GUARD = 10_000_000


class MarkovRandomField:
    """Immutable graph plus dense factor tables.

    Factors are stored flat (one pool for node tables, one for edge tables)
    so million-node instances avoid per-node Python objects; views are handed
    out on demand.
    """

    def __init__(self, node_factors, edges, edge_factors):
        node_factors = [np.asarray(f, dtype=np.float64) for f in node_factors]
        n = len(node_factors)
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        edge_factors = [np.asarray(f, dtype=np.float64) for f in edge_factors]
        if len(edge_factors) != len(edges):
            raise ValueError("edge/table count mismatch")
        dom = np.array([f.shape[0] for f in node_factors], dtype=np.int64)
        node_off = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(dom, out=node_off[1:])
        node_pot = (np.concatenate(node_factors) if n
                    else np.empty(0, dtype=np.float64))
        sizes = np.array([t.size for t in edge_factors], dtype=np.int64)
        edge_off = np.zeros(len(edges) + 1, dtype=np.int64)
        np.cumsum(sizes, out=edge_off[1:])
        edge_pot = (np.concatenate([t.ravel() for t in edge_factors])
                    if len(edges) else np.empty(0, dtype=np.float64))
        if len(edges) and (edges.min() < 0 or edges.max() >= n):
            raise ValueError("edge endpoint out of range")
        for k, t in enumerate(edge_factors):
            i, j = edges[k]
            if t.shape != (dom[i], dom[j]):
                raise ValueError(f"edge table {k} shape {t.shape} does not "
                                 f"match domains ({dom[i]}, {dom[j]})")
        self._init_flat(dom, node_off, node_pot, edges, edge_off, edge_pot)

    @classmethod
    def from_flat(cls, dom, node_off, node_pot, edges, edge_off, edge_pot):
        self = cls.__new__(cls)
        self._init_flat(dom, node_off, node_pot, edges, edge_off, edge_pot)
        return self

    def _init_flat(self, dom, node_off, node_pot, edges, edge_off, edge_pot):
        n = len(dom)
        if np.any(dom <= 0):
            raise ValueError("domain sizes must be positive")
        if len(edges):
            if edges.min() < 0 or edges.max() >= n:
                raise ValueError("edge endpoint out of range")
            if np.any(edges[:, 0] == edges[:, 1]):
                raise ValueError("self loops are not allowed")
            lo = np.minimum(edges[:, 0], edges[:, 1])
            hi = np.maximum(edges[:, 0], edges[:, 1])
            enc = lo * n + hi
            if len(np.unique(enc)) != len(enc):
                raise ValueError("duplicate edges are not allowed")
        if np.any(node_pot < 0) or np.any(edge_pot < 0):
            raise ValueError("factors must be non-negative")
        # every node factor needs at least one strictly positive entry
        seg_max = np.maximum.reduceat(node_pot, node_off[:-1]) if n else node_pot
        if n and np.any(seg_max <= 0):
            raise ValueError("a node factor has no positive entry")
        self.dom = dom
        self.node_off = node_off
        self.node_pot = node_pot
        self.edges = edges
        self.edge_off = edge_off
        self.edge_pot = edge_pot
        self._adj = None

    @property
    def node_count(self):
        return len(self.dom)

    @property
    def edge_count(self):
        return len(self.edges)

    @property
    def domains(self):
        return self.dom

    def node_factor(self, i):
        return self.node_pot[self.node_off[i]:self.node_off[i + 1]]

    def edge_factor(self, k):
        i, j = self.edges[k]
        t = self.edge_pot[self.edge_off[k]:self.edge_off[k + 1]]
        return t.reshape(self.dom[i], self.dom[j])

    def neighbors(self, i):
        """List of (neighbor, edge index, side) with side 0 when i == edges[k,0]."""
        adj = self._adjacency()
        off, nbr, eid, side = adj
        return [(nbr[t], eid[t], side[t]) for t in range(off[i], off[i + 1])]

    def degree(self, i):
        off = self._adjacency()[0]
        return int(off[i + 1] - off[i])

    def _adjacency(self):
        if self._adj is None:
            n, m = self.node_count, self.edge_count
            deg = np.zeros(n, dtype=np.int64)
            np.add.at(deg, self.edges.ravel(), 1)
            off = np.zeros(n + 1, dtype=np.int64)
            np.cumsum(deg, out=off[1:])
            nbr = np.empty(2 * m, dtype=np.int64)
            eid = np.empty(2 * m, dtype=np.int64)
            side = np.empty(2 * m, dtype=np.int64)
            cur = off[:-1].copy()
            for k in range(m):
                i, j = self.edges[k]
                nbr[cur[i]], eid[cur[i]], side[cur[i]] = j, k, 0
                cur[i] += 1
                nbr[cur[j]], eid[cur[j]], side[cur[j]] = i, k, 1
                cur[j] += 1
            self._adj = (off, nbr, eid, side)
        return self._adj


def directed_message_ids(mrf):
    """All 2|E| directed message ids as (i, j) pairs."""
    out = []
    for i, j in mrf.edges:
        out.append((int(i), int(j)))
        out.append((int(j), int(i)))
    return out


class MessageState:
    """Current value of every directed message.

    Message vectors are replaced whole (a fresh array per write); readers
    holding a reference always see one complete past value, never a blend.
    """

    def __init__(self, values):
        self.values = values

    @classmethod
    def uniform(cls, mrf):
        vals = {}
        for i, j in directed_message_ids(mrf):
            d = mrf.dom[j]
            vals[(i, j)] = np.full(d, 1.0 / d)
        return cls(vals)

    def __getitem__(self, id_):
        return self.values[id_]

    def replace(self, id_, vec):
        self.values[id_] = np.asarray(vec, dtype=np.float64)

    def copy(self):
        return MessageState(dict(self.values))


def l1_normalize(v):
    """Scale a non-negative vector to sum 1. Raises ZeroVector on zero mass."""
    v = np.asarray(v, dtype=np.float64)
    s = v.sum()
    if s <= 0.0:
        raise ZeroVector("cannot normalize a zero vector")
    return v / s


def compute_message(mrf, state, id_):
    """New value of message i->j from the current state. Pure."""
    i, j = id_
    pre = mrf.node_factor(i).copy()
    for k, _, _ in mrf.neighbors(i):
        if k != j:
            pre *= state[(k, i)]
    eid, side = _edge_of(mrf, i, j)
    table = mrf.edge_factor(eid)
    if side == 1:
        table = table.T  # orient rows to x_i
    return l1_normalize(pre @ table)


def _edge_of(mrf, i, j):
    for k, eid, side in mrf.neighbors(i):
        if k == j:
            return eid, side
    raise KeyError(f"({i},{j}) is not an edge")


def message_residual(state, candidate, id_):
    """L2 distance between a candidate vector and the current message."""
    return float(np.linalg.norm(np.asarray(candidate) - state[id_]))


def node_residual(residuals, mrf, node):
    """Maximum residual among the node's incoming messages; 0 if isolated."""
    best = 0.0
    for k, _, _ in mrf.neighbors(node):
        r = residuals.get((k, node), 0.0)
        if r > best:
            best = r
    return best


def estimate_marginal(mrf, state, node):
    """Normalized product of the node factor and all incoming messages."""
    p = mrf.node_factor(node).copy()
    for k, _, _ in mrf.neighbors(node):
        p *= state[(k, node)]
    return l1_normalize(p)


def brute_force_marginals(mrf):
    """Exact marginals by enumerating the full joint table.

    Builds the joint as a dense tensor with one axis per variable, so it is
    only usable while prod |D_i| stays within BRUTE_FORCE_GUARD.
    """
    n = mrf.node_count
    total = 1
    for d in mrf.dom:
        total *= int(d)
        if total > BRUTE_FORCE_GUARD:
            raise TooLarge(f"state space exceeds {BRUTE_FORCE_GUARD}")
    shape = tuple(int(d) for d in mrf.dom)
    joint = np.ones(shape)
    for i in range(n):
        ax = [1] * n
        ax[i] = shape[i]
        joint = joint * mrf.node_factor(i).reshape(ax)
    for k in range(mrf.edge_count):
        i, j = mrf.edges[k]
        ax = [1] * n
        ax[i], ax[j] = shape[i], shape[j]
        joint = joint * mrf.edge_factor(k).reshape(ax)
    z = joint.sum()
    if z <= 0.0:
        raise ZeroDistribution("joint distribution has zero total mass")
    out = []
    for i in range(n):
        axes = tuple(a for a in range(n) if a != i)
        out.append(joint.sum(axis=axes) / z)
    return out


def tree_exact_marginals(mrf):
    """Exact marginals on a forest via one upward and one downward pass.

    Independent of the schedulers and engines, so it doubles as an oracle
    for tree-structured inputs too large for brute force.
    """
    n = mrf.node_count
    order, parent = _forest_bfs(mrf)
    state = MessageState.uniform(mrf)
    for v in reversed(order):
        p = parent[v]
        if p >= 0:
            state.replace((v, p), compute_message(mrf, state, (v, p)))
    for v in order:
        p = parent[v]
        if p >= 0:
            state.replace((p, v), compute_message(mrf, state, (p, v)))
    return [estimate_marginal(mrf, state, i) for i in range(n)]


def _forest_bfs(mrf):
    n = mrf.node_count
    parent = np.full(n, -1, dtype=np.int64)
    seen = np.zeros(n, dtype=bool)
    order = []
    for root in range(n):
        if seen[root]:
            continue
        seen[root] = True
        order.append(root)
        head = len(order) - 1
        while head < len(order):
            v = order[head]
            head += 1
            for k, _, _ in mrf.neighbors(v):
                if not seen[k]:
                    seen[k] = True
                    parent[k] = v
                    order.append(k)
    # a forest has exactly n - (number of roots) edges; more means a cycle
    if mrf.edge_count > n - int(np.sum(parent < 0)):
        raise ValueError("graph is not a forest")
    return order, parent


# ---------------------------------------------------------------------------
# MRF-TXT v1
#
#   mrf <n> <|E|>
#   node <i> <|D_i|> <psi values>          (n lines)
#   edge <i> <j> <row-major psi_ij values> (|E| lines)
# ---------------------------------------------------------------------------

def save_mrf_txt(mrf, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"mrf {mrf.node_count} {mrf.edge_count}\n")
        chunks = []
        for i in range(mrf.node_count):
            vals = " ".join(repr(float(v)) for v in mrf.node_factor(i))
            chunks.append(f"node {i} {mrf.dom[i]} {vals}\n")
            if len(chunks) >= 65536:
                fh.write("".join(chunks))
                chunks = []
        for k in range(mrf.edge_count):
            i, j = mrf.edges[k]
            vals = " ".join(repr(float(v)) for v in mrf.edge_factor(k).ravel())
            chunks.append(f"edge {i} {j} {vals}\n")
            if len(chunks) >= 65536:
                fh.write("".join(chunks))
                chunks = []
        fh.write("".join(chunks))


def load_mrf_txt(path):
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 3 or header[0] != "mrf":
            raise FormatError("expected header 'mrf <n> <e>'")
        try:
            n, m = int(header[1]), int(header[2])
        except ValueError as exc:
            raise FormatError("bad header counts") from exc
        if n < 0 or m < 0:
            raise FormatError("negative counts")
        dom = np.zeros(n, dtype=np.int64)
        node_tabs = [None] * n
        for _ in range(n):
            parts = fh.readline().split()
            if len(parts) < 3 or parts[0] != "node":
                raise FormatError("expected a node line")
            try:
                i, d = int(parts[1]), int(parts[2])
                vals = np.array([float(x) for x in parts[3:]])
            except ValueError as exc:
                raise FormatError("bad node line") from exc
            if not (0 <= i < n) or node_tabs[i] is not None:
                raise FormatError(f"bad or repeated node index {i}")
            if d <= 0 or len(vals) != d:
                raise FormatError(f"node {i}: {len(vals)} values for domain {d}")
            dom[i] = d
            node_tabs[i] = vals
        edges = np.zeros((m, 2), dtype=np.int64)
        edge_tabs = [None] * m
        for k in range(m):
            parts = fh.readline().split()
            if len(parts) < 3 or parts[0] != "edge":
                raise FormatError("expected an edge line")
            try:
                i, j = int(parts[1]), int(parts[2])
                vals = np.array([float(x) for x in parts[3:]])
            except ValueError as exc:
                raise FormatError("bad edge line") from exc
            if not (0 <= i < n and 0 <= j < n):
                raise FormatError(f"edge endpoint out of range: {i} {j}")
            if len(vals) != dom[i] * dom[j]:
                raise FormatError(
                    f"edge {i}-{j}: {len(vals)} values for shape "
                    f"({dom[i]}, {dom[j]})")
            edges[k] = (i, j)
            edge_tabs[k] = vals.reshape(dom[i], dom[j])
        if fh.readline().strip():
            raise FormatError("trailing content after the last edge line")
    try:
        return MarkovRandomField(node_tabs, edges, edge_tabs)
    except ValueError as exc:
        raise FormatError(str(exc)) from exc


def save_marginals_txt(marginals, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"marginals {len(marginals)}\n")
        for i, v in enumerate(marginals):
            fh.write(f"marginal {i} " + " ".join(repr(float(x)) for x in v) + "\n")


def load_marginals_txt(path):
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2 or header[0] != "marginals":
            raise FormatError("expected header 'marginals <n>'")
        try:
            n = int(header[1])
        except ValueError as exc:
            raise FormatError("bad marginal count") from exc
        out = [None] * n
        for _ in range(n):
            parts = fh.readline().split()
            if len(parts) < 3 or parts[0] != "marginal":
                raise FormatError("expected a marginal line")
            try:
                i = int(parts[1])
                vals = np.array([float(x) for x in parts[2:]])
            except ValueError as exc:
                raise FormatError("bad marginal line") from exc
            if not (0 <= i < n) or out[i] is not None:
                raise FormatError(f"bad or repeated marginal index {i}")
            out[i] = vals
    return out
