"""Measurement graph model and structural transforms.

A measurement graph couples per-node linear-Gaussian self measurements
(z_i = C_i x_i + v_i) with pairwise joint measurements
(z_ij = C_ij x_i + C_ji x_j + v_ij) over an undirected, connected graph.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import GraphValidationError, SingularInformationError
from .linalg import block_diag, is_spd, psd_inv_sqrt, symmetrize


def _ro(a, dtype=float) -> np.ndarray:
    out = np.array(a, dtype=dtype)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class SelfMeasurement:
    """Linear observation of a single node's state with SPD noise covariance."""

    C: np.ndarray
    R: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "C", _ro(np.atleast_2d(self.C)))
        object.__setattr__(self, "R", _ro(np.atleast_2d(self.R)))
        object.__setattr__(self, "z", _ro(np.atleast_1d(self.z)))

    @property
    def size(self) -> int:
        return self.C.shape[0]

    def information(self) -> np.ndarray:
        """C^T R^{-1} C."""
        return symmetrize(self.C.T @ np.linalg.solve(self.R, self.C))

    def information_vector(self) -> np.ndarray:
        """C^T R^{-1} z."""
        return self.C.T @ np.linalg.solve(self.R, self.z)


@dataclass(frozen=True)
class NodeSpec:
    id: int
    dim: int
    self_meas: Optional[SelfMeasurement] = None


@dataclass(frozen=True)
class EdgeSpec:
    """Joint measurement z = C_ij x_i + C_ji x_j + v over the unordered pair (i, j)."""

    i: int
    j: int
    C_ij: np.ndarray
    C_ji: np.ndarray
    R: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "C_ij", _ro(np.atleast_2d(self.C_ij)))
        object.__setattr__(self, "C_ji", _ro(np.atleast_2d(self.C_ji)))
        object.__setattr__(self, "R", _ro(np.atleast_2d(self.R)))
        object.__setattr__(self, "z", _ro(np.atleast_1d(self.z)))

    @property
    def size(self) -> int:
        return self.R.shape[0]

    @property
    def pair(self) -> tuple[int, int]:
        return (self.i, self.j) if self.i < self.j else (self.j, self.i)

    def coef(self, node: int) -> np.ndarray:
        """Observation matrix acting on the given endpoint's state."""
        if node == self.i:
            return self.C_ij
        if node == self.j:
            return self.C_ji
        raise KeyError(f"node {node} is not an endpoint of edge {self.pair}")

    def other(self, node: int) -> int:
        if node == self.i:
            return self.j
        if node == self.j:
            return self.i
        raise KeyError(f"node {node} is not an endpoint of edge {self.pair}")

    def information(self, node: int) -> np.ndarray:
        """C^T R^{-1} C for the endpoint's observation matrix."""
        c = self.coef(node)
        return symmetrize(c.T @ np.linalg.solve(self.R, c))


@dataclass(frozen=True)
class Violation:
    rule: str
    subject: str
    detail: str = ""

    def __str__(self):
        extra = f": {self.detail}" if self.detail else ""
        return f"[{self.rule}] {self.subject}{extra}"


class MeasurementGraph:
    """Immutable container for nodes and joint-measurement edges."""

    def __init__(self, nodes, edges):
        self._nodes = {n.id: n for n in nodes}
        if len(self._nodes) != len(list(nodes)):
            # keep raw list so validate() can report the duplicate ids
            pass
        self._node_list = list(nodes)
        self._edge_list = list(edges)
        self._edge_index: dict[tuple[int, int], EdgeSpec] = {}
        for e in self._edge_list:
            self._edge_index.setdefault(e.pair, e)
        self._adjacency: dict[int, tuple[int, ...]] = {}
        for nid in self._nodes:
            self._adjacency[nid] = ()
        nbrs = {nid: set() for nid in self._nodes}
        for (a, b) in self._edge_index:
            if a in nbrs and b in nbrs and a != b:
                nbrs[a].add(b)
                nbrs[b].add(a)
        for nid, s in nbrs.items():
            self._adjacency[nid] = tuple(sorted(s))

    # -- accessors -------------------------------------------------------

    @property
    def node_ids(self) -> tuple[int, ...]:
        return tuple(sorted(self._nodes))

    def node(self, i: int) -> NodeSpec:
        return self._nodes[i]

    def neighbors(self, i: int) -> tuple[int, ...]:
        return self._adjacency[i]

    def degree(self, i: int) -> int:
        return len(self._adjacency[i])

    def edge(self, i: int, j: int) -> EdgeSpec:
        key = (i, j) if i < j else (j, i)
        return self._edge_index[key]

    def has_edge(self, i: int, j: int) -> bool:
        key = (i, j) if i < j else (j, i)
        return key in self._edge_index

    @property
    def edges(self) -> tuple[EdgeSpec, ...]:
        return tuple(self._edge_index[k] for k in sorted(self._edge_index))

    def directed_pairs(self) -> tuple[tuple[int, int], ...]:
        """All (i, j) with j a neighbor of i, in canonical lexicographic order."""
        out = []
        for i in self.node_ids:
            for j in self.neighbors(i):
                out.append((i, j))
        return tuple(out)

    @property
    def n_nodes(self) -> int:
        return len(self._nodes)

    @property
    def n_edges(self) -> int:
        return len(self._edge_index)

    # -- validation ------------------------------------------------------

    def validate(self) -> list[Violation]:
        """Check structural and numerical invariants; empty list means valid."""
        out: list[Violation] = []
        seen_ids = set()
        for n in self._node_list:
            if n.id in seen_ids:
                out.append(Violation("duplicate node", f"node {n.id}"))
            seen_ids.add(n.id)
            if n.dim < 1:
                out.append(Violation("bad dimension", f"node {n.id}", f"dim={n.dim}"))
                continue
            sm = n.self_meas
            if sm is None:
                continue
            m = sm.C.shape[0]
            if sm.C.shape[1] != n.dim:
                out.append(Violation("dimension mismatch", f"node {n.id}",
                                     f"C is {sm.C.shape}, state dim {n.dim}"))
            if sm.R.shape != (m, m) or sm.z.shape != (m,):
                out.append(Violation("dimension mismatch", f"node {n.id}",
                                     "R/z rows disagree with C"))
            elif not is_spd(sm.R):
                out.append(Violation("covariance not SPD", f"node {n.id}"))

        seen_pairs = set()
        for e in self._edge_list:
            name = f"edge ({e.i},{e.j})"
            if e.i == e.j:
                out.append(Violation("self loop", name))
                continue
            if e.i not in self._nodes or e.j not in self._nodes:
                out.append(Violation("unknown endpoint", name))
                continue
            if e.pair in seen_pairs:
                out.append(Violation("duplicate edge", name))
                continue
            seen_pairs.add(e.pair)
            m = e.R.shape[0]
            ok_rows = (e.C_ij.shape[0] == m and e.C_ji.shape[0] == m
                       and e.z.shape == (m,) and e.R.shape == (m, m))
            if not ok_rows:
                out.append(Violation("dimension mismatch", name, "row counts disagree"))
                continue
            if e.C_ij.shape[1] != self._nodes[e.i].dim:
                out.append(Violation("dimension mismatch", name,
                                     f"C on node {e.i} has {e.C_ij.shape[1]} cols"))
            if e.C_ji.shape[1] != self._nodes[e.j].dim:
                out.append(Violation("dimension mismatch", name,
                                     f"C on node {e.j} has {e.C_ji.shape[1]} cols"))
            if not is_spd(e.R):
                out.append(Violation("covariance not SPD", name))

        if self._nodes and not out:
            reached = _bfs_distances(self, self.node_ids[0])
            if len(reached) != len(self._nodes):
                missing = sorted(set(self._nodes) - set(reached))
                out.append(Violation("graph disconnected",
                                     f"nodes {missing} unreachable from {self.node_ids[0]}"))
        return out

    def ensure_valid(self):
        violations = self.validate()
        if violations:
            raise GraphValidationError(violations)
        return self


def _bfs_distances(graph: MeasurementGraph, start: int) -> dict[int, int]:
    dist = {start: 0}
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for v in graph.neighbors(u):
            if v not in dist:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def bfs_distances(graph: MeasurementGraph, start: int) -> dict[int, int]:
    """Hop distance from start to every reachable node."""
    return _bfs_distances(graph, start)


def diameter(graph: MeasurementGraph) -> int:
    return max(max(_bfs_distances(graph, i).values()) for i in graph.node_ids)


def is_acyclic(graph: MeasurementGraph) -> bool:
    # valid graphs are connected, so the forest test reduces to edge counting
    return graph.n_edges == graph.n_nodes - 1


def exclusive_information(graph: MeasurementGraph, i: int, j: int) -> np.ndarray:
    """Information available to node i from everything except its edge to j.

    Sum of the self-measurement information and the raw information of all
    incident edges other than (i, j).  Required to be positive definite for
    the message recursions to be well posed.
    """
    if j not in graph.neighbors(i):
        raise KeyError(f"{j} is not a neighbor of {i}")
    node = graph.node(i)
    total = np.zeros((node.dim, node.dim))
    if node.self_meas is not None:
        total += node.self_meas.information()
    for w in graph.neighbors(i):
        if w == j:
            continue
        total += graph.edge(i, w).information(i)
    total = symmetrize(total)
    if not is_spd(total):
        raise SingularInformationError("exclusive information not positive definite",
                                       f"({i},{j})")
    return total


@dataclass(frozen=True)
class DominanceCheck:
    """Outcome of the edge-information dominance test."""

    holds: bool
    eta: float
    worst_pair: tuple[int, int]


def check_dominance(graph: MeasurementGraph) -> DominanceCheck:
    """Smallest eta with eta * Omega_ij >= C_ij^T R_ij^{-1} C_ij for all pairs.

    eta < 1 means every node's single-edge information is strictly dominated
    by the rest of its local information, which is what the convergence
    analysis of the message recursions needs.
    """
    eta = 0.0
    worst = None
    for (i, j) in graph.directed_pairs():
        omega = exclusive_information(graph, i, j)
        edge_info = graph.edge(i, j).information(i)
        w = psd_inv_sqrt(omega)
        ratio = float(np.linalg.eigvalsh(symmetrize(w @ edge_info @ w))[-1])
        if worst is None or ratio > eta:
            eta = ratio
            worst = (i, j)
    if worst is None:
        # no edges at all: condition is vacuous
        return DominanceCheck(True, 0.0, (-1, -1))
    return DominanceCheck(eta < 1.0, eta, worst)


def prune_leaves(graph: MeasurementGraph) -> set[int]:
    """Iteratively strip degree-1 nodes; returns the surviving node set.

    The survivors all lie on cycles; a tree collapses to a single node.
    """
    degree = {i: graph.degree(i) for i in graph.node_ids}
    alive = set(graph.node_ids)
    queue = deque(i for i in graph.node_ids if degree[i] <= 1)
    while queue:
        u = queue.popleft()
        if u not in alive or len(alive) == 1:
            continue
        alive.discard(u)
        for v in graph.neighbors(u):
            if v in alive:
                degree[v] -= 1
                if degree[v] == 1:
                    queue.append(v)
    return alive


def subgraph_within(graph: MeasurementGraph, i: int, d: int) -> MeasurementGraph:
    """Induced subgraph on nodes at hop distance <= d from i."""
    if d < 0:
        raise ValueError("hop count must be nonnegative")
    dist = _bfs_distances(graph, i)
    keep = {u for u, t in dist.items() if t <= d}
    nodes = [graph.node(u) for u in sorted(keep)]
    edges = [e for e in graph.edges if e.i in keep and e.j in keep]
    return MeasurementGraph(nodes, edges)


def eccentricity(graph: MeasurementGraph, i: int) -> int:
    return max(_bfs_distances(graph, i).values())


def cycle_free_depth(graph: MeasurementGraph, i: int):
    """Largest d such that the d-hop neighborhood of i is acyclic.

    Returns math.inf when the whole graph is acyclic.
    """
    if is_acyclic(graph):
        return math.inf
    ecc = eccentricity(graph, i)
    d = 0
    while d < ecc and is_acyclic(subgraph_within(graph, i, d + 1)):
        d += 1
    if not is_acyclic(subgraph_within(graph, i, d)):
        raise AssertionError("inconsistent cycle detection")
    return d


@dataclass(frozen=True)
class ReducedGraph:
    """Acyclic surrogate of the neighborhood of `center`, child nodes split per leaf."""

    graph: MeasurementGraph
    center: int
    depth: int
    copies: dict[int, tuple[int, int]] = field(default_factory=dict)  # copy -> (orig, p)


def build_reduced_graph(graph: MeasurementGraph, i: int) -> ReducedGraph:
    """Tree surrogate around node i used by the information-accuracy bound.

    Keeps the (acyclic) d-hop neighborhood intact; each boundary child at
    distance d+1 is split into one copy per adjacent leaf, the copy carrying
    the child's self measurement with covariance scaled by the number of
    copies.  Child-to-child and outward edges are dropped.
    """
    d = cycle_free_depth(graph, i)
    if d == math.inf:
        raise ValueError("reduced graph undefined for acyclic graphs; use the graph itself")
    dist = _bfs_distances(graph, i)
    inner = {u for u, t in dist.items() if t <= d}
    nodes = [graph.node(u) for u in sorted(inner)]
    edges = [e for e in graph.edges if e.i in inner and e.j in inner]

    children = sorted(u for u, t in dist.items() if t == d + 1)
    next_id = max(graph.node_ids) + 1
    copies: dict[int, tuple[int, int]] = {}
    for s in children:
        leaves = [u for u in graph.neighbors(s) if dist[u] == d]
        p = len(leaves)
        if p == 0:
            continue
        base = graph.node(s)
        for u in sorted(leaves):
            sm = base.self_meas
            if sm is not None:
                sm = SelfMeasurement(sm.C, np.asarray(sm.R) * p, sm.z)
            copy_id = next_id
            next_id += 1
            copies[copy_id] = (s, p)
            nodes.append(NodeSpec(copy_id, base.dim, sm))
            orig = graph.edge(s, u)
            edges.append(EdgeSpec(copy_id, u, orig.coef(s), orig.coef(u), orig.R, orig.z))
    reduced = MeasurementGraph(nodes, edges)
    if not is_acyclic(reduced):
        raise AssertionError("reduced graph construction produced a cycle")
    return ReducedGraph(reduced, i, d, copies)


@dataclass(frozen=True)
class LineGraph:
    """Layered regrouping of a graph around a center node.

    Layer t (0-based) stacks the states of all nodes at hop distance t; the
    last layer lumps everything beyond the cycle-free horizon.  Joint
    measurements inside one layer become self measurements of that super
    node; measurements between adjacent layers become the super-edge data.
    """

    center: int
    layers: tuple[tuple[int, ...], ...]
    dims: tuple[int, ...]
    offsets: dict[int, tuple[int, int]]         # node -> (layer, column offset)
    C_self: tuple[np.ndarray, ...]
    R_self: tuple[np.ndarray, ...]
    z_self: tuple[np.ndarray, ...]
    C_cross_lo: tuple[np.ndarray, ...]          # acts on layer t
    C_cross_hi: tuple[np.ndarray, ...]          # acts on layer t+1
    R_cross: tuple[np.ndarray, ...]
    z_cross: tuple[np.ndarray, ...]

    @property
    def n_layers(self) -> int:
        return len(self.layers)

    def state_order(self) -> list[int]:
        """Node ids in stacked state order."""
        return [u for layer in self.layers for u in layer]


def build_line_graph(graph: MeasurementGraph, i: int) -> LineGraph:
    dist = _bfs_distances(graph, i)
    d = cycle_free_depth(graph, i)
    if d == math.inf:
        # acyclic graph: one layer per hop ring plus an empty lumped layer
        horizon = eccentricity(graph, i)
    else:
        horizon = d
    layers = [tuple(sorted(u for u, t in dist.items() if t == k))
              for k in range(horizon + 1)]
    layers.append(tuple(sorted(u for u, t in dist.items() if t > horizon)))

    dims = []
    offsets: dict[int, tuple[int, int]] = {}
    for t, layer in enumerate(layers):
        off = 0
        for u in layer:
            offsets[u] = (t, off)
            off += graph.node(u).dim
        dims.append(off)

    C_self, R_self, z_self = [], [], []
    C_lo, C_hi, R_cross, z_cross = [], [], [], []

    def place(rows, dim_total, entries):
        block = np.zeros((rows, dim_total))
        for (off, mat) in entries:
            block[:, off:off + mat.shape[1]] = mat
        return block

    for t, layer in enumerate(layers):
        c_rows, r_blocks, z_parts = [], [], []
        for u in layer:
            sm = graph.node(u).self_meas
            if sm is None:
                continue
            c_rows.append(place(sm.size, dims[t], [(offsets[u][1], np.asarray(sm.C))]))
            r_blocks.append(sm.R)
            z_parts.append(sm.z)
        for e in graph.edges:
            if offsets[e.i][0] == t and offsets[e.j][0] == t:
                c_rows.append(place(e.size, dims[t],
                                    [(offsets[e.i][1], np.asarray(e.C_ij)),
                                     (offsets[e.j][1], np.asarray(e.C_ji))]))
                r_blocks.append(e.R)
                z_parts.append(e.z)
        rows = sum(b.shape[0] for b in c_rows)
        C_self.append(np.vstack(c_rows) if c_rows else np.zeros((0, dims[t])))
        R_self.append(block_diag(r_blocks) if r_blocks else np.zeros((0, 0)))
        z_self.append(np.concatenate(z_parts) if z_parts else np.zeros(0))
        assert C_self[-1].shape[0] == rows

    for t in range(len(layers) - 1):
        lo_rows, hi_rows, r_blocks, z_parts = [], [], [], []
        for e in graph.edges:
            ti, tj = offsets[e.i][0], offsets[e.j][0]
            if {ti, tj} == {t, t + 1}:
                lo_node, hi_node = (e.i, e.j) if ti == t else (e.j, e.i)
                lo_rows.append(place(e.size, dims[t],
                                     [(offsets[lo_node][1], np.asarray(e.coef(lo_node)))]))
                hi_rows.append(place(e.size, dims[t + 1],
                                     [(offsets[hi_node][1], np.asarray(e.coef(hi_node)))]))
                r_blocks.append(e.R)
                z_parts.append(e.z)
            elif abs(ti - tj) > 1:
                raise AssertionError("edge skips a layer; BFS layering broken")
        C_lo.append(np.vstack(lo_rows) if lo_rows else np.zeros((0, dims[t])))
        C_hi.append(np.vstack(hi_rows) if hi_rows else np.zeros((0, dims[t + 1])))
        R_cross.append(block_diag(r_blocks) if r_blocks else np.zeros((0, 0)))
        z_cross.append(np.concatenate(z_parts) if z_parts else np.zeros(0))

    return LineGraph(
        center=i,
        layers=tuple(layers),
        dims=tuple(dims),
        offsets=offsets,
        C_self=tuple(C_self),
        R_self=tuple(R_self),
        z_self=tuple(z_self),
        C_cross_lo=tuple(C_lo),
        C_cross_hi=tuple(C_hi),
        R_cross=tuple(R_cross),
        z_cross=tuple(z_cross),
    )
