"""Spanning trees, fundamental cycles, circulation checks and monotone paths."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .network import Network, NetworkError, check_balanced


@dataclass(frozen=True)
class SpanningTree:
    """Rooted spanning tree.

    ``parent[n] = (parent node, connecting edge)``; the root is absent.
    """

    root: int
    parent: dict[int, tuple[int, int]]
    preorder: tuple[int, ...]
    depth: dict[int, int]

    @property
    def edges(self) -> set[int]:
        return {e for _, e in self.parent.values()}

    def children(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {n: [] for n in self.preorder}
        for n in self.preorder:
            if n in self.parent:
                out[self.parent[n][0]].append(n)
        return out

    def path_to_root(self, n: int) -> list[int]:
        nodes = [n]
        while nodes[-1] != self.root:
            nodes.append(self.parent[nodes[-1]][0])
        return nodes


def spanning_tree(net: Network, root: int) -> SpanningTree:
    """Deterministic depth-first spanning tree.

    When a node is expanded it claims every undiscovered neighbor, scanning
    incident edges in ascending edge id; the claimed children are then expanded
    depth-first in that same order.
    """
    if not 0 <= root < net.N:
        raise NetworkError(f"root {root} is not a node of the network")
    adj = net.adjacency()
    parent: dict[int, tuple[int, int]] = {}
    depth = {root: 0}
    preorder: list[int] = []
    stack = [root]
    while stack:
        u = stack.pop()
        preorder.append(u)
        claimed = []
        for e, v in adj[u]:
            if v not in depth:
                depth[v] = depth[u] + 1
                parent[v] = (u, e)
                claimed.append(v)
        stack.extend(reversed(claimed))
    if len(preorder) != net.N:
        raise NetworkError("network graph is disconnected")
    return SpanningTree(root, parent, tuple(preorder), depth)


@dataclass(frozen=True)
class Cycle:
    """One fundamental cycle traversed in its reference direction.

    ``edges[i]`` joins ``nodes[i]`` to ``nodes[(i + 1) % len(nodes)]``;
    ``signs[i]`` is +1 when that edge is oriented along the traversal.
    """

    edges: tuple[int, ...]
    nodes: tuple[int, ...]
    signs: tuple[int, ...]
    indicator: np.ndarray = field(repr=False)
    active: bool = False


@dataclass(frozen=True)
class CycleBasis:
    cycles: tuple[Cycle, ...]
    overlapping: bool

    @property
    def active(self) -> list[bool]:
        return [c.active for c in self.cycles]

    def matrix(self, P: int) -> np.ndarray:
        """P x k matrix whose columns are the cycle indicators."""
        if not self.cycles:
            return np.zeros((P, 0))
        return np.column_stack([c.indicator for c in self.cycles])

    def active_edges(self) -> set[int]:
        return {e for c in self.cycles if c.active for e in c.edges}

    def active_nodes(self) -> set[int]:
        return {n for c in self.cycles if c.active for n in c.nodes}


def tree_path(tree: SpanningTree, start: int, end: int) -> tuple[list[int], list[int]]:
    """Nodes and edges of the tree path from ``start`` to ``end``."""
    up, down = [start], [end]
    a, b = start, end
    while tree.depth[a] > tree.depth[b]:
        a = tree.parent[a][0]
        up.append(a)
    while tree.depth[b] > tree.depth[a]:
        b = tree.parent[b][0]
        down.append(b)
    while a != b:
        a = tree.parent[a][0]
        b = tree.parent[b][0]
        up.append(a)
        down.append(b)
    nodes = up + down[-2::-1]
    edges = []
    for u, v in zip(nodes, nodes[1:]):
        edges.append(tree.parent[u][1] if tree.parent.get(u, (None,))[0] == v else tree.parent[v][1])
    return nodes, edges


def fundamental_cycles(net: Network, tree: SpanningTree) -> CycleBasis:
    """One cycle per non-tree edge, oriented along that edge."""
    in_tree = tree.edges
    cycles = []
    count = np.zeros(net.P, dtype=int)
    for e in net.edges:
        if e.id in in_tree:
            continue
        path_nodes, path_edges = tree_path(tree, e.target, e.source)
        nodes = [e.source] + path_nodes[:-1]
        edges = [e.id] + path_edges
        signs = []
        ind = np.zeros(net.P)
        for i, eid in enumerate(edges):
            s = 1 if net.edges[eid].source == nodes[i] else -1
            signs.append(s)
            ind[eid] = s
        ind.setflags(write=False)
        active = any(net.edges[k].is_compressor for k in edges)
        count[edges] += 1
        cycles.append(Cycle(tuple(edges), tuple(nodes), tuple(signs), ind, active))
    return CycleBasis(tuple(cycles), bool((count > 1).any()))


def detect_circulation(basis: CycleBasis, phi, tol: float = 0.0) -> list[Cycle]:
    """Cycles whose flow runs uniformly along (or against) their direction."""
    phi = np.asarray(phi, dtype=float)
    bad = []
    for c in basis.cycles:
        aligned = phi[list(c.edges)] * np.array(c.signs)
        if (aligned > tol).all() or (aligned < -tol).all():
            bad.append(c)
    return bad


@dataclass(frozen=True)
class PathIndicator:
    source: int
    target: int
    pi: np.ndarray
    nodes: tuple[int, ...]
    edges: tuple[int, ...]


def monotone_path_decompose(net: Network, q_tilde, phi_tilde=None) -> PathIndicator:
    """Find a path from a surplus node to a deficit node along which the flow
    difference runs forward on every edge.

    The graph is augmented with a super source linked to every node with
    positive ``q_tilde`` and a super sink fed by every node with negative
    ``q_tilde``; a breadth-first search then follows only edges traversed in
    the direction of ``phi_tilde`` (lowest edge id first). If ``phi_tilde`` is
    not supplied the minimum-norm solution of ``A^T phi = q_tilde`` is used.
    """
    q = np.asarray(q_tilde, dtype=float)
    if q.shape != (net.N,):
        raise ValueError("q_tilde has the wrong length")
    scale = np.abs(q).max() if q.size else 0.0
    if scale == 0.0:
        raise ValueError("q_tilde is zero")
    if not check_balanced(q):
        raise ValueError("q_tilde is not balanced")
    if phi_tilde is None:
        phi = np.linalg.lstsq(net.incidence.T, q, rcond=None)[0]
    else:
        phi = np.asarray(phi_tilde, dtype=float)
    tol = 1e-12 * max(scale, np.abs(phi).max())
    qtol = 1e-12 * scale

    # forward arcs: (edge id, head) for edges whose flow leaves u
    arcs: list[list[tuple[int, int]]] = [[] for _ in range(net.N)]
    for e in net.edges:
        if phi[e.id] > tol:
            arcs[e.source].append((e.id, e.target))
        elif phi[e.id] < -tol:
            arcs[e.target].append((e.id, e.source))

    # the super source is represented by seeding every surplus node at once
    prev: dict[int, tuple[int, int] | None] = {}
    queue = deque()
    for n in range(net.N):
        if q[n] > qtol:
            prev[n] = None
            queue.append(n)
    end = None
    while queue:
        u = queue.popleft()
        if q[u] < -qtol:
            end = u
            break
        for eid, v in arcs[u]:
            if v not in prev:
                prev[v] = (u, eid)
                queue.append(v)
    if end is None:
        raise ValueError("no monotone path: phi_tilde does not carry q_tilde")

    nodes, edges = [end], []
    while prev[nodes[-1]] is not None:
        u, eid = prev[nodes[-1]]
        edges.append(eid)
        nodes.append(u)
    nodes.reverse()
    edges.reverse()
    pi = np.zeros(net.P)
    for u, eid in zip(nodes, edges):
        pi[eid] = 1.0 if net.edges[eid].source == u else -1.0
    return PathIndicator(nodes[0], nodes[-1], pi, tuple(nodes), tuple(edges))
