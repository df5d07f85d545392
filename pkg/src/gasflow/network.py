"""Network data model: nodes, pipes, compressor stations and boundary conditions.

Compressor stations are expanded when the network is built: a station
``m -> n`` becomes an ideal compressor ``m -> s`` followed by a lossy pipe
``s -> n`` through a synthetic junction ``s``. After expansion every edge
obeys exactly one pressure law (Weymouth for pipes, multiplicative ratio for
compressors).

Squared pressures are used throughout; ``psi`` always means squared pressure.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping

import numpy as np

PRESSURE = "pressure"
INJECTION = "injection"
PIPE = "pipe"
COMPRESSOR = "compressor"


class NetworkError(ValueError):
    """Raised for structurally invalid networks or boundary specifications."""


@dataclass(frozen=True)
class Node:
    id: int
    kind: str
    value: float
    synthetic: bool = False
    name: str = ""

    @property
    def label(self) -> str:
        return self.name or str(self.id)


@dataclass(frozen=True)
class Edge:
    id: int
    source: int
    target: int
    kind: str
    a: float = 0.0
    alpha: float = 1.0
    station: int | None = None  # user edge index of the originating station

    @property
    def is_pipe(self) -> bool:
        return self.kind == PIPE

    @property
    def is_compressor(self) -> bool:
        return self.kind == COMPRESSOR


@dataclass(frozen=True, eq=False)
class Network:
    """Immutable directed gas network after compressor expansion.

    ``incidence`` is the P x N edge-node matrix with +1 at the origin and
    -1 at the destination of each edge.
    """

    nodes: tuple[Node, ...]
    edges: tuple[Edge, ...]
    raw_edges: tuple[dict, ...] = field(default=(), repr=False)
    incidence: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        A = np.zeros((len(self.edges), len(self.nodes)))
        for e in self.edges:
            A[e.id, e.source] = 1.0
            A[e.id, e.target] = -1.0
        A.setflags(write=False)
        object.__setattr__(self, "incidence", A)

    @property
    def N(self) -> int:
        return len(self.nodes)

    @property
    def P(self) -> int:
        return len(self.edges)

    @property
    def pipes(self) -> list[Edge]:
        return [e for e in self.edges if e.is_pipe]

    @property
    def compressors(self) -> list[Edge]:
        return [e for e in self.edges if e.is_compressor]

    @property
    def friction(self) -> np.ndarray:
        """Per-edge friction (0 for compressors)."""
        return np.array([e.a if e.is_pipe else 0.0 for e in self.edges])

    @property
    def pipe_mask(self) -> np.ndarray:
        return np.array([e.is_pipe for e in self.edges], dtype=bool)

    def adjacency(self) -> list[list[tuple[int, int]]]:
        """Per node, the list of ``(edge id, neighbor)`` sorted by edge id."""
        adj: list[list[tuple[int, int]]] = [[] for _ in self.nodes]
        for e in self.edges:
            adj[e.source].append((e.id, e.target))
            adj[e.target].append((e.id, e.source))
        return adj

    def node_index(self, name: Any) -> int:
        key = str(name)
        for n in self.nodes:
            if n.label == key:
                return n.id
        raise NetworkError(f"unknown node {name!r}")

    def with_ratios(self, ratios: Mapping[int, float]) -> "Network":
        """Copy of the network with new compression ratios, keyed by edge id."""
        edges = []
        for e in self.edges:
            if e.id in ratios:
                if not e.is_compressor:
                    raise NetworkError(f"edge {e.id} is not a compressor")
                if ratios[e.id] <= 0:
                    raise NetworkError("compression ratio must be positive")
                e = Edge(e.id, e.source, e.target, e.kind, e.a, float(ratios[e.id]), e.station)
            edges.append(e)
        raw = []
        for r in self.raw_edges:
            r = dict(r)
            if r["kind"] == COMPRESSOR:
                comp = next(e for e in edges if e.is_compressor and e.station == r["index"])
                r["alpha"] = comp.alpha
            raw.append(r)
        return Network(self.nodes, tuple(edges), tuple(raw))

    def with_node_values(self, values: Mapping[int, float]) -> "Network":
        nodes = tuple(
            Node(n.id, n.kind, float(values[n.id]), n.synthetic, n.name) if n.id in values else n
            for n in self.nodes
        )
        return Network(nodes, self.edges, self.raw_edges)


def _node_fields(raw: Mapping[str, Any]) -> tuple[str, str, float]:
    name = str(raw["id"])
    if "pressure" in raw:
        return name, PRESSURE, float(raw["pressure"])
    if "injection" in raw:
        return name, INJECTION, float(raw["injection"])
    kind = raw.get("kind", INJECTION)
    if kind not in (PRESSURE, INJECTION):
        raise NetworkError(f"node {name}: unknown kind {kind!r}")
    return name, kind, float(raw.get("value", 0.0))


def build_network(raw_nodes: Iterable[Mapping[str, Any]], raw_edges: Iterable[Mapping[str, Any]]) -> Network:
    """Validate user input and build an expanded :class:`Network`.

    Parameters
    ----------
    raw_nodes : iterable of mappings
        Each has an ``id`` label and either ``pressure`` (squared pressure,
        bar^2) or ``injection`` (volumetric rate).
    raw_edges : iterable of mappings
        ``{"from", "to", "a"}`` for a pipe, or ``{"from", "to", "alpha", "a"}``
        for a compressor station (``a`` is the downstream pipe friction).

    Returns
    -------
    Network
        User nodes keep their input order; one synthetic node per station is
        appended. User edges keep their index (a station's index holds its
        ideal compressor); the station pipes are appended in declaration order.
    """
    nodes: list[Node] = []
    index: dict[str, int] = {}
    for raw in raw_nodes:
        name, kind, value = _node_fields(raw)
        if name in index:
            raise NetworkError(f"duplicate node {name!r}")
        if kind == PRESSURE and not value > 0:
            raise NetworkError(f"node {name}: fixed pressure must be positive")
        index[name] = len(nodes)
        nodes.append(Node(len(nodes), kind, value, False, name))

    raw_list = [dict(r) for r in raw_edges]
    edges: list[Edge] = []
    appended: list[tuple[int, int, int, float]] = []
    stored_raw = []
    for i, raw in enumerate(raw_list):
        try:
            m, n = index[str(raw["from"])], index[str(raw["to"])]
        except KeyError as exc:
            raise NetworkError(f"edge {i}: dangling node reference {exc.args[0]!r}") from None
        if m == n:
            raise NetworkError(f"edge {i}: self loop at node {raw['from']}")
        a = float(raw.get("a", 0.0))
        if not a > 0:
            raise NetworkError(f"edge {i}: friction a must be positive")
        is_station = raw.get("kind") == COMPRESSOR or "alpha" in raw
        if is_station:
            alpha = float(raw.get("alpha", 0.0))
            if not alpha > 0:
                raise NetworkError(f"edge {i}: compression ratio alpha must be positive")
            s = len(nodes)
            nodes.append(Node(s, INJECTION, 0.0, True, f"{nodes[m].label}>{nodes[n].label}#{i}"))
            edges.append(Edge(i, m, s, COMPRESSOR, 0.0, alpha, station=i))
            appended.append((s, n, i, a))
            stored_raw.append({"index": i, "from": nodes[m].label, "to": nodes[n].label,
                               "kind": COMPRESSOR, "alpha": alpha, "a": a})
        else:
            edges.append(Edge(i, m, n, PIPE, a))
            stored_raw.append({"index": i, "from": nodes[m].label, "to": nodes[n].label,
                               "kind": PIPE, "a": a})
    for s, n, station, a in appended:
        edges.append(Edge(len(edges), s, n, PIPE, a, station=station))

    seen: dict[tuple[int, int], int] = {}
    for e in edges:
        if (e.source, e.target) in seen:
            raise NetworkError(f"duplicate edge between {nodes[e.source].label} and {nodes[e.target].label}")
        if (e.target, e.source) in seen:
            raise NetworkError(
                f"antiparallel edge between {nodes[e.source].label} and {nodes[e.target].label}")
        seen[(e.source, e.target)] = e.id

    net = Network(tuple(nodes), tuple(edges), tuple(stored_raw))
    if not nodes:
        raise NetworkError("network has no nodes")
    if not _is_connected(net):
        raise NetworkError("network graph is disconnected")
    return net


def _is_connected(net: Network) -> bool:
    adj = net.adjacency()
    seen = {0}
    queue = deque([0])
    while queue:
        u = queue.popleft()
        for _, v in adj[u]:
            if v not in seen:
                seen.add(v)
                queue.append(v)
    return len(seen) == net.N


@dataclass(frozen=True)
class GfSpec:
    """Boundary conditions of a gas-flow instance.

    Keys are node indices. Synthetic nodes are implicit zero injections and
    appear in neither map.
    """

    fixed_pressure: Mapping[int, float]
    fixed_injection: Mapping[int, float]
    reference: int

    @classmethod
    def from_network(cls, net: Network, reference: int | None = None) -> "GfSpec":
        fp = {n.id: n.value for n in net.nodes if not n.synthetic and n.kind == PRESSURE}
        fq = {n.id: n.value for n in net.nodes if not n.synthetic and n.kind == INJECTION}
        if reference is None:
            if not fp:
                raise NetworkError("no fixed-pressure node")
            reference = min(fp)
        spec = cls(fp, fq, reference)
        spec.validate(net)
        return spec

    @property
    def single_reference(self) -> bool:
        return len(self.fixed_pressure) == 1

    def validate(self, net: Network) -> None:
        if not self.fixed_pressure:
            raise NetworkError("the fixed-pressure set is empty")
        if self.reference not in self.fixed_pressure:
            raise NetworkError("reference node must have a fixed pressure")
        both = set(self.fixed_pressure) & set(self.fixed_injection)
        if both:
            raise NetworkError(f"nodes {sorted(both)} are both pressure- and injection-fixed")
        user = {n.id for n in net.nodes if not n.synthetic}
        covered = set(self.fixed_pressure) | set(self.fixed_injection)
        if covered != user:
            raise NetworkError("boundary conditions must cover every non-synthetic node exactly once")
        for n, v in self.fixed_pressure.items():
            if not v > 0:
                raise NetworkError(f"node {n}: fixed pressure must be positive")

    def injections(self, net: Network) -> np.ndarray:
        """Injection vector with synthetic nodes at 0.

        With a single fixed-pressure node its injection balances the rest;
        with several, their entries are 0 (they are unknowns of the problem).
        """
        q = np.zeros(net.N)
        for n, v in self.fixed_injection.items():
            q[n] = v
        if self.single_reference:
            q[self.reference] = -q.sum()
        return q

    def pressure_vector(self, net: Network) -> np.ndarray:
        psi = np.full(net.N, np.nan)
        for n, v in self.fixed_pressure.items():
            psi[n] = v
        return psi

    def with_injections(self, q: Mapping[int, float]) -> "GfSpec":
        fq = dict(self.fixed_injection)
        fq.update({k: float(v) for k, v in q.items() if k in fq})
        return GfSpec(dict(self.fixed_pressure), fq, self.reference)

    def with_pressures(self, psi: Mapping[int, float]) -> "GfSpec":
        fp = dict(self.fixed_pressure)
        fp.update({k: float(v) for k, v in psi.items()})
        fq = {k: v for k, v in self.fixed_injection.items() if k not in psi}
        return GfSpec(fp, fq, self.reference)


@dataclass
class GfSolution:
    """Solution triplet plus diagnostics."""

    q: np.ndarray
    phi: np.ndarray
    psi: np.ndarray
    solver: str = ""
    residual: float = float("nan")
    gap: float = float("nan")
    iterations: int = 0
    seconds: float = 0.0
    feasible: bool = True
    status: str = "solved"
    info: dict = field(default_factory=dict)


def mass_residual(net: Network, q, phi) -> np.ndarray:
    """Return ``A^T phi - q``."""
    q = np.asarray(q, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if q.shape != (net.N,) or phi.shape != (net.P,):
        raise ValueError(f"expected q of length {net.N} and phi of length {net.P}, "
                         f"got {q.shape} and {phi.shape}")
    return net.incidence.T @ phi - q


def check_balanced(q) -> bool:
    q = np.asarray(q, dtype=float)
    return bool(abs(q.sum()) <= 1e-9 * max(1.0, np.abs(q).sum()))
