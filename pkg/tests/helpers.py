"""Instance builders shared by the tests."""
from __future__ import annotations

import numpy as np

from gasflow.network import GfSpec, build_network

PSI_R = 1.0e4


def random_graph(rng, n_nodes: int, n_cycles: int):
    """Random connected simple graph: a random tree plus ``n_cycles`` chords.

    Returns a list of ``(m, n)`` pairs with no parallel or antiparallel edges.
    """
    edges = [(int(rng.integers(0, i)), i) for i in range(1, n_nodes)]
    have = {frozenset(e) for e in edges}
    tries = 0
    while len(edges) < n_nodes - 1 + n_cycles and tries < 1000:
        tries += 1
        m, n = (int(v) for v in rng.choice(n_nodes, 2, replace=False))
        if frozenset((m, n)) in have:
            continue
        have.add(frozenset((m, n)))
        edges.append((m, n))
    return edges


def random_gas_network(rng, n_nodes=None, n_cycles=None, psi_r=PSI_R):
    """Compressor-free network with one fixed-pressure node (node 0).

    Frictions and injections are scaled so pressures stay well above zero.
    """
    n_nodes = n_nodes or int(rng.integers(5, 16))
    n_cycles = int(rng.integers(0, 5)) if n_cycles is None else n_cycles
    edges = random_graph(rng, n_nodes, n_cycles)
    q = np.round(rng.uniform(-5, 5, n_nodes), 3)
    q[0] = 0.0
    nodes = [{"id": 0, "pressure": psi_r}] + [{"id": i, "injection": float(q[i])}
                                             for i in range(1, n_nodes)]
    raw = [{"from": m, "to": n, "a": float(np.round(rng.uniform(0.5, 2.0), 3))} for m, n in edges]
    net = build_network(nodes, raw)
    return net, GfSpec.from_network(net)


def triangle(q=(3.0, 0.0, -3.0), a=1.0, psi_r=100.0):
    """Triangle 1->2, 2->3, 1->3 with node 1 at ``psi_r``."""
    nodes = [{"id": 1, "pressure": psi_r}, {"id": 2, "injection": q[1]}, {"id": 3, "injection": q[2]}]
    edges = [{"from": 1, "to": 2, "a": a}, {"from": 2, "to": 3, "a": a}, {"from": 1, "to": 3, "a": a}]
    net = build_network(nodes, edges)
    return net, GfSpec.from_network(net)


def parallel_compressors(inflow=4.0, alpha=2.0, a=1.0, psi0=100.0, a2=None):
    """Two stations in parallel between nodes 0 and 1: the symmetric cycle family."""
    nodes = [{"id": 0, "pressure": psi0}, {"id": 1, "injection": -inflow}]
    edges = [{"from": 0, "to": 1, "alpha": alpha, "a": a},
             {"from": 0, "to": 1, "alpha": alpha, "a": a if a2 is None else a2}]
    net = build_network(nodes, edges)
    return net, GfSpec.from_network(net)


def tree_with_compressor(reverse=False, q=3.0, psi0=100.0):
    """Two nodes joined by a station; ``reverse`` points it against the flow."""
    nodes = [{"id": 1, "pressure": psi0}, {"id": 2, "injection": -q}]
    m, n = (2, 1) if reverse else (1, 2)
    net = build_network(nodes, [{"from": m, "to": n, "alpha": 1.5, "a": 1.0}])
    return net, GfSpec.from_network(net)


def overloaded_path(rng, n_nodes=5, psi0=50.0):
    """Path whose demands push the far pressure below zero."""
    nodes = [{"id": 0, "pressure": psi0}]
    nodes += [{"id": i, "injection": -float(rng.uniform(2, 4))} for i in range(1, n_nodes)]
    edges = [{"from": i, "to": i + 1, "a": float(rng.uniform(0.5, 1.5))} for i in range(n_nodes - 1)]
    net = build_network(nodes, edges)
    return net, GfSpec.from_network(net)


def random_station_network(rng, n_nodes=None, n_cycles=None, psi_r=PSI_R):
    """Like :func:`random_gas_network` with some edges turned into stations."""
    n_nodes = n_nodes or int(rng.integers(4, 11))
    n_cycles = int(rng.integers(0, 4)) if n_cycles is None else n_cycles
    edges = random_graph(rng, n_nodes, n_cycles)
    nodes = [{"id": 0, "pressure": psi_r}] + [{"id": i, "injection": float(rng.uniform(-5, 5))}
                                             for i in range(1, n_nodes)]
    raw = []
    for m, n in edges:
        e = {"from": m, "to": n, "a": float(rng.uniform(0.5, 2.0))}
        if rng.random() < 0.3:
            e["alpha"] = float(rng.uniform(1.0, 1.5))
        raw.append(e)
    net = build_network(nodes, raw)
    return net, GfSpec.from_network(net)


def cactus_network(rng, psi_r=PSI_R):
    """Cactus of bridges, passive rings and at most two short active rings.

    An active ring joins its root to a far node along two routes: a station
    followed by pipes, and a single pipe. Ratios stay close to one so the
    boost rarely exceeds the pipe drops and the flow seldom circulates.
    """
    nodes, edges, n_active = [0], [], 0

    def a():
        return float(np.round(rng.uniform(0.5, 2.0), 3))

    for block in range(int(rng.integers(3, 7))):
        root = int(rng.choice(nodes))
        kind = "active" if block == 0 else rng.choice(["bridge", "passive", "active"], p=[0.35, 0.35, 0.3])
        if kind == "active" and n_active >= 2:
            kind = "passive"
        if kind == "bridge":
            nodes.append(len(nodes))
            edges.append({"from": root, "to": nodes[-1], "a": a()})
            continue
        k = int(rng.integers(1, 3)) if kind == "active" else int(rng.integers(2, 4))
        ring = [root] + list(range(len(nodes), len(nodes) + k))
        nodes += ring[1:]
        block_edges = [{"from": u, "to": v, "a": a()} for u, v in zip(ring, ring[1:])]
        block_edges.append({"from": root, "to": ring[-1], "a": a()})
        if kind == "active":
            block_edges[0]["alpha"] = float(np.round(rng.uniform(1.0, 1.004), 6))
            n_active += 1
        edges += block_edges
    q = np.round(-rng.uniform(0.5, 5.0, len(nodes)), 3)
    raw = [{"id": 0, "pressure": psi_r}] + [{"id": i, "injection": float(q[i])} for i in nodes[1:]]
    net = build_network(raw, edges)
    return net, GfSpec.from_network(net)
