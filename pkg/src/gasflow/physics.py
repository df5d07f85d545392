"""Pressure laws of pipes and compressors, the gas-flow residual and the
inexactness gap."""
from __future__ import annotations

import numpy as np

from .network import GfSpec, Network
from .topology import SpanningTree

ZERO_FLOW_DROP = 1e-12
ZERO_FLOW_TOL = 1e-6


class NegativePressureError(ValueError):
    """A propagated pressure went negative; the flow pattern is not physical."""

    def __init__(self, message, psi=None):
        super().__init__(message)
        self.psi = psi


class FlowDirectionError(ValueError):
    """A compressor would have to carry negative flow."""


def pressure_drop(a, phi):
    """Weymouth drop ``a * sign(phi) * phi**2`` (elementwise)."""
    phi = np.asarray(phi, dtype=float)
    out = a * phi * np.abs(phi)
    return float(out) if out.ndim == 0 else out


def flow_from_drop(a, drop):
    """Inverse of :func:`pressure_drop`: ``sign(drop) * sqrt(|drop| / a)``."""
    drop = np.asarray(drop, dtype=float)
    out = np.sign(drop) * np.sqrt(np.abs(drop) / a)
    return float(out) if out.ndim == 0 else out


def edge_law_residual(net: Network, phi, psi) -> np.ndarray:
    """Per edge: ``psi_m - psi_n - drop`` for pipes, ``psi_n - alpha psi_m``
    for compressors."""
    phi = np.asarray(phi, dtype=float)
    psi = np.asarray(psi, dtype=float)
    out = np.empty(net.P)
    for e in net.edges:
        if e.is_pipe:
            out[e.id] = psi[e.source] - psi[e.target] - e.a * phi[e.id] * abs(phi[e.id])
        else:
            out[e.id] = psi[e.target] - e.alpha * psi[e.source]
    return out


def _step_pressure(edge, upstream_node, psi_up, phi_e):
    """Pressure at the far end of ``edge`` given pressure at ``upstream_node``."""
    if edge.is_pipe:
        d = edge.a * phi_e * abs(phi_e)
        return psi_up - d if edge.source == upstream_node else psi_up + d
    return edge.alpha * psi_up if edge.source == upstream_node else psi_up / edge.alpha


def propagate_pressures(net: Network, tree: SpanningTree, phi, psi_root: float,
                        check: bool = True) -> tuple[np.ndarray, float]:
    """Pressures from flows by walking ``tree`` from its root.

    Returns ``(psi, closure)`` where ``closure`` is the largest violation of
    the edge laws over non-tree edges.

    Raises
    ------
    NegativePressureError
        If ``check`` and some pressure comes out negative.
    """
    phi = np.asarray(phi, dtype=float)
    psi = np.empty(net.N)
    psi[tree.root] = psi_root
    for n in tree.preorder[1:]:
        p, eid = tree.parent[n]
        psi[n] = _step_pressure(net.edges[eid], p, psi[p], phi[eid])
    in_tree = tree.edges
    law = edge_law_residual(net, phi, psi)
    off = [e.id for e in net.edges if e.id not in in_tree]
    closure = float(np.abs(law[off]).max()) if off else 0.0
    if check and (psi < 0).any():
        bad = int(np.argmin(psi))
        raise NegativePressureError(f"negative pressure {psi[bad]:.6g} at node {bad}", psi)
    return psi, closure


def tree_flows(net: Network, tree: SpanningTree, q) -> np.ndarray:
    """The unique flow on ``tree`` (zero elsewhere) meeting ``A^T phi = q``."""
    q = np.asarray(q, dtype=float)
    sub = q.copy()
    phi = np.zeros(net.P)
    for n in reversed(tree.preorder[1:]):
        p, eid = tree.parent[n]
        e = net.edges[eid]
        phi[eid] = sub[n] if e.source == n else -sub[n]
        sub[p] += sub[n]
    return phi


def flows_from_pressures(net: Network, psi, q=None, tol: float = 1e-9) -> np.ndarray:
    """Flows from pressures.

    Pipe flows follow from the Weymouth law. Compressor flows are fixed by
    mass balance, so ``q`` is needed whenever compressors are present.
    """
    psi = np.asarray(psi, dtype=float)
    phi = np.zeros(net.P)
    pipes = net.pipe_mask
    for e in net.edges:
        if e.is_pipe:
            phi[e.id] = flow_from_drop(e.a, psi[e.source] - psi[e.target])
    comps = np.flatnonzero(~pipes)
    if comps.size == 0:
        return phi
    scale = max(1.0, float(np.abs(psi).max()))
    for k in comps:
        e = net.edges[k]
        if abs(psi[e.target] - e.alpha * psi[e.source]) > tol * scale:
            raise ValueError(f"pressures inconsistent with compressor {k}")
    if q is None:
        raise ValueError("injections are required to recover compressor flows")
    A = net.incidence
    rhs = np.asarray(q, dtype=float) - A[pipes].T @ phi[pipes]
    sol, *_ = np.linalg.lstsq(A[comps].T, rhs, rcond=None)
    if np.abs(A[comps].T @ sol - rhs).max() > 1e-7 * max(1.0, np.abs(rhs).max()):
        raise ValueError("pressures inconsistent with mass balance on a cycle")
    phi[comps] = sol
    if (sol < -tol * max(1.0, np.abs(sol).max())).any():
        raise FlowDirectionError("compressor flow would be negative")
    return phi


class StateLayout:
    """Index bookkeeping for the stacked state ``y = [phi, psi without ref]``."""

    def __init__(self, net: Network, spec: GfSpec):
        self.net = net
        self.spec = spec
        self.free_psi = [n for n in range(net.N) if n != spec.reference]
        self.col = {n: net.P + i for i, n in enumerate(self.free_psi)}
        self.balance_nodes = [n for n in range(net.N) if n not in spec.fixed_pressure]
        self.extra_pressure = [n for n in sorted(spec.fixed_pressure) if n != spec.reference]
        self.size = net.P + net.N - 1

    def pack(self, phi, psi) -> np.ndarray:
        return np.concatenate([np.asarray(phi, float), np.asarray(psi, float)[self.free_psi]])

    def unpack(self, y) -> tuple[np.ndarray, np.ndarray]:
        y = np.asarray(y, dtype=float)
        if y.shape != (self.size,):
            raise ValueError(f"state must have length {self.size}, got {y.shape}")
        psi = np.empty(self.net.N)
        psi[self.spec.reference] = self.spec.fixed_pressure[self.spec.reference]
        psi[self.free_psi] = y[self.net.P:]
        return y[:self.net.P].copy(), psi

    def injections(self, phi) -> np.ndarray:
        """Full injection vector: given at fixed-injection nodes, implied by
        the flows at fixed-pressure nodes."""
        q = self.spec.injections(self.net)
        implied = self.net.incidence.T @ phi
        for n in self.spec.fixed_pressure:
            q[n] = implied[n]
        return q


def residual_and_jacobian(net: Network, spec: GfSpec, y) -> tuple[np.ndarray, np.ndarray]:
    """Residual ``g(y)`` of the gas-flow equations and its Jacobian.

    Row blocks, in order: mass balance at every fixed-injection node; one law
    row per edge (``psi_m - psi_n - a|phi|phi`` or ``psi_n - alpha psi_m``);
    ``psi_n - given`` for fixed-pressure nodes other than the reference.
    The Weymouth derivative in ``phi`` is ``-2 a |phi|`` (0 at zero flow).
    """
    lay = StateLayout(net, spec)
    phi, psi = lay.unpack(y)
    q = spec.injections(net)
    A = net.incidence
    nb = len(lay.balance_nodes)
    g = np.empty(lay.size)
    J = np.zeros((lay.size, lay.size))

    g[:nb] = (A.T @ phi - q)[lay.balance_nodes]
    J[:nb, :net.P] = A.T[lay.balance_nodes]

    for e in net.edges:
        row = nb + e.id
        m, n = e.source, e.target
        if e.is_pipe:
            g[row] = psi[m] - psi[n] - e.a * phi[e.id] * abs(phi[e.id])
            J[row, e.id] = -2.0 * e.a * abs(phi[e.id])
            if m in lay.col:
                J[row, lay.col[m]] += 1.0
            if n in lay.col:
                J[row, lay.col[n]] -= 1.0
        else:
            g[row] = psi[n] - e.alpha * psi[m]
            if n in lay.col:
                J[row, lay.col[n]] += 1.0
            if m in lay.col:
                J[row, lay.col[m]] -= e.alpha

    base = nb + net.P
    for i, n in enumerate(lay.extra_pressure):
        g[base + i] = psi[n] - spec.fixed_pressure[n]
        J[base + i, lay.col[n]] = 1.0
    return g, J


def residual_norm(net: Network, spec: GfSpec, phi, psi) -> float:
    lay = StateLayout(net, spec)
    g, _ = residual_and_jacobian(net, spec, lay.pack(phi, psi))
    return float(np.linalg.norm(g))


def gap_per_edge(net: Network, psi, phi) -> np.ndarray:
    """Relative slack of the Weymouth law on each pipe (NaN on compressors).

    Pipes with ``a phi^2 < 1e-12`` are measured against an absolute
    tolerance of 1e-6 instead: ``(|dpsi| - 1e-6) / 1e-6``.
    """
    psi = np.asarray(psi, dtype=float)
    phi = np.asarray(phi, dtype=float)
    out = np.full(net.P, np.nan)
    for e in net.pipes:
        drop = abs(psi[e.source] - psi[e.target])
        w = e.a * phi[e.id] ** 2
        if w < ZERO_FLOW_DROP:
            out[e.id] = (drop - ZERO_FLOW_TOL) / ZERO_FLOW_TOL
        else:
            out[e.id] = (drop - w) / w
    return out


def exactness_gap(net: Network, psi, phi) -> float:
    """Inexactness gap: largest relative Weymouth slack over pipes, floored at 0."""
    per = gap_per_edge(net, psi, phi)
    per = per[~np.isnan(per)]
    if per.size == 0:
        return 0.0
    return max(0.0, float(per.max()))
