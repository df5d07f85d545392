"""Assembly of the mixed-integer relaxation of the gas-flow equations.

Variables are stacked as ``[q_fixed_pressure, phi, psi, z, t, x]``:

* ``q`` - injections of the fixed-pressure nodes (free),
* ``z`` - two McCormick products ``x_l * psi`` per lossy pipe (origin, destination),
* ``t`` - epigraph variables of ``|psi_m - psi_n|`` for objective pipes,
* ``x`` - flow-direction binaries, one per lossy pipe (1 means ``phi >= 0``).

Constraint data is kept in plain arrays: equalities ``E v = e``, linear rows
``G v <= h`` (each tagged with the pipe it belongs to, or -1) and convex
quadratic rows ``a phi_l^2 + g.v <= 0``: one relaxed Weymouth row per lossy
pipe, followed (optionally) by one cut ``a phi_l^2 <= t_l`` per objective pipe.
The cut holds at every point with integral ``x`` because there
``t_l >= |psi_m - psi_n| >= a phi_l^2``; it leaves the optimum unchanged and
lifts the relaxed bound from zero to the least flow energy.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

import scipy.linalg

from ..network import GfSpec, Network, NetworkError
from ..topology import CycleBasis, fundamental_cycles, spanning_tree

# row kinds of the linear block
MCCORMICK = "mccormick"
DIRECTION = "direction"
XBOUND = "xbound"
PSIBOUND = "psibound"
COMPFLOW = "compflow"
EPIGRAPH = "epigraph"
TBOUND = "tbound"


@dataclass(frozen=True)
class Bounds:
    psi_lo: np.ndarray
    psi_hi: np.ndarray
    phi_bar: np.ndarray

    def validate(self, net: Network) -> None:
        for name, arr, size in (("psi_lo", self.psi_lo, net.N), ("psi_hi", self.psi_hi, net.N),
                                ("phi_bar", self.phi_bar, net.P)):
            if np.shape(arr) != (size,):
                raise NetworkError(f"bound {name} must have length {size}")
            if not np.isfinite(arr).all():
                raise NetworkError(f"bound {name} must be finite")
        if (self.psi_lo < 0).any() or (self.psi_hi <= self.psi_lo).any():
            raise NetworkError("pressure bounds must satisfy 0 <= psi_lo < psi_hi")
        if (self.phi_bar <= 0).any():
            raise NetworkError("flow bounds must be positive")


def default_bounds(net: Network, spec: GfSpec, psi_hi: float | None = None,
                   phi_bar: float | None = None) -> Bounds:
    """``psi in [0, 10 max fixed pressure]`` and ``|phi| <= 1.5 x total supply``.

    With several fixed-pressure nodes the supply there is unknown, so the
    larger of known supply and known demand is used.
    """
    if psi_hi is None:
        psi_hi = 10.0 * max(spec.fixed_pressure.values())
    if phi_bar is None:
        q = spec.injections(net)
        known = [n for n in range(net.N) if n not in spec.fixed_pressure or spec.single_reference]
        qk = q[known]
        total = max(np.clip(qk, 0, None).sum(), np.clip(-qk, 0, None).sum())
        phi_bar = 1.5 * total if total > 0 else 1.0
    return Bounds(np.zeros(net.N), np.full(net.N, float(psi_hi)), np.full(net.P, float(phi_bar)))


@dataclass(eq=False)
class RelaxedModel:
    net: Network
    spec: GfSpec
    bounds: Bounds
    basis: CycleBasis
    n_var: int
    blocks: dict[str, slice]
    pipes: list[int]                # lossy pipe edge ids, one binary each
    objective_pipes: list[int]      # pipes entering the objective
    c: np.ndarray
    E: np.ndarray
    e: np.ndarray
    G: np.ndarray
    h: np.ndarray
    row_kind: list[str]
    row_pipe: np.ndarray            # pipe position (index into ``pipes``) or -1
    quad_a: np.ndarray              # per lossy pipe
    quad_var: np.ndarray            # index of phi_l
    quad_G: np.ndarray              # linear part of each quadratic row
    forced: dict[int, int] = field(default_factory=dict)
    info: dict = field(default_factory=dict)

    # -- variable index helpers -------------------------------------------------
    def q_index(self, node: int) -> int:
        return self.blocks["q"].start + sorted(self.spec.fixed_pressure).index(node)

    def phi_index(self, edge: int) -> int:
        return self.blocks["phi"].start + edge

    def psi_index(self, node: int) -> int:
        return self.blocks["psi"].start + node

    def z_index(self, k: int, end: int) -> int:
        """``end`` 0 is the origin product ``x psi_m``, 1 the destination."""
        return self.blocks["z"].start + 2 * k + end

    def x_index(self, k: int) -> int:
        return self.blocks["x"].start + k

    @property
    def n_binary(self) -> int:
        return len(self.pipes)

    def split(self, v) -> dict[str, np.ndarray]:
        v = np.asarray(v, dtype=float)
        return {name: v[s] for name, s in self.blocks.items()}

    def objective(self, v) -> float:
        return float(self.c @ v)

    def weymouth_slack(self, v) -> np.ndarray:
        """Relaxed Weymouth rows: ``(2 z_m - 2 z_n + psi_n - psi_m) - a phi^2`` (>= 0)."""
        v = np.asarray(v, dtype=float)
        L = self.n_binary
        return -(self.quad_a[:L] * v[self.quad_var[:L]] ** 2 + self.quad_G[:L] @ v)

    def max_violation(self, v) -> float:
        """Largest violation over all rows, each row scaled by its coefficient norm."""
        v = np.asarray(v, dtype=float)
        eq = np.abs(self.E @ v - self.e) / np.maximum(np.linalg.norm(self.E, axis=1), 1e-300)
        lin = (self.G @ v - self.h) / np.maximum(np.linalg.norm(self.G, axis=1), 1e-300)
        qn = np.linalg.norm(self.quad_G, axis=1)
        quad = (self.quad_a * v[self.quad_var] ** 2 + self.quad_G @ v) / np.maximum(qn, 1e-300)
        parts = [eq.max(initial=0.0), lin.max(initial=0.0), quad.max(initial=0.0)]
        return float(max(parts))


def assemble_model(net: Network, spec: GfSpec, bounds: Bounds | None = None,
                   basis: CycleBasis | None = None, cuts: bool = True) -> RelaxedModel:
    """Build the relaxation with McCormick products, relaxed Weymouth rows,
    direction links and the pressure-difference objective.

    The objective sums ``|psi_m - psi_n|`` over lossy pipes outside active
    cycles (cycles of ``basis`` that contain a compressor); by default the
    basis is the fundamental basis of the depth-first tree at the reference.

    ``forced`` lists binaries whose direction mass balance alone decides:
    pipes whose flow is the same at every mass-balanced point (bridges with
    known injections on one side). A zero forced flow gets ``x = 1``.
    """
    spec.validate(net)
    if bounds is None:
        bounds = default_bounds(net, spec)
    bounds.validate(net)
    for n, v in spec.fixed_pressure.items():
        if not bounds.psi_lo[n] <= v <= bounds.psi_hi[n]:
            raise NetworkError(f"fixed pressure at node {n} lies outside its bounds")
    if basis is None:
        basis = fundamental_cycles(net, spanning_tree(net, spec.reference))

    pipes = [e.id for e in net.pipes]
    active = basis.active_edges()
    objective_pipes = [p for p in pipes if p not in active]
    fixed_nodes = sorted(spec.fixed_pressure)
    L, T = len(pipes), len(objective_pipes)

    sizes = [("q", len(fixed_nodes)), ("phi", net.P), ("psi", net.N), ("z", 2 * L), ("t", T), ("x", L)]
    blocks, start = {}, 0
    for name, size in sizes:
        blocks[name] = slice(start, start + size)
        start += size
    nv = start
    PHI, PSI, Z, TT, X = (blocks[k].start for k in ("phi", "psi", "z", "t", "x"))

    c = np.zeros(nv)
    c[blocks["t"]] = 1.0

    # equalities: mass balance at every node, fixed pressures, compressor ratios
    E_rows, e_vals = [], []
    q_given = spec.injections(net)
    A = net.incidence
    for n in range(net.N):
        row = np.zeros(nv)
        row[PHI:PHI + net.P] = A[:, n]
        if n in spec.fixed_pressure:
            row[blocks["q"].start + fixed_nodes.index(n)] = -1.0
            e_vals.append(0.0)
        else:
            e_vals.append(q_given[n])
        E_rows.append(row)
    for n in fixed_nodes:
        row = np.zeros(nv)
        row[PSI + n] = 1.0
        E_rows.append(row)
        e_vals.append(spec.fixed_pressure[n])
    for e in net.compressors:
        row = np.zeros(nv)
        row[PSI + e.target] = 1.0
        row[PSI + e.source] = -e.alpha
        E_rows.append(row)
        e_vals.append(0.0)

    G_rows, h_vals, kinds, owner = [], [], [], []

    def add(coeffs, rhs, kind, k=-1):
        row = np.zeros(nv)
        for idx, val in coeffs:
            row[idx] += val
        G_rows.append(row)
        h_vals.append(rhs)
        kinds.append(kind)
        owner.append(k)

    lo, hi, pb = bounds.psi_lo, bounds.psi_hi, bounds.phi_bar
    for n in range(net.N):
        add([(PSI + n, -1.0)], -lo[n], PSIBOUND)
        add([(PSI + n, 1.0)], hi[n], PSIBOUND)
    for e in net.compressors:
        add([(PHI + e.id, -1.0)], 0.0, COMPFLOW)
        add([(PHI + e.id, 1.0)], pb[e.id], COMPFLOW)

    quad_a = np.zeros(L)
    quad_var = np.zeros(L, dtype=int)
    quad_G = np.zeros((L, nv))
    for k, eid in enumerate(pipes):
        e = net.edges[eid]
        xk = X + k
        for end, node in ((0, e.source), (1, e.target)):
            zk = Z + 2 * k + end
            p = PSI + node
            # x lo <= z <= x hi ;  psi + (x-1) hi <= z <= psi + (x-1) lo
            add([(xk, lo[node]), (zk, -1.0)], 0.0, MCCORMICK, k)
            add([(zk, 1.0), (xk, -hi[node])], 0.0, MCCORMICK, k)
            add([(p, 1.0), (xk, hi[node]), (zk, -1.0)], hi[node], MCCORMICK, k)
            add([(zk, 1.0), (p, -1.0), (xk, -lo[node])], -lo[node], MCCORMICK, k)
        # -pb (1 - x) <= phi <= pb x
        add([(PHI + eid, 1.0), (xk, -pb[eid])], 0.0, DIRECTION, k)
        add([(PHI + eid, -1.0), (xk, pb[eid])], pb[eid], DIRECTION, k)
        add([(xk, -1.0)], 0.0, XBOUND, k)
        add([(xk, 1.0)], 1.0, XBOUND, k)
        quad_a[k] = e.a
        quad_var[k] = PHI + eid
        quad_G[k, Z + 2 * k] = -2.0
        quad_G[k, Z + 2 * k + 1] = 2.0
        quad_G[k, PSI + e.target] = -1.0
        quad_G[k, PSI + e.source] = 1.0

    for j, eid in enumerate(objective_pipes):
        e = net.edges[eid]
        m, n = PSI + e.source, PSI + e.target
        add([(m, 1.0), (n, -1.0), (TT + j, -1.0)], 0.0, EPIGRAPH)
        add([(m, -1.0), (n, 1.0), (TT + j, -1.0)], 0.0, EPIGRAPH)
        # |psi_m - psi_n| never exceeds the pressure range; keeps the t block bounded
        add([(TT + j, 1.0)], max(hi[e.source], hi[e.target]) - min(lo[e.source], lo[e.target]) + 1.0,
            TBOUND)

    if cuts and T:
        cut_G = np.zeros((T, nv))
        cut_G[np.arange(T), TT + np.arange(T)] = -1.0
        quad_a = np.concatenate([quad_a, [net.edges[eid].a for eid in objective_pipes]])
        quad_var = np.concatenate([quad_var, [PHI + eid for eid in objective_pipes]]).astype(int)
        quad_G = np.vstack([quad_G, cut_G])

    E = np.array(E_rows)
    e_vec = np.array(e_vals)
    return RelaxedModel(
        net=net, spec=spec, bounds=bounds, basis=basis, n_var=nv, blocks=blocks, pipes=pipes,
        objective_pipes=objective_pipes, c=c, E=E, e=e_vec,
        G=np.array(G_rows), h=np.array(h_vals), row_kind=kinds, row_pipe=np.array(owner),
        quad_a=quad_a, quad_var=quad_var, quad_G=quad_G,
        forced=_forced_directions(E, e_vec, [PHI + eid for eid in pipes]),
    )


def _forced_directions(E, e, phi_cols) -> dict[int, int]:
    """Binaries fixed by mass balance: flows constant on ``{E v = e}``."""
    v0, *_ = np.linalg.lstsq(E, e, rcond=None)
    if np.abs(E @ v0 - e).max(initial=0.0) > 1e-8 * max(1.0, np.abs(e).max(initial=0.0)):
        return {}
    Z = scipy.linalg.null_space(E)
    out = {}
    for k, col in enumerate(phi_cols):
        if np.linalg.norm(Z[col]) <= 1e-9:
            out[k] = 0 if v0[col] < -1e-12 * max(1.0, np.abs(v0).max()) else 1
    return out
