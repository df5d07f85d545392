"""Flow correction on active cycles and recovery of a full gas-flow solution
from the relaxation output.

On a cycle containing compressors the relaxation may return flows that differ
from the physical ones by a multiple of the cycle indicator. The correction
searches for that multiple ``lambda`` by bisection: walking around the cycle
from an anchor node with flows ``phi' + lambda n_C`` must bring the pressure
back to its starting value.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .network import Edge, GfSolution, GfSpec, Network
from .physics import exactness_gap, propagate_pressures, residual_norm
from .topology import Cycle, CycleBasis, fundamental_cycles, spanning_tree

DEFAULT_EPSILON = 1e-8
MAX_BISECTION = 200


class RecoveryError(RuntimeError):
    """Bisection could not close an active cycle."""

    def __init__(self, message: str, cycle: int | None = None):
        super().__init__(message)
        self.cycle = cycle


@dataclass(frozen=True)
class CycleCorrectionInput:
    """Data for correcting one active cycle.

    ``nodes[0]`` is the anchor with known pressure ``psi0``; ``edges[i]``
    joins ``nodes[i]`` to ``nodes[i + 1]`` (cyclically) and ``nC[i]`` is +1
    when that edge points along the traversal.
    """

    psi0: float
    phiC_prime: np.ndarray
    nC: np.ndarray
    edges: tuple[Edge, ...]
    nodes: tuple[int, ...]
    lambda_lo: float
    lambda_hi: float
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self):
        k = len(self.edges)
        if len(self.nodes) != k or len(self.phiC_prime) != k or len(self.nC) != k:
            raise ValueError("cycle edges, nodes, flows and signs must have equal length")
        if not self.lambda_lo <= self.lambda_hi:
            raise ValueError("empty bisection bracket")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")

    @classmethod
    def from_cycle(cls, net: Network, cycle: Cycle, anchor: int, psi0: float, phi,
                   phi_bar: float, epsilon: float = DEFAULT_EPSILON) -> "CycleCorrectionInput":
        """Rotate ``cycle`` to start at ``anchor`` and build the bracket
        ``[-phi_bar, phi_bar]`` tightened so compressor flows stay nonnegative."""
        i = cycle.nodes.index(anchor)
        order = list(range(i, len(cycle.nodes))) + list(range(i))
        eids = [cycle.edges[j] for j in order]
        signs = np.array([cycle.signs[j] for j in order], dtype=float)
        flows = np.asarray(phi, dtype=float)[eids]
        lo, hi = -float(phi_bar), float(phi_bar)
        for k, eid in enumerate(eids):
            if net.edges[eid].is_compressor:
                # phi + lambda s >= 0
                if signs[k] > 0:
                    lo = max(lo, -flows[k])
                else:
                    hi = min(hi, flows[k])
        if lo > hi:
            raise RecoveryError("compressor directions leave no admissible correction")
        return cls(float(psi0), flows, signs, tuple(net.edges[e] for e in eids),
                   tuple(cycle.nodes[j] for j in order), lo, hi, epsilon)

    def flows(self, lam: float) -> np.ndarray:
        return self.phiC_prime + lam * self.nC


@dataclass
class CycleCorrection:
    phiC: np.ndarray
    psiC: np.ndarray
    lam: float
    closure: float
    iterations: int


def _walk(inp: CycleCorrectionInput, phi_c) -> tuple[np.ndarray, float]:
    """Pressures at ``nodes`` and the returned anchor pressure; ``-inf`` once
    any pressure goes negative."""
    psi = np.empty(len(inp.nodes))
    cur = inp.psi0
    for i, e in enumerate(inp.edges):
        psi[i] = cur
        forward = inp.nC[i] > 0
        if e.is_pipe:
            d = e.a * phi_c[i] * abs(phi_c[i])
            cur = cur - d if forward else cur + d
        else:
            cur = e.alpha * cur if forward else cur / e.alpha
        if cur < 0:
            return psi, -np.inf
    return psi, cur


def cycle_pressure_closure(inp: CycleCorrectionInput, phi_candidate) -> float:
    """Anchor pressure obtained by walking once around the cycle.

    A negative intermediate pressure yields ``-inf``.
    """
    return _walk(inp, np.asarray(phi_candidate, dtype=float))[1]


def correct_active_cycle(inp: CycleCorrectionInput) -> CycleCorrection:
    """Bisection on ``lambda`` until the walk closes within ``epsilon``.

    The closure error is monotone in ``lambda``; its direction is read off the
    bracket endpoints.

    Raises
    ------
    RecoveryError
        If the bracket holds no sign change or the iteration cap is reached.
    """
    def err(lam):
        return cycle_pressure_closure(inp, inp.flows(lam)) - inp.psi0

    lo, hi = inp.lambda_lo, inp.lambda_hi
    for lam in (0.0, lo, hi):
        if lo <= lam <= hi and abs(err(lam)) < inp.epsilon:
            return _finish(inp, lam, 0)
    e_lo, e_hi = err(lo), err(hi)
    if np.sign(e_lo) == np.sign(e_hi):
        raise RecoveryError(f"closure error has the same sign at both bracket ends "
                            f"({e_lo:.3g}, {e_hi:.3g})")
    rising = e_hi > e_lo
    for it in range(1, MAX_BISECTION + 1):
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            break
        e = err(mid)
        if abs(e) < inp.epsilon:
            return _finish(inp, mid, it)
        if (e > 0) == rising:
            hi = mid
        else:
            lo = mid
    raise RecoveryError(f"bisection did not close the cycle within {inp.epsilon:g}")


def _finish(inp, lam, its) -> CycleCorrection:
    phi_c = inp.flows(lam)
    psi, back = _walk(inp, phi_c)
    return CycleCorrection(phi_c, psi, float(lam), float(abs(back - inp.psi0)), its)


@dataclass
class RecoveryReport:
    """Which cycles were corrected, with their anchors and ``lambda``."""

    corrections: list[tuple[int, int, float]] = field(default_factory=list)
    overlapping: bool = False


def recover_full_solution(net: Network, spec: GfSpec, phi_prime, phi_bar: float | None = None,
                          epsilon: float = DEFAULT_EPSILON,
                          basis: CycleBasis | None = None) -> GfSolution:
    """Full ``(q, phi, psi)`` from relaxation flows ``phi_prime``.

    A depth-first spanning tree is rooted at the reference node. Walking it in
    preorder, the first node met on each uncorrected active cycle becomes
    its anchor and the cycle is corrected with the anchor pressure implied by
    the flows so far. Pressures then follow from the final flows along the
    tree. Flows off active cycles are returned unchanged.

    Raises
    ------
    RecoveryError
        Propagated from the correction, tagged with the cycle index.
    """
    t0 = time.perf_counter()
    phi = np.array(phi_prime, dtype=float)
    if phi.shape != (net.P,):
        raise ValueError(f"phi_prime must have length {net.P}")
    tree = spanning_tree(net, spec.reference)
    if basis is None:
        basis = fundamental_cycles(net, tree)
    if phi_bar is None:
        q = spec.injections(net)
        phi_bar = 1.5 * float(np.clip(q, 0.0, None).sum())
        phi_bar = max(phi_bar, 1.5 * float(np.abs(phi).max(initial=0.0)), 1.0)
    else:
        phi_bar = float(np.max(phi_bar))
    psi_root = spec.fixed_pressure[spec.reference]

    report = RecoveryReport(overlapping=basis.overlapping)
    pending = [i for i, c in enumerate(basis.cycles) if c.active]
    for n in tree.preorder:
        for ci in list(pending):
            cyc = basis.cycles[ci]
            if n not in cyc.nodes:
                continue
            psi_now, _ = propagate_pressures(net, tree, phi, psi_root, check=False)
            try:
                inp = CycleCorrectionInput.from_cycle(net, cyc, n, psi_now[n], phi, phi_bar, epsilon)
                corr = correct_active_cycle(inp)
            except RecoveryError as exc:
                raise RecoveryError(f"active cycle {ci}: {exc}", ci) from exc
            phi[[e.id for e in inp.edges]] = corr.phiC
            report.corrections.append((ci, n, corr.lam))
            pending.remove(ci)

    psi, _ = propagate_pressures(net, tree, phi, psi_root, check=False)
    q = net.incidence.T @ phi
    sol = GfSolution(q=q, phi=phi, psi=psi, solver="miqcqp", status="recovered",
                     seconds=time.perf_counter() - t0)
    sol.gap = exactness_gap(net, psi, phi)
    sol.residual = residual_norm(net, spec, phi, psi)
    sol.feasible = bool((psi >= 0).all())
    sol.info["recovery"] = report
    return sol
