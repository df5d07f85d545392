"""Best-first branch-and-bound over the flow-direction binaries."""
from __future__ import annotations

import heapq
import itertools
import time
from dataclasses import dataclass, field

import numpy as np

from ..network import GfSpec, Network
from . import barrier
from .barrier import BarrierOptions, solve_continuous
from .model import Bounds, RelaxedModel, assemble_model

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
ITERATION_LIMIT = "iteration-limit"
FAILURE = "subsolver-failure"

INT_TOL = 1e-6
PRUNE_TOL = 1e-9


@dataclass(order=True)
class BnbNode:
    lower_bound: float
    neg_depth: int
    seq: int
    fixed: dict = field(compare=False, default_factory=dict)
    v: np.ndarray | None = field(compare=False, default=None, repr=False)
    value: float = field(compare=False, default=float("inf"))

    @property
    def depth(self) -> int:
        return -self.neg_depth


@dataclass
class MiqcqpResult:
    status: str
    objective: float = float("inf")
    v: np.ndarray | None = field(default=None, repr=False)
    q: np.ndarray | None = None
    phi: np.ndarray | None = None
    psi: np.ndarray | None = None
    x: np.ndarray | None = None
    slack: np.ndarray | None = None
    root_bound: float = float("nan")
    nodes: int = 0
    subsolver_iterations: int = 0
    seconds: float = 0.0
    model: RelaxedModel | None = field(default=None, repr=False)


def _fractionality(model: RelaxedModel, v) -> np.ndarray:
    x = v[model.blocks["x"]]
    return np.minimum(x, 1.0 - x)


def _unpack(model: RelaxedModel, v, res: MiqcqpResult) -> None:
    parts = model.split(v)
    net, spec = model.net, model.spec
    q = spec.injections(net)
    implied = net.incidence.T @ parts["phi"]
    for n in spec.fixed_pressure:
        q[n] = implied[n]
    res.v = v
    res.q, res.phi, res.psi = q, parts["phi"].copy(), parts["psi"].copy()
    x = np.round(parts["x"])
    # x is ambiguous at zero flow; report the forward direction
    phi_pipes = parts["phi"][model.pipes]
    x[np.abs(phi_pipes) <= 1e-9 * max(1.0, np.abs(parts["phi"]).max())] = 1.0
    res.x = x
    res.slack = model.weymouth_slack(v)


def branch_and_bound(model: RelaxedModel, node_limit: int = 100_000,
                     options: BarrierOptions | None = None) -> MiqcqpResult:
    """Global minimum of the relaxed problem over binary flow directions.

    Nodes are expanded in order of lower bound (then depth, then creation
    order, so the search is deterministic). Branching picks the most
    fractional binary, lowest edge id on ties. A node whose certified lower
    bound reaches the incumbent (less ``1e-9``) is pruned. When a relaxation
    comes out integral its binaries are fixed and it is re-solved so the
    incumbent has exact McCormick products.
    """
    t0 = time.perf_counter()
    counter = itertools.count()
    stats = {"nodes": 0, "iters": 0}
    incumbent = {"obj": float("inf"), "v": None}

    def solve(fixed, cutoff=None):
        r = solve_continuous(model, fixed, cutoff=cutoff, options=options)
        stats["nodes"] += 1
        stats["iters"] += r.newton_iterations
        return r

    def cutoff():
        inc = incumbent["obj"]
        return inc - PRUNE_TOL * max(1.0, abs(inc)) if np.isfinite(inc) else None

    def dominated(value):
        c = cutoff()
        return c is not None and value >= c

    def consider(node_fixed, r):
        """Returns an open node, or None if the relaxation closed it."""
        frac = _fractionality(model, r.v)
        if frac.max(initial=0.0) <= INT_TOL:
            x = np.round(r.v[model.blocks["x"]])
            full = {k: int(x[k]) for k in range(model.n_binary)}
            pr = solve(full, cutoff()) if full != node_fixed else r
            if pr.status == barrier.OPTIMAL and pr.objective < incumbent["obj"]:
                incumbent["obj"], incumbent["v"] = pr.objective, pr.v
            return None
        return r

    result = MiqcqpResult(status=INFEASIBLE, model=model)
    base = dict(model.forced)
    root = solve(base)
    result.root_bound = root.lower_bound
    if root.status == barrier.FAILURE:
        result.status = FAILURE
    if root.status != barrier.OPTIMAL:
        return _finish(result, incumbent, stats, t0, model)

    heap: list[BnbNode] = []
    if consider(base, root) is not None:
        heapq.heappush(heap, BnbNode(root.lower_bound, 0, next(counter), base, root.v, root.objective))

    status = None
    while heap:
        node = heapq.heappop(heap)
        if dominated(node.value):
            continue
        if stats["nodes"] >= node_limit:
            status = ITERATION_LIMIT
            break
        frac = _fractionality(model, node.v)
        k = int(np.argmax(frac))
        for b in (0, 1):
            child = dict(node.fixed)
            child[k] = b
            r = solve(child, cutoff())
            if r.status == barrier.FAILURE:
                status = FAILURE
                continue
            if r.status != barrier.OPTIMAL:
                continue
            lb = max(node.lower_bound, r.lower_bound)
            if dominated(r.objective):
                continue
            if consider(child, r) is not None:
                heapq.heappush(heap, BnbNode(lb, node.neg_depth - 1, next(counter), child, r.v,
                                             r.objective))
    if status is not None:
        result.status = status
    return _finish(result, incumbent, stats, t0, model)


def _finish(result, incumbent, stats, t0, model) -> MiqcqpResult:
    if incumbent["v"] is not None:
        if result.status == INFEASIBLE:
            result.status = OPTIMAL
        result.objective = incumbent["obj"]
        _unpack(model, incumbent["v"], result)
    elif result.status == OPTIMAL:
        result.status = INFEASIBLE
    result.nodes = stats["nodes"]
    result.subsolver_iterations = stats["iters"]
    result.seconds = time.perf_counter() - t0
    return result


def solve_miqcqp(net: Network, spec: GfSpec, bounds: Bounds | None = None,
                 node_limit: int = 100_000) -> MiqcqpResult:
    """Assemble the relaxation and solve it by branch-and-bound."""
    return branch_and_bound(assemble_model(net, spec, bounds), node_limit=node_limit)
