"""Sufficient conditions for the relaxation to be exact."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..network import GfSpec, Network
from ..topology import CycleBasis, detect_circulation, fundamental_cycles, spanning_tree

EXACT = "exact"
EXACT_OFF_ACTIVE = "exact-outside-active-cycles"
NONE = "none"
UNDECIDED = "undecided-without-flow"


@dataclass
class ConditionReport:
    """Which sufficient conditions hold and the guarantee they give.

    ``no_circulation`` is ``None`` when no flow was supplied. ``guarantee``
    is ``exact`` (no compressor lies on a cycle: the relaxation solves the
    gas-flow problem), ``exact-outside-active-cycles`` (flows off cycles with
    compressors are correct; the rest needs cycle correction),
    ``undecided-without-flow`` (only circulation is unchecked) or ``none``.
    """

    single_fixed_pressure: bool
    edges_in_one_cycle: bool
    no_circulation: bool | None
    n_cycles: int
    n_active_cycles: int
    circulating: list[int] = field(default_factory=list)
    guarantee: str = NONE

    def lines(self) -> list[str]:
        def mark(v):
            return "n/a" if v is None else ("yes" if v else "NO")
        out = [
            f"single fixed-pressure node     : {mark(self.single_fixed_pressure)}",
            f"every edge on at most one cycle: {mark(self.edges_in_one_cycle)}",
            f"no circulation                 : {mark(self.no_circulation)}",
            f"cycles / with compressors      : {self.n_cycles} / {self.n_active_cycles}",
        ]
        if self.circulating:
            out.append(f"circulating cycles             : {self.circulating}")
        out.append(f"guarantee                      : {self.guarantee}")
        return out


def certify_conditions(net: Network, spec: GfSpec, phi=None,
                       basis: CycleBasis | None = None) -> ConditionReport:
    """Evaluate the three sufficient exactness conditions.

    Every edge lies on at most one cycle exactly when the fundamental cycles
    of a spanning tree are pairwise edge-disjoint (the sum of two disjoint
    cycles is never a simple cycle), so the fundamental basis decides it.
    Circulation is checked on ``phi`` over every cycle of that basis.
    """
    if basis is None:
        basis = fundamental_cycles(net, spanning_tree(net, spec.reference))
    c1 = spec.single_reference
    c2 = not basis.overlapping
    n_active = sum(basis.active)
    circ: list[int] = []
    c3 = None
    if phi is not None:
        phi = np.asarray(phi, dtype=float)
        bad = {id(c) for c in detect_circulation(basis, phi)}
        circ = [i for i, c in enumerate(basis.cycles) if id(c) in bad]
        c3 = not circ
    if c1 and c2 and n_active == 0:
        guarantee = EXACT
    elif c1 and c2 and c3:
        guarantee = EXACT_OFF_ACTIVE
    elif c1 and c2 and c3 is None:
        guarantee = UNDECIDED
    else:
        guarantee = NONE
    return ConditionReport(c1, c2, c3, len(basis.cycles), n_active, circ, guarantee)
