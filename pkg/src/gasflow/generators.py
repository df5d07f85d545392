"""Random instance families derived from a base instance.

Both generators are pure functions of ``(base, count, seed)``. Each returned
instance records its family, seed and index as ``meta`` entries.
"""
from __future__ import annotations

from dataclasses import replace

import numpy as np

from .instances import EdgeRecord, Instance, NodeRecord
from .network import COMPRESSOR, PRESSURE

GASLIB_REFERENCE_PSI = 50.0 ** 2
SCALE_RANGE = (0.75, 1.25)
RATIO_RANGE = (1.0, 2.0)


def _base_injection(n: NodeRecord) -> float:
    if n.kind == PRESSURE:
        return 0.0 if n.nominal is None else n.nominal
    return n.value


def _with_injections(base: Instance, q: dict[str, float]) -> tuple[NodeRecord, ...]:
    out = []
    for n in base.nodes:
        if n.name not in q:
            out.append(n)
        elif n.kind == PRESSURE:
            out.append(replace(n, nominal=q[n.name]))
        else:
            out.append(replace(n, value=q[n.name]))
    return tuple(out)


def _label(base: Instance, family: str, seed: int, index: int) -> Instance:
    name = f"{base.name or 'instance'} #{index}"
    return replace(base, name=name).with_meta(family=family, seed=seed, index=index)


def _require_balancing(base: Instance) -> str:
    if base.balancing is None:
        raise ValueError("base instance has no balancing node")
    return base.balancing


def generate_belgian_style(base: Instance, count: int, seed: int) -> list[Instance]:
    """Perturb every non-balancing base injection by a standard normal draw.

    The balancing node takes the negative sum of the rest. A fixed-pressure
    node contributes through its ``nominal`` injection.
    """
    bal = _require_balancing(base)
    rng = np.random.default_rng(seed)
    others = [n for n in base.nodes if n.name != bal]
    q0 = np.array([_base_injection(n) for n in others])
    out = []
    for k in range(count):
        q = q0 + rng.standard_normal(len(others))
        values = {n.name: float(v) for n, v in zip(others, q)}
        values[bal] = float(-q.sum())
        inst = replace(base, nodes=_with_injections(base, values))
        out.append(_label(inst, "belgian", seed, k))
    return out


def station_groups(edges) -> list[list[int]]:
    """Indices of compressor records grouped by shared endpoints."""
    groups: dict[tuple[str, str], list[int]] = {}
    for i, e in enumerate(edges):
        if e.kind == COMPRESSOR:
            groups.setdefault((e.source, e.target), []).append(i)
    return list(groups.values())


def generate_gaslib_style(base: Instance, count: int, seed: int,
                          reference_psi: float = GASLIB_REFERENCE_PSI) -> list[Instance]:
    """Scale base injections and redraw compressor ratios.

    Every injection other than the reference's is multiplied by an
    independent factor from ``U[0.75, 1.25]``; the reference balances the
    network and is held at ``reference_psi``. Each station group (parallel
    compressors between the same two nodes) gets one ratio from ``U[1, 2]``.
    """
    ref = base.reference or next(n.name for n in base.nodes if n.kind == PRESSURE)
    rng = np.random.default_rng(seed)
    others = [n for n in base.nodes if n.name != ref]
    q0 = np.array([_base_injection(n) for n in others])
    groups = station_groups(base.edges)
    out = []
    for k in range(count):
        q = q0 * rng.uniform(*SCALE_RANGE, len(others))
        ratios = rng.uniform(*RATIO_RANGE, len(groups))
        values = {n.name: float(v) for n, v in zip(others, q)}
        values[ref] = float(-q.sum())
        nodes = tuple(replace(n, value=reference_psi) if n.name == ref else n
                      for n in _with_injections(base, values))
        edges: list[EdgeRecord] = list(base.edges)
        for group, r in zip(groups, ratios):
            for i in group:
                edges[i] = replace(edges[i], alpha=float(r))
        inst = replace(base, nodes=nodes, edges=tuple(edges), reference=ref, balancing=ref)
        out.append(_label(inst, "gaslib", seed, k))
    return out
