"""Plain-text instance files.

Grammar (one statement per line, ``#`` starts a comment)::

    gasflow-instance 1
    name <text>
    meta <key> <value>
    node <id> pressure <psi> [nominal <q>]
    node <id> injection <q>
    pipe <from> <to> <a>
    compressor <from> <to> <alpha> <a>
    reference <id>
    balancing <id>
    bounds psi_hi <value>
    bounds phi_bar <value>

The header line must come first. ``compressor`` declares a station: an ideal
compressor followed by a lossy pipe of friction ``a``. Pressures are squared
pressures (bar^2). ``nominal`` records the base injection of a
fixed-pressure node for the instance generators. Numbers are written with 17
significant digits so ``parse_instance(write_instance(x)) == x``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

from .network import COMPRESSOR, INJECTION, PIPE, PRESSURE, GfSpec, Network, NetworkError, build_network

HEADER = "gasflow-instance"
VERSION = 1
BUILTIN = {
    "belgian": "belgian_analog.gfi",
    "gaslib40": "gaslib40_analog.gfi",
}


class InstanceError(ValueError):
    """Malformed instance document; carries the source path and line."""

    def __init__(self, message: str, line: int | None = None, path: str = "<string>"):
        where = f"{path}:{line}" if line is not None else path
        super().__init__(f"{where}: {message}")
        self.line = line
        self.path = path
        self.reason = message


@dataclass(frozen=True)
class NodeRecord:
    name: str
    kind: str
    value: float
    nominal: float | None = None


@dataclass(frozen=True)
class EdgeRecord:
    kind: str
    source: str
    target: str
    a: float
    alpha: float | None = None


@dataclass(frozen=True)
class Instance:
    """Parsed instance document."""

    nodes: tuple[NodeRecord, ...]
    edges: tuple[EdgeRecord, ...]
    name: str = ""
    reference: str | None = None
    balancing: str | None = None
    psi_hi: float | None = None
    phi_bar: float | None = None
    meta: tuple[tuple[str, str], ...] = field(default_factory=tuple)

    def network(self) -> Network:
        raw_nodes = [{"id": n.name, n.kind: n.value} for n in self.nodes]
        raw_edges = []
        for e in self.edges:
            raw = {"from": e.source, "to": e.target, "a": e.a}
            if e.kind == COMPRESSOR:
                raw["alpha"] = e.alpha
            raw_edges.append(raw)
        return build_network(raw_nodes, raw_edges)

    def spec(self, net: Network | None = None) -> GfSpec:
        net = net or self.network()
        ref = net.node_index(self.reference) if self.reference is not None else None
        return GfSpec.from_network(net, ref)

    def build(self) -> tuple[Network, GfSpec]:
        net = self.network()
        return net, self.spec(net)

    def bounds(self, net: Network, spec: GfSpec):
        """Relaxation bounds: defaults with this file's overrides."""
        from .miqcqp.model import default_bounds
        return default_bounds(net, spec, psi_hi=self.psi_hi, phi_bar=self.phi_bar)

    def node(self, name: str) -> NodeRecord:
        for n in self.nodes:
            if n.name == name:
                return n
        raise KeyError(name)

    def meta_value(self, key: str, default: str | None = None) -> str | None:
        for k, v in self.meta:
            if k == key:
                return v
        return default

    def with_meta(self, **items) -> "Instance":
        keep = [(k, v) for k, v in self.meta if k not in items]
        return replace(self, meta=tuple(keep + [(k, str(v)) for k, v in items.items()]))


def _num(tok: str, what: str, line: int, path: str) -> float:
    try:
        v = float(tok)
    except ValueError:
        raise InstanceError(f"{what}: expected a number, got {tok!r}", line, path) from None
    if not math.isfinite(v):
        raise InstanceError(f"{what}: value must be finite", line, path)
    return v


def parse_instance(text: str, path: str = "<string>") -> Instance:
    """Parse an instance document.

    Raises
    ------
    InstanceError
        With the offending line for syntax errors, unknown nodes, duplicate
        or antiparallel pipes and invalid values.
    """
    nodes: list[NodeRecord] = []
    names: set[str] = set()
    edges: list[EdgeRecord] = []
    pipes_seen: dict[tuple[str, str], int] = {}
    meta: list[tuple[str, str]] = []
    fields: dict[str, object] = {}
    edge_lines: list[int] = []
    header = False

    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        key = tok[0]
        if not header:
            if key != HEADER or len(tok) != 2:
                raise InstanceError(f"first statement must be '{HEADER} {VERSION}'", ln, path)
            if tok[1] != str(VERSION):
                raise InstanceError(f"unsupported format version {tok[1]!r}", ln, path)
            header = True
            continue

        def arity(*allowed):
            if len(tok) not in allowed:
                raise InstanceError(f"'{key}' takes {' or '.join(str(a - 1) for a in allowed)} fields, "
                                    f"got {len(tok) - 1}", ln, path)

        if key == "name":
            fields["name"] = line[len("name"):].strip()
        elif key == "meta":
            arity(3)
            meta.append((tok[1], tok[2]))
        elif key == "node":
            arity(4, 6)
            name, kind = tok[1], tok[2]
            if name in names:
                raise InstanceError(f"duplicate node {name!r}", ln, path)
            value = _num(tok[3], f"node {name}", ln, path)
            nominal = None
            if kind == PRESSURE:
                if not value > 0:
                    raise InstanceError(f"node {name}: pressure must be positive", ln, path)
                if len(tok) == 6:
                    if tok[4] != "nominal":
                        raise InstanceError(f"node {name}: expected 'nominal', got {tok[4]!r}", ln, path)
                    nominal = _num(tok[5], f"node {name} nominal", ln, path)
            elif kind == INJECTION:
                arity(4)
            else:
                raise InstanceError(f"node {name}: kind must be 'pressure' or 'injection'", ln, path)
            names.add(name)
            nodes.append(NodeRecord(name, kind, value, nominal))
        elif key in (PIPE, COMPRESSOR):
            arity(4 if key == PIPE else 5)
            src, dst = tok[1], tok[2]
            for nm in (src, dst):
                if nm not in names:
                    raise InstanceError(f"{key}: unknown node {nm!r}", ln, path)
            if src == dst:
                raise InstanceError(f"{key}: self loop at {src!r}", ln, path)
            if key == PIPE:
                a = _num(tok[3], "pipe friction", ln, path)
                alpha = None
                if (dst, src) in pipes_seen:
                    raise InstanceError(f"antiparallel edge {src}->{dst} (line {pipes_seen[(dst, src)]} "
                                        f"declares {dst}->{src})", ln, path)
                if (src, dst) in pipes_seen:
                    raise InstanceError(f"duplicate edge {src}->{dst}", ln, path)
                pipes_seen[(src, dst)] = ln
            else:
                alpha = _num(tok[3], "compression ratio", ln, path)
                a = _num(tok[4], "station friction", ln, path)
                if not alpha > 0:
                    raise InstanceError("compression ratio must be positive", ln, path)
            if not a > 0:
                raise InstanceError("friction must be positive", ln, path)
            edges.append(EdgeRecord(key, src, dst, a, alpha))
            edge_lines.append(ln)
        elif key in ("reference", "balancing"):
            arity(2)
            if tok[1] not in names:
                raise InstanceError(f"{key}: unknown node {tok[1]!r}", ln, path)
            if key in fields:
                raise InstanceError(f"{key} given twice", ln, path)
            fields[key] = tok[1]
        elif key == "bounds":
            arity(3)
            if tok[1] not in ("psi_hi", "phi_bar"):
                raise InstanceError(f"unknown bound {tok[1]!r}", ln, path)
            v = _num(tok[2], tok[1], ln, path)
            if not v > 0:
                raise InstanceError(f"{tok[1]} must be positive", ln, path)
            fields[tok[1]] = v
        elif key == HEADER:
            raise InstanceError("repeated header", ln, path)
        else:
            raise InstanceError(f"unknown statement {key!r}", ln, path)

    if not header:
        raise InstanceError("empty document", None, path)
    if not nodes:
        raise InstanceError("no nodes declared", None, path)
    ref = fields.get("reference")
    if ref is not None and next(n for n in nodes if n.name == ref).kind != PRESSURE:
        raise InstanceError(f"reference {ref!r} must be a pressure node", None, path)
    inst = Instance(tuple(nodes), tuple(edges), str(fields.get("name", "")), ref,
                    fields.get("balancing"), fields.get("psi_hi"), fields.get("phi_bar"), tuple(meta))
    try:
        inst.build()
    except NetworkError as exc:
        raise InstanceError(str(exc), None, path) from None
    return inst


def fmt(v: float) -> str:
    """Shortest text with 17 significant digits that reads back exactly."""
    return format(float(v), ".17g")


def write_instance(inst: Instance) -> str:
    lines = [f"{HEADER} {VERSION}"]
    if inst.name:
        lines.append(f"name {inst.name}")
    lines += [f"meta {k} {v}" for k, v in inst.meta]
    for n in inst.nodes:
        s = f"node {n.name} {n.kind} {fmt(n.value)}"
        if n.nominal is not None:
            s += f" nominal {fmt(n.nominal)}"
        lines.append(s)
    for e in inst.edges:
        if e.kind == PIPE:
            lines.append(f"pipe {e.source} {e.target} {fmt(e.a)}")
        else:
            lines.append(f"compressor {e.source} {e.target} {fmt(e.alpha)} {fmt(e.a)}")
    if inst.reference is not None:
        lines.append(f"reference {inst.reference}")
    if inst.balancing is not None:
        lines.append(f"balancing {inst.balancing}")
    if inst.psi_hi is not None:
        lines.append(f"bounds psi_hi {fmt(inst.psi_hi)}")
    if inst.phi_bar is not None:
        lines.append(f"bounds phi_bar {fmt(inst.phi_bar)}")
    return "\n".join(lines) + "\n"


def load_instance(path: str | Path) -> Instance:
    path = Path(path)
    return parse_instance(path.read_text(), str(path))


def save_instance(inst: Instance, path: str | Path) -> None:
    Path(path).write_text(write_instance(inst))


def builtin_instance(name: str) -> Instance:
    """One of the shipped synthetic analogs: ``belgian`` or ``gaslib40``."""
    if name not in BUILTIN:
        raise KeyError(f"unknown builtin instance {name!r}; choose from {sorted(BUILTIN)}")
    text = resources.files("gasflow.data").joinpath(BUILTIN[name]).read_text()
    return parse_instance(text, f"<builtin {name}>")
