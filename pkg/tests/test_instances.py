import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gasflow.instances import (EdgeRecord, Instance, InstanceError, NodeRecord, builtin_instance,
                               load_instance, parse_instance, save_instance, write_instance)
from gasflow.topology import fundamental_cycles, spanning_tree

SMALL = """gasflow-instance 1
name tiny
node s pressure 100 nominal 3
node d injection -3   # demand
pipe s d 0.5
reference s
"""

pos = st.floats(1e-6, 1e6, allow_nan=False, allow_infinity=False)
anyf = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


@st.composite
def instances(draw):
    n = draw(st.integers(2, 7))
    names = [f"n{i}" for i in range(n)]
    nodes = [NodeRecord(names[0], "pressure", draw(pos), draw(st.none() | anyf))]
    nodes += [NodeRecord(m, "injection", draw(anyf)) for m in names[1:]]
    edges = []
    for i in range(1, n):
        j = draw(st.integers(0, i - 1))
        if draw(st.booleans()):
            edges.append(EdgeRecord("pipe", names[j], names[i], draw(pos)))
        else:
            edges.append(EdgeRecord("compressor", names[j], names[i], draw(pos), draw(pos)))
    meta = tuple((f"k{i}", f"v{i}") for i in range(draw(st.integers(0, 2))))
    return Instance(tuple(nodes), tuple(edges), draw(st.sampled_from(["", "x y"])), names[0],
                    draw(st.none() | st.sampled_from(names)), draw(st.none() | pos),
                    draw(st.none() | pos), meta)


@settings(max_examples=100, deadline=None)
@given(instances())
def test_roundtrip(inst):
    assert parse_instance(write_instance(inst)) == inst


def test_parse_small():
    inst = parse_instance(SMALL)
    assert inst.name == "tiny" and inst.node("s").nominal == 3.0
    net, spec = inst.build()
    assert net.N == 2 and spec.reference == net.node_index("s")


def test_file_io(tmp_path):
    p = tmp_path / "x.gfi"
    save_instance(parse_instance(SMALL), p)
    assert load_instance(p) == parse_instance(SMALL)


@pytest.mark.parametrize("text, line, message", [
    ("node a pressure 1\n", 1, "first statement"),
    ("gasflow-instance 2\n", 1, "version"),
    (SMALL + "pipe d s 1\n", 7, "antiparallel"),
    (SMALL + "pipe s d 1\n", 7, "duplicate"),
    (SMALL + "pipe s x 1\n", 7, "unknown node"),
    (SMALL + "node q injection abc\n", 7, "expected a number"),
    (SMALL + "node q injection nan\n", 7, "finite"),
    (SMALL + "node s injection 1\n", 7, "duplicate node"),
    (SMALL + "node q bogus 1\n", 7, "kind"),
    (SMALL + "frobnicate\n", 7, "unknown statement"),
    (SMALL + "compressor s d 0 1\n", 7, "ratio"),
    (SMALL + "pipe d d 1\n", 7, "self loop"),
    (SMALL + "reference d\n", 7, "twice"),
    (SMALL + "bounds psi_hi -1\n", 7, "positive"),
    (SMALL + "meta onlykey\n", 7, "fields"),
])
def test_errors_carry_line(text, line, message):
    with pytest.raises(InstanceError, match=message) as info:
        parse_instance(text, "doc.gfi")
    assert info.value.line == line
    assert str(info.value).startswith(f"doc.gfi:{line}:")


def test_semantic_errors():
    with pytest.raises(InstanceError, match="empty"):
        parse_instance("# nothing\n")
    with pytest.raises(InstanceError, match="disconnected"):
        parse_instance("gasflow-instance 1\nnode a pressure 1\nnode b injection 0\n")
    with pytest.raises(InstanceError, match="pressure node"):
        parse_instance(SMALL.replace("reference s", "reference d"))


def test_belgian_builtin():
    inst = builtin_instance("belgian")
    assert inst.meta_value("synthetic") == "yes"
    net, spec = inst.build()
    user = [n for n in net.nodes if not n.synthetic]
    assert len(user) == 20 and net.N == 23
    q = spec.injections(net)
    assert q.min() == pytest.approx(-15.61) and q.max() == pytest.approx(22.01)
    basis = fundamental_cycles(net, spanning_tree(net, spec.reference))
    assert basis.overlapping and any(basis.active)


def test_gaslib_builtin():
    inst = builtin_instance("gaslib40")
    assert inst.meta_value("synthetic") == "yes"
    kinds = [e.kind for e in inst.edges]
    assert len(inst.nodes) == 40 and kinds.count("pipe") == 39 and kinds.count("compressor") == 6
    net, spec = inst.build()
    basis = fundamental_cycles(net, spanning_tree(net, spec.reference))
    assert not basis.overlapping
    assert np.isclose(spec.injections(net).sum(), 0.0)


def test_unknown_builtin():
    with pytest.raises(KeyError):
        builtin_instance("nope")
