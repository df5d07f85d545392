import numpy as np
import pytest

from gasflow.network import (COMPRESSOR, PIPE, GfSpec, NetworkError, build_network, check_balanced,
                             mass_residual)


def two_node(**edge):
    nodes = [{"id": "a", "pressure": 10.0}, {"id": "b", "injection": -1.0}]
    return build_network(nodes, [{"from": "a", "to": "b", "a": 1.0, **edge}])


def test_incidence_signs():
    net = two_node()
    assert net.incidence.tolist() == [[1.0, -1.0]]
    assert not net.incidence.flags.writeable


def test_station_expands_to_compressor_then_pipe():
    net = two_node(alpha=2.0)
    assert net.N == 3 and net.P == 2
    comp, pipe = net.edges
    assert comp.kind == COMPRESSOR and comp.alpha == 2.0 and comp.target == 2
    assert pipe.kind == PIPE and pipe.source == 2 and pipe.target == 1 and pipe.a == 1.0
    assert net.nodes[2].synthetic
    assert pipe.station == comp.station == 0


def test_parallel_stations_are_allowed():
    nodes = [{"id": 0, "pressure": 1.0}, {"id": 1, "injection": -1.0}]
    edges = [{"from": 0, "to": 1, "alpha": 1.1, "a": 1.0}] * 2
    net = build_network(nodes, edges)
    assert len(net.compressors) == 2 and net.N == 4


@pytest.mark.parametrize("edges, message", [
    ([{"from": 0, "to": 1, "a": 1.0}, {"from": 1, "to": 0, "a": 1.0}], "antiparallel"),
    ([{"from": 0, "to": 1, "a": 1.0}, {"from": 0, "to": 1, "a": 2.0}], "duplicate"),
    ([{"from": 0, "to": 0, "a": 1.0}], "self loop"),
    ([{"from": 0, "to": 9, "a": 1.0}], "dangling"),
    ([{"from": 0, "to": 1, "a": 0.0}], "friction"),
    ([{"from": 0, "to": 1, "a": 1.0, "alpha": -1.0}], "ratio"),
])
def test_invalid_edges(edges, message):
    nodes = [{"id": 0, "pressure": 1.0}, {"id": 1, "injection": 0.0}]
    with pytest.raises(NetworkError, match=message):
        build_network(nodes, edges)


def test_disconnected_rejected():
    nodes = [{"id": i, "injection": 0.0} for i in range(3)]
    with pytest.raises(NetworkError, match="disconnected"):
        build_network(nodes, [{"from": 0, "to": 1, "a": 1.0}])


def test_spec_reference_balances():
    nodes = [{"id": 0, "pressure": 5.0}, {"id": 1, "injection": 2.0}, {"id": 2, "injection": -3.0}]
    net = build_network(nodes, [{"from": 0, "to": 1, "a": 1.0}, {"from": 1, "to": 2, "a": 1.0}])
    spec = GfSpec.from_network(net)
    q = spec.injections(net)
    assert q.tolist() == [1.0, 2.0, -3.0]
    assert check_balanced(q) and spec.single_reference


def test_spec_validation():
    nodes = [{"id": 0, "injection": 1.0}, {"id": 1, "injection": -1.0}]
    net = build_network(nodes, [{"from": 0, "to": 1, "a": 1.0}])
    with pytest.raises(NetworkError, match="no fixed-pressure"):
        GfSpec.from_network(net)


def test_mass_residual_shape_check():
    net = two_node()
    assert np.allclose(mass_residual(net, [1.0, -1.0], [1.0]), 0.0)
    with pytest.raises(ValueError):
        mass_residual(net, [1.0], [1.0])
