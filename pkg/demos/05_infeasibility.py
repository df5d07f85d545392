"""
Certifying infeasible scenarios
===============================

A station installed against the flow, or demand too large for the supply
pressure, leaves the relaxation without a feasible point. Newton-Raphson
may still converge, but to a state that breaks a physical bound.
"""
from gasflow import build_network, GfSpec, solve_miqcqp, solve_nr

cases = {
    "reverse station": ([{"id": "s", "pressure": 100.0}, {"id": "d", "injection": -3.0}],
                        [{"from": "d", "to": "s", "alpha": 1.5, "a": 1.0}]),
    "overloaded pipe": ([{"id": "s", "pressure": 10.0}, {"id": "d", "injection": -5.0}],
                        [{"from": "s", "to": "d", "a": 1.0}]),
}
for name, (nodes, edges) in cases.items():
    net = build_network(nodes, edges)
    spec = GfSpec.from_network(net)
    mi = solve_miqcqp(net, spec)
    nr = solve_nr(net, spec)
    print(f"{name:<16} relaxation: {mi.status:<11} Newton: {nr.status}, physically feasible {nr.feasible}")
