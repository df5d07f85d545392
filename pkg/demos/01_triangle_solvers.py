"""
Four solvers on a three-pipe triangle
=====================================

A supply at node 1 feeds a demand at node 3 through a direct pipe and a
two-pipe detour. Every solver returns the same flows.
"""
import numpy as np

from gasflow import (build_network, GfSpec, recover_full_solution, solve_constrained, solve_miqcqp,
                     solve_nr, solve_unconstrained)

nodes = [{"id": 1, "pressure": 100.0}, {"id": 2, "injection": 0.0}, {"id": 3, "injection": -3.0}]
edges = [{"from": 1, "to": 2, "a": 1.0}, {"from": 2, "to": 3, "a": 1.0}, {"from": 1, "to": 3, "a": 1.0}]
net = build_network(nodes, edges)
spec = GfSpec.from_network(net)

# the relaxation needs a cycle-recovery pass before it is a full solution
mi = solve_miqcqp(net, spec)
solutions = {
    "energy, constrained": solve_constrained(net, spec),
    "energy, unconstrained": solve_unconstrained(net, spec),
    "mixed-integer relaxation": recover_full_solution(net, spec, mi.phi),
    "Newton-Raphson": solve_nr(net, spec),
}
for name, sol in solutions.items():
    print(f"{name:<26} phi = {np.round(sol.phi, 6)}  psi = {np.round(sol.psi, 4)}")

# the direct pipe carries f with f^2 = 2 g^2 and f + g = 3
f = 3 * np.sqrt(2) / (1 + np.sqrt(2))
print(f"closed form: f = {f:.6f}, g = {3 - f:.6f}")
