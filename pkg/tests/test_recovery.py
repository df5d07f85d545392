import numpy as np
import pytest

from gasflow.instances import builtin_instance
from gasflow.miqcqp import certify_conditions, default_bounds, solve_miqcqp
from gasflow.network import GfSpec, build_network
from gasflow.newton import NrOptions, solve_nr
from gasflow.physics import StateLayout, edge_law_residual
from gasflow.recovery import (CycleCorrectionInput, RecoveryError, correct_active_cycle,
                              cycle_pressure_closure, recover_full_solution)
from gasflow.topology import fundamental_cycles, spanning_tree

from helpers import parallel_compressors


def cycle_input(net, spec, phi, phi_bar=10.0):
    basis = fundamental_cycles(net, spanning_tree(net, spec.reference))
    (cyc,) = [c for c in basis.cycles if c.active]
    return CycleCorrectionInput.from_cycle(net, cyc, spec.reference, spec.fixed_pressure[spec.reference],
                                           phi, phi_bar)


def circulation_ring():
    """Pipe ring whose station pushes gas around the loop."""
    nodes = [{"id": 0, "pressure": 100.0}, {"id": 1, "injection": -1.0}, {"id": 2, "injection": 0.0}]
    edges = [{"from": 0, "to": 1, "a": 1.0}, {"from": 1, "to": 2, "a": 1.0},
             {"from": 2, "to": 0, "alpha": 1.2, "a": 1.0}]
    net = build_network(nodes, edges)
    return net, GfSpec.from_network(net)


@pytest.mark.parametrize("split", [(3.0, 1.0), (1.0, 3.0), (4.0, 0.0), (2.0, 2.0)])
def test_symmetric_split_recovered(split):
    net, spec = parallel_compressors()
    # edges: two compressors, then their pipes
    phi = np.array([split[0], split[1], split[0], split[1]])
    sol = recover_full_solution(net, spec, phi)
    assert np.allclose(sol.phi, 2.0, atol=1e-8)
    (ci, anchor, lam), = sol.info["recovery"].corrections
    # the sign of lambda follows the cycle orientation
    assert abs(lam) == pytest.approx(abs(2.0 - split[0]), abs=1e-8)
    assert sol.residual < 1e-6


def test_correct_input_needs_no_iterations():
    net, spec = parallel_compressors()
    inp = cycle_input(net, spec, np.full(4, 2.0))
    corr = correct_active_cycle(inp)
    assert corr.lam == 0.0 and corr.iterations == 0 and corr.closure < 1e-12


def test_closure_monotone_in_lambda():
    net, spec = parallel_compressors(a2=2.5)
    inp = cycle_input(net, spec, np.array([4.0, 0.0, 4.0, 0.0]))
    lams = np.linspace(inp.lambda_lo, inp.lambda_hi, 41)
    vals = [cycle_pressure_closure(inp, inp.flows(t)) for t in lams]
    finite = [v for v in vals if np.isfinite(v)]
    d = np.diff(finite)
    assert (d >= 0).all() or (d <= 0).all()


def test_asymmetric_split_closes_cycle():
    net, spec = parallel_compressors(a2=3.0)
    sol = recover_full_solution(net, spec, np.array([4.0, 0.0, 4.0, 0.0]))
    # equal drops: f^2 = 3 g^2 with f + g = 4
    g = 4.0 / (1.0 + np.sqrt(3.0))
    assert sol.phi[3] == pytest.approx(g, abs=1e-7)
    assert np.abs(edge_law_residual(net, sol.phi, sol.psi)).max() < 1e-6


def test_compressor_bracket_respects_direction():
    net, spec = parallel_compressors()
    inp = cycle_input(net, spec, np.array([3.0, 1.0, 3.0, 1.0]))
    flows_lo, flows_hi = inp.flows(inp.lambda_lo), inp.flows(inp.lambda_hi)
    comp = [i for i, e in enumerate(inp.edges) if e.is_compressor]
    assert (flows_lo[comp] >= -1e-12).all() and (flows_hi[comp] >= -1e-12).all()


def test_no_sign_change_raises():
    net, spec = parallel_compressors()
    inp = cycle_input(net, spec, np.array([3.0, 1.0, 3.0, 1.0]), phi_bar=10.0)
    narrow = CycleCorrectionInput(inp.psi0, inp.phiC_prime, inp.nC, inp.edges, inp.nodes,
                                  inp.lambda_lo, inp.lambda_lo + 0.5)
    with pytest.raises(RecoveryError):
        correct_active_cycle(narrow)
    with pytest.raises(RecoveryError, match="active cycle"):
        recover_full_solution(parallel_compressors(alpha=2.0, a2=1.0)[0], spec,
                              np.array([3.0, 1.0, 3.0, 1.0]), phi_bar=0.1)


def test_input_validation():
    net, spec = parallel_compressors()
    with pytest.raises(ValueError):
        recover_full_solution(net, spec, np.zeros(3))
    inp = cycle_input(net, spec, np.full(4, 2.0))
    with pytest.raises(ValueError):
        CycleCorrectionInput(inp.psi0, inp.phiC_prime, inp.nC, inp.edges, inp.nodes, 1.0, 0.0)


def test_circulation_ring_recovered():
    net, spec = circulation_ring()
    bounds = default_bounds(net, spec, phi_bar=10.0)
    res = solve_miqcqp(net, spec, bounds)
    sol = recover_full_solution(net, spec, res.phi, phi_bar=bounds.phi_bar)
    assert sol.residual < 1e-6
    assert certify_conditions(net, spec, sol.phi).no_circulation is False
    nr = solve_nr(net, spec, StateLayout(net, spec).pack(sol.phi, sol.psi), NrOptions(tol=1e-10))
    assert nr.converged and np.abs(nr.phi - sol.phi).max() < 1e-6


def test_belgian_recovery_matches_newton():
    inst = builtin_instance("belgian")
    net, spec = inst.build()
    bounds = inst.bounds(net, spec)
    res = solve_miqcqp(net, spec, bounds)
    sol = recover_full_solution(net, spec, res.phi, phi_bar=bounds.phi_bar)
    nr = solve_nr(net, spec, StateLayout(net, spec).pack(sol.phi, sol.psi), NrOptions(tol=1e-10))
    assert nr.converged
    assert np.abs(nr.phi - sol.phi).max() < 1e-5
    # changes stay in the span of the active cycle indicators
    basis = fundamental_cycles(net, spanning_tree(net, spec.reference))
    active = basis.active_edges()
    off = [e for e in range(net.P) if e not in active]
    assert np.array_equal(sol.phi[off], res.phi[off])
    M = np.array([c.indicator for c in basis.cycles if c.active]).T
    delta = sol.phi - res.phi
    coef = np.linalg.lstsq(M, delta, rcond=None)[0]
    assert np.abs(M @ coef - delta).max() < 1e-10
