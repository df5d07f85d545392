"""Convex energy-function solvers for compressor-free networks with a single
fixed-pressure node.

Two equivalent programs are solved:

* over flows, ``min sum a/3 |phi|^3`` subject to ``A^T phi = q``, worked in
  cycle space ``phi = phi_tree + C lam``;
* over pressures, ``min 2/3 sum |psi_m - psi_n|^1.5 / sqrt(a) - q^T psi``
  with the reference pressure pinned.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .network import GfSolution, GfSpec, Network, NetworkError, check_balanced
from .physics import (NegativePressureError, flow_from_drop, propagate_pressures,
                      residual_norm, tree_flows)
from .topology import fundamental_cycles, spanning_tree


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class EnergySolveOptions:
    tol: float = 1e-9
    max_iter: int = 200
    delta: float = 1e-10

    def __post_init__(self):
        if not (self.tol > 0 and self.delta > 0):
            raise ValueError("tol and delta must be positive")


def _check_applicable(net: Network, spec: GfSpec) -> np.ndarray:
    spec.validate(net)
    if net.compressors:
        raise NetworkError("energy solvers require a compressor-free network")
    if not spec.single_reference:
        raise NetworkError("energy solvers require a single fixed-pressure node")
    q = spec.injections(net)
    if not check_balanced(q):
        raise NetworkError("injections are not balanced")
    return q


def _finish(net, spec, tree, phi, q, solver, iterations, t0, info) -> GfSolution:
    psi_r = spec.fixed_pressure[spec.reference]
    psi, _ = propagate_pressures(net, tree, phi, psi_r, check=False)
    feasible = bool((psi >= 0).all())
    sol = GfSolution(q=q, phi=phi, psi=psi, solver=solver, iterations=iterations,
                     feasible=feasible, status="solved" if feasible else "infeasible", info=info)
    sol.residual = residual_norm(net, spec, phi, psi)
    sol.gap = 0.0 if feasible else float("nan")
    sol.seconds = time.perf_counter() - t0
    return sol


def solve_constrained(net: Network, spec: GfSpec, options: EnergySolveOptions | None = None) -> GfSolution:
    """Minimize the cubic flow energy over mass-balanced flows.

    Newton's method on the cycle coefficients, with Armijo backtracking so the
    energy never increases. Pressures follow by propagation from the
    reference, which equals the multiplier vector shifted to the reference.
    A negative recovered pressure flags the instance infeasible.
    """
    opts = options or EnergySolveOptions()
    t0 = time.perf_counter()
    q = _check_applicable(net, spec)
    tree = spanning_tree(net, spec.reference)
    C = fundamental_cycles(net, tree).matrix(net.P)
    a = net.friction
    phi = tree_flows(net, tree, q)

    def energy(f):
        return float(np.sum(a * np.abs(f) ** 3) / 3.0)

    it = 0
    history = [energy(phi)]
    if C.shape[1]:
        for it in range(1, opts.max_iter + 1):
            grad = C.T @ (a * phi * np.abs(phi))
            if np.abs(grad).max() <= opts.tol:
                it -= 1
                break
            H = C.T @ (np.maximum(2.0 * a * np.abs(phi), opts.delta)[:, None] * C)
            step = np.linalg.solve(H, -grad)
            d = C @ step
            slope = float(grad @ step)
            t, f0 = 1.0, history[-1]
            while energy(phi + t * d) > f0 + 1e-4 * t * slope and t > 1e-12:
                t *= 0.5
            phi = phi + t * d
            history.append(energy(phi))
            if np.abs(t * d).max() <= 1e-15 * max(1.0, np.abs(phi).max()):
                break
        else:
            raise ConvergenceError(f"no convergence in {opts.max_iter} iterations")
    grad = C.T @ (a * phi * np.abs(phi)) if C.shape[1] else np.zeros(0)
    info = {"energy": history, "stationarity": float(np.abs(grad).max()) if grad.size else 0.0}
    return _finish(net, spec, tree, phi, q, "energy-c", it, t0, info)


def solve_unconstrained(net: Network, spec: GfSpec, options: EnergySolveOptions | None = None) -> GfSolution:
    """Minimize the pressure-space energy with the reference pressure pinned.

    The gradient at the free nodes is the mass-balance mismatch of the flows
    implied by the pressures. Per-edge Hessian terms ``1 / (2 sqrt(a |dpsi|))``
    are capped at ``1/delta`` and the Newton system is Levenberg-damped.
    """
    opts = options or EnergySolveOptions()
    t0 = time.perf_counter()
    q = _check_applicable(net, spec)
    tree = spanning_tree(net, spec.reference)
    A = net.incidence
    a = net.friction
    r = spec.reference
    free = np.array([n for n in range(net.N) if n != r], dtype=int)
    psi_r = spec.fixed_pressure[r]

    psi, _ = propagate_pressures(net, tree, tree_flows(net, tree, q), psi_r, check=False)

    def objective(p):
        d = A @ p
        return float((2.0 / 3.0) * np.sum(np.abs(d) ** 1.5 / np.sqrt(a)) - q @ p)

    def decrease(p, dp):
        # f(p + dp) - f(p) evaluated from the increments, free of cancellation:
        # x^1.5 - y^1.5 = (x - y)(x^2 + xy + y^2) / (x^1.5 + y^1.5)
        d0, dd = A @ p, A @ dp
        x, y = np.abs(d0 + dd), np.abs(d0)
        same = np.sign(d0 + dd) == np.sign(d0)
        xy = np.where(same, np.sign(d0) * dd, x - y)
        den = x ** 1.5 + y ** 1.5
        with np.errstate(invalid="ignore", divide="ignore"):
            diff = np.where(den > 0, xy * (x * x + x * y + y * y) / den, 0.0)
        return float((2.0 / 3.0) * np.sum(diff / np.sqrt(a)) - q @ dp)

    def gradient(p):
        return (A.T @ flow_from_drop(a, A @ p) - q)[free]

    f = objective(psi)
    history = [f]
    nu = 0.0
    it = 0
    for it in range(1, opts.max_iter + 1):
        g = gradient(psi)
        if np.abs(g).max() <= opts.tol:
            it -= 1
            break
        d = A @ psi
        curv = np.minimum(0.5 / np.sqrt(a * np.maximum(np.abs(d), 1e-300)), 1.0 / opts.delta)
        H = (A.T @ (curv[:, None] * A))[np.ix_(free, free)]
        while True:
            try:
                step = np.linalg.solve(H + nu * np.eye(free.size), -g)
            except np.linalg.LinAlgError:
                nu = max(10.0 * nu, 1e-12)
                continue
            slope = float(g @ step)
            if slope < 0:
                break
            nu = max(10.0 * nu, 1e-12)
        t = 1.0
        dp = np.zeros_like(psi)
        while True:
            dp[free] = t * step
            df = decrease(psi, dp)
            # sufficient decrease, and no large overshoot along the ray (the
            # curvature blows up at zero drop and full steps can zig-zag)
            if t < 1e-14 or (df <= 1e-4 * t * slope
                             and gradient(psi + dp) @ step <= -0.9 * slope):
                break
            t *= 0.5
        nu = nu / 10.0 if t == 1.0 else max(10.0 * nu, 1e-12) if t < 1e-3 else nu
        if df > 0:
            # no descent possible at machine precision
            break
        psi = psi + dp
        f += df
        history.append(f)
    else:
        raise ConvergenceError(f"no convergence in {opts.max_iter} iterations")
    g = gradient(psi)
    if np.abs(g).max() > max(opts.tol, 1e-7 * max(1.0, np.abs(q).max())):
        raise ConvergenceError(f"stalled with gradient {np.abs(g).max():.3e}")
    phi = flow_from_drop(a, A @ psi)
    info = {"objective": history, "stationarity": float(np.abs(g).max())}
    feasible = bool((psi >= 0).all())
    sol = GfSolution(q=q, phi=phi, psi=psi, solver="energy-u", iterations=it, feasible=feasible,
                     status="solved" if feasible else "infeasible", info=info)
    sol.residual = residual_norm(net, spec, phi, psi)
    sol.gap = 0.0 if feasible else float("nan")
    sol.seconds = time.perf_counter() - t0
    return sol


__all__ = ["EnergySolveOptions", "ConvergenceError", "solve_constrained", "solve_unconstrained",
           "NegativePressureError"]
