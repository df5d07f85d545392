"""Newton-Raphson gas-flow solver: ``y <- y - mu J(y)^-1 g(y)``."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .network import GfSolution, GfSpec, Network
from .physics import StateLayout, exactness_gap, residual_and_jacobian


@dataclass(frozen=True)
class NrOptions:
    mu: float = 1.0
    tol: float = 1e-3
    max_iter: int = 50
    rho: float = 1e-10
    divergence: float = 1e8

    def __post_init__(self):
        if not 0 < self.mu <= 1:
            raise ValueError("step size mu must lie in (0, 1]")
        if not self.tol > 0:
            raise ValueError("tol must be positive")


@dataclass
class NrResult:
    converged: bool
    y: np.ndarray
    residual_history: list[float]
    feasible: bool
    status: str = ""
    phi: np.ndarray = field(default=None, repr=False)
    psi: np.ndarray = field(default=None, repr=False)
    seconds: float = 0.0

    @property
    def iterations(self) -> int:
        return len(self.residual_history) - 1

    @property
    def residual(self) -> float:
        return self.residual_history[-1]


def default_init(net: Network, spec: GfSpec) -> np.ndarray:
    """Minimum-norm flows solving ``A^T phi = q`` and every pressure at the
    reference value (other fixed pressures at their given values).

    With several fixed-pressure nodes their unknown injections are taken to
    share the imbalance equally.
    """
    q = spec.injections(net)
    if not spec.single_reference:
        fixed = list(spec.fixed_pressure)
        q[fixed] = -q.sum() / len(fixed)
    phi = np.linalg.pinv(net.incidence.T) @ q
    psi = np.full(net.N, spec.fixed_pressure[spec.reference], dtype=float)
    for n, v in spec.fixed_pressure.items():
        psi[n] = v
    return StateLayout(net, spec).pack(phi, psi)


def is_feasible(net: Network, phi, psi, tol: float = 1e-9) -> bool:
    """Post-hoc check: nonnegative pressures and compressor flows."""
    psi = np.asarray(psi)
    if (psi < -tol * max(1.0, np.abs(psi).max())).any():
        return False
    comp = [e.id for e in net.compressors]
    if comp:
        f = np.asarray(phi)[comp]
        if (f < -tol * max(1.0, np.abs(phi).max())).any():
            return False
    return True


def solve_nr(net: Network, spec: GfSpec, y0=None, options: NrOptions | None = None) -> NrResult:
    """Plain (optionally damped) Newton-Raphson from ``y0``.

    Each iteration factors the dense Jacobian by LU with partial pivoting. A
    singular Jacobian is retried once with ``rho`` added to the diagonal; if
    that fails too, or the residual grows past ``divergence`` times its
    starting value, the run stops and is reported as diverged.
    """
    opts = options or NrOptions()
    t0 = time.perf_counter()
    lay = StateLayout(net, spec)
    y = default_init(net, spec) if y0 is None else np.array(y0, dtype=float)
    if y.shape != (lay.size,):
        raise ValueError(f"initial state must have length {lay.size}")
    g, J = residual_and_jacobian(net, spec, y)
    history = [float(np.linalg.norm(g))]
    status = "max-iter"
    for _ in range(opts.max_iter):
        if history[-1] < opts.tol:
            break
        step = _newton_step(J, g, opts.rho)
        if step is None:
            status = "singular"
            break
        y = y - opts.mu * step
        g, J = residual_and_jacobian(net, spec, y)
        history.append(float(np.linalg.norm(g)))
        if not np.isfinite(history[-1]) or history[-1] > opts.divergence * max(history[0], 1e-300):
            status = "diverged"
            break
    converged = history[-1] < opts.tol
    if converged:
        status = "converged"
    phi, psi = lay.unpack(y) if np.isfinite(y).all() else (y[:net.P], np.full(net.N, np.nan))
    feasible = bool(np.isfinite(y).all()) and is_feasible(net, phi, psi)
    return NrResult(converged, y, history, feasible, status, phi, psi, time.perf_counter() - t0)


def _newton_step(J, g, rho):
    with np.errstate(all="ignore"):
        for shift in (0.0, rho):
            M = J + shift * np.eye(J.shape[0]) if shift else J
            try:
                lu = scipy.linalg.lu_factor(M, check_finite=True)
            except (ValueError, np.linalg.LinAlgError):
                return None
            if np.abs(np.diag(lu[0])).min() <= 1e-14 * max(1.0, np.abs(lu[0]).max()):
                continue
            step = scipy.linalg.lu_solve(lu, g)
            if np.isfinite(step).all():
                return step
    return None


def to_solution(net: Network, spec: GfSpec, res: NrResult, solver: str = "nr") -> GfSolution:
    lay = StateLayout(net, spec)
    q = lay.injections(res.phi)
    sol = GfSolution(q=q, phi=res.phi, psi=res.psi, solver=solver, residual=res.residual,
                     iterations=res.iterations, seconds=res.seconds, feasible=res.feasible,
                     status=res.status)
    if np.isfinite(res.psi).all():
        sol.gap = exactness_gap(net, res.psi, res.phi)
    return sol
