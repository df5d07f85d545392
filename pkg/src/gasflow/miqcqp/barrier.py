"""Log-barrier interior-point solver for the continuous relaxation.

The subproblem is a convex QCQP: linear objective, linear equalities, linear
inequalities and quadratic rows ``a phi^2 + g.v <= 0``. Binaries fixed by the
caller are substituted (``x = b``, ``z = b psi``) and their McCormick rows
dropped, so no fixed binary ever produces an inequality with empty interior.

Equalities are eliminated with an orthonormal nullspace basis ``v = v0 + Z u``.
Rows that become constant in ``u`` (e.g. the sign row of a flow that mass
balance pins down) are checked once and removed. Phase I minimizes a common
slack ``s`` with ``f_i(u) <= s``; phase II follows the central path with
``mu_{k+1} = mu_k / 10`` from ``mu_0 = 1`` until ``mu < 1e-12``.

Internally variables are scaled by the flow and pressure magnitudes and the
objective by the pressure scale, so the ``mu`` schedule and the Newton
tolerance refer to that normalized problem.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .model import MCCORMICK, XBOUND, RelaxedModel

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
CUTOFF = "cutoff"
FAILURE = "subsolver-failure"


@dataclass(frozen=True)
class BarrierOptions:
    """``newton_tol`` bounds half the squared Newton decrement at the last
    centering; earlier centerings stop at ``center_tol``."""

    mu0: float = 1.0
    mu_factor: float = 10.0
    mu_min: float = 1e-12
    newton_tol: float = 1e-8
    center_tol: float = 1e-1
    max_newton: int = 100
    feas_tol: float = 1e-9


@dataclass
class ContinuousResult:
    status: str
    v: np.ndarray | None = field(default=None, repr=False)
    objective: float = float("inf")
    lower_bound: float = float("inf")
    newton_iterations: int = 0
    phase1_slack: float = float("nan")
    relaxed_by: float = 0.0


class _Reduced:
    """Inequalities ``Gl u <= hl`` and ``a (c + w.u)^2 + b.u <= r`` with a
    linear objective ``cu.u``."""

    def __init__(self, Gl, hl, qa, qc, qw, qb, qr, cu):
        self.Gl, self.hl = Gl, hl
        self.qa, self.qc, self.qw, self.qb, self.qr = qa, qc, qw, qb, qr
        self.cu = cu
        self.m = len(hl) + len(qa)

    def state(self, u):
        inner = self.qc + self.qw @ u
        sl = self.hl - self.Gl @ u
        sq = self.qr - self.qb @ u - self.qa * inner ** 2
        return sl, sq, inner

    def feasible(self, u) -> bool:
        sl, sq, _ = self.state(u)
        return bool((sl > 0).all() and (sq > 0).all())

    def value(self, u, tau, st=None):
        sl, sq, _ = st if st is not None else self.state(u)
        if (sl <= 0).any() or (sq <= 0).any():
            return np.inf
        return tau * float(self.cu @ u) - float(np.log(sl).sum()) - float(np.log(sq).sum())

    def grad_hess(self, tau, st):
        sl, sq, inner = st
        Gs = self.Gl / sl[:, None]
        grad = tau * self.cu + Gs.sum(axis=0)
        H = Gs.T @ Gs
        if len(self.qa):
            # grad f_k = b + 2 a (c + w.u) w
            gqs = (self.qb + (2.0 * self.qa * inner)[:, None] * self.qw) / sq[:, None]
            grad += gqs.sum(axis=0)
            H += gqs.T @ gqs
            H += (self.qw * (2.0 * self.qa / sq)[:, None]).T @ self.qw
        return grad, H

    def ray(self, du, st):
        """Coefficients of the slacks along ``u + t du``: linear rows move as
        ``sl - t rate``, quadratic rows as ``sq - B t - A t^2``."""
        sl, sq, inner = st
        rate = self.Gl @ du
        wd = self.qw @ du
        A = self.qa * wd ** 2
        B = self.qb @ du + 2.0 * self.qa * inner * wd
        return rate, wd, A, B

    @staticmethod
    def max_step(st, ray) -> float:
        """Largest step keeping every row strictly interior (capped at 1)."""
        sl, sq, _ = st
        rate, _, A, B = ray
        t = 1.0
        pos = rate > 0
        if pos.any():
            t = min(t, float((sl[pos] / rate[pos]).min()))
        den = B + np.sqrt(B ** 2 + 4.0 * A * sq)
        hit = den > 0
        if hit.any():
            t = min(t, float((2.0 * sq[hit] / den[hit]).min()))
        return t

    @staticmethod
    def along(st, ray, t):
        sl, sq, inner = st
        rate, wd, A, B = ray
        return sl - t * rate, sq - t * (B + t * A), inner + t * wd


def _factor(H):
    """Cholesky factor of ``H``, adding a growing diagonal shift if needed;
    ``None`` when even the shifted matrix is not positive definite."""
    n = H.shape[0]
    reg = 0.0
    scale = max(1.0, float(np.abs(np.diag(H)).max())) if n else 1.0
    for _ in range(8):
        try:
            M = H if reg == 0.0 else H + reg * np.eye(n)
            return scipy.linalg.cho_factor(M, check_finite=False)
        except (np.linalg.LinAlgError, ValueError):
            reg = max(reg * 100.0, 1e-14 * scale)
    return None


def _solve_spd(H, g, cf=None):
    cf = cf if cf is not None else _factor(H)
    if cf is None:
        return np.linalg.lstsq(H, g, rcond=None)[0], None
    return scipy.linalg.cho_solve(cf, g, check_finite=False), cf


def _center(prob: _Reduced, u, tau, tol, max_newton, stop=None):
    """Damped Newton on ``tau f0 + barrier`` from a strictly feasible ``u``.

    Returns ``(u, iterations, decrement, factor)`` where ``decrement`` is the
    last Newton decrement ``lambda`` (NaN if the line search stalled) and
    ``factor`` is the Hessian factorization at the returned ``u`` when one
    is at hand (the Hessian does not depend on ``tau``).
    """
    st = prob.state(u)
    val = prob.value(u, tau, st)
    lam = np.nan
    for its in range(max_newton):
        grad, H = prob.grad_hess(tau, st)
        du, cf = _solve_spd(H, -grad)
        dec = float(-grad @ du)
        if not np.isfinite(dec):
            return u, its, np.nan, None
        lam = np.sqrt(max(dec, 0.0))
        if dec / 2.0 <= tol:
            return u, its, lam, cf
        ray = prob.ray(du, st)
        t = min(1.0, 0.99 * prob.max_step(st, ray))
        while t > 1e-14:
            tst = prob.along(st, ray, t)
            tv = prob.value(u + t * du, tau, tst)
            if tv <= val - 0.01 * t * dec:
                break
            t *= 0.5
        else:
            return u, its, np.nan, None
        u = u + t * du
        st, val = tst, tv
        if stop is not None and stop(u):
            return u, its + 1, lam, None
    return u, max_newton, lam, None


def _predict(prob: _Reduced, u, tau_old, tau_new, cf=None):
    """Step along the central-path tangent ``du/dtau = -H^{-1} c`` towards
    the next center, shortened until it stays interior and lowers the new
    barrier function.

    Centers move roughly linearly in ``mu = 1/tau``, so the tangent is
    extrapolated in ``mu``: ``du = (1/tau_old - 1/tau_new) tau_old^2 du/dtau``.
    """
    st = prob.state(u)
    if cf is None:
        cf = _factor(prob.grad_hess(tau_old, st)[1])
        if cf is None:
            return u
    du = scipy.linalg.cho_solve(cf, -prob.cu, check_finite=False) * (tau_old - tau_old ** 2 / tau_new)
    base = prob.value(u, tau_new, st)
    ray = prob.ray(du, st)
    t = min(1.0, 0.99 * prob.max_step(st, ray))
    while t > 1e-6:
        trial = u + t * du
        if prob.value(trial, tau_new, prob.along(st, ray, t)) < base:
            return trial
        t *= 0.5
    return u


def _gap_bound(m: int, mu: float, lam: float) -> float:
    """Duality-gap bound at an approximate center with Newton decrement
    ``lam``; equals ``m mu`` at an exact center."""
    if not np.isfinite(lam) or lam >= 0.5:
        return np.inf
    return mu * (m + np.sqrt(m) * lam / (1.0 - lam))


def _substituted(model: RelaxedModel, fixed: dict[int, int]):
    """Equality/inequality data after fixing binaries of ``fixed``."""
    E, e = model.E, model.e
    keep = np.ones(len(model.h), dtype=bool)
    if fixed:
        rows = np.zeros((3 * len(fixed), model.n_var))
        vals = np.zeros(3 * len(fixed))
        for i, (k, b) in enumerate(sorted(fixed.items())):
            edge = model.net.edges[model.pipes[k]]
            rows[3 * i, model.x_index(k)] = 1.0
            vals[3 * i] = float(b)
            for end, node in ((0, edge.source), (1, edge.target)):
                rows[3 * i + 1 + end, model.z_index(k, end)] = 1.0
                rows[3 * i + 1 + end, model.psi_index(node)] = -float(b)
        E = np.vstack([E, rows])
        e = np.concatenate([e, vals])
        kinds = np.array(model.row_kind)
        owned = np.isin(model.row_pipe, list(fixed))
        keep &= ~(owned & ((kinds == MCCORMICK) | (kinds == XBOUND)))
    return E, e, model.G[keep], model.h[keep]


def variable_scale(model: RelaxedModel) -> tuple[np.ndarray, float]:
    """Per-variable scale (flows by total supply, pressures and products by
    the largest fixed pressure) and the objective scale."""
    psi_s = float(max(model.spec.fixed_pressure.values()))
    phi_s = float(model.bounds.phi_bar.max()) / 1.5
    D = np.ones(model.n_var)
    for name, s in (("q", phi_s), ("phi", phi_s), ("psi", psi_s), ("z", psi_s), ("t", psi_s)):
        D[model.blocks[name]] = s
    return D, psi_s


def solve_continuous(model: RelaxedModel, fixed: dict[int, int] | None = None,
                     cutoff: float | None = None, options: BarrierOptions | None = None) -> ContinuousResult:
    """Solve the continuous relaxation with binaries in ``fixed`` (pipe
    position -> 0/1) held fixed and the rest relaxed to ``[0, 1]``.

    Returns status ``optimal`` with the point, its objective and a certified
    lower bound (objective minus the barrier duality-gap bound);
    ``infeasible`` when phase I proves the slack cannot reach zero;
    ``cutoff`` as soon as the certified bound reaches ``cutoff``;
    ``subsolver-failure`` when the last centering breaks down.
    """
    opts = options or BarrierOptions()
    fixed = dict(fixed or {})
    E, e, G, h = _substituted(model, fixed)
    D, obj_s = variable_scale(model)

    # scale variables and normalize rows
    Es = E * D
    en = np.linalg.norm(Es, axis=1)
    Es, es = Es / en[:, None], e / en
    Gs = G * D
    gn = np.linalg.norm(Gs, axis=1)
    Gs, hs = Gs / gn[:, None], h / gn
    qG = model.quad_G * D
    qn = np.linalg.norm(qG, axis=1)
    qG = qG / qn[:, None]
    qa = model.quad_a * D[model.quad_var] ** 2 / qn
    cs = model.c * D / obj_s

    U, sv, Vt = np.linalg.svd(Es, full_matrices=True)
    rank = int((sv > 1e-10 * max(1.0, sv.max(initial=0.0))).sum())
    # least-squares particular solution from the same factorization
    v0 = Vt[:rank].T @ ((U[:, :rank].T @ es) / sv[:rank])
    if np.abs(Es @ v0 - es).max(initial=0.0) > 1e-8:
        return ContinuousResult(INFEASIBLE, phase1_slack=float("inf"))
    Z = Vt[rank:].T
    d = Z.shape[1]

    Gl = Gs @ Z
    hl = hs - Gs @ v0
    qw = Z[model.quad_var]
    qc = v0[model.quad_var]
    qb = qG @ Z
    qr = -(qG @ v0)

    # rows constant over the feasible affine set
    const_l = np.linalg.norm(Gl, axis=1) <= 1e-9
    if (-hl[const_l] > opts.feas_tol).any():
        return ContinuousResult(INFEASIBLE, phase1_slack=float((-hl[const_l]).max()))
    const_q = (np.linalg.norm(qw, axis=1) <= 1e-9) & (np.linalg.norm(qb, axis=1) <= 1e-9)
    if (qa[const_q] * qc[const_q] ** 2 - qr[const_q] > opts.feas_tol).any():
        return ContinuousResult(INFEASIBLE, phase1_slack=float((qa * qc ** 2 - qr)[const_q].max()))
    Gl, hl = Gl[~const_l], hl[~const_l]
    nq = ~const_q
    qa, qc, qw, qb, qr = qa[nq], qc[nq], qw[nq], qb[nq], qr[nq]
    cu = Z.T @ cs
    c0 = float(cs @ v0)

    def full(u):
        return D * (v0 + Z @ u)

    if d == 0:
        v = full(np.zeros(0))
        return ContinuousResult(OPTIMAL, v, model.objective(v), model.objective(v))

    prob = _Reduced(Gl, hl, qa, qc, qw, qb, qr, cu)
    u = np.zeros(d)
    total = 0
    relax = 0.0
    s1 = float("nan")
    if not prob.feasible(u):
        u, s1, its, status = _phase1(prob, u, opts)
        total += its
        if status == INFEASIBLE:
            return ContinuousResult(INFEASIBLE, newton_iterations=total, phase1_slack=s1)
        if status == "degenerate":
            # interior too thin to enter: widen every row by a hair
            relax = max(s1, 0.0) + 1e-8
            prob = _Reduced(Gl, hl + relax, qa, qc, qw, qb, qr + relax, cu)
            if not prob.feasible(u):
                return ContinuousResult(FAILURE, newton_iterations=total, phase1_slack=s1)

    mu = opts.mu0
    m = prob.m
    cf = None
    while True:
        last = mu / opts.mu_factor < opts.mu_min * (1 - 1e-12)
        if mu < opts.mu0:
            u = _predict(prob, u, 1.0 / (mu * opts.mu_factor), 1.0 / mu, cf)
        u, its, lam, cf = _center(prob, u, 1.0 / mu, opts.newton_tol if last else opts.center_tol,
                              opts.max_newton)
        total += its
        if cutoff is not None and not last:
            lb = (c0 + float(cu @ u) - _gap_bound(m, mu, lam)) * obj_s
            if lb >= cutoff:
                v = full(u)
                return ContinuousResult(CUTOFF, v, model.objective(v), lb, total, s1, relax)
        if last:
            break
        mu /= opts.mu_factor
    v = full(u)
    obj = model.objective(v)
    if not np.isfinite(lam):
        # stalled line search: accept only if the point is still well centered
        st = prob.state(u)
        grad, H = prob.grad_hess(1.0 / mu, st)
        lam = float(np.sqrt(max(-grad @ _solve_spd(H, -grad)[0], 0.0)))
    gap = _gap_bound(m, mu, lam)
    if not np.isfinite(gap):
        return ContinuousResult(FAILURE, v, obj, -np.inf, total, s1, relax)
    return ContinuousResult(OPTIMAL, v, obj, obj - gap * obj_s, total, s1, relax)


def _phase1(prob: _Reduced, u, opts: BarrierOptions):
    """Minimize the common slack ``s`` over ``f_i(u) <= s``.

    Stops once ``s`` is safely negative (a strictly feasible point), and
    declares infeasibility once the duality-gap bound proves ``s* > 0``.
    The barrier weight starts at ``10 m / s0`` so that the first centering
    already pushes on ``s``.
    """
    sl, sq, _ = prob.state(u)
    s = float(max((-sl).max(initial=-np.inf), (-sq).max(initial=-np.inf)))
    s = s + max(1.0, abs(s))
    aug = _Reduced(
        np.hstack([prob.Gl, -np.ones((len(prob.hl), 1))]), prob.hl,
        prob.qa, prob.qc, np.hstack([prob.qw, np.zeros((len(prob.qa), 1))]),
        np.hstack([prob.qb, -np.ones((len(prob.qa), 1))]), prob.qr,
        np.concatenate([np.zeros(len(u)), [1.0]]),
    )
    w = np.concatenate([u, [s]])
    total = 0
    target = -1e-3

    def stop(wk):
        return wk[-1] < target

    mu = 0.1 * s / aug.m
    first = True
    cf = None
    while mu >= opts.mu_min * (1 - 1e-12):
        if not first:
            w = _predict(aug, w, 1.0 / (mu * opts.mu_factor), 1.0 / mu, cf)
        first = False
        w, its, lam, cf = _center(aug, w, 1.0 / mu, opts.center_tol, opts.max_newton, stop=stop)
        total += its
        if w[-1] < 0 and prob.feasible(w[:-1]):
            if w[-1] < target or mu < 1e-3:
                return w[:-1], float(w[-1]), total, OPTIMAL
        if w[-1] - _gap_bound(aug.m, mu, lam) > opts.feas_tol:
            return w[:-1], float(w[-1]), total, INFEASIBLE
        mu /= opts.mu_factor
    sfin = float(w[-1])
    if sfin > 1e-7:
        return w[:-1], sfin, total, INFEASIBLE
    if sfin < 0 and prob.feasible(w[:-1]):
        return w[:-1], sfin, total, OPTIMAL
    return w[:-1], sfin, total, "degenerate"
