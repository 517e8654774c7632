"""Quantization-aware EE maximization for MiLAC in reduced K x K coordinates.

The variable is ``(Y, p)`` with ``||Y||_2 <= 1`` and the beamformer is
``W = H^H gram^{-1/2} Y diag(sqrt(p))``. The inner WMMSE loop cycles
through receivers/weights, a closed-form power update and projected
gradient on ``Y``; an outer Dinkelbach loop updates the EE parameter.
"""

from dataclasses import dataclass
import math

import numpy as np
from scipy.optimize import brentq

from .dinkelbach import (InnerResult, SolveReport, SolverConfig, relative_change,
                         run_dinkelbach)
from .errors import ContractViolation
from .metrics import ReducedPoint, coupling_matrix, evaluate, p_tx_reduced
from .numkit import max_eig_hermitian, project_spectral_ball, spectral_norm, svd

__all__ = [
    "SolverConfig",
    "WmmseState",
    "reduce",
    "expand",
    "is_feasible",
    "update_receivers_weights",
    "update_powers",
    "update_Y_pgd",
    "wmmse_objective",
    "wmmse_inner",
    "initial_point",
    "maximize_ee",
    "maximize_se",
]

ZERO_POWER = 1e-12


@dataclass
class WmmseState:
    u: np.ndarray
    omega: np.ndarray
    Q: np.ndarray
    L: np.ndarray
    z: np.ndarray
    lam: float
    gamma: float
    mu_p: float = 0.0
    scale: float = 1.0


# -- coordinates ------------------------------------------------------------
def is_feasible(W, p, tol=1e-8):
    """``lambda_max(W^H W - diag(p)) <= tol``."""
    W = np.asarray(W, dtype=complex)
    p = np.asarray(p, dtype=float)
    M = W.conj().T @ W - np.diag(p)
    return max_eig_hermitian(M) <= tol


def reduce(cs, W, p, tol=1e-8):
    """Reduced point ``(Y, p)`` of a feasible ``(W, p)``.

    ``W`` is first projected onto the row space of ``H``; columns whose
    power is below ``1e-12 max(p)`` map to zero columns of ``Y``.
    """
    W = np.asarray(W, dtype=complex)
    p = np.asarray(p, dtype=float).ravel()
    scale = max(float(p.max(initial=0.0)), np.finfo(float).tiny)
    if not is_feasible(W, p, tol * scale):
        raise ContractViolation("(W, p) violates W^H W <= diag(p)")
    X = np.linalg.solve(cs.gram, cs.H @ W)
    V = cs.gram_sqrt @ X
    active = p > ZERO_POWER * scale
    inv = np.zeros_like(p)
    inv[active] = 1.0 / np.sqrt(p[active])
    Y = V * inv[None, :]
    if spectral_norm(Y) > 1.0 + 1e-8:
        Y = project_spectral_ball(Y, 1.0)
    return ReducedPoint(Y, p)


def expand(cs, rp):
    """``W = H^H gram^{-1/2} Y diag(sqrt(p))``."""
    return cs.H.conj().T @ (cs.gram_inv_sqrt @ rp.V)


# -- block updates ------------------------------------------------------------
def update_receivers_weights(C, aqnm, sigma2):
    """MMSE receivers ``u`` and MSE weights ``omega = 1 / e``."""
    C = np.asarray(C, dtype=complex)
    d = np.diag(C)
    den = aqnm.alpha * np.sum(np.abs(C) ** 2, axis=1) + sigma2
    u = aqnm.alpha * np.conj(d) / den
    e = 1.0 - aqnm.alpha * np.real(u * d)
    e = np.clip(e, np.finfo(float).tiny, 1.0)
    return u, 1.0 / e


def wmmse_objective(cs, rp, u, omega, gamma, aqnm, scale):
    """``scale * sum(omega e - ln omega) + gamma p_tx`` with ``scale = B / ln 2``."""
    C = coupling_matrix(cs, rp)
    e = _mse(C, u, aqnm, cs.noise_variance)
    return scale * float(np.sum(omega * e - np.log(omega))) + gamma * p_tx_reduced(rp, aqnm)


def _mse(C, u, aqnm, sigma2):
    a = aqnm.alpha
    d = np.diag(C)
    rx = a * np.sum(np.abs(C) ** 2, axis=1) + sigma2
    return 1.0 - 2.0 * a * np.real(u * d) + np.abs(u) ** 2 * rx


def make_state(cs, u, omega, gamma, scale, lam=0.0):
    S = cs.gram_sqrt
    z = scale * omega * np.abs(u) ** 2
    Q = S @ (z[:, None] * S) + gamma * np.eye(cs.n_users)
    Q = 0.5 * (Q + Q.conj().T)
    L = (scale * omega * u)[:, None] * S
    return WmmseState(u, omega, Q, L, z, lam, gamma, 0.0, scale)


def power_coefficients(state, Y, Z):
    s = state.scale
    a = s * state.omega * np.real(state.u * np.diag(Z))
    b = s * (state.omega * np.abs(state.u) ** 2) @ (np.abs(Z) ** 2)
    c = np.sum(np.abs(Y) ** 2, axis=0)
    return a, b, c


def update_powers(state, Y, Z, P_max, aqnm):
    """Closed-form stream powers with the budget multiplier found by bisection.

    Returns ``(p, mu_p)``.
    """
    a, b, c = power_coefficients(state, Y, Z)
    if not np.any(a > 0):
        return np.zeros_like(a), 0.0
    alpha = aqnm.alpha
    gamma = state.gamma

    def powers(mu):
        den = b + (gamma + mu) * c
        with np.errstate(divide="ignore", invalid="ignore"):
            q = np.where(a > 0, a / den, 0.0)
        q = np.where(np.isfinite(q), q, np.inf)
        return np.maximum(q, 0.0) ** 2

    def budget(p):
        pc = np.where(c > 0, c * p, 0.0)
        return alpha * float(np.sum(pc))

    p = powers(0.0)
    if np.all(np.isfinite(p)) and budget(p) <= P_max:
        return p, 0.0
    pos = (c > 0) & (a > 0)
    hi = max(float(np.max(a[pos] / (np.sqrt(P_max / (alpha * a.size * c[pos])) * c[pos]))), 1e-300)
    while budget(powers(hi)) > P_max:
        hi *= 2.0
    lo = 0.0
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if budget(powers(mid)) > P_max:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12 * hi:
            break
    return powers(hi), hi


def y_objective(Y, Q, L, p):
    sq = np.sqrt(p)
    QY = Q @ Y
    quad = np.real(np.sum(np.conj(Y) * QY * p[None, :]))
    lin = np.real(np.trace(L @ Y * sq[None, :]))
    return float(quad - 2.0 * lin)


def y_gradient(Y, Q, L, p):
    """``2 Q Y diag(p) - 2 L^H diag(sqrt(p))`` (equals df/dRe(Y) + i df/dIm(Y))."""
    return 2.0 * (Q @ Y) * p[None, :] - 2.0 * L.conj().T * np.sqrt(p)[None, :]


@dataclass
class PgdResult:
    Y: np.ndarray
    iters: int
    converged: bool
    residual: float


def update_Y_pgd(state, p, cs=None, max_iters=2000, tol=1e-8, Y0=None, Q=None):
    """Projected gradient on the unit spectral ball with constant step ``1 / L_f``.

    Stops when the fixed-point residual ``||Y - Proj(Y - tau grad)||_F`` is
    at most ``tol * max(1, ||Y||_F)``.
    """
    Q = state.Q if Q is None else Q
    L = state.L
    K = L.shape[0]
    p = np.asarray(p, dtype=float)
    Y = np.zeros((K, K), dtype=complex) if Y0 is None else project_spectral_ball(Y0)
    lip = 2.0 * spectral_norm(Q) * float(p.max(initial=0.0))
    if lip <= 0:
        return PgdResult(Y, 0, True, 0.0)
    tau = 1.0 / lip
    res = math.inf
    for it in range(1, max_iters + 1):
        Yn = project_spectral_ball(Y - tau * y_gradient(Y, Q, L, p))
        res = float(np.linalg.norm(Yn - Y))
        Y = Yn
        if res <= tol * max(1.0, float(np.linalg.norm(Y))):
            return PgdResult(Y, it, True, res)
    return PgdResult(Y, max_iters, False, res)


def _p_tx(Y, p, alpha):
    return alpha * float(np.dot(p, np.sum(np.abs(Y) ** 2, axis=0)))


def budget_fallback(state, p, Y_old, P_max, aqnm, max_iters, tol):
    """Re-solve the Y step with ``Q + mu alpha I`` and ``mu`` bisected to meet the budget."""
    K = Y_old.shape[0]
    eye = np.eye(K)
    alpha = aqnm.alpha
    iters = 0
    warm = [Y_old]

    def solve(mu):
        nonlocal iters
        r = update_Y_pgd(state, p, max_iters=max_iters, tol=tol, Y0=warm[0],
                         Q=state.Q + mu * alpha * eye)
        iters += r.iters
        warm[0] = r.Y
        return r.Y

    hi = max(spectral_norm(state.Q), 1e-300)
    Y_hi = solve(hi)
    while _p_tx(Y_hi, p, alpha) > P_max:
        hi *= 4.0
        Y_hi = solve(hi)
    if _p_tx(Y_hi, p, alpha) < P_max * (1.0 - 1e-10):
        mu = brentq(lambda m: _p_tx(solve(m), p, alpha) - P_max, 0.0, hi,
                    rtol=1e-12, maxiter=100)
        for bump in (1.0, 1.0 + 1e-9, 1.0 + 1e-6, 1.0 + 1e-3):
            Y_try = solve(mu * bump)
            if _p_tx(Y_try, p, alpha) <= P_max:
                Y_hi = Y_try
                break
    return Y_hi, iters


# -- inner and outer loops ----------------------------------------------------
def wmmse_inner(cs, cfg, gamma, P_max, start, aqnm, scale, lam=0.0):
    """Block-coordinate WMMSE descent from ``start``.

    The recorded trace holds the objective after every block update
    (receivers/weights, powers, Y); it is nonincreasing.
    """
    Y, p = start.Y.copy(), start.p.copy()
    alpha = aqnm.alpha
    sigma2 = cs.noise_variance
    S = cs.gram_sqrt
    trace = []
    pgd_iters = violations = 0
    converged = False
    prev = None
    cycles = 0

    def objective(Y, p, u, omega):
        C = S @ (Y * np.sqrt(p)[None, :])
        e = _mse(C, u, aqnm, sigma2)
        return scale * float(np.sum(omega * e - np.log(omega))) + gamma * _p_tx(Y, p, alpha)

    def reduced_objective(Y, p):
        C = S @ (Y * np.sqrt(p)[None, :])
        u, omega = update_receivers_weights(C, aqnm, sigma2)
        return objective(Y, p, u, omega)

    for cycles in range(1, cfg.max_inner + 1):
        Y_start, p_start = Y, p
        C = S @ (Y * np.sqrt(p)[None, :])
        u, omega = update_receivers_weights(C, aqnm, sigma2)
        g1 = objective(Y, p, u, omega)
        trace.append(g1)
        if prev is None:
            prev = g1
        state = make_state(cs, u, omega, gamma, scale, lam)

        p_new, mu = update_powers(state, Y, S @ Y, P_max, aqnm)
        p_new[p_new < ZERO_POWER * P_max] = 0.0
        g2 = objective(Y, p_new, u, omega)
        if g2 <= g1:
            p = p_new
            state.mu_p = mu
        else:
            g2 = g1
        trace.append(g2)

        pgd = update_Y_pgd(state, p, max_iters=cfg.max_pgd, tol=cfg.pgd_tol, Y0=Y)
        pgd_iters += pgd.iters
        Y_new = pgd.Y
        if _p_tx(Y_new, p, alpha) > P_max * (1.0 + 1e-10):
            violations += 1
            Y_new, extra = budget_fallback(state, p, Y, P_max, aqnm, cfg.max_pgd, cfg.pgd_tol)
            pgd_iters += extra
        g3 = objective(Y_new, p, u, omega)
        if g3 <= g2 and _p_tx(Y_new, p, alpha) <= P_max * (1.0 + 1e-10):
            Y = Y_new
        else:
            g3 = g2
        trace.append(g3)

        if cfg.extrapolate:
            Y, p, g4 = _extrapolate(Y_start, p_start, Y, p, reduced_objective, P_max, alpha)
            if g4 < g3:
                g3 = g4
                trace.append(g4)

        if relative_change(g3, prev, floor=scale) <= cfg.eps_in:
            converged = True
            break
        prev = g3
    Y = project_spectral_ball(Y)
    return InnerResult(ReducedPoint(Y, p), trace, cycles, pgd_iters, converged, violations)


def _extrapolate(Y0, p0, Y1, p1, objective, P_max, alpha, max_doublings=30):
    """Monotone extrapolation along the last cycle's displacement.

    Tries ``Y1 + t (Y1 - Y0)`` and ``q1 (q1 / q0)^t`` with ``q = sqrt(p)`` for
    ``t = 1, 2, 4, ...``, keeping the best feasible candidate. The WMMSE
    cycle itself contracts slowly when the power penalty is small relative
    to the rate weights. The multiplicative power move never switches a
    stream off, which an additive move could do irreversibly.
    """
    q0, q1 = np.sqrt(p0), np.sqrt(p1)
    live = (q0 > 0) & (q1 > 0)
    ratio = np.ones_like(q1)
    ratio[live] = q1[live] / q0[live]
    best = (Y1, p1, objective(Y1, p1))
    t = 1.0
    for _ in range(max_doublings):
        Yc = project_spectral_ball(Y1 + t * (Y1 - Y0))
        pc = (q1 * np.clip(ratio ** t, 1e-2, 1e2)) ** 2
        ptx = _p_tx(Yc, pc, alpha)
        if ptx > P_max:
            pc = pc * (P_max / ptx)
        val = objective(Yc, pc)
        if not val < best[2]:
            break
        best = (Yc, pc, val)
        t *= 2.0
    return best


def initial_point(cs, aqnm, P_max, identity=False):
    """Unitary ``Y`` (from the SVD of ``gram^{1/2}``) with uniform powers at 90% of the budget."""
    K = cs.n_users
    if identity:
        Y = np.eye(K, dtype=complex)
    else:
        U, _, V = svd(cs.gram_sqrt)
        Y = V @ U.conj().T
    c = np.sum(np.abs(Y) ** 2, axis=0)
    p = np.full(K, 0.9 * P_max / (aqnm.alpha * float(np.sum(c))))
    return ReducedPoint(Y, p)


def _fixed_point_residual(cs, cfg, gamma, P_max, rp, aqnm, scale):
    """Relative change of ``V = Y diag(sqrt p)`` over one extra inner cycle."""
    one = SolverConfig(p_max=cfg.p_max, max_inner=1, max_pgd=cfg.max_pgd,
                       pgd_tol=cfg.pgd_tol, eps_in=0.0)
    nxt = wmmse_inner(cs, one, gamma, P_max, rp, aqnm, scale).point
    den = max(float(np.linalg.norm(rp.V)), np.finfo(float).tiny)
    return float(np.linalg.norm(nxt.V - rp.V)) / den


def _report(cs, arch, pm, cfg, rp, aqnm, **kw):
    rep = evaluate(cs, arch, pm, rp, bandwidth_hz=cfg.bandwidth(pm), aqnm=aqnm)
    return SolveReport(arch=arch.kind, point=rp, W=expand(cs, rp), ee=rep.ee, se=rep.sum_se,
                       p_tx=rep.p_tx, p_tot=rep.p_tot, **kw)


def _start(cs, arch, pm, cfg, aqnm):
    for identity in (False, True):
        rp = initial_point(cs, aqnm, cfg.p_max, identity=identity)
        if evaluate(cs, arch, pm, rp, cfg.bandwidth(pm), aqnm).sum_se > 0:
            return rp
    return None


def _check_arch(arch, cs):
    if arch.kind != "milac":
        raise ContractViolation("MiLAC solver needs a milac architecture")
    if (arch.n_users, arch.n_antennas) != (cs.n_users, cs.n_antennas):
        raise ContractViolation("architecture dimensions do not match the channel")


def maximize_ee(cs, arch, pm, cfg=SolverConfig()):
    """Dinkelbach-WMMSE EE maximization; returns a SolveReport."""
    _check_arch(arch, cs)
    aqnm = cfg.quantizer(pm)
    B = cfg.bandwidth(pm)
    scale = B / math.log(2.0)
    start = _start(cs, arch, pm, cfg, aqnm)
    if start is None:
        rp = ReducedPoint(np.zeros((cs.n_users,) * 2), np.zeros(cs.n_users))
        return _report(cs, arch, pm, cfg, rp, aqnm, lambda_trace=[0.0], converged=True,
                       kkt_residual=0.0, diagnostic="zero rate at every starting point")

    def ee_of(rp):
        return evaluate(cs, arch, pm, rp, B, aqnm).ee

    def inner(gamma, rp):
        return wmmse_inner(cs, cfg, gamma, cfg.p_max, rp, aqnm, scale, lam=gamma * pm.pa_efficiency)

    out = run_dinkelbach(start, inner, ee_of, cfg, pm.pa_efficiency)
    kkt = _fixed_point_residual(cs, cfg, out.gamma, cfg.p_max, out.point, aqnm, scale)
    return _report(cs, arch, pm, cfg, out.point, aqnm, lambda_trace=out.lambda_trace,
                   inner_objective_trace=out.inner_traces, outer_iters=out.outer_iters,
                   inner_iters=out.inner_iters, pgd_iters=out.pgd_iters,
                   converged=out.converged, kkt_residual=kkt,
                   budget_violations=out.budget_violations)


def maximize_se(cs, arch, pm, cfg=SolverConfig(), start=None):
    """Sum-SE maximization (the inner loop at ``gamma = 0``)."""
    _check_arch(arch, cs)
    aqnm = cfg.quantizer(pm)
    scale = cfg.rate_scale(pm)
    start = _start(cs, arch, pm, cfg, aqnm) if start is None else start
    if start is None:
        rp = ReducedPoint(np.zeros((cs.n_users,) * 2), np.zeros(cs.n_users))
        return _report(cs, arch, pm, cfg, rp, aqnm, converged=True, kkt_residual=0.0,
                       diagnostic="zero rate at every starting point")
    res = wmmse_inner(cs, cfg, 0.0, cfg.p_max, start, aqnm, scale)
    kkt = _fixed_point_residual(cs, cfg, 0.0, cfg.p_max, res.point, aqnm, scale)
    return _report(cs, arch, pm, cfg, res.point, aqnm, inner_objective_trace=[res.trace],
                   outer_iters=1, inner_iters=res.cycles, pgd_iters=res.pgd_iters,
                   converged=res.converged, kkt_residual=kkt,
                   budget_violations=res.budget_violations)
