"""Quantization-aware EE/SE solvers for the digital and hybrid benchmark transmitters.

All three share the Dinkelbach outer loop. The inner loop alternates MMSE
receivers/weights, an exact ridge update of the digital precoder (``W`` or
``F_bb``) under the power budget and, for hybrid, an Armijo projected
gradient step on the unit-modulus analog precoder.
"""

import math

import numpy as np

from .dinkelbach import (InnerResult, SolveReport, SolverConfig, relative_change,
                         run_dinkelbach)
from .errors import ContractViolation
from .metrics import evaluate
from .models import (HybridFactors, full_space_model, hybrid_model, ridge_step,
                     scale_to_budget)
from .numkit import hermitian_sqrt

__all__ = [
    "HybridFactors",
    "digital_distortion",
    "digital_ee",
    "digital_se",
    "hybrid_ee",
    "hybrid_se",
    "rf_support",
    "project_unit_modulus",
    "initial_rf",
]

ARMIJO_C = 1e-4


def digital_distortion(W, aqnm):
    """Per-antenna distortion covariance ``alpha beta diag(W W^H)``."""
    W = np.asarray(W, dtype=complex)
    return aqnm.alpha * aqnm.beta * np.diag(np.sum(np.abs(W) ** 2, axis=1))


# -- analog stage -------------------------------------------------------------
def rf_support(N, n_rf, connectivity):
    """Boolean mask of analog-precoder entries that carry a phase shifter."""
    if connectivity == "fc":
        return np.ones((N, n_rf), dtype=bool)
    if connectivity != "sc":
        raise ContractViolation(f"unknown connectivity {connectivity!r}")
    mask = np.zeros((N, n_rf), dtype=bool)
    for j, rows in enumerate(np.array_split(np.arange(N), n_rf)):
        mask[rows, j] = True
    return mask


def project_unit_modulus(F, mask):
    """Entrywise ``z / |z|`` on the support (``z = 0`` maps to 1), zero elsewhere."""
    F = np.where(mask, F, 0.0)
    mag = np.abs(F)
    out = np.where(mag > 0, F / np.where(mag > 0, mag, 1.0), 1.0)
    return np.where(mask, out, 0.0).astype(complex)


def initial_rf(cs, n_rf, connectivity):
    """Phases of the matched filter ``H^H`` for the first K chains, DFT columns after."""
    N, K = cs.n_antennas, cs.n_users
    mask = rf_support(N, n_rf, connectivity)
    Hh = cs.H.conj().T
    F = np.empty((N, n_rf), dtype=complex)
    m = np.arange(N)
    for j in range(n_rf):
        F[:, j] = Hh[:, j] if j < K else np.exp(-2j * math.pi * m * j / N)
    return project_unit_modulus(F, mask)


def _rf_gradient(cs, F_rf, F_bb, u, omega, gamma, scale, aqnm):
    """Real gradient (twice the Wirtinger derivative) of the inner objective in ``F_rf``."""
    a, b = aqnm.alpha, aqnm.beta
    H = cs.H
    D = omega * np.abs(u) ** 2
    KD = H.conj().T @ (D[:, None] * H)
    r = np.sum(np.abs(F_bb) ** 2, axis=1)
    BB = F_bb @ F_bb.conj().T
    FR = F_rf @ BB
    Fr = F_rf * r[None, :]
    g_mse = -a * H.conj().T @ (np.conj(omega * u)[:, None] * F_bb.conj().T) \
        + a * a * KD @ FR + a * b * KD @ Fr
    g_pow = a * a * FR + a * b * Fr
    return 2.0 * (scale * g_mse + gamma * g_pow)


def hybrid_p_tx(F_rf, F_bb, aqnm):
    """``alpha^2 ||F_rf F_bb||^2 + tr(F_rf R_q F_rf^H)``, ``R_q = alpha beta diag(F_bb F_bb^H)``."""
    a, b = aqnm.alpha, aqnm.beta
    r = np.sum(np.abs(F_bb) ** 2, axis=1)
    col = np.sum(np.abs(F_rf) ** 2, axis=0)
    return a * a * float(np.sum(np.abs(F_rf @ F_bb) ** 2)) + a * b * float(np.dot(col, r))


def _rf_step(cs, F_rf, F_bb, u, omega, gamma, scale, aqnm, mask, P_max, objective, step):
    """One Armijo-backtracked projected gradient step; returns ``(F_rf, value, step)``."""
    G = np.where(mask, _rf_gradient(cs, F_rf, F_bb, u, omega, gamma, scale, aqnm), 0.0)
    g0 = objective(F_rf)
    gmax = float(np.max(np.abs(G)))
    if gmax == 0.0:
        return F_rf, g0, step
    t = step if step is not None else 0.1 / gmax
    for _ in range(40):
        cand = project_unit_modulus(F_rf - t * G, mask)
        decrease = float(np.real(np.sum(np.conj(G) * (F_rf - cand))))
        if hybrid_p_tx(cand, F_bb, aqnm) <= P_max:
            val = objective(cand)
            if val <= g0 - ARMIJO_C * decrease and decrease > 0:
                return cand, val, 2.0 * t
        t *= 0.5
    return F_rf, g0, step


# -- inner loop -----------------------------------------------------------------
class _Problem:
    """Digital (``mask is None``) or hybrid inner problem."""

    def __init__(self, cs, aqnm, mask=None, update_rf=True):
        self.cs, self.aqnm, self.mask = cs, aqnm, mask
        self.update_rf = update_rf and mask is not None

    def model(self, F_rf):
        if self.mask is None:
            return full_space_model(self.cs, self.aqnm, "diag")
        return hybrid_model(self.cs, F_rf, self.aqnm)


def _inner(prob, cfg, gamma, P_max, start, scale):
    """Block descent on ``scale * sum(omega e - ln omega) + gamma p_tx``."""
    F_rf, F = start
    trace = []
    converged = False
    prev = None
    cycles = 0
    step = None
    model = prob.model(F_rf)

    def value(model, F, u, omega):
        return scale * float(np.sum(omega * model.mse(F, u) - np.log(omega))) + gamma * model.p_tx(F)

    def fresh(model, F):
        u, omega = model.receivers(F)
        return value(model, F, u, omega)

    for cycles in range(1, cfg.max_inner + 1):
        F_start = F
        u, omega = model.receivers(F)
        g1 = value(model, F, u, omega)
        trace.append(g1)
        if prev is None:
            prev = g1

        F_new, _, _ = ridge_step(model, u, omega, gamma, P_max, scale)
        g2 = value(model, F_new, u, omega)
        if g2 <= g1 and model.p_tx(F_new) <= P_max * (1.0 + 1e-12):
            F = F_new
        else:
            g2 = g1
        trace.append(g2)
        g_last = g2

        if prob.update_rf:
            def objective(cand):
                m = prob.model(cand)
                return value(m, F, u, omega)

            F_rf_new, g3, step = _rf_step(prob.cs, F_rf, F, u, omega, gamma, scale, prob.aqnm,
                                         prob.mask, P_max, objective, step)
            if g3 <= g2 and F_rf_new is not F_rf:
                F_rf = F_rf_new
                model = prob.model(F_rf)
            else:
                g3 = g2
            trace.append(g3)
            g_last = g3

        if cfg.extrapolate and F_start.shape == F.shape:
            base = fresh(model, F)
            t = 1.0
            best, best_val = F, base
            for _ in range(30):
                cand = F + t * (F - F_start)
                pt = model.p_tx(cand)
                if pt > P_max:
                    cand = cand * math.sqrt(P_max / pt)
                val = fresh(model, cand)
                if not val < best_val:
                    break
                best, best_val = cand, val
                t *= 2.0
            if best_val < base and best_val < g_last:
                F = best
                g_last = best_val
                trace.append(best_val)

        if relative_change(g_last, prev, floor=scale) <= cfg.eps_in:
            converged = True
            break
        prev = g_last
    return InnerResult((F_rf, F), trace, cycles, 0, converged, 0)


def _start_point(prob, cs, F_rf, P_max):
    model = prob.model(F_rf)
    G = model.G
    GG = G @ G.conj().T
    if not np.any(GG):
        return F_rf, np.zeros((model.dim, cs.n_users), dtype=complex)
    F0 = G.conj().T @ hermitian_sqrt(0.5 * (GG + GG.conj().T), inverse=True)
    return F_rf, scale_to_budget(model, F0, 0.9 * P_max)


def _as_beamformer(prob, point):
    F_rf, F = point
    return F if prob.mask is None else HybridFactors(F_rf, F)


def _solve(cs, arch, pm, cfg, prob, F_rf, ee_mode):
    aqnm = prob.aqnm
    B = cfg.bandwidth(pm)
    scale = B / math.log(2.0)
    start = _start_point(prob, cs, F_rf, cfg.p_max)

    def rep_of(point):
        return evaluate(cs, arch, pm, _as_beamformer(prob, point), B, aqnm)

    def inner(gamma, point):
        return _inner(prob, cfg, gamma, cfg.p_max, point, scale)

    def report(point, **kw):
        rep = rep_of(point)
        bf = _as_beamformer(prob, point)
        W = bf.W if isinstance(bf, HybridFactors) else bf
        return SolveReport(arch=arch.kind, point=bf, W=W, ee=rep.ee, se=rep.sum_se,
                           p_tx=rep.p_tx, p_tot=rep.p_tot, **kw)

    if rep_of(start).sum_se <= 0:
        return report(start, lambda_trace=[0.0], converged=True, kkt_residual=0.0,
                      diagnostic="zero rate at the starting point")

    def residual(gamma, point):
        one = SolverConfig(p_max=cfg.p_max, max_inner=1, eps_in=0.0, extrapolate=False)
        nxt = _inner(prob, one, gamma, cfg.p_max, point, scale).point
        W0 = prob.model(point[0]).G @ point[1]
        W1 = prob.model(nxt[0]).G @ nxt[1]
        return float(np.linalg.norm(W1 - W0)) / max(float(np.linalg.norm(W0)), np.finfo(float).tiny)

    if ee_mode:
        out = run_dinkelbach(start, inner, lambda pt: rep_of(pt).ee, cfg, pm.pa_efficiency)
        return report(out.point, lambda_trace=out.lambda_trace,
                      inner_objective_trace=out.inner_traces, outer_iters=out.outer_iters,
                      inner_iters=out.inner_iters, converged=out.converged,
                      kkt_residual=residual(out.gamma, out.point))
    res = inner(0.0, start)
    return report(res.point, inner_objective_trace=[res.trace], outer_iters=1,
                  inner_iters=res.cycles, converged=res.converged,
                  kkt_residual=residual(0.0, res.point))


def _check(arch, cs, kinds):
    if arch.kind not in kinds:
        raise ContractViolation(f"expected architecture in {kinds}, got {arch.kind}")
    if (arch.n_users, arch.n_antennas) != (cs.n_users, cs.n_antennas):
        raise ContractViolation("architecture dimensions do not match the channel")


def digital_ee(cs, arch, pm, cfg=SolverConfig()):
    _check(arch, cs, ("digital",))
    prob = _Problem(cs, cfg.quantizer(pm))
    return _solve(cs, arch, pm, cfg, prob, None, True)


def digital_se(cs, arch, pm, cfg=SolverConfig()):
    _check(arch, cs, ("digital",))
    prob = _Problem(cs, cfg.quantizer(pm))
    return _solve(cs, arch, pm, cfg, prob, None, False)


def _hybrid_problem(cs, arch, pm, cfg, rf_init, update_rf):
    _check(arch, cs, ("hybrid_fc", "hybrid_sc"))
    conn = "fc" if arch.kind == "hybrid_fc" else "sc"
    n_rf = arch.n_rf_chains
    if rf_init is None:
        F_rf = initial_rf(cs, n_rf, conn)
        mask = rf_support(cs.n_antennas, n_rf, conn)
    else:
        F_rf = np.asarray(rf_init, dtype=complex)
        if F_rf.shape != (cs.n_antennas, n_rf):
            raise ContractViolation("rf_init has the wrong shape")
        mask = rf_support(cs.n_antennas, n_rf, conn) if update_rf else np.abs(F_rf) > 0
    return _Problem(cs, cfg.quantizer(pm), mask, update_rf), F_rf


def hybrid_ee(cs, arch, pm, cfg=SolverConfig(), rf_init=None, update_rf=True):
    """EE maximization for hybrid-FC or hybrid-SC (by ``arch.kind``).

    ``rf_init``/``update_rf=False`` pin the analog stage, e.g. to the
    identity for a digital cross-check.
    """
    prob, F_rf = _hybrid_problem(cs, arch, pm, cfg, rf_init, update_rf)
    return _solve(cs, arch, pm, cfg, prob, F_rf, True)


def hybrid_se(cs, arch, pm, cfg=SolverConfig(), rf_init=None, update_rf=True):
    prob, F_rf = _hybrid_problem(cs, arch, pm, cfg, rf_init, update_rf)
    return _solve(cs, arch, pm, cfg, prob, F_rf, False)
