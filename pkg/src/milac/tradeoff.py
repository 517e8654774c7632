"""SE-EE tradeoff boundary by weighted-sum scalarization and lifted SCA.

For a weight ``eta`` the scalarized objective is
``eta * SE / R_ref + (1 - eta) * EE / EE_ref``. Each SCA iteration replaces
the rate by its WMMSE minorizer and ``x^2 / y`` by its tangent plane, which
leaves a concave program. After eliminating the lifted scalars
(``r = R~``, ``x = sqrt(r)``, ``y = P_tot``, ``t = B phi``) the program is
maximized over a ridge curve ``V(nu)`` by a monotone scalar root search,
which gives the exact subproblem optimum.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from .baselines import _rf_step, rf_support
from .dinkelbach import SolverConfig
from .errors import ContractViolation
from .hardware import static_power
from .metrics import ReducedPoint
from .models import (LN2, BallCurve, HybridFactors, full_space_model, hybrid_model,
                     milac_model)
from .solvers import solve_ee, solve_se

__all__ = [
    "TradeoffVars",
    "FrontierPoint",
    "RateMinorizer",
    "FractionalMinorizer",
    "rate_minorizer",
    "fractional_minorizer",
    "solve_sca_subproblem",
    "sca_for_weight",
    "trace_frontier",
]


@dataclass
class TradeoffVars:
    """One SCA subproblem solution with its lifted scalars."""

    X: np.ndarray
    p: np.ndarray
    r: float
    t: float
    x: float
    y: float
    eta: float
    objective: float = float("nan")
    kkt_residual: float = 0.0
    stalled: bool = False
    F: np.ndarray = None


@dataclass(frozen=True)
class FrontierPoint:
    eta: float
    se: float
    ee: float
    p_tx: float


class RateMinorizer:
    """``R~(F) = (1/ln 2) sum [ln omega + 1 - omega e_k(F)]`` at fixed ``(u, omega)``.

    ``to_model`` maps the caller's variable to the model variable (for MiLAC
    ``X -> gram^{1/2} X``).
    """

    def __init__(self, model, u, omega, to_model=None):
        self.model = model
        self.u = np.asarray(u, dtype=complex)
        self.omega = np.asarray(omega, dtype=float)
        self.to_model = to_model
        self.const = float(np.sum(np.log(self.omega) + 1.0))

    def coefficients(self):
        """``(c0, A, T)`` with ``sum w e = c0 - 2 alpha Re tr(A F) + tr(F^H T F)``."""
        return self.model.quadratic(self.u, self.omega)

    def value(self, Z):
        F = Z if self.to_model is None else self.to_model(Z)
        return (self.const - self.model.weighted_mse(F, self.u, self.omega)) / LN2


class FractionalMinorizer:
    """Tangent plane ``phi(x, y) = 2 k x - k^2 y`` of ``x^2 / y`` at ``k = x_ref / y_ref``."""

    def __init__(self, x_ref, y_ref):
        if not y_ref > 0:
            raise ContractViolation("y_ref must be positive")
        self.x_ref, self.y_ref = float(x_ref), float(y_ref)
        self.kappa = self.x_ref / self.y_ref

    def value(self, x, y):
        k = self.kappa
        return 2.0 * k * x - k * k * y


def rate_minorizer(X, u, omega, cs, aqnm):
    """Rate minorizer of the MiLAC problem in the row-space coordinate ``X`` (``W = H^H X``).

    Passing ``u = omega = None`` uses the MMSE receivers and weights at ``X``,
    where the minorizer is tight.
    """
    model = milac_model(cs, aqnm)
    S = cs.gram_sqrt
    if u is None or omega is None:
        u, omega = model.receivers(S @ X)
    return RateMinorizer(model, u, omega, to_model=lambda Z: S @ Z)


def fractional_minorizer(x_ref, y_ref):
    return FractionalMinorizer(x_ref, y_ref)


@dataclass
class SubproblemSolution:
    F: np.ndarray
    r: float
    x: float
    y: float
    t: float
    objective: float
    nu: float
    kkt_residual: float
    at_budget: bool


def solve_sca_subproblem(mino_rate, mino_frac, static_w, pa_efficiency, bandwidth_hz, eta,
                         refs, P_max, start=None):
    """Exact maximizer of the minorized weighted-sum program.

    Maximizes ``eta r / R_ref + (1 - eta) t / EE_ref`` over the model variable
    subject to ``r <= R~(F)``, ``x^2 <= r``, ``t <= B phi(x, y)``,
    ``y >= P_tot(F)`` and ``p_tx(F) <= P_max``.

    Parameters
    ----------
    refs : (R_ref, EE_ref)
    start : model variable of the incumbent, returned when the program is
        degenerate (constant objective).
    """
    R_ref, EE_ref = refs
    model = mino_rate.model
    curve = BallCurve(model, mino_rate.u, mino_rate.omega)
    alpha = model.alpha
    const = mino_rate.const
    kappa = mino_frac.kappa
    c_r = eta / R_ref
    c_e = (1.0 - eta) * bandwidth_hz / EE_ref
    c3 = c_e * kappa * kappa * alpha / pa_efficiency

    def rate(nu):
        return (const - curve.weighted_mse(nu)) / LN2

    def finish(F, r, ptx, nu, kkt, at_budget):
        r = max(r, 0.0)
        x = math.sqrt(r)
        y = static_w + ptx / pa_efficiency
        t = bandwidth_hz * mino_frac.value(x, y)
        obj = c_r * r + (1.0 - eta) * t / EE_ref
        return SubproblemSolution(F, r, x, y, t, obj, nu, kkt, at_budget)

    nu_b = curve.budget_nu(P_max, 0.0)
    r_b = rate(nu_b)
    degenerate = (c_r == 0.0 and c_e * kappa == 0.0) or r_b <= 0.0
    if degenerate:
        if start is None:
            start = np.zeros((model.dim, model.n_users), dtype=complex)
        r0 = (const - model.weighted_mse(start, mino_rate.u, mino_rate.omega)) / LN2
        return finish(start, r0, model.p_tx(start), float("nan"), 0.0, False)

    def stationarity(nu):
        r = rate(nu)
        if c_e * kappa > 0 and r <= 0:
            return math.inf
        phi = c_r + (c_e * kappa / math.sqrt(r) if c_e * kappa > 0 else 0.0)
        return nu * phi / LN2 - c3

    s_b = stationarity(nu_b)
    if c_e == 0.0 or s_b >= 0.0:
        nu = nu_b
        ptx = curve.p_tx(nu)
        kkt = abs(ptx - P_max) / P_max if nu_b > 0 else max(0.0, -s_b) / max(c3, 1e-300)
        return finish(model.from_v(curve.V(nu)), rate(nu), ptx, nu, kkt, nu_b > 0)

    lo = nu_b
    hi = max(2.0 * nu_b, c3 * LN2 / max(c_r + c_e * kappa / math.sqrt(r_b), 1e-300), 1e-300)
    while stationarity(hi) < 0:
        lo, hi = hi, 2.0 * hi
    for _ in range(300):
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            break
        if stationarity(mid) < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * hi:
            break
    candidates = [lo, hi]
    vals = []
    for nu in candidates:
        r = rate(nu)
        if r < 0:
            vals.append(-math.inf)
            continue
        ptx = curve.p_tx(nu)
        vals.append(c_r * r + c_e * (2.0 * kappa * math.sqrt(r)
                                     - kappa * kappa * (static_w + ptx / pa_efficiency)))
    nu = candidates[int(np.argmax(vals))]
    s = stationarity(nu)
    kkt = abs(s) / max(c3, 1e-300) if math.isfinite(s) else 1.0
    return finish(model.from_v(curve.V(nu)), rate(nu), curve.p_tx(nu), nu, kkt, False)


# -- architecture adapters --------------------------------------------------------
class _Adapter:
    """Maps an architecture's variables to the shared linear model and back."""

    def __init__(self, cs, arch, pm, cfg):
        self.cs, self.arch, self.pm, self.cfg = cs, arch, pm, cfg
        self.aqnm = cfg.quantizer(pm)
        self.B = cfg.bandwidth(pm)
        self.static = static_power(arch, pm).total
        self.kind = arch.kind
        if self.kind == "milac":
            self._model = milac_model(cs, self.aqnm)
        elif self.kind == "digital":
            self._model = full_space_model(cs, self.aqnm, "diag")
        else:
            conn = "fc" if self.kind == "hybrid_fc" else "sc"
            self.mask = rf_support(cs.n_antennas, arch.n_rf_chains, conn)

    # state is (F_rf or None, F)
    def from_report(self, rep):
        if self.kind == "milac":
            return (None, rep.point.V)
        if self.kind == "digital":
            return (None, np.asarray(rep.point))
        return (rep.point.F_rf, rep.point.F_bb)

    def model(self, state):
        if self.kind in ("milac", "digital"):
            return self._model
        return hybrid_model(self.cs, state[0], self.aqnm)

    def se_ee(self, state):
        model = self.model(state)
        se = model.rate(state[1])
        ptx = model.p_tx(state[1])
        ptot = self.static + ptx / self.pm.pa_efficiency
        return se, self.B * se / ptot, ptx

    def beamformer(self, state):
        if self.kind == "milac":
            V = state[1]
            lam = float(np.linalg.norm(V, 2)) ** 2
            K = V.shape[1]
            if lam <= 0:
                return ReducedPoint(np.zeros((K, K)), np.zeros(K))
            Y = V / math.sqrt(lam)
            return ReducedPoint(Y * min(1.0, 1.0 / max(np.linalg.norm(Y, 2), 1e-300)),
                                np.full(K, lam))
        if self.kind == "digital":
            return state[1]
        return HybridFactors(state[0], state[1])

    def lifted(self, state, sol, eta):
        V = sol.F
        if self.kind == "milac":
            X = self.cs.gram_inv_sqrt @ V
            p = np.full(V.shape[1], float(np.linalg.norm(V, 2)) ** 2)
        else:
            X, p = V, None
        return TradeoffVars(X, p, sol.r, sol.t, sol.x, sol.y, eta, sol.objective,
                            sol.kkt_residual, False, V)


def _objective(se_ee, eta, refs):
    se, ee, _ = se_ee
    return eta * se / refs[0] + (1.0 - eta) * ee / refs[1]


def _analog_ascent(ad, state, u, omega, eta, refs, kappa, P_max, step):
    """One Armijo step on the analog precoder for the minorized objective."""
    F_rf, F_bb = state
    R_ref, EE_ref = refs
    c_r = eta / R_ref
    c_e = (1.0 - eta) * ad.B / EE_ref
    pa = ad.pm.pa_efficiency
    const = float(np.sum(np.log(omega) + 1.0))

    def neg_j(cand):
        m = hybrid_model(ad.cs, cand, ad.aqnm)
        r = (const - m.weighted_mse(F_bb, u, omega)) / LN2
        if r < 0:
            return math.inf
        ptx = m.p_tx(F_bb)
        return -(c_r * r + c_e * (2 * kappa * math.sqrt(r) - kappa * kappa * (ad.static + ptx / pa)))

    m = hybrid_model(ad.cs, F_rf, ad.aqnm)
    r0 = max((const - m.weighted_mse(F_bb, u, omega)) / LN2, 1e-300)
    phi = c_r + (c_e * kappa / math.sqrt(r0) if c_e * kappa > 0 else 0.0)
    scale = phi / LN2
    gamma = c_e * kappa * kappa / pa
    new, _, step = _rf_step(ad.cs, F_rf, F_bb, u, omega, gamma, scale, ad.aqnm, ad.mask,
                            P_max, neg_j, step)
    return (new, F_bb), step


@dataclass
class WeightResult:
    eta: float
    state: tuple
    objective_history: list
    vars: TradeoffVars = None
    tightness: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    slack: float = float("nan")


def lifted_slack(mino, frac, model, sol, static_w, pa_efficiency, bandwidth_hz):
    """Largest relative slack of ``r <= R~``, ``x^2 <= r``, ``t <= B phi``, ``y >= P_tot``.

    Every side is re-evaluated from ``sol.F`` rather than taken from the
    closed-form elimination.
    """
    r_f = mino.value(sol.F)
    y_f = static_w + model.p_tx(sol.F) / pa_efficiency
    t_f = bandwidth_hz * frac.value(sol.x, sol.y)
    return max(abs(r_f - sol.r) / max(abs(r_f), 1e-300),
               abs(sol.r - sol.x * sol.x) / max(sol.r, 1e-300),
               abs(t_f - sol.t) / max(abs(t_f), 1e-300),
               abs(sol.y - y_f) / y_f)


def _extrapolate_state(ad, prev, cand, val, eta, refs, P_max, max_doublings=30):
    """Move ``F`` along ``cand - prev`` with doubling steps while the objective improves."""
    model = ad.model(cand)
    F0, F1 = prev[1], cand[1]
    best = (cand, val)
    t = 1.0
    for _ in range(max_doublings):
        F = F1 + t * (F1 - F0)
        ptx = model.p_tx(F)
        if ptx > P_max:
            F = F * math.sqrt(P_max / ptx)
        trial = (cand[0], F)
        v = _objective(ad.se_ee(trial), eta, refs)
        if not v > best[1]:
            break
        best = (trial, v)
        t *= 2.0
    return best


def sca_for_weight(ad, state, eta, refs, cfg):
    """Monotone SCA ascent of the scalarized objective from ``state``."""
    P_max = cfg.p_max
    hist = [_objective(ad.se_ee(state), eta, refs)]
    tight = []
    last = None
    converged = False
    step = None
    slack = float("nan")
    n = 0
    for n in range(1, cfg.max_sca + 1):
        model = ad.model(state)
        F = state[1]
        u, omega = model.receivers(F)
        mino = RateMinorizer(model, u, omega)
        se, _, ptx = ad.se_ee(state)
        y_ref = ad.static + ptx / ad.pm.pa_efficiency
        frac = FractionalMinorizer(math.sqrt(max(se, 0.0)), y_ref)
        tight.append((mino.value(F) - se, frac.value(frac.x_ref, y_ref) - frac.x_ref ** 2 / y_ref))
        sol = solve_sca_subproblem(mino, frac, ad.static, ad.pm.pa_efficiency, ad.B, eta, refs,
                                   P_max, start=F)
        slack = lifted_slack(mino, frac, model, sol, ad.static, ad.pm.pa_efficiency, ad.B)
        cand = (state[0], sol.F)
        if ad.kind.startswith("hybrid"):
            moved, step = _analog_ascent(ad, cand, u, omega, eta, refs, frac.kappa, P_max, step)
            if _objective(ad.se_ee(moved), eta, refs) >= _objective(ad.se_ee(cand), eta, refs):
                cand = moved
        val = _objective(ad.se_ee(cand), eta, refs)
        if val < hist[-1]:
            break
        if cfg.extrapolate and cand[1].shape == state[1].shape:
            cand, val = _extrapolate_state(ad, state, cand, val, eta, refs, P_max)
        state = cand
        last = ad.lifted(state, sol, eta)
        hist.append(val)
        if abs(val - hist[-2]) <= cfg.eps_sca * max(abs(hist[-2]), 1e-300):
            converged = True
            break
    return WeightResult(eta, state, hist, last, tight, n, converged, slack)


@dataclass
class FrontierResult:
    points: list
    ee_reference: float
    se_reference: float
    weights: dict
    diagnostics: list


def trace_frontier(cs, arch, pm, cfg=SolverConfig(), weights=None, ee_report=None,
                   se_report=None):
    """Weighted-sum SE-EE boundary with endpoint recalibration passes.

    Returns a FrontierResult whose ``points`` are sorted by weight.
    """
    weights = cfg.frontier_weights if weights is None else tuple(float(w) for w in weights)
    if list(weights) != sorted(weights) or weights[0] != 0.0 or weights[-1] != 1.0:
        raise ContractViolation("weights must be sorted and contain 0 and 1")
    ad = _Adapter(cs, arch, pm, cfg)
    ee_rep = solve_ee(cs, arch, pm, cfg) if ee_report is None else ee_report
    se_rep = solve_se(cs, arch, pm, cfg) if se_report is None else se_report
    diagnostics = []
    if ee_rep.se <= 0 or se_rep.se <= 0:
        return FrontierResult([], ee_rep.ee, se_rep.se, {}, ["zero-rate endpoints"])
    states = {0.0: ad.from_report(ee_rep), 1.0: ad.from_report(se_rep)}
    metrics = {w: ad.se_ee(s) for w, s in states.items()}

    def refs_now():
        return (max(m[0] for m in metrics.values()), max(m[1] for m in metrics.values()))

    refs = refs_now()
    results = {}

    def run(eta, start):
        res = sca_for_weight(ad, start, eta, refs, cfg)
        results[eta] = res
        states[eta] = res.state
        metrics[eta] = ad.se_ee(res.state)

    for _ in range(cfg.recal_passes):
        for eta in weights:
            solved = [w for w in states if w != eta]
            nearest = min(solved, key=lambda w: (abs(w - eta), w))
            options = [states[nearest]] + ([states[eta]] if eta in states else [])
            start = max(options, key=lambda s: _objective(ad.se_ee(s), eta, refs))
            run(eta, start)
        refs = refs_now()

    # polish: restart a weight from any solution that scores better under it
    for _ in range(len(weights)):
        changed = False
        for eta in weights:
            own = _objective(metrics[eta], eta, refs)
            best = max(weights, key=lambda w: _objective(metrics[w], eta, refs))
            if _objective(metrics[best], eta, refs) > own * (1.0 + 1e-12):
                run(eta, states[best])
                changed = True
        if not changed:
            break

    # each weight keeps the best pooled solution under its own objective,
    # so no returned point can dominate another
    pool = dict(states)
    pooled = dict(metrics)
    for eta in weights:
        best = max(pool, key=lambda w: _objective(pooled[w], eta, refs))
        states[eta] = pool[best]
        metrics[eta] = pooled[best]

    points = []
    for eta in weights:
        se, ee, ptx = metrics[eta]
        if not (math.isfinite(se) and math.isfinite(ee)):
            diagnostics.append(f"eta={eta}: non-finite result omitted")
            continue
        points.append(FrontierPoint(eta, se, ee, ptx))
    return FrontierResult(points, ee_rep.ee, se_rep.se, results, diagnostics)
