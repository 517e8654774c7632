"""Acceptance suites shared by ``milac selftest`` and the test-suite.

Each suite returns a :class:`CheckResult`. Passing a suite name in
``faults`` injects a known defect into that suite's measured quantity, which
must then make the suite fail (a test of the tests).
"""

from dataclasses import dataclass
import math
import time

import numpy as np

from .channel import generate_rayleigh
from .dinkelbach import SolverConfig
from .hardware import (ArchitectureSpec, PowerModel, aqnm_params, random_lossless_reciprocal,
                       scattering_matrix, static_power)
from .metrics import ReducedPoint, coupling_matrix, p_tx_full, p_tx_reduced, sinr_milac, sum_se
from .milac_ee import expand, y_gradient, y_objective
from .models import full_space_model, milac_model
from .numkit import orthogonal_projector, project_spectral_ball, spectral_norm
from .solvers import solve_ee, solve_se
from .tradeoff import (FractionalMinorizer, FrontierPoint, RateMinorizer, _Adapter,
                       solve_sca_subproblem, trace_frontier)

KINDS = ("milac", "digital", "hybrid_fc", "hybrid_sc")
BATTERY_N, BATTERY_K = 8, 3
BATTERY_SCALE = 1e-5
BATTERY_SEED = 1000


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.name}: {self.detail} ({self.seconds:.1f}s)"


def _arch(kind, N=BATTERY_N, K=BATTERY_K):
    return ArchitectureSpec(kind, N, K, K if kind.startswith("hybrid") else None)


def _battery_channel(i):
    return generate_rayleigh(BATTERY_K, BATTERY_N, seed=BATTERY_SEED + i, scale=BATTERY_SCALE)


class Battery:
    """Lazily solved EE/SE reports on the shared random channels."""

    def __init__(self, pm=None, cfg=None):
        self.pm = PowerModel() if pm is None else pm
        self.cfg = SolverConfig() if cfg is None else cfg
        self._ee, self._se, self._cs = {}, {}, {}

    def channel(self, i):
        if i not in self._cs:
            self._cs[i] = _battery_channel(i)
        return self._cs[i]

    def ee(self, kind, i):
        if (kind, i) not in self._ee:
            self._ee[(kind, i)] = solve_ee(self.channel(i), _arch(kind), self.pm, self.cfg)
        return self._ee[(kind, i)]

    def se(self, kind, i):
        if (kind, i) not in self._se:
            self._se[(kind, i)] = solve_se(self.channel(i), _arch(kind), self.pm, self.cfg)
        return self._se[(kind, i)]


# -- criteria 1 and 2 -----------------------------------------------------------
def check_table(faults=()):
    """Static power entries at N=64, K=4, N_RF=4 against the reference table."""
    pm = PowerModel()
    if "1" in faults:
        pm = pm.replace(p_ps=2 * pm.p_ps)
    dig = static_power(ArchitectureSpec("digital", 64, 4), pm)
    fc = static_power(ArchitectureSpec("hybrid_fc", 64, 4, 4), pm)
    mil = static_power(ArchitectureSpec("milac", 64, 4), pm)
    got = {
        "digital rf_dac": (dig.rf_dac, 2.514),
        "hybrid rf_dac": (fc.rf_dac, 0.157),
        "hybrid-fc phase_shifters": (fc.phase_shifters, 5.530),
        "milac static": (mil.milac_static, 0.021),
        "common": (mil.common, 0.022),
    }
    bad = {k: v for k, v in got.items() if abs(v[0] - v[1]) > 1e-3}
    detail = ", ".join(f"{k} {v[0]:.4f}" for k, v in got.items())
    return CheckResult("1 power table (static parts)", not bad, detail)


def check_sc_phase_shifters(faults=()):
    pm = PowerModel()
    arch = ArchitectureSpec("hybrid_sc", 64, 4, 4)
    ps = static_power(arch, pm).phase_shifters
    if "2" in faults:
        ps = 64 * 4 * pm.p_ps
    return CheckResult("2 hybrid-sc phase shifters", abs(ps - 1.382) <= 0.01, f"{ps:.4f} W")


# -- 3a / 3b --------------------------------------------------------------------
def check_lambda_monotone(battery, n=50, faults=()):
    worst = 0.0
    for kind in KINDS:
        for i in range(n):
            lt = list(battery.ee(kind, i).lambda_trace)
            if "3a" in faults and kind == "milac" and i == 0:
                lt.append(lt[-1] * (1 - 1e-6))
            for a, b in zip(lt, lt[1:]):
                worst = max(worst, (a - b) / max(abs(a), 1e-300))
    return CheckResult("3a lambda trace nondecreasing", worst <= 1e-9,
                       f"max relative drop {worst:.2e} over {n} channels x {len(KINDS)} archs")


def check_inner_monotone(battery, n=50, faults=()):
    worst = 0.0
    for kind in KINDS:
        for i in range(n):
            for tr in battery.ee(kind, i).inner_objective_trace:
                tr = list(tr)
                if "3b" in faults and kind == "milac" and i == 0:
                    tr.append(tr[-1] + 1e-6 * max(1.0, abs(tr[-1])))
                if len(tr) < 2:
                    continue
                m = max(1.0, max(abs(x) for x in tr))
                worst = max(worst, max((b - a) / m for a, b in zip(tr, tr[1:])))
    return CheckResult("3b inner objective nonincreasing", worst <= 1e-9,
                       f"max relative rise {worst:.2e}")


# -- 3c–3g ----------------------------------------------------------------------
def _crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


def check_gradient(n=20, seed=7, faults=()):
    rng = np.random.default_rng(seed)
    worst = 0.0
    h = 1e-6
    for _ in range(n):
        K = int(rng.integers(2, 6))
        A = _crandn(rng, K, K)
        Q = A @ A.conj().T + 0.1 * np.eye(K)
        L = _crandn(rng, K, K)
        p = rng.uniform(0.1, 2.0, K)
        Y = project_spectral_ball(_crandn(rng, K, K))
        g = y_gradient(Y, Q, L, p)
        if "3c" in faults:
            g = g * (1 + 1e-3)
        fd = np.zeros_like(g)
        for idx in np.ndindex(Y.shape):
            for unit in (1.0, 1j):
                E = np.zeros_like(Y)
                E[idx] = unit * h
                d = (y_objective(Y + E, Q, L, p) - y_objective(Y - E, Q, L, p)) / (2 * h)
                fd[idx] += d * unit
        worst = max(worst, np.linalg.norm(g - fd) / np.linalg.norm(fd))
    return CheckResult("3c gradient vs finite differences", worst <= 1e-5,
                       f"max relative error {worst:.2e}")


def check_reduction(n=100, seed=11, faults=()):
    rng = np.random.default_rng(seed)
    aq = aqnm_params(4)
    worst = 0.0
    for i in range(n):
        K = int(rng.integers(1, 5))
        N = int(rng.integers(K, K + 6))
        cs = generate_rayleigh(K, N, seed=int(rng.integers(1 << 30)), scale=float(rng.uniform(0.5, 2)),
                               noise_variance=float(rng.uniform(0.05, 1.0)))
        rp = ReducedPoint(project_spectral_ball(_crandn(rng, K, K)), rng.uniform(0, 2, K))
        se_r = sum_se(sinr_milac(coupling_matrix(cs, rp), aq, cs.noise_variance))
        pt_r = p_tx_reduced(rp, aq)
        W = expand(cs, rp)
        if "3d" in faults and i == 0:
            W = W * 1.01
        full = full_space_model(cs, aq, "full")
        se_f = sum_se(full.sinr(W))
        pt_f = p_tx_full(W, aq)
        worst = max(worst, abs(se_r - se_f) / max(se_f, 1e-300),
                    abs(pt_r - pt_f) / max(pt_f, 1e-300))
    return CheckResult("3d row-space reduction exact", worst <= 1e-9,
                       f"max relative mismatch {worst:.2e} over {n} instances")


def check_projection(n=100, seed=13, faults=()):
    rng = np.random.default_rng(seed)
    aq = aqnm_params(3)
    worst_hw = worst_sinr = 0.0
    norm_ok = True
    for i in range(n):
        K = int(rng.integers(1, 5))
        N = int(rng.integers(K, K + 6))
        H = generate_rayleigh(K, N, seed=int(rng.integers(1 << 30))).H
        W = _crandn(rng, N, K)
        Pi = orthogonal_projector(H)
        PW = Pi @ W
        if "3e" in faults and i == 0:
            PW = PW + 1e-6 * _crandn(rng, N, K)
        HW, HPW = H @ W, H @ PW
        worst_hw = max(worst_hw, np.linalg.norm(HPW - HW) / max(np.linalg.norm(HW), 1e-300))
        norm_ok &= bool(np.linalg.norm(PW) <= np.linalg.norm(W) * (1 + 1e-12))
        s1, s2 = sinr_milac(HW, aq, 0.1), sinr_milac(HPW, aq, 0.1)
        worst_sinr = max(worst_sinr, float(np.max(np.abs(s1 - s2) / np.maximum(s1, 1e-300))))
    ok = worst_hw <= 1e-10 and worst_sinr <= 1e-10 and norm_ok
    return CheckResult("3e projection lemma", ok,
                       f"HPW-HW {worst_hw:.1e}, SINR {worst_sinr:.1e}, norm shrink {norm_ok}")


def check_scattering(n=100, seed=17, faults=()):
    rng = np.random.default_rng(seed)
    worst_u = worst_s = worst_f = 0.0
    for i in range(n):
        K = int(rng.integers(1, 5))
        N = int(rng.integers(K, K + 8))
        Yc = random_lossless_reciprocal(N + K, rng, scale=float(rng.uniform(0.005, 0.1)))
        if "3f" in faults and i == 0:
            Yc = Yc + 1e-3 * np.eye(N + K)
        theta, F = scattering_matrix(Yc, K)
        M = N + K
        worst_u = max(worst_u, float(np.max(np.abs(theta.conj().T @ theta - np.eye(M)))))
        worst_s = max(worst_s, float(np.max(np.abs(theta - theta.T))))
        worst_f = max(worst_f, spectral_norm(F) - 1.0)
    ok = worst_u <= 1e-9 and worst_s <= 1e-9 and worst_f <= 1e-9
    return CheckResult("3f lossless reciprocal scattering", ok,
                       f"unitarity {worst_u:.1e}, symmetry {worst_s:.1e}, ||F||-1 {worst_f:.1e}")


def check_aqnm(faults=()):
    worst = 0.0
    for b in range(1, 25):
        q = aqnm_params(b)
        a, beta = q.alpha, q.beta
        if "3g" in faults and b == 3:
            a = a + 1e-9
        worst = max(worst, abs(a + beta - 1.0), abs(a * a + a * beta - a))
    b1 = abs(aqnm_params(1).beta - (1 - 2 / math.pi))
    # exact up to rounding of alpha = 1 - beta
    ok = worst <= 8 * np.finfo(float).eps and b1 <= 1e-6
    return CheckResult("3g quantizer identities", ok,
                       f"max identity error {worst:.1e}, 1-bit beta offset {b1:.1e}")


# -- 3h -------------------------------------------------------------------------
def toy_channel(seed=5):
    return generate_rayleigh(1, 2, seed=seed, scale=BATTERY_SCALE)


def grid_ee_oracle(cs, pm, P_max, n=200):
    """Grid search over ``w = sqrt(p) (cos t h^ + sin t h_perp)`` for the K=1, N=2 MiLAC toy."""
    arch = _arch("milac", 2, 1)
    aq = pm.aqnm
    h = cs.H[0].conj()
    hh = h / np.linalg.norm(h)
    hp = np.array([-np.conj(hh[1]), np.conj(hh[0])])
    static = static_power(arch, pm).total
    full = full_space_model(cs, aq, "full")
    best = -1.0
    for th in np.linspace(0.0, math.pi / 2, n):
        f = math.cos(th) * hh + math.sin(th) * hp
        for p in np.geomspace(1e-4 * P_max, P_max, n):
            W = (math.sqrt(p) * f)[:, None]
            se = math.log2(1.0 + float(full.sinr(W)[0]))
            ptot = static + p_tx_full(W, aq) / pm.pa_efficiency
            best = max(best, pm.sampling_rate_hz * se / ptot)
    return best


def sca_grid_oracle(mino, frac, static_w, pa_eff, B, eta, refs, P_max, n=200):
    """Grid over ``V = rho e^{i phi}`` (geometric in power) of the minorized weighted-sum objective (K=1)."""
    R_ref, EE_ref = refs
    alpha = mino.model.alpha
    best = -math.inf
    for rho in np.sqrt(np.geomspace(1e-4 * P_max, P_max, n) / alpha):
        for phi in np.linspace(0.0, 2 * math.pi, n, endpoint=False):
            V = np.array([[rho * np.exp(1j * phi)]])
            r = mino.value(V)
            if r < 0:
                continue
            y = static_w + alpha * rho * rho / pa_eff
            t = B * frac.value(math.sqrt(r), y)
            best = max(best, eta * r / R_ref + (1 - eta) * t / EE_ref)
    return best


def check_oracles(faults=()):
    pm = PowerModel()
    cfg = SolverConfig()
    cs = toy_channel()
    arch = _arch("milac", 2, 1)
    rep = solve_ee(cs, arch, pm, cfg)
    ee = rep.ee * (1.02 if "3h" in faults else 1.0)
    oracle = grid_ee_oracle(cs, pm, cfg.p_max)
    err_ee = abs(ee - oracle) / oracle

    ad = _Adapter(cs, arch, pm, cfg)
    state = ad.from_report(rep)
    se, ee0, _ = ad.se_ee(state)
    refs = (1.2 * se, 1.1 * ee0)
    # expand at a deliberately suboptimal point so the subproblem has work to do
    V0 = 0.5 * state[1]
    model = milac_model(cs, ad.aqnm)
    u, omega = model.receivers(V0)
    mino = RateMinorizer(model, u, omega)
    se0 = model.rate(V0)
    y0 = ad.static + model.p_tx(V0) / pm.pa_efficiency
    frac = FractionalMinorizer(math.sqrt(se0), y0)
    worst = 0.0
    for eta in (0.0, 0.5, 1.0):
        sol = solve_sca_subproblem(mino, frac, ad.static, pm.pa_efficiency, ad.B, eta, refs,
                                   cfg.p_max, start=V0)
        g = sca_grid_oracle(mino, frac, ad.static, pm.pa_efficiency, ad.B, eta, refs, cfg.p_max)
        # the exact optimum may beat the grid, never the reverse
        worst = max(worst, (g - sol.objective) / abs(g), abs(sol.objective - g) / abs(g))
    ok = err_ee <= 5e-3 and worst <= 1e-3
    return CheckResult("3h grid oracles (K=1, N=2)", ok,
                       f"EE gap {err_ee:.2e}, SCA subproblem gap {worst:.2e}")


# -- 3i / 3j --------------------------------------------------------------------
def dominated_pairs(points, slack=1e-6):
    out = []
    for a in points:
        for b in points:
            if a.se > b.se * (1 + slack) and a.ee > b.ee * (1 + slack):
                out.append((a.eta, b.eta))
    return out


def check_sca(battery, n=3, faults=()):
    worst_mono = worst_tight = worst_active = 0.0
    n_dom = 0
    checked = 0
    for kind in KINDS:
        for i in range(n):
            cs = battery.channel(i)
            arch = _arch(kind)
            fr = trace_frontier(cs, arch, battery.pm, battery.cfg, ee_report=battery.ee(kind, i),
                                se_report=battery.se(kind, i))
            pts = list(fr.points)
            if "3i" in faults and kind == "milac" and i == 0:
                pts.append(FrontierPoint(0.5, pts[-1].se * 0.9, pts[-1].ee * 0.9, 0.0))
            n_dom += len(dominated_pairs(pts))
            for wr in fr.weights.values():
                h = wr.objective_history
                for a, b in zip(h, h[1:]):
                    worst_mono = max(worst_mono, (a - b) / max(abs(a), 1e-300))
                for dr, df in wr.tightness:
                    worst_tight = max(worst_tight, abs(dr) / max(h[0], 1e-300), abs(df))
                if wr.converged and math.isfinite(wr.slack):
                    worst_active = max(worst_active, wr.slack)
                    checked += 1
    ok = worst_mono <= 1e-9 and worst_tight <= 1e-9 and worst_active <= 1e-6 and n_dom == 0
    return CheckResult("3i SCA ascent, tightness, activity, non-dominance", ok,
                       f"ascent drop {worst_mono:.1e}, tightness {worst_tight:.1e}, "
                       f"lifted slack {worst_active:.1e} ({checked} converged weights), "
                       f"dominated pairs {n_dom}")


def check_frontier_vs_ee(battery, n=20, faults=()):
    worst = 0.0
    cfg = SolverConfig(frontier_weights=(0.0, 0.5, 1.0))
    for kind in KINDS:
        for i in range(n):
            rep = battery.ee(kind, i)
            fr = trace_frontier(battery.channel(i), _arch(kind), battery.pm, cfg, ee_report=rep,
                                se_report=battery.se(kind, i))
            ee0 = fr.points[0].ee * (0.99 if "3j" in faults else 1.0)
            worst = max(worst, (rep.ee - ee0) / rep.ee)
    return CheckResult("3j frontier eta=0 EE >= EE-optimal design", worst <= 1e-6,
                       f"max relative shortfall {worst:.1e} over {n} channels x {len(KINDS)} archs")


# -- criterion 4 ----------------------------------------------------------------
def check_power_ordering(runs=10, workers=None, faults=()):
    """MiLAC total power below digital and hybrid-FC at EE-optimal points (sweep report)."""
    from .config import ExperimentConfig
    from .harness import cmd_sweep

    cfg = ExperimentConfig(runs=runs)
    rows = cmd_sweep(cfg, "pmax_dbm", [30.0], archs=["milac", "digital", "hybrid-fc"],
                     workers=workers)
    per = {}
    for r in rows:
        if r["realization"] != "mean" and "p_tot_W" in r:
            per.setdefault(r["realization"], {})[r["arch"]] = r["p_tot_W"]
    if "4" in faults:
        per[0]["milac"] = 10.0
    bad = [k for k, v in per.items()
           if len(v) != 3 or not (v["milac"] < v["digital"] and v["milac"] < v["hybrid-fc"])]
    mean = {a: np.mean([v[a] for v in per.values() if a in v]) for a in ("milac", "digital", "hybrid-fc")}
    ok = not bad and len(per) == runs
    return CheckResult("4 total power ordering at EE optimum", ok,
                       f"mean P_tot milac {mean['milac']:.3f} W, digital {mean['digital']:.3f} W, "
                       f"hybrid-fc {mean['hybrid-fc']:.3f} W; violations {len(bad)}/{runs}")


SELFTEST_SUITES = ("1", "2", "3a", "3b", "3c", "3d", "3e", "3f", "3g", "3h", "3i", "3j")


def run_suite(name, battery=None, faults=()):
    battery = Battery() if battery is None else battery
    table = {
        "1": lambda: check_table(faults),
        "2": lambda: check_sc_phase_shifters(faults),
        "3a": lambda: check_lambda_monotone(battery, faults=faults),
        "3b": lambda: check_inner_monotone(battery, faults=faults),
        "3c": lambda: check_gradient(faults=faults),
        "3d": lambda: check_reduction(faults=faults),
        "3e": lambda: check_projection(faults=faults),
        "3f": lambda: check_scattering(faults=faults),
        "3g": lambda: check_aqnm(faults),
        "3h": lambda: check_oracles(faults),
        "3i": lambda: check_sca(battery, faults=faults),
        "3j": lambda: check_frontier_vs_ee(battery, faults=faults),
        "4": lambda: check_power_ordering(faults=faults),
    }
    if name not in table:
        raise KeyError(f"unknown suite {name!r}")
    t0 = time.perf_counter()
    res = table[name]()
    res.seconds = time.perf_counter() - t0
    return res


def run_selftest(suites=SELFTEST_SUITES, faults=(), report=print):
    battery = Battery()
    results = []
    for s in suites:
        res = run_suite(s, battery, faults)
        results.append(res)
        if report is not None:
            report(res.line())
    return results
