"""Experiment drivers behind the command line: power tables, sweeps, frontiers.

Every driver returns rows as dictionaries keyed by CSV column. Jobs fan out
over a thread pool and are re-sorted into a fixed order before emission,
so the output does not depend on scheduling.
"""

from concurrent.futures import ThreadPoolExecutor
import csv
import io
import math
import os

import numpy as np

from .channel import ChannelSet, generate_geometric, generate_rayleigh, load_channel
from .errors import ContractViolation, NumericFailure
from .hardware import ArchitectureSpec, static_power
from .metrics import evaluate
from .solvers import solve_ee
from .tradeoff import trace_frontier

ARCH_NAMES = ("milac", "digital", "hybrid-fc", "hybrid-sc")
SWEEP_PARAMS = ("pmax_dbm", "users", "antennas", "dac_bits", "adm_scale")

SWEEP_COLUMNS = ("arch", "param", "value", "realization", "se_bit_s_hz", "ee_bit_per_J",
                 "p_tx_W", "p_tot_W", "outer_iters", "converged", "diagnostic")
FRONTIER_COLUMNS = ("arch", "eta", "se_bit_s_hz", "ee_bit_J", "p_tx_W")
BREAKDOWN_COLUMNS = ("arch", "rf_dac", "pa_supply", "phase_shifters", "milac_static", "common",
                     "total")


def parse_archs(text):
    names = [a.strip().lower().replace("_", "-") for a in text.split(",") if a.strip()]
    if not names:
        raise ContractViolation("no architecture given")
    for a in names:
        if a not in ARCH_NAMES:
            raise ContractViolation(f"unknown architecture {a!r} (choose from {', '.join(ARCH_NAMES)})")
    return names


def make_channel(cfg, seed, n_users=None, n_antennas=None):
    """Channel realization for ``cfg``; file channels are cropped to the requested size."""
    K = cfg.system.n_users if n_users is None else n_users
    N = cfg.system.n_antennas if n_antennas is None else n_antennas
    ch = cfg.channel
    sigma2 = cfg.noise_variance
    if ch.model == "rayleigh":
        return generate_rayleigh(K, N, seed=seed, scale=ch.scale, noise_variance=sigma2)
    if ch.model == "geometric":
        return generate_geometric(K, N, paths=ch.paths, seed=seed, scale=ch.scale,
                                  noise_variance=sigma2)
    H = load_channel(ch.path, noise_variance=sigma2, check_rank=False).H
    if K > H.shape[0] or N > H.shape[1]:
        raise ContractViolation(f"channel file is {H.shape[0]}x{H.shape[1]}, need {K}x{N}")
    return ChannelSet.from_matrix(ch.scale * H[:K, :N], noise_variance=sigma2)


def make_arch(name, cfg, n_users=None, n_antennas=None):
    K = cfg.system.n_users if n_users is None else n_users
    N = cfg.system.n_antennas if n_antennas is None else n_antennas
    n_rf = max(cfg.system.n_rf_chains, K) if name.startswith("hybrid") else None
    return ArchitectureSpec(name, N, K, n_rf)


def fmt(v):
    """12 significant digits for floats, plain text otherwise."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.12g}"
    return "" if v is None else str(v)


def to_csv(rows, columns):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(r.get(c)) for c in columns])
    return buf.getvalue()


def write_csv(rows, columns, path):
    text = to_csv(rows, columns)
    if path:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


def _pool_map(fn, jobs, workers):
    workers = max(1, min(workers or os.cpu_count() or 1, len(jobs) or 1))
    if workers == 1:
        return [fn(j) for j in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


# -- power breakdown --------------------------------------------------------------
def cmd_power_breakdown(cfg, static_only=False, seed=None, workers=None):
    """Per-architecture power split; ``pa_supply = p_tx / eta_PA`` at the EE-optimal point."""
    pm = cfg.power_model()
    scfg = cfg.solver_config()
    seed = cfg.channel.seed if seed is None else seed

    def job(name):
        arch = make_arch(name, cfg)
        st = static_power(arch, pm)
        p_tx = 0.0
        if not static_only:
            p_tx = solve_ee(make_channel(cfg, seed), arch, pm, scfg).p_tx
        pa = p_tx / pm.pa_efficiency
        return {"arch": name, "rf_dac": st.rf_dac, "pa_supply": pa,
                "phase_shifters": st.phase_shifters, "milac_static": st.milac_static,
                "common": st.common, "total": st.total + pa}

    return _pool_map(job, list(ARCH_NAMES), workers)


def format_table(rows, columns):
    """Fixed-width text table with 3-decimal Watts."""
    cells = [[r["arch"]] + [f"{r[c]:.3f}" for c in columns[1:]] for r in rows]
    widths = [max(len(str(x)) for x in col) for col in zip(columns, *cells)]
    out = ["  ".join(str(c).rjust(w) for c, w in zip(columns, widths))]
    out += ["  ".join(c.rjust(w) for c, w in zip(row, widths)) for row in cells]
    return "\n".join(out)


# -- sweeps ---------------------------------------------------------------------
def _sweep_value(param, text):
    try:
        v = float(text)
    except ValueError:
        raise ContractViolation(f"{param} value {text.strip()!r} is not a number") from None
    if not math.isfinite(v):
        raise ContractViolation(f"{param} value must be finite")
    if param in ("users", "antennas", "dac_bits"):
        if not v.is_integer() or v < 1:
            raise ContractViolation(f"{param} values must be positive integers")
        return int(v)
    if param == "adm_scale" and v < 0:
        raise ContractViolation("adm_scale values must be nonnegative")
    return v


def parse_values(param, text):
    if param not in SWEEP_PARAMS:
        raise ContractViolation(f"unknown sweep parameter {param!r}")
    vals = [_sweep_value(param, t) for t in str(text).split(",") if t.strip()]
    if not vals:
        raise ContractViolation("sweep needs at least one value")
    return vals


def _config_for(cfg, param, value):
    if param == "pmax_dbm":
        return cfg.with_values(**{"system.pmax_dbm": value})
    if param == "users":
        return cfg.with_values(**{"system.n_users": value})
    if param == "antennas":
        return cfg.with_values(**{"system.n_antennas": value})
    if param == "dac_bits":
        return cfg.with_values(**{"system.dac_bits": value})
    return cfg


def _result_row(name, param, value, r, rep=None, diag=""):
    row = {"arch": name, "param": param, "value": value, "realization": r, "diagnostic": diag}
    if rep is not None:
        row.update(se_bit_s_hz=rep["se"], ee_bit_per_J=rep["ee"], p_tx_W=rep["p_tx"],
                   p_tot_W=rep["p_tot"], outer_iters=rep["outer_iters"],
                   converged=rep["converged"])
    return row


def _solve_row(cfg, name, seed):
    cs = make_channel(cfg, seed)
    arch = make_arch(name, cfg)
    rep = solve_ee(cs, arch, cfg.power_model(), cfg.solver_config())
    return {"se": rep.se, "ee": rep.ee, "p_tx": rep.p_tx, "p_tot": rep.p_tot,
            "outer_iters": rep.outer_iters, "converged": rep.converged,
            "diagnostic": rep.diagnostic}, rep, cs, arch


def cmd_sweep(cfg, param, values, archs=ARCH_NAMES, runs=None, seed=None, workers=None):
    """One row per (value, arch, realization) plus a ``mean`` row per (value, arch).

    ``adm_scale`` re-evaluates the beamformers optimized at scale 1 with the
    admittance power multiplied by each value.
    """
    if param not in SWEEP_PARAMS:
        raise ContractViolation(f"unknown sweep parameter {param!r}")
    values = list(values)
    if not values:
        raise ContractViolation("sweep needs at least one value")
    runs = cfg.runs if runs is None else runs
    base_seed = cfg.channel.seed if seed is None else seed
    archs = list(archs)

    if param == "adm_scale":
        def job(key):
            name, r = key
            out = {}
            try:
                _, rep, cs, arch = _solve_row(cfg, name, base_seed + r)
            except (ContractViolation, NumericFailure) as exc:
                return {v: (None, f"{type(exc).__name__}: {exc}") for v in values}
            pm0 = cfg.power_model()
            for v in values:
                pm = pm0.replace(p_adm_eff=pm0.p_adm_eff * v)
                ev = evaluate(cs, arch, pm, rep.point, bandwidth_hz=cfg.system.bandwidth_hz)
                out[v] = ({"se": ev.sum_se, "ee": ev.ee, "p_tx": ev.p_tx, "p_tot": ev.p_tot,
                           "outer_iters": rep.outer_iters, "converged": rep.converged},
                          rep.diagnostic)
            return out

        keys = [(a, r) for a in archs for r in range(runs)]
        done = dict(zip(keys, _pool_map(job, keys, workers)))
        results = {(v, a, r): done[(a, r)][v] for v in values for a in archs for r in range(runs)}
    else:
        def job(key):
            v, name, r = key
            try:
                vcfg = _config_for(cfg, param, v)
                row, *_ = _solve_row(vcfg, name, base_seed + r)
                return row, row.pop("diagnostic")
            except (ValueError, NumericFailure) as exc:
                return None, f"{type(exc).__name__}: {exc}"

        keys = [(v, a, r) for v in values for a in archs for r in range(runs)]
        results = dict(zip(keys, _pool_map(job, keys, workers)))

    rows = []
    for v in values:
        for a in archs:
            ok = []
            for r in range(runs):
                rep, diag = results[(v, a, r)]
                rows.append(_result_row(a, param, v, r, rep, diag))
                if rep is not None:
                    ok.append(rep)
            if ok:
                mean = {k: float(np.mean([o[k] for o in ok])) for k in ("se", "ee", "p_tx", "p_tot")}
                mean["outer_iters"] = float(np.mean([o["outer_iters"] for o in ok]))
                mean["converged"] = all(o["converged"] for o in ok)
                diag = "" if len(ok) == runs else f"{runs - len(ok)} realization(s) failed"
                rows.append(_result_row(a, param, v, "mean", mean, diag))
    return rows


def cmd_ee(cfg, arch_name, runs=None, seed=None, workers=None):
    """EE-optimal operating points of one architecture over the configured realizations."""
    return cmd_sweep(cfg, "pmax_dbm", [cfg.system.pmax_dbm], archs=[arch_name], runs=runs,
                     seed=seed, workers=workers)


# -- frontier -------------------------------------------------------------------
def cmd_frontier(cfg, archs=ARCH_NAMES, seed=None, workers=None):
    """Tradeoff boundary rows sorted by architecture order, then weight."""
    pm = cfg.power_model()
    scfg = cfg.solver_config()
    seed = cfg.channel.seed if seed is None else seed
    archs = list(archs)

    def job(name):
        cs = make_channel(cfg, seed)
        fr = trace_frontier(cs, make_arch(name, cfg), pm, scfg)
        return fr

    rows, diagnostics = [], []
    for name, fr in zip(archs, _pool_map(job, archs, workers)):
        diagnostics += [f"{name}: {d}" for d in fr.diagnostics]
        for p in sorted(fr.points, key=lambda q: q.eta):
            rows.append({"arch": name, "eta": p.eta, "se_bit_s_hz": p.se, "ee_bit_J": p.ee,
                         "p_tx_W": p.p_tx})
    return rows, diagnostics
