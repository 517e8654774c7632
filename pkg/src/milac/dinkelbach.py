"""Solver configuration, reports and the Dinkelbach outer loop shared by all architectures."""

from dataclasses import dataclass, field
import math

import numpy as np

from .errors import ContractViolation

DEFAULT_WEIGHTS = tuple(round(0.05 * i, 2) for i in range(21))


@dataclass(frozen=True)
class SolverConfig:
    """Iteration limits and tolerances.

    ``bandwidth_hz=None`` means the DAC sampling rate of the power model
    (the system bandwidth equals the sampling rate). ``aqnm`` overrides the
    quantizer implied by ``PowerModel.dac_bits``.
    """

    p_max: float = 1.0
    bandwidth_hz: float = None
    eps_in: float = 1e-6
    eps_out: float = 1e-6
    max_outer: int = 100
    max_inner: int = 500
    max_pgd: int = 2000
    pgd_tol: float = 1e-8
    frontier_weights: tuple = DEFAULT_WEIGHTS
    recal_passes: int = 3
    max_sca: int = 200
    eps_sca: float = 1e-6
    extrapolate: bool = True
    aqnm: object = None

    def __post_init__(self):
        if not self.p_max > 0:
            raise ContractViolation("p_max must be positive")
        for name in ("max_outer", "max_inner", "max_pgd", "recal_passes", "max_sca"):
            if getattr(self, name) < 1:
                raise ContractViolation(f"{name} must be >= 1")
        w = tuple(float(x) for x in self.frontier_weights)
        if list(w) != sorted(w) or w[0] != 0.0 or w[-1] != 1.0 or len(set(w)) != len(w):
            raise ContractViolation("frontier weights must be sorted, distinct and span [0, 1]")
        object.__setattr__(self, "frontier_weights", w)

    def bandwidth(self, pm):
        return pm.sampling_rate_hz if self.bandwidth_hz is None else self.bandwidth_hz

    def quantizer(self, pm):
        return pm.aqnm if self.aqnm is None else self.aqnm

    def rate_scale(self, pm):
        """``B / ln 2``, converting nats per channel use to bit/s."""
        return self.bandwidth(pm) / math.log(2.0)


@dataclass
class InnerResult:
    point: object
    trace: list
    cycles: int
    pgd_iters: int = 0
    converged: bool = True
    budget_violations: int = 0


@dataclass
class SolveReport:
    arch: str
    point: object
    W: np.ndarray
    ee: float
    se: float
    p_tx: float
    p_tot: float
    lambda_trace: list = field(default_factory=list)
    inner_objective_trace: list = field(default_factory=list)
    outer_iters: int = 0
    inner_iters: int = 0
    pgd_iters: int = 0
    converged: bool = False
    kkt_residual: float = float("nan")
    budget_violations: int = 0
    diagnostic: str = ""


def relative_change(new, old, floor=0.0):
    return abs(new - old) / max(abs(old), floor, np.finfo(float).tiny)


@dataclass
class OuterResult:
    point: object
    lambda_trace: list
    inner_traces: list
    outer_iters: int
    inner_iters: int
    pgd_iters: int
    converged: bool
    budget_violations: int
    gamma: float


def run_dinkelbach(start, inner, ee_of, cfg, pa_efficiency):
    """Dinkelbach iterations ``lambda <- EE(x)`` with inner solves at ``gamma = lambda / eta_PA``.

    Parameters
    ----------
    start : object
        Feasible starting point with nonzero rate.
    inner : callable ``(gamma, point) -> InnerResult``
    ee_of : callable ``point -> EE`` in bit/J

    The inner solver must start from ``point`` and not increase its
    objective, which makes the lambda sequence nondecreasing.
    """
    point = start
    lam = ee_of(point)
    lam_trace = [lam]
    traces = []
    inner_iters = pgd_iters = violations = 0
    converged = False
    gamma = lam / pa_efficiency
    n = 0
    for n in range(1, cfg.max_outer + 1):
        gamma = lam / pa_efficiency
        res = inner(gamma, point)
        traces.append(res.trace)
        inner_iters += res.cycles
        pgd_iters += res.pgd_iters
        violations += res.budget_violations
        lam_new = ee_of(res.point)
        if lam_new < lam:
            # inner solve lost ground to rounding: keep the incumbent
            lam_trace.append(lam)
            converged = relative_change(lam_new, lam) <= cfg.eps_out
            break
        point = res.point
        lam_trace.append(lam_new)
        if relative_change(lam_new, lam) <= cfg.eps_out:
            converged = True
            lam = lam_new
            break
        lam = lam_new
    return OuterResult(point, lam_trace, traces, n, inner_iters, pgd_iters, converged,
                       violations, gamma)
