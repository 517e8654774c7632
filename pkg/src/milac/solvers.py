"""Architecture dispatch for the EE and SE solvers."""

from .baselines import digital_ee, digital_se, hybrid_ee, hybrid_se
from .dinkelbach import SolverConfig
from .milac_ee import maximize_ee, maximize_se


def solve_ee(cs, arch, pm, cfg=SolverConfig()):
    if arch.kind == "milac":
        return maximize_ee(cs, arch, pm, cfg)
    if arch.kind == "digital":
        return digital_ee(cs, arch, pm, cfg)
    return hybrid_ee(cs, arch, pm, cfg)


def solve_se(cs, arch, pm, cfg=SolverConfig()):
    if arch.kind == "milac":
        return maximize_se(cs, arch, pm, cfg)
    if arch.kind == "digital":
        return digital_se(cs, arch, pm, cfg)
    return hybrid_se(cs, arch, pm, cfg)
