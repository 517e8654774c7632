"""DAC quantization (AQNM) parameters, transmitter power model and MiLAC circuit checks."""

from dataclasses import dataclass, replace
import math

import numpy as np

from .errors import ContractViolation, NumericFailure

# Normalized MSE of the Lloyd-Max quantizer for a unit-variance Gaussian,
# b = 1..5 levels-per-rail bits. Derived with scripts/lloyd_max_table.py.
LLOYD_MAX_BETA = {
    1: 0.3633802276324186,
    2: 0.11748184782932825,
    3: 0.034547760788502524,
    4: 0.009501008008192091,
    5: 0.002504668355674422,
}

HIGH_RES_CONSTANT = math.pi * math.sqrt(3.0) / 2.0


@dataclass(frozen=True)
class AqnmParams:
    bits: int
    beta: float

    def __post_init__(self):
        if not 0.0 <= self.beta < 1.0:
            raise ContractViolation(f"beta must lie in [0, 1), got {self.beta}")

    @property
    def alpha(self):
        return 1.0 - self.beta

    @property
    def alpha_beta(self):
        return self.alpha * self.beta

    @classmethod
    def ideal(cls):
        """Infinite-resolution converter (no distortion)."""
        return cls(bits=0, beta=0.0)


def aqnm_params(bits):
    """AQNM gain/distortion for a b-bit DAC.

    Tabulated Lloyd-Max values for b <= 5, the high-resolution
    approximation ``(pi sqrt(3) / 2) 4^-b`` above.
    """
    if int(bits) != bits or bits < 1:
        raise ContractViolation(f"bits must be an integer >= 1, got {bits}")
    bits = int(bits)
    if bits in LLOYD_MAX_BETA:
        beta = LLOYD_MAX_BETA[bits]
    else:
        beta = HIGH_RES_CONSTANT * 2.0 ** (-2 * bits)
    return AqnmParams(bits=bits, beta=beta)


ARCH_KINDS = ("digital", "hybrid_fc", "hybrid_sc", "milac")


@dataclass(frozen=True)
class ArchitectureSpec:
    kind: str
    n_antennas: int
    n_users: int
    n_rf_chains: int = None

    def __post_init__(self):
        kind = self.kind.replace("-", "_")
        if kind not in ARCH_KINDS:
            raise ContractViolation(f"unknown architecture {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        N, K = self.n_antennas, self.n_users
        if N < 1 or K < 1 or K > N:
            raise ContractViolation(f"need 1 <= K <= N, got K={K}, N={N}")
        n_rf = self.n_rf_chains
        if kind == "digital":
            n_rf = N if n_rf is None else n_rf
            if n_rf != N:
                raise ContractViolation("digital architecture uses N RF chains")
        elif kind == "milac":
            n_rf = K if n_rf is None else n_rf
            if n_rf != K:
                raise ContractViolation("MiLAC architecture uses K RF chains")
        else:
            if n_rf is None:
                raise ContractViolation("hybrid architectures need n_rf_chains")
            if not K <= n_rf <= N:
                raise ContractViolation(f"hybrid needs K <= N_RF <= N, got N_RF={n_rf}")
        object.__setattr__(self, "n_rf_chains", int(n_rf))

    @property
    def is_hybrid(self):
        return self.kind in ("hybrid_fc", "hybrid_sc")

    @property
    def n_admittances(self):
        M = self.n_antennas + self.n_users
        return M * (M + 1) // 2

    def n_phase_shifters(self):
        if self.kind == "hybrid_fc":
            return self.n_antennas * self.n_rf_chains
        if self.kind == "hybrid_sc":
            return self.n_antennas
        return 0


@dataclass(frozen=True)
class PowerModel:
    """Circuit-power constants in Watts (Table-I style defaults)."""

    p_lp: float = 14e-3
    p_m: float = 0.3e-3
    p_h: float = 3e-3
    p_lo: float = 22.5e-3
    p_ps: float = 21.6e-3
    p_adm_eff: float = 8.75e-6
    pa_efficiency: float = 0.27
    sampling_rate_hz: float = 100e6
    dac_bits: int = 4

    def __post_init__(self):
        for name in ("p_lp", "p_m", "p_h", "p_lo", "p_ps", "p_adm_eff", "sampling_rate_hz"):
            if getattr(self, name) < 0:
                raise ContractViolation(f"{name} must be nonnegative")
        if not 0.0 < self.pa_efficiency <= 1.0:
            raise ContractViolation("pa_efficiency must lie in (0, 1]")
        if self.dac_bits < 1:
            raise ContractViolation("dac_bits must be >= 1")

    @property
    def aqnm(self):
        return aqnm_params(self.dac_bits)

    def replace(self, **changes):
        return replace(self, **changes)


def dac_pair_power(bits, sampling_rate_hz):
    """Power of one I/Q DAC pair in Watts."""
    return 2.0 * (1.5e-5 * 2.0**bits + 9e-12 * sampling_rate_hz * bits)


def rf_chain_power(pm):
    return 2.0 * pm.p_lp + 2.0 * pm.p_m + pm.p_h


@dataclass(frozen=True)
class PowerBreakdown:
    rf_dac: float
    phase_shifters: float
    milac_static: float
    common: float

    @property
    def total(self):
        return self.rf_dac + self.phase_shifters + self.milac_static + self.common


def static_power(arch, pm):
    """Signal-independent power of an architecture, split by hardware block."""
    per_chain = rf_chain_power(pm) + dac_pair_power(pm.dac_bits, pm.sampling_rate_hz)
    ps = arch.n_phase_shifters() * pm.p_ps
    adm = arch.n_admittances * pm.p_adm_eff if arch.kind == "milac" else 0.0
    return PowerBreakdown(
        rf_dac=arch.n_rf_chains * per_chain,
        phase_shifters=ps,
        milac_static=adm,
        common=pm.p_lo,
    )


def total_power(arch, pm, p_tx):
    if p_tx < 0:
        raise ContractViolation("p_tx must be nonnegative")
    return static_power(arch, pm).total + p_tx / pm.pa_efficiency


def scattering_matrix(Y_c, n_streams, Z0=50.0):
    """Scattering matrix of an admittance network and its stream-to-antenna block.

    Ports ``0..n_streams-1`` are the stream side, the rest the antennas.
    Returns ``(theta, F)`` with F the N x K lower-left block.
    """
    Y_c = np.asarray(Y_c, dtype=complex)
    M = Y_c.shape[0]
    if Y_c.shape != (M, M) or not 1 <= n_streams < M:
        raise ContractViolation("Y_c must be square with 1 <= n_streams < size")
    eye = np.eye(M)
    lhs = eye + Z0 * Y_c
    if np.linalg.cond(lhs) > 1e14:
        raise NumericFailure("I + Z0 Y_c is singular")
    theta = np.linalg.solve(lhs, eye - Z0 * Y_c)
    return theta, theta[n_streams:, :n_streams]


def admittance_matrix(shunt, coupling):
    """Network admittance matrix from shunt admittances and a symmetric coupling table."""
    shunt = np.asarray(shunt, dtype=complex)
    coupling = np.asarray(coupling, dtype=complex)
    off = coupling.copy()
    np.fill_diagonal(off, 0.0)
    Y = -off
    np.fill_diagonal(Y, shunt + off.sum(axis=1))
    return Y


def random_lossless_reciprocal(M, rng, scale=0.05):
    """Purely imaginary symmetric admittance matrix (Siemens)."""
    shunt = 1j * scale * rng.standard_normal(M)
    B = rng.standard_normal((M, M))
    coupling = 1j * scale * (B + B.T) / 2.0
    return admittance_matrix(shunt, coupling)
