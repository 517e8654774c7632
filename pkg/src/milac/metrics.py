"""Quantization-aware SINR, sum SE, transmit power and EE."""

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation
from .hardware import total_power
from .models import HybridFactors, full_space_model, hybrid_model, milac_model
from .numkit import spectral_norm

BALL_SLACK = 1e-8


@dataclass(frozen=True)
class ReducedPoint:
    """MiLAC variable in row-space coordinates; ``W = H^H gram^{-1/2} Y diag(sqrt(p))``."""

    Y: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        Y = np.asarray(self.Y, dtype=complex)
        p = np.asarray(self.p, dtype=float).ravel()
        if Y.ndim != 2 or Y.shape[0] != Y.shape[1] or Y.shape[1] != p.size:
            raise ContractViolation("Y must be K x K and p of length K")
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise ContractViolation("p must be finite and nonnegative")
        if spectral_norm(Y) > 1.0 + BALL_SLACK:
            raise ContractViolation(f"||Y||_2 = {spectral_norm(Y):.12g} exceeds 1")
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "p", p)

    @property
    def V(self):
        return self.Y * np.sqrt(self.p)[None, :]


@dataclass(frozen=True)
class RatePowerReport:
    per_user_sinr: np.ndarray
    sum_se: float
    p_tx: float
    p_tot: float
    ee: float
    bandwidth_hz: float


def coupling_matrix(cs, rp):
    """``C = gram^{1/2} Y diag(sqrt(p))``, equal to ``H W`` for the expanded W."""
    return cs.gram_sqrt @ rp.V


def sinr_milac(C, aqnm, sigma2):
    """Per-user SINR under the full (non-diagonal) MiLAC distortion model."""
    C = np.asarray(C, dtype=complex)
    a, b = aqnm.alpha, aqnm.beta
    g2 = np.abs(C) ** 2
    sig = a * a * np.diag(g2)
    den = a * a * (g2.sum(axis=1) - np.diag(g2)) + a * b * g2.sum(axis=1) + sigma2
    if sigma2 <= 0 and np.any(den <= 0):
        raise ContractViolation("SINR denominator vanishes (sigma2 <= 0 with zero interference)")
    return np.where(sig > 0, sig / np.where(den > 0, den, 1.0), 0.0)


def sum_se(sinr):
    sinr = np.asarray(sinr, dtype=float)
    if np.any(sinr < 0):
        raise ContractViolation("SINR must be nonnegative")
    return float(np.sum(np.log2(1.0 + sinr)))


def p_tx_full(W, aqnm):
    return aqnm.alpha * float(np.sum(np.abs(W) ** 2))


def p_tx_reduced(rp, aqnm):
    cols = np.sum(np.abs(rp.Y) ** 2, axis=0)
    return aqnm.alpha * float(np.dot(rp.p, cols))


def model_and_variable(cs, kind, aqnm, beamformer):
    """Pick the linear model matching an architecture and a beamformer object."""
    if kind == "milac":
        if isinstance(beamformer, ReducedPoint):
            return milac_model(cs, aqnm), beamformer.V
        return full_space_model(cs, aqnm, "full"), np.asarray(beamformer, dtype=complex)
    if kind == "digital":
        return full_space_model(cs, aqnm, "diag"), np.asarray(beamformer, dtype=complex)
    if isinstance(beamformer, HybridFactors):
        return hybrid_model(cs, beamformer.F_rf, aqnm), beamformer.F_bb
    raise ContractViolation(f"{kind} evaluation needs HybridFactors")


def evaluate(cs, arch, pm, beamformer, bandwidth_hz=None, aqnm=None):
    """Rate/power/EE report of a beamformer under the architecture's own model."""
    aqnm = pm.aqnm if aqnm is None else aqnm
    B = pm.sampling_rate_hz if bandwidth_hz is None else bandwidth_hz
    model, F = model_and_variable(cs, arch.kind, aqnm, beamformer)
    if F.shape != (model.dim, cs.n_users):
        raise ContractViolation(f"beamformer shape {F.shape} does not match ({model.dim}, {cs.n_users})")
    sinr = model.sinr(F)
    se = sum_se(sinr)
    ptx = model.p_tx(F)
    ptot = total_power(arch, pm, ptx)
    ee = B * se / ptot if ptot > 0 else 0.0
    return RatePowerReport(sinr, se, ptx, ptot, ee, B)
