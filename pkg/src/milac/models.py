"""Common linear precoding model shared by the MiLAC, digital and hybrid solvers.

Every architecture is written as ``C = G F`` for a K x M effective channel
``G`` and an M x K variable ``F``:

* MiLAC: ``G = gram^{1/2}``, ``F = Y diag(sqrt(p))``, full distortion;
* digital: ``G = H``, ``F = W``, per-antenna (diagonal) distortion;
* hybrid at fixed analog stage: ``G = H F_rf``, ``F = F_bb``, per-chain distortion.

Transmit power is the quadratic form ``tr(F^H P F)``. The change of
variables ``F = Lambda V`` with ``Lambda = sqrt(alpha) P^{-1/2}`` turns it into
``alpha ||V||_F^2`` so that every weighted-MSE step is a ridge regression
over a Frobenius ball, solved exactly by one eigendecomposition.
"""

import math

import numpy as np

from .errors import ContractViolation
from .numkit import hermitian_part, hermitian_sqrt

LN2 = math.log(2.0)


class LinearModel:
    """Signal, distortion and power bookkeeping for ``C = G F``.

    Parameters
    ----------
    G : (K, M) complex array
    distortion : {"full", "diag"}
        ``"full"`` gives user k the distortion ``alpha beta ||C_k||^2``;
        ``"diag"`` gives ``alpha beta sum_m |G_km|^2 ||F_m||^2``.
    P : (M, M) Hermitian PD array or None
        Power matrix, ``None`` meaning ``alpha I``.
    """

    def __init__(self, G, distortion, aqnm, sigma2, P=None):
        if distortion not in ("full", "diag"):
            raise ContractViolation(f"unknown distortion model {distortion!r}")
        self.G = np.asarray(G, dtype=complex)
        self.distortion = distortion
        self.alpha = aqnm.alpha
        self.beta = aqnm.beta
        self.sigma2 = float(sigma2)
        K, M = self.G.shape
        self.n_users, self.dim = K, M
        self._identity_metric = P is None
        self.P = self.alpha * np.eye(M) if P is None else hermitian_part(np.asarray(P, dtype=complex))
        self._lam = None

    def _metric(self):
        if self._lam is None:
            M = self.dim
            if self._identity_metric:
                self._lam = (np.eye(M), np.eye(M))
            else:
                s = math.sqrt(self.alpha)
                self._lam = (s * hermitian_sqrt(self.P, inverse=True), hermitian_sqrt(self.P) / s)
        return self._lam

    @property
    def Lam(self):
        return self._metric()[0]

    @property
    def Lam_inv(self):
        return self._metric()[1]

    # -- evaluation ---------------------------------------------------
    def coupling(self, F):
        return self.G @ F

    def distortion_power(self, F, C=None):
        ab = self.alpha * self.beta
        if self.distortion == "full":
            C = self.G @ F if C is None else C
            return ab * np.sum(np.abs(C) ** 2, axis=1)
        rows = np.sum(np.abs(F) ** 2, axis=1)
        return ab * (np.abs(self.G) ** 2 @ rows)

    def _powers(self, F):
        C = self.G @ F
        a2 = self.alpha ** 2
        total = a2 * np.sum(np.abs(C) ** 2, axis=1) + self.distortion_power(F, C)
        return C, total

    def sinr(self, F):
        C, total = self._powers(F)
        sig = self.alpha ** 2 * np.abs(np.diag(C)) ** 2
        den = total - sig + self.sigma2
        with np.errstate(divide="ignore", invalid="ignore"):
            g = np.where(sig > 0, sig / np.where(den > 0, den, np.inf), 0.0)
        return g

    def rate(self, F):
        """Sum SE in bit/s/Hz."""
        return float(np.sum(np.log2(1.0 + self.sinr(F))))

    def p_tx(self, F):
        if self._identity_metric:
            return self.alpha * float(np.sum(np.abs(F) ** 2))
        return float(np.real(np.trace(F.conj().T @ self.P @ F)))

    # -- WMMSE blocks -------------------------------------------------
    def mse(self, F, u):
        C, total = self._powers(F)
        d = np.diag(C)
        return 1.0 - 2.0 * self.alpha * np.real(u * d) + np.abs(u) ** 2 * (total + self.sigma2)

    def receivers(self, F):
        """MMSE receivers and the weights ``1 / e_k``."""
        C, total = self._powers(F)
        den = total + self.sigma2
        u = self.alpha * np.conj(np.diag(C)) / den
        e = 1.0 - self.alpha * np.real(u * np.diag(C))
        e = np.clip(e, np.finfo(float).tiny, 1.0)
        return u, 1.0 / e

    def weighted_mse(self, F, u, omega):
        return float(np.sum(omega * self.mse(F, u)))

    def quadratic(self, u, omega):
        """Coefficients of ``sum w e = c0 - 2 alpha Re tr(A F) + tr(F^H T F)``."""
        D = omega * np.abs(u) ** 2
        A = (omega * u)[:, None] * self.G
        c0 = float(np.sum(omega * (1.0 + self.sigma2 * np.abs(u) ** 2)))
        GDG = self.G.conj().T @ (D[:, None] * self.G)
        if self.distortion == "full":
            T = (self.alpha ** 2 + self.alpha * self.beta) * GDG
        else:
            g = D @ (np.abs(self.G) ** 2)
            T = self.alpha ** 2 * GDG + self.alpha * self.beta * np.diag(g)
        return c0, A, hermitian_part(T)

    def to_v(self, F):
        return self.Lam_inv @ F

    def from_v(self, V):
        return self.Lam @ V


class BallCurve:
    """Solutions ``V(nu) = (T_V + nu I)^{-1} alpha A_V^H`` of the ridge family.

    All scalar summaries along the curve (``||V||^2``, weighted MSE) are
    closed-form in the eigenbasis of ``T_V``.
    """

    def __init__(self, model, u, omega):
        self.model = model
        c0, A, T = model.quadratic(u, omega)
        Lam = model.Lam
        T_V = hermitian_part(Lam @ T @ Lam)
        A_V = A @ Lam
        t, E = np.linalg.eigh(T_V)
        self.t = np.maximum(t, 0.0)
        self.E = E
        self.B = E.conj().T @ (model.alpha * A_V.conj().T)
        self.b2 = np.sum(np.abs(self.B) ** 2, axis=1)
        self.c0 = c0
        self.u, self.omega = u, omega

    def _inv(self, nu, power=1):
        den = self.t + nu
        with np.errstate(divide="ignore"):
            out = np.where(self.b2 > 0, 1.0 / den ** power, 0.0)
        out[(den <= 0) & (self.b2 > 0)] = np.inf
        return out

    def V(self, nu):
        return self.E @ (self.B * self._inv(nu)[:, None])

    def p_tx(self, nu):
        return self.model.alpha * float(np.sum(self.b2 * self._inv(nu, 2)))

    def weighted_mse(self, nu):
        inv = self._inv(nu)
        return self.c0 - float(np.sum(self.b2 * (2.0 * inv - self.t * inv ** 2)))

    def budget_nu(self, p_max, nu_min=0.0):
        """Smallest ``nu >= nu_min`` with ``p_tx(nu) <= p_max`` (to float precision)."""
        if self.p_tx(nu_min) <= p_max:
            return nu_min
        hi = max(nu_min, float(self.t.max()) * 1e-12, 1e-300)
        while self.p_tx(hi) > p_max:
            hi *= 4.0
        lo = nu_min
        for _ in range(400):
            if lo > 0 and hi > 2.0 * lo:
                mid = math.sqrt(lo * hi)
            else:
                mid = 0.5 * (lo + hi)
            if not lo < mid < hi:
                break
            if self.p_tx(mid) > p_max:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-15 * hi:
                break
        return hi


def ridge_step(model, u, omega, penalty, p_max, scale):
    """Exact minimizer of ``scale * sum w e + penalty * p_tx`` over ``p_tx <= p_max``.

    Returns ``(F, nu)`` where ``nu = (penalty + mu) alpha / scale`` is the ridge
    parameter actually used (``mu`` the budget multiplier).
    """
    curve = BallCurve(model, u, omega)
    nu0 = penalty * model.alpha / scale
    nu = curve.budget_nu(p_max, nu0)
    return model.from_v(curve.V(nu)), nu, curve


def scale_to_budget(model, F, target):
    """Rescale ``F`` so that ``p_tx = target``; zero stays zero."""
    pt = model.p_tx(F)
    if pt <= 0:
        return F
    return F * math.sqrt(target / pt)


class HybridFactors:
    """Analog/digital split ``W = F_rf F_bb`` of a hybrid precoder."""

    __slots__ = ("F_rf", "F_bb")

    def __init__(self, F_rf, F_bb):
        self.F_rf = np.asarray(F_rf, dtype=complex)
        self.F_bb = np.asarray(F_bb, dtype=complex)
        if self.F_rf.shape[1] != self.F_bb.shape[0]:
            raise ContractViolation("F_rf columns must match F_bb rows")

    @property
    def W(self):
        return self.F_rf @ self.F_bb


def milac_model(cs, aqnm):
    """Model in the variable ``V = Y diag(sqrt(p))`` (so ``C = gram^{1/2} V``)."""
    return LinearModel(cs.gram_sqrt, "full", aqnm, cs.noise_variance)


def full_space_model(cs, aqnm, distortion):
    """Model in the antenna-domain beamformer ``W`` (``C = H W``)."""
    return LinearModel(cs.H, distortion, aqnm, cs.noise_variance)


def hybrid_power_matrix(F_rf, aqnm):
    """``P`` with ``tr(F_bb^H P F_bb) = alpha^2 ||F_rf F_bb||^2 + tr(F_rf R_q F_rf^H)``."""
    S = F_rf.conj().T @ F_rf
    a, b = aqnm.alpha, aqnm.beta
    return a * a * S + a * b * np.diag(np.real(np.diag(S)))


def hybrid_model(cs, F_rf, aqnm):
    return LinearModel(cs.H @ F_rf, "diag", aqnm, cs.noise_variance,
                       P=hybrid_power_matrix(F_rf, aqnm))
