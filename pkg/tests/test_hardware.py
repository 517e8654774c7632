import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, optimize
from scipy.stats import norm

from milac.errors import ContractViolation, NumericFailure
from milac.hardware import (LLOYD_MAX_BETA, ArchitectureSpec, PowerModel, admittance_matrix,
                            aqnm_params, dac_pair_power, random_lossless_reciprocal,
                            rf_chain_power, scattering_matrix, static_power, total_power)
from milac.numkit import spectral_norm


def lloyd_max_oracle(bits):
    """Normalized MSE of the optimal Gaussian quantizer by root-finding on the centroid condition."""
    n = 2 ** bits

    def cells(half):
        lv = np.concatenate((-half[::-1], half))
        edges = np.concatenate(([-np.inf], (lv[1:] + lv[:-1]) / 2, [np.inf]))
        return lv, edges

    def quad(f, a, b):
        return integrate.quad(f, a, b, epsabs=1e-15, epsrel=1e-13)[0]

    def resid(half):
        lv, e = cells(half)
        c = [quad(lambda x: x * norm.pdf(x), a, b) / quad(norm.pdf, a, b)
             for a, b in zip(e[:-1], e[1:])]
        return np.array(c)[n // 2:] - half

    half = optimize.fsolve(resid, np.linspace(0.1, 2.5, n // 2), xtol=1e-13)
    lv, e = cells(half)
    return sum(quad(lambda x: (x - q) ** 2 * norm.pdf(x), a, b)
               for q, a, b in zip(lv, e[:-1], e[1:]))


@pytest.mark.parametrize("bits", [1, 2, 3, 4, 5])
def test_lloyd_max_table_matches_oracle(bits):
    assert LLOYD_MAX_BETA[bits] == pytest.approx(lloyd_max_oracle(bits), abs=1e-12)


def test_aqnm_examples():
    assert aqnm_params(1).beta == pytest.approx(1 - 2 / math.pi, abs=1e-12)
    assert aqnm_params(12).beta == pytest.approx(1.6217e-7, rel=1e-4)
    assert aqnm_params(12).beta == math.pi * math.sqrt(3) / 2 * 2.0 ** -24
    assert aqnm_params(24).beta < 1e-13


@pytest.mark.parametrize("bad", [0, -1, 2.5])
def test_aqnm_rejects(bad):
    with pytest.raises(ContractViolation):
        aqnm_params(bad)


@given(st.integers(1, 40))
def test_aqnm_identities(bits):
    q = aqnm_params(bits)
    assert q.alpha + q.beta == pytest.approx(1.0, abs=2e-16)
    assert q.alpha ** 2 + q.alpha * q.beta == pytest.approx(q.alpha, abs=4e-16)
    assert 0 < q.alpha <= 1 and 0 <= q.beta < 1


def test_beta_strictly_decreasing():
    betas = [aqnm_params(b).beta for b in range(1, 25)]
    assert all(a > b for a, b in zip(betas, betas[1:]))


def test_dac_pair_power_examples():
    assert dac_pair_power(4, 1e8) == pytest.approx(7.68e-3, rel=1e-12)
    assert dac_pair_power(1, 0.0) == pytest.approx(6e-5, rel=1e-12)
    assert dac_pair_power(5, 1e8) == pytest.approx(9.96e-3, rel=1e-12)


def test_rf_chain_power_examples():
    assert rf_chain_power(PowerModel()) == pytest.approx(31.6e-3, rel=1e-12)
    zero = PowerModel(p_lp=0, p_m=0, p_h=0)
    assert rf_chain_power(zero) == 0.0
    assert rf_chain_power(PowerModel(p_lp=1e-3, p_m=1e-3, p_h=1e-3)) == pytest.approx(5e-3)


def test_static_power_reference_rows():
    pm = PowerModel()
    dig = static_power(ArchitectureSpec("digital", 64, 4), pm)
    assert dig.rf_dac == pytest.approx(64 * (0.0316 + 0.00768), rel=1e-12)
    assert round(dig.rf_dac, 3) == 2.514
    assert dig.common == pytest.approx(0.0225)
    mil = static_power(ArchitectureSpec("milac", 64, 4), pm)
    assert round(mil.rf_dac, 3) == 0.157
    assert mil.milac_static == pytest.approx(2346 * 8.75e-6, rel=1e-12)
    assert round(mil.milac_static, 3) == 0.021
    fc = static_power(ArchitectureSpec("hybrid_fc", 64, 4, 4), pm)
    assert fc.phase_shifters == pytest.approx(64 * 4 * 0.0216, rel=1e-12)
    assert round(fc.phase_shifters, 3) == 5.530
    sc = static_power(ArchitectureSpec("hybrid-sc", 64, 4, 4), pm)
    assert sc.phase_shifters == pytest.approx(1.3824, rel=1e-12)


def test_total_power_examples():
    pm = PowerModel()
    mil = ArchitectureSpec("milac", 64, 4)
    assert total_power(mil, pm, 0.0) == pytest.approx(0.157 + 0.021 + 0.022, abs=1.5e-3)
    dig = ArchitectureSpec("digital", 64, 4)
    assert total_power(dig, pm, 0.2) == pytest.approx(2.514 + 0.022 + 0.7407, abs=1.5e-3)
    ideal = pm.replace(pa_efficiency=1.0)
    assert total_power(dig, ideal, 1.0) == pytest.approx(static_power(dig, ideal).total + 1.0)
    with pytest.raises(ContractViolation):
        total_power(dig, pm, -1.0)


@given(st.integers(1, 16), st.integers(0, 48))
def test_rf_dac_ratio(K, extra):
    N = K + extra
    pm = PowerModel()
    d = static_power(ArchitectureSpec("digital", N, K), pm).rf_dac
    m = static_power(ArchitectureSpec("milac", N, K), pm).rf_dac
    assert d / m == pytest.approx(N / K, rel=1e-14)


def test_architecture_validation():
    with pytest.raises(ContractViolation):
        ArchitectureSpec("hybrid_fc", 8, 4, 2)
    with pytest.raises(ContractViolation):
        ArchitectureSpec("hybrid_fc", 8, 4, 9)
    with pytest.raises(ContractViolation):
        ArchitectureSpec("analog", 8, 4)
    assert ArchitectureSpec("digital", 8, 4).n_rf_chains == 8
    assert ArchitectureSpec("milac", 8, 4).n_rf_chains == 4
    assert ArchitectureSpec("milac", 64, 4).n_admittances == 2346


def test_power_model_validation():
    with pytest.raises(ContractViolation):
        PowerModel(p_ps=-1.0)
    with pytest.raises(ContractViolation):
        PowerModel(pa_efficiency=0.0)


def test_scattering_open_circuit():
    theta, F = scattering_matrix(np.zeros((5, 5)), 2)
    np.testing.assert_allclose(theta, np.eye(5))
    np.testing.assert_array_equal(F, np.zeros((3, 2)))


def test_scattering_shunt_only():
    Yc = 1j * np.diag([0.01, -0.02, 0.005, 0.03])
    theta, F = scattering_matrix(Yc, 1)
    np.testing.assert_allclose(theta, np.diag(np.diag(theta)), atol=1e-15)
    np.testing.assert_allclose(np.abs(np.diag(theta)), 1.0, rtol=1e-14)
    np.testing.assert_allclose(F, 0.0, atol=1e-15)


def test_scattering_singular():
    with pytest.raises(NumericFailure):
        scattering_matrix(-np.eye(3) / 50.0, 1)


@given(st.integers(1, 4), st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_lossless_reciprocal_scattering(K, N, seed):
    rng = np.random.default_rng(seed)
    Yc = random_lossless_reciprocal(N + K, rng)
    theta, F = scattering_matrix(Yc, K, Z0=50.0)
    M = N + K
    assert np.linalg.norm(theta @ theta.conj().T - np.eye(M)) <= 1e-9
    assert np.linalg.norm(theta - theta.T) <= 1e-9
    assert spectral_norm(F) <= 1 + 1e-9
    assert F.shape == (N, K)


def test_admittance_matrix_row_sums():
    shunt = np.array([1j, 2j, 3j])
    coupling = 1j * np.array([[0, 1, 2], [1, 0, 3], [2, 3, 0]])
    Y = admittance_matrix(shunt, coupling)
    np.testing.assert_allclose(Y.sum(axis=1), shunt)
    np.testing.assert_allclose(Y, Y.T)
