import math

import cvxpy as cp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from milac.channel import ChannelSet, generate_rayleigh
from milac.checks import grid_ee_oracle, toy_channel
from milac.dinkelbach import SolverConfig
from milac.errors import ContractViolation
from milac.hardware import AqnmParams, ArchitectureSpec, PowerModel, aqnm_params
from milac.metrics import ReducedPoint, coupling_matrix, evaluate, sinr_milac
from milac.milac_ee import (WmmseState, budget_fallback, expand, initial_point, is_feasible,
                            make_state, maximize_ee, maximize_se, power_coefficients, reduce,
                            update_powers, update_receivers_weights, update_Y_pgd, wmmse_inner,
                            y_gradient, y_objective)
from milac.numkit import max_eig_hermitian, orthogonal_projector, project_spectral_ball, spectral_norm

from conftest import crandn

SCALE = 1e8 / math.log(2.0)


def random_pd(rng, K, shift=0.1):
    A = crandn(rng, K, K)
    return A @ A.conj().T + shift * np.eye(K)


def random_feasible(rng, cs):
    """Row-space W with diag(p) = lambda_max(W^H W) I, so W^H W <= diag(p)."""
    K = cs.n_users
    W = cs.H.conj().T @ crandn(rng, K, K)
    p = np.full(K, max_eig_hermitian(W.conj().T @ W))
    return W, p


def pgd_state(Q, L, gamma=0.0):
    K = Q.shape[0]
    return WmmseState(np.ones(K), np.ones(K), Q, L, np.ones(K), 0.0, gamma)


# -- reduce / expand / is_feasible ----------------------------------------------
def test_reduce_zero():
    cs = generate_rayleigh(2, 4, seed=3)
    rp = reduce(cs, np.zeros((4, 2)), np.array([1.0, 0.5]))
    np.testing.assert_array_equal(rp.Y, 0)


def test_reduce_zero_power_column(rng):
    cs = generate_rayleigh(2, 5, seed=4)
    W, p = random_feasible(rng, cs)
    W[:, 1] = 0
    p[1] = 0.0
    with np.errstate(all="raise"):
        rp = reduce(cs, W, p)
    np.testing.assert_array_equal(rp.Y[:, 1], 0)


@given(st.integers(1, 4), st.integers(0, 4), st.integers(0, 2**32 - 1))
def test_reduce_round_trip(K, extra, seed):
    rng = np.random.default_rng(seed)
    cs = generate_rayleigh(K, K + extra, seed=seed % 10**6)
    W, _ = random_feasible(rng, cs)
    # a null-space component is discarded by the reduction
    Pi = orthogonal_projector(cs.H)
    W_full = W + (np.eye(cs.n_antennas) - Pi) @ crandn(rng, cs.n_antennas, K)
    p = np.full(K, max_eig_hermitian(W_full.conj().T @ W_full))
    rp = reduce(cs, W_full, p)
    assert spectral_norm(rp.Y) <= 1 + 1e-8
    back = expand(cs, rp)
    assert np.linalg.norm(back - Pi @ W_full) <= 1e-8 * np.linalg.norm(W_full)


def test_reduce_rejects_infeasible(rng):
    cs = generate_rayleigh(2, 4, seed=5)
    W, p = random_feasible(rng, cs)
    with pytest.raises(ContractViolation):
        reduce(cs, W, 0.5 * p)


def test_expand_identity_gram():
    U, _, _ = np.linalg.svd(crandn(np.random.default_rng(0), 4, 4))
    H = U[:2]
    cs = ChannelSet(H)
    p = np.array([0.7, 0.7])
    np.testing.assert_allclose(cs.gram_inv_sqrt, np.eye(2), atol=1e-12)
    W = expand(cs, ReducedPoint(np.eye(2), p))
    np.testing.assert_allclose(W, H.conj().T * np.sqrt(p)[None, :], atol=1e-12)
    np.testing.assert_array_equal(expand(cs, ReducedPoint(np.zeros((2, 2)), p)), 0)


@given(st.integers(1, 4), st.integers(0, 4), st.integers(0, 2**32 - 1))
def test_expand_satisfies_lmi(K, extra, seed):
    rng = np.random.default_rng(seed)
    cs = generate_rayleigh(K, K + extra, seed=seed % 10**6)
    rp = ReducedPoint(project_spectral_ball(crandn(rng, K, K)), rng.uniform(0, 3, K))
    W = expand(cs, rp)
    assert max_eig_hermitian(W.conj().T @ W - np.diag(rp.p)) <= 1e-8
    assert is_feasible(W, rp.p)


def test_is_feasible_examples():
    assert is_feasible(np.zeros((3, 2)), np.zeros(2))
    w = np.array([[3.0], [4.0]])
    assert is_feasible(w, np.array([25.0]))
    assert not is_feasible(w, np.array([25.0 / 1.01]), tol=1e-8)


# -- receivers and weights --------------------------------------------------------
def test_receiver_examples():
    q = AqnmParams(bits=0, beta=0.1)
    u, omega = update_receivers_weights(np.array([[1.0]]), q, 0.1)
    assert u[0] == pytest.approx(0.9)
    u, omega = update_receivers_weights(np.zeros((2, 2)), q, 0.1)
    np.testing.assert_array_equal(u, 0)
    np.testing.assert_array_equal(omega, 1)


@given(st.integers(1, 5), st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_wmmse_identity(K, bits, seed):
    rng = np.random.default_rng(seed)
    q = aqnm_params(bits)
    C = crandn(rng, K, K)
    sigma2 = float(rng.uniform(0.01, 1.0))
    u, omega = update_receivers_weights(C, q, sigma2)
    d = np.diag(C)
    rx = q.alpha * np.sum(np.abs(C) ** 2, axis=1) + sigma2
    e = 1 - 2 * q.alpha * np.real(u * d) + np.abs(u) ** 2 * rx
    lhs = omega * e - np.log(omega)
    rhs = 1 - np.log1p(sinr_milac(C, q, sigma2))
    np.testing.assert_allclose(lhs, rhs, atol=1e-10)


# -- power update ---------------------------------------------------------------
def scalar_state(a_target, b_target, gamma=0.0):
    """K=1 state and (Y, Z) with power coefficients a, b and c = 1."""
    u = np.array([1.0])
    omega = np.array([1.0])
    Z = np.array([[a_target]], dtype=complex)
    # b = s omega |u|^2 |Z|^2, a = s omega Re(u Z); choose s to hit b
    s = b_target / a_target ** 2 if a_target else 1.0
    st_ = WmmseState(u, omega, np.eye(1), np.eye(1), np.ones(1), 0.0, gamma, 0.0, s)
    return st_, np.eye(1, dtype=complex), Z


def test_update_powers_scalar_kkt():
    state, Y, Z = scalar_state(2.0, 8.0)
    a, b, c = power_coefficients(state, Y, Z)
    p, mu = update_powers(state, Y, Z, 1e6, AqnmParams.ideal())
    assert mu == 0.0
    assert p[0] == pytest.approx((a[0] / b[0]) ** 2)


def test_update_powers_zero_gain():
    state, Y, Z = scalar_state(0.0, 1.0)
    p, mu = update_powers(state, Y, Z, 1.0, AqnmParams.ideal())
    np.testing.assert_array_equal(p, 0)
    assert mu == 0.0


def _power_instance(rng, K, gamma):
    S = random_pd(rng, K)
    u = crandn(rng, K)
    omega = rng.uniform(0.5, 3.0, K)
    state = make_state(ChannelSetStub(S), u, omega, gamma, 1.0)
    Y = project_spectral_ball(crandn(rng, K, K))
    return state, Y, S @ Y


class ChannelSetStub:
    def __init__(self, S):
        self.gram_sqrt = S
        self.n_users = S.shape[0]


@given(st.integers(1, 5), st.integers(0, 2**32 - 1), st.sampled_from([0.0, 0.3]))
def test_update_powers_budget_tight(K, seed, gamma):
    rng = np.random.default_rng(seed)
    q = aqnm_params(3)
    state, Y, Z = _power_instance(rng, K, gamma)
    a, b, c = power_coefficients(state, Y, Z)
    p_free, _ = update_powers(state, Y, Z, 1e12, q)
    need = q.alpha * float(np.sum(c * p_free))
    if need <= 0:
        return
    P_max = 0.3 * need
    p, mu = update_powers(state, Y, Z, P_max, q)
    used = q.alpha * float(np.sum(c * p))
    assert mu > 0
    assert used <= P_max * (1 + 1e-10)
    assert abs(used - P_max) <= 1e-10 * P_max
    assert mu * (used - P_max) == pytest.approx(0.0, abs=1e-8 * max(1.0, mu * P_max))


def test_update_powers_matches_convex_solve(rng):
    """Per-stream quadratic in q = sqrt(p) with the budget as a convex constraint."""
    q = aqnm_params(2)
    for _ in range(4):
        state, Y, Z = _power_instance(rng, 3, 0.2)
        a, b, c = power_coefficients(state, Y, Z)
        P_max = 0.2 * q.alpha * float(np.sum(c * update_powers(state, Y, Z, 1e12, q)[0]))
        p, _ = update_powers(state, Y, Z, P_max, q)
        x = cp.Variable(3, nonneg=True)
        obj = cp.sum(cp.multiply(b + state.gamma * c, cp.square(x))) - 2 * a @ x
        prob = cp.Problem(cp.Minimize(obj), [q.alpha * cp.sum(cp.multiply(c, cp.square(x))) <= P_max])
        prob.solve(solver=cp.CLARABEL)
        sq = np.sqrt(p)
        ours = float(np.sum((b + state.gamma * c) * p) - 2 * a @ sq)
        assert ours <= prob.value + 1e-6 * abs(prob.value)


# -- Y subproblem ---------------------------------------------------------------
@given(st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_gradient_finite_differences(K, seed):
    rng = np.random.default_rng(seed)
    Q, L = random_pd(rng, K), crandn(rng, K, K)
    p = rng.uniform(0.1, 2.0, K)
    Y = project_spectral_ball(crandn(rng, K, K))
    g = y_gradient(Y, Q, L, p)
    fd = np.zeros_like(g)
    h = 1e-5
    for idx in np.ndindex(Y.shape):
        for unit in (1.0, 1j):
            E = np.zeros_like(Y)
            E[idx] = unit * h
            fd[idx] += unit * (y_objective(Y + E, Q, L, p) - y_objective(Y - E, Q, L, p)) / (2 * h)
    assert np.linalg.norm(g - fd) <= 1e-5 * np.linalg.norm(fd)


@given(st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_objective_convex_on_segments(K, seed):
    rng = np.random.default_rng(seed)
    Q, L = random_pd(rng, K, shift=0.0), crandn(rng, K, K)
    p = rng.uniform(0, 2.0, K)
    Y1, Y2 = crandn(rng, K, K), crandn(rng, K, K)
    mid = y_objective(0.5 * (Y1 + Y2), Q, L, p)
    avg = 0.5 * (y_objective(Y1, Q, L, p) + y_objective(Y2, Q, L, p))
    assert mid <= avg + 1e-12 * max(1.0, abs(avg))


def test_pgd_zero_linear_term(rng):
    Q = random_pd(rng, 3)
    res = update_Y_pgd(pgd_state(Q, np.zeros((3, 3))), np.ones(3), Y0=crandn(rng, 3, 3),
                       max_iters=20000, tol=1e-12)
    assert res.converged
    assert np.linalg.norm(res.Y) <= 1e-9


def test_pgd_interior_optimum(rng):
    K = 3
    Q = 10.0 * random_pd(rng, K, shift=1.0)
    L = 0.5 * crandn(rng, K, K)
    p = rng.uniform(0.5, 1.5, K)
    Y_star = np.linalg.solve(Q, L.conj().T) / np.sqrt(p)[None, :]
    assert spectral_norm(Y_star) < 1
    res = update_Y_pgd(pgd_state(Q, L), p, max_iters=20000, tol=1e-12)
    assert np.linalg.norm(res.Y - Y_star) <= 1e-8 * max(1.0, np.linalg.norm(Y_star))


def _ball_oracle(Q, L, p, budget=None, alpha=1.0):
    K = Q.shape[0]
    Y = cp.Variable((K, K), complex=True)
    Qh = 0.5 * (Q + Q.conj().T)
    R = np.linalg.cholesky(Qh).conj().T
    quad = cp.sum_squares(R @ Y @ np.diag(np.sqrt(p)))
    lin = cp.real(cp.trace(L @ Y @ np.diag(np.sqrt(p))))
    cons = [cp.sigma_max(Y) <= 1]
    if budget is not None:
        cons.append(alpha * cp.sum_squares(Y @ np.diag(np.sqrt(p))) <= budget)
    prob = cp.Problem(cp.Minimize(quad - 2 * lin), cons)
    prob.solve(solver=cp.SCS, eps=1e-10, max_iters=100000)
    assert prob.status == cp.OPTIMAL
    return prob.value


def test_pgd_matches_convex_oracle(rng):
    for K in (2, 2, 3):
        Q = random_pd(rng, K, shift=0.05)
        L = 5.0 * crandn(rng, K, K)
        p = rng.uniform(0.5, 2.0, K)
        Y_free = np.linalg.solve(Q, L.conj().T) / np.sqrt(p)[None, :]
        assert spectral_norm(Y_free) > 1
        res = update_Y_pgd(pgd_state(Q, L), p, max_iters=20000, tol=1e-10)
        f = y_objective(res.Y, Q, L, p)
        ref = _ball_oracle(Q, L, p)
        assert spectral_norm(res.Y) <= 1 + 1e-12
        assert abs(f - ref) <= 1e-6 * abs(ref)


def test_pgd_objective_nonincreasing(rng):
    Q, L = random_pd(rng, 3), 3.0 * crandn(rng, 3, 3)
    p = rng.uniform(0.5, 2.0, 3)
    state = pgd_state(Q, L)
    Y = project_spectral_ball(crandn(rng, 3, 3))
    vals = [y_objective(Y, Q, L, p)]
    for _ in range(60):
        Y = update_Y_pgd(state, p, max_iters=1, tol=0.0, Y0=Y).Y
        vals.append(y_objective(Y, Q, L, p))
    assert all(b <= a + 1e-12 * abs(a) for a, b in zip(vals, vals[1:]))


def test_pgd_iteration_cap_flags_unconverged(rng):
    Q, L = random_pd(rng, 3), 3.0 * crandn(rng, 3, 3)
    res = update_Y_pgd(pgd_state(Q, L), np.ones(3), max_iters=2, tol=0.0)
    assert not res.converged
    assert res.iters == 2


def test_budget_fallback_forced_violation(rng):
    """A budget far below the PGD solution's power forces the shifted-Q re-solve."""
    q = aqnm_params(3)
    K = 3
    Q, L = random_pd(rng, K, shift=0.05), 5.0 * crandn(rng, K, K)
    p = rng.uniform(0.5, 2.0, K)
    state = pgd_state(Q, L)
    Y_free = update_Y_pgd(state, p, max_iters=20000, tol=1e-10).Y
    used = q.alpha * float(np.dot(p, np.sum(np.abs(Y_free) ** 2, axis=0)))
    P_max = 0.25 * used
    Y, iters = budget_fallback(state, p, Y_free, P_max, q, 20000, 1e-10)
    got = q.alpha * float(np.dot(p, np.sum(np.abs(Y) ** 2, axis=0)))
    assert iters > 0
    assert got <= P_max
    assert got >= P_max * (1 - 1e-6)
    ref = _ball_oracle(Q, L, p, budget=P_max, alpha=q.alpha)
    assert y_objective(Y, Q, L, p) <= ref + 1e-6 * abs(ref)


# -- inner loop -----------------------------------------------------------------
@pytest.fixture(scope="module")
def small():
    cs = generate_rayleigh(3, 6, seed=21, scale=1e-5)
    pm = PowerModel()
    return cs, pm, SolverConfig(), pm.aqnm


def test_inner_trace_nonincreasing_and_feasible(small):
    cs, pm, cfg, q = small
    start = initial_point(cs, q, cfg.p_max)
    for gamma in (0.0, 10.0, 1e3):
        res = wmmse_inner(cs, cfg, gamma, cfg.p_max, start, q, SCALE)
        tr = res.trace
        assert all(b <= a + 1e-9 * max(1.0, abs(a)) for a, b in zip(tr, tr[1:]))
        assert spectral_norm(res.point.Y) <= 1 + 1e-8
        ptx = q.alpha * float(np.dot(res.point.p, np.sum(np.abs(res.point.Y) ** 2, axis=0)))
        assert ptx <= cfg.p_max * (1 + 1e-8)


def test_inner_fixed_point_stops_in_one_cycle(small):
    cs, pm, cfg, q = small
    start = initial_point(cs, q, cfg.p_max)
    first = wmmse_inner(cs, cfg, 5.0, cfg.p_max, start, q, SCALE)
    again = wmmse_inner(cs, cfg, 5.0, cfg.p_max, first.point, q, SCALE)
    assert again.cycles == 1
    assert again.converged
    assert abs(again.trace[-1] - first.trace[-1]) <= 1e-6 * abs(first.trace[-1])


def test_inner_large_penalty_switches_power_off(small):
    cs, pm, cfg, q = small
    start = initial_point(cs, q, cfg.p_max)
    res = wmmse_inner(cs, cfg, 1e15, cfg.p_max, start, q, SCALE)
    assert float(np.sum(res.point.p)) <= 1e-6 * float(np.sum(start.p))


def test_inner_matches_grid_on_scalar_toy():
    cs = toy_channel()
    pm = PowerModel()
    cfg = SolverConfig(eps_in=1e-10, max_inner=5000)
    q = pm.aqnm
    gamma = 2e7
    res = wmmse_inner(cs, cfg, gamma, cfg.p_max, initial_point(cs, q, cfg.p_max), q, SCALE)
    g = float(np.real(cs.gram_sqrt[0, 0]))

    def subtractive(y, p):
        C = np.array([[g * y * math.sqrt(p)]])
        return SCALE * (1 - math.log1p(sinr_milac(C, q, cs.noise_variance)[0])) + gamma * q.alpha * p * y * y

    ys = np.linspace(0, 1, 401)
    ps = np.linspace(0, cfg.p_max / q.alpha, 2001)
    grid = min(subtractive(y, p) for y in ys for p in ps)
    ours = res.trace[-1]
    assert ours <= grid + 1e-4 * abs(grid)
    assert abs(ours - grid) <= 1e-4 * abs(grid)


# -- outer loop -----------------------------------------------------------------
@pytest.fixture(scope="module")
def solved(small):
    cs, pm, cfg, _ = small
    arch = ArchitectureSpec("milac", 6, 3)
    return cs, arch, pm, cfg, maximize_ee(cs, arch, pm, cfg)


def test_report_invariants(solved):
    cs, arch, pm, cfg, rep = solved
    lt = rep.lambda_trace
    assert all(b >= a - 1e-9 * a for a, b in zip(lt, lt[1:]))
    assert rep.converged
    assert spectral_norm(rep.point.Y) <= 1 + 1e-8
    assert rep.p_tx <= cfg.p_max * (1 + 1e-8)
    assert rep.ee == pytest.approx(1e8 * rep.se / rep.p_tot, rel=1e-12)
    assert rep.ee == pytest.approx(lt[-1], rel=1e-12)
    np.testing.assert_allclose(cs.H @ rep.W, coupling_matrix(cs, rep.point), atol=1e-12)


def test_ee_drops_with_admittance_power(solved):
    cs, arch, pm, cfg, rep = solved
    ees = [evaluate(cs, arch, pm.replace(p_adm_eff=pm.p_adm_eff * s), rep.point).ee
           for s in (1.0, 1e3, 1e6)]
    assert ees[0] > ees[1] > ees[2]


def test_ee_not_below_se_optimum(solved):
    cs, arch, pm, cfg, rep = solved
    se = maximize_se(cs, arch, pm, cfg)
    assert rep.ee >= se.ee * (1 - 1e-9)
    assert se.se >= rep.se * (1 - 1e-9)


def test_ee_matches_grid_on_toy():
    cs = toy_channel()
    pm = PowerModel()
    cfg = SolverConfig()
    rep = maximize_ee(cs, ArchitectureSpec("milac", 2, 1), pm, cfg)
    oracle = grid_ee_oracle(cs, pm, cfg.p_max)
    assert rep.ee == pytest.approx(oracle, rel=5e-3)


def test_bandwidth_consistency(small):
    cs, pm, _, _ = small
    arch = ArchitectureSpec("milac", 6, 3)
    for B in (1e8, 2e8):
        rep = maximize_ee(cs, arch, pm, SolverConfig(bandwidth_hz=B))
        assert rep.ee == pytest.approx(B * rep.se / rep.p_tot, rel=1e-12)


@settings(max_examples=6)
@given(st.integers(0, 10**6), st.sampled_from([1, 4, 8]))
def test_lambda_monotone_random(seed, bits):
    cs = generate_rayleigh(2, 4, seed=seed, scale=1e-5)
    pm = PowerModel(dac_bits=bits)
    rep = maximize_ee(cs, ArchitectureSpec("milac", 4, 2), pm, SolverConfig())
    lt = rep.lambda_trace
    assert all(b >= a - 1e-9 * a for a, b in zip(lt, lt[1:]))
    for tr in rep.inner_objective_trace:
        assert all(b <= a + 1e-9 * max(1.0, abs(a)) for a, b in zip(tr, tr[1:]))


def test_wrong_architecture_rejected(small):
    cs, pm, cfg, _ = small
    with pytest.raises(ContractViolation):
        maximize_ee(cs, ArchitectureSpec("digital", 6, 3), pm, cfg)
    with pytest.raises(ContractViolation):
        maximize_ee(cs, ArchitectureSpec("milac", 7, 3), pm, cfg)
