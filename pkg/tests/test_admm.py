import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mkl_l01svm.admm import (BETA_NAMES, SolverError, SolverParams, SolverState,
                             d_system, init_state, objective_J, solve, stopping,
                             sweep, update_b, update_d, update_duals, update_u,
                             update_w, update_z, w_system)
from mkl_l01svm.kernels import KernelBank, build_bank, combine
from mkl_l01svm.model import accuracy, decision_values, predict
from mkl_l01svm.prox01 import ProxParams, prox_vector

from conftest import random_problem


def identity_bank(m, L=1):
    return KernelBank(tuple(float(l + 1) for l in range(L)),
                      np.array([np.eye(m)] * L), np.zeros((m, 1)), np.zeros(L))


def random_state(rng, m, L, d_simplex=True):
    d = rng.dirichlet(np.ones(L)) if d_simplex else rng.normal(size=L)
    return SolverState(w=rng.normal(size=m), d=d, b=float(rng.normal()),
                       u=rng.normal(size=m), z=rng.random(L),
                       theta=rng.normal(size=L), alpha=float(rng.normal()),
                       lam=rng.normal(size=m))


def random_params(rng):
    r = 2.0 ** rng.uniform(-2, 6, size=4)
    return SolverParams(C=r[0], rho1=r[1], rho2=r[2], rho3=r[3])


# -- parameters and initial point ------------------------------------------

@pytest.mark.parametrize("kw", [dict(C=0), dict(rho1=-1), dict(tol=0), dict(max_iter=0)])
def test_params_validated(kw):
    with pytest.raises(ValueError):
        SolverParams(**kw)


@pytest.mark.parametrize("labels, b0", [([1, 1, -1], 1.0), ([-1, -1, 1], -1.0),
                                        ([1, -1], 1.0)])
def test_init_state_intercept(labels, b0):
    s = init_state(len(labels), 4, np.array(labels, float), SolverParams())
    assert s.b == b0
    assert np.array_equal(s.d, [0.25] * 4)
    for v in (s.w, s.u, s.lam, s.z, s.theta):
        assert not v.any()
    assert s.alpha == 0.0 and s.iter == 0


def test_init_state_single_class():
    with pytest.raises(ValueError):
        init_state(3, 2, np.ones(3), SolverParams())


def test_objective_at_start(rng):
    ds, bank = random_problem(rng, 9, 3)
    y = ds.labels
    m_plus, m_minus = ds.class_counts()
    d = np.full(3, 1 / 3)
    assert objective_J(np.zeros(9), d, 1.0, bank, y, 2.5) == 2.5 * m_minus
    assert objective_J(np.zeros(9), d, -1.0, bank, y, 2.5) == 2.5 * m_plus


def test_objective_separating_point():
    bank = identity_bank(4)
    y = np.array([1.0, -1.0, 1.0, -1.0])
    w = 3.0 * y  # margins y_i * K w = 3
    assert objective_J(w, np.ones(1), 0.0, bank, y, 10.0) == 0.5 * w @ w


def test_objective_dimension_mismatch():
    with pytest.raises(ValueError):
        objective_J(np.zeros(3), np.ones(1), 0.0, identity_bank(4), np.ones(4), 1.0)


# -- individual updates ----------------------------------------------------

def test_update_u_all_in_working_set():
    bank = identity_bank(5)
    y = np.array([1.0, -1.0, 1.0, -1.0, 1.0])
    s = init_state(5, 1, y, SolverParams())
    s.b = 0.0
    u, T = update_u(s, bank, y, SolverParams(C=4.0, rho1=1.0))
    assert not u.any()
    assert T.tolist() == list(range(5))


def test_update_u_negative_s_kept():
    bank = identity_bank(3)
    y = np.ones(3)
    s = init_state(3, 1, np.array([1.0, 1.0, -1.0]), SolverParams())
    s.w = np.full(3, 5.0)  # s = 1 - 5 - 1 < 0
    u, T = update_u(s, bank, y, SolverParams())
    assert T.size == 0
    assert np.allclose(u, -5.0)


@settings(max_examples=40)
@given(st.integers(0, 2**32 - 1))
def test_update_u_is_prox(seed):
    rng = np.random.default_rng(seed)
    ds, bank = random_problem(rng, 8, 2)
    state, params = random_state(rng, 8, 2), random_params(rng)
    u, T = update_u(state, bank, ds.labels, params)
    Kdw = combine(bank, state.d).K_of_d @ state.w
    s = 1 - ds.labels * Kdw - state.b * ds.labels - state.lam / params.rho1
    ref = prox_vector(s, ProxParams(1 / params.rho1, params.C))
    assert np.array_equal(u == 0, ref == 0)
    assert np.allclose(u, ref, rtol=0, atol=1e-12)
    assert np.all(u[T] == 0)


def test_update_w_hand_solved():
    y = np.ones(3)
    bank = identity_bank(3)
    s = init_state(3, 1, np.array([1.0, 1.0, -1.0]), SolverParams())
    s.b = 0.0
    s.lam = np.zeros(3)
    w = update_w(s, bank, y, SolverParams())
    assert np.allclose(w, 0.5, rtol=0, atol=1e-15)


def test_update_w_homogeneous():
    y = np.array([1.0, -1.0])
    s = init_state(2, 1, y, SolverParams())
    s.b = 0.0
    s.u = np.ones(2)  # u + b y - 1 = 0 and lambda = 0
    assert not update_w(s, identity_bank(2), y, SolverParams()).any()


@settings(max_examples=30)
@given(st.integers(0, 2**32 - 1))
def test_w_system_dense_inverse(seed):
    rng = np.random.default_rng(seed)
    m, L = int(rng.integers(2, 11)), int(rng.integers(1, 4))
    ds, bank = random_problem(rng, m, L)
    state, params = random_state(rng, m, L), random_params(rng)
    w = update_w(state, bank, ds.labels, params)
    Kd = sum(dl * K for dl, K in zip(state.d, bank.matrices))
    M = np.eye(m) + params.rho1 * Kd
    rhs = -ds.labels * (state.lam + params.rho1 * (state.u + state.b * ds.labels - 1))
    ref = np.linalg.inv(M) @ rhs
    assert np.allclose(w, ref, rtol=0, atol=1e-10 * (1 + np.abs(ref).max()))
    M2, rhs2 = w_system(state, bank, ds.labels, params)
    assert np.linalg.norm(M2 @ w - rhs2) <= 1e-8 * (1 + np.linalg.norm(rhs2))


def test_update_b_examples():
    y = np.array([1.0, -1.0, 1.0, 1.0])
    bank = identity_bank(4)
    s = init_state(4, 1, y, SolverParams())
    s.w = np.zeros(4)
    s.u = 1.0 - y  # u + A w - 1 = -y
    assert update_b(s, bank, y, SolverParams(rho1=3.0)) == pytest.approx(1.0, abs=1e-15)
    s.u = 1.0 + np.array([1.0, 1.0, 0.0, 0.0])  # residual orthogonal to y
    assert update_b(s, bank, y, SolverParams()) == 0.0


@settings(max_examples=40)
@given(st.integers(0, 2**32 - 1))
def test_update_b_stationarity_residual(seed):
    rng = np.random.default_rng(seed)
    ds, bank = random_problem(rng, 9, 3)
    state, params = random_state(rng, 9, 3), random_params(rng)
    y = ds.labels
    b = update_b(state, bank, y, params)
    Aw = y * (combine(bank, state.d).K_of_d @ state.w)
    g = y @ (state.lam + params.rho1 * (state.u + Aw + b * y - 1))
    assert abs(g) <= 1e-10 * (1 + np.abs(state.lam).sum() + params.rho1 * 9)


def test_update_z_examples():
    s = SolverState(w=np.zeros(1), d=np.array([0.2, 0.3, 0.5]), b=0.0, u=np.zeros(1),
                    z=np.zeros(3), theta=np.zeros(3), alpha=0.0, lam=np.zeros(1))
    z, S = update_z(s, SolverParams())
    assert np.array_equal(z, s.d) and S.tolist() == [0, 1, 2]
    s.theta = np.array([-0.5, -0.3, 0.0]) * 2.0  # rho2 = 2 -> shifts -0.5, -0.3
    z, S = update_z(s, SolverParams(rho2=2.0))
    assert z.tolist() == [0.0, 0.0, 0.5] and S.tolist() == [2]


def test_update_d_single_kernel_is_one(rng):
    ds, bank = random_problem(rng, 6, 1)
    state = random_state(rng, 6, 1)
    d, d_pre = update_d(state, bank, ds.labels, SolverParams(), S=[0])
    assert d.tolist() == [1.0]


def test_update_d_symmetric_when_w_zero():
    m, L = 4, 3
    y = np.array([1.0, -1.0, 1.0, -1.0])
    bank = identity_bank(m, L)
    s = init_state(m, L, y, SolverParams())
    s.z = np.full(L, 1 / L)
    d, d_pre = update_d(s, bank, y, SolverParams(rho2=2.0, rho3=3.0), S=np.arange(L))
    assert np.allclose(d_pre, d_pre[0]) and np.allclose(d, 1 / L)


@settings(max_examples=30)
@given(st.integers(0, 2**32 - 1))
def test_d_system_dense_inverse(seed):
    rng = np.random.default_rng(seed)
    m, L = int(rng.integers(2, 11)), int(rng.integers(1, 4))
    ds, bank = random_problem(rng, m, L)
    state, params = random_state(rng, m, L), random_params(rng)
    y = ds.labels
    # build the system from scratch, column by column
    A = np.column_stack([K @ state.w for K in bank.matrices])
    v = np.array([-0.5 * state.w @ K @ state.w
                  - state.lam @ (y * (K @ state.w))
                  - params.rho1 * (y * (K @ state.w)) @ (state.u + state.b * y - 1)
                  for K in bank.matrices])
    M = params.rho1 * A.T @ A + params.rho2 * np.eye(L) + params.rho3 * np.ones((L, L))
    rhs = v - state.theta + params.rho2 * state.z + (params.rho3 - state.alpha)
    ref = np.linalg.inv(M) @ rhs
    _, d_pre = update_d(state, bank, y, params, S=np.arange(L))
    assert np.allclose(d_pre, ref, rtol=0, atol=1e-10 * (1 + np.abs(ref).max()))
    M2, rhs2 = d_system(state, bank, y, params)
    assert np.allclose(M2, M, rtol=1e-13, atol=0)
    assert np.linalg.norm(M2 @ d_pre - rhs2) <= 1e-8 * (1 + np.linalg.norm(rhs2))


def test_update_d_masks_and_renormalizes(rng):
    ds, bank = random_problem(rng, 6, 3)
    state = random_state(rng, 6, 3)
    full, d_pre = update_d(state, bank, ds.labels, SolverParams(), S=np.arange(3))
    keep = [int(np.argmax(full))]
    d, _ = update_d(state, bank, ds.labels, SolverParams(), S=keep)
    assert d[keep[0]] == 1.0 and d.sum() == 1.0
    # an empty S would remove all mass: the unmasked projection is kept
    d, _ = update_d(state, bank, ds.labels, SolverParams(), S=[])
    assert np.array_equal(d, full)


def test_update_duals_examples(rng):
    m, L = 5, 3
    ds, bank = random_problem(rng, m, L)
    y = ds.labels
    params = SolverParams(rho2=2.0, rho3=3.0)
    s = random_state(rng, m, L)
    s.z = s.d.copy()
    S = np.array([0, 2])
    # lambda-residual zero on T: pick u to cancel it
    Kdw = combine(bank, s.d).K_of_d @ s.w
    s.u = 1 - y * Kdw - s.b * y
    T = np.array([1, 3])
    theta, alpha, lam = update_duals(s, s.d, T, S, bank, y, params)
    assert np.array_equal(theta, s.theta)
    assert alpha == s.alpha
    assert np.allclose(lam[T], s.lam[T], rtol=0, atol=1e-12)
    assert np.all(lam[[0, 2, 4]] == 0)


def test_update_duals_theta_only_on_S(rng):
    ds, bank = random_problem(rng, 5, 3)
    s = random_state(rng, 5, 3)
    params = SolverParams(rho2=4.0)
    theta, _, _ = update_duals(s, s.d, np.array([], int), np.array([1]), bank,
                               ds.labels, params)
    assert theta[0] == s.theta[0] and theta[2] == s.theta[2]
    assert theta[1] == pytest.approx(s.theta[1] + 4.0 * (s.d[1] - s.z[1]))


# -- stopping ----------------------------------------------------------------

def test_stopping_examples(rng):
    a = random_state(rng, 4, 2)
    betas, stop = stopping(a, a.copy(), 1e-12)
    assert stop and set(betas) == set(BETA_NAMES) and not any(betas.values())
    b = a.copy()
    b.b += 0.5
    betas, stop = stopping(a, b, 0.1)
    assert not stop and betas["b"] == 0.5
    c = a.copy()
    c.w = c.w + np.array([1e-4, 0, 0, 0])
    c.alpha += 1e-4
    c.b += 1e-4
    assert stopping(a, c, 1e-3)[1]


# -- sweep ---------------------------------------------------------------

def run_sweeps(ds, bank, params, n):
    state = init_state(ds.m, bank.L, ds.labels, params)
    for _ in range(n):
        new, info = sweep(state, bank, ds.labels, params)
        yield state, new, info
        state = new


def test_sweep_invariants(rng):
    ds, bank = random_problem(rng, 30, 4)
    params = SolverParams(C=16.0, rho1=1.0, rho2=4.0, rho3=4.0)
    for old, new, info in run_sweeps(ds, bank, params, 60):
        assert np.all(new.d >= 0) and abs(new.d.sum() - 1) <= 1e-12
        off_T = np.setdiff1d(np.arange(ds.m), info.T)
        assert np.all(new.lam[off_T] == 0)
        off_S = np.setdiff1d(np.arange(bank.L), info.S)
        assert np.array_equal(new.theta[off_S], old.theta[off_S])
        assert np.all(new.u[info.T] == 0)
        assert new.iter == old.iter + 1


def test_alpha_uses_unprojected_d(rng):
    ds, bank = random_problem(rng, 12, 3)
    params = SolverParams(C=8.0, rho1=1.0, rho2=1.0, rho3=2.0)
    seen_off_simplex = False
    for old, new, info in run_sweeps(ds, bank, params, 20):
        expected = old.alpha + params.rho3 * (info.d_pre.sum() - 1.0)
        assert new.alpha == pytest.approx(expected, rel=1e-12, abs=1e-14)
        if abs(info.d_pre.sum() - 1.0) > 1e-6:
            seen_off_simplex = True
            # the projected d sums to one and would have left alpha unchanged
            assert new.alpha != pytest.approx(old.alpha, abs=1e-9)
    assert seen_off_simplex


def test_sweep_order_w_sees_new_u(rng):
    ds, bank = random_problem(rng, 10, 2)
    params = SolverParams(C=8.0)
    state = init_state(ds.m, bank.L, ds.labels, params)
    state.w = rng.normal(size=ds.m)
    new, _ = sweep(state, bank, ds.labels, params)
    mid = state.copy()
    mid.u, _ = update_u(state, bank, ds.labels, params)
    assert np.allclose(new.w, update_w(mid, bank, ds.labels, params), rtol=0, atol=1e-12)
    mid.w = new.w
    assert new.b == pytest.approx(update_b(mid, bank, ds.labels, params), abs=1e-12)


def test_solve_residuals_recorded(rng):
    ds, bank = random_problem(rng, 20, 3)
    _, trace, _ = solve(ds, bank, SolverParams(C=16.0, max_iter=50))
    for r in trace.records:
        assert r.w_residual <= 1e-8 * (1 + 1e3)
        assert np.all(r.d >= 0) and abs(r.d.sum() - 1) <= 1e-12


# -- solve -----------------------------------------------------------------

def test_solve_four_points(sep4):
    bank = build_bank(sep4.features, [1.0])
    params = SolverParams(C=4.0, rho1=1.0, rho2=1.0, rho3=1.0)
    model, trace, _ = solve(sep4, bank, params)
    assert trace.converged and trace.iterations < params.max_iter
    assert accuracy(predict(model, sep4.features), sep4.labels) == 1.0
    assert all(r.d.tolist() == [1.0] for r in trace.records)


def test_solve_one_iteration_budget(synth_prepared):
    _, trn, bank = synth_prepared
    model, trace, report = solve(trn, bank, SolverParams(C=16.0, tol=1e6, max_iter=1))
    assert trace.iterations == 1 and trace.converged
    model, trace, _ = solve(trn, bank, SolverParams(C=16.0, max_iter=1))
    assert trace.iterations == 1 and not trace.converged
    assert np.isfinite(decision_values(model, trn.features)).all()


def test_trivial_parameters_stop_at_start(synth_prepared):
    _, trn, bank = synth_prepared
    params = SolverParams(C=1.0, rho1=1.0)
    model, trace, report = solve(trn, bank, params)
    assert trace.converged and trace.iterations == 2
    assert trace.records[-1].size_T == 0
    assert report.satisfied


def test_non_finite_state_aborts(sep4):
    bank = build_bank(sep4.features, [1.0])
    params = SolverParams(C=4.0)
    state = init_state(4, 1, sep4.labels, params)
    state.lam = np.array([np.nan, 0.0, 0.0, 0.0])
    with pytest.raises(SolverError) as err:
        solve(sep4, bank, params, state=state)
    assert err.value.trace is not None and err.value.state is not None


def test_solve_checks_bank_size(sep4):
    bank = build_bank(sep4.features[:3], [1.0])
    with pytest.raises(ValueError):
        solve(sep4, bank, SolverParams())


def test_trace_csv(tmp_path, sep4):
    bank = build_bank(sep4.features, [1.0, 2.0])
    _, trace, _ = solve(sep4, bank, SolverParams(C=4.0, max_iter=5))
    path = tmp_path / "t.csv"
    trace.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == ("iter,J," + ",".join(f"beta{k}" for k in range(1, 9))
                        + ",sizeT,sizeS,d_1,d_2")
    assert len(lines) == 1 + trace.iterations


@pytest.fixture(scope="module")
def learned(synth_prepared):
    _, trn, bank = synth_prepared
    params = SolverParams(C=16.0, rho1=1.0, rho2=16.0, rho3=16.0)
    return trn, bank, params, solve(trn, bank, params)


def test_learned_model_support_vectors_on_margin(learned):
    trn, bank, params, (model, trace, _) = learned
    assert trace.converged
    T = trace.T
    assert T.size > 0
    f = decision_values(model, trn.features[T])
    assert np.max(np.abs(trn.labels[T] * f - 1)) <= 10 * params.tol
    assert accuracy(predict(model, trn.features), trn.labels) >= 0.95


def test_learned_model_multipliers(learned):
    trn, bank, params, (model, trace, _) = learned
    lam = trace.final_state.lam
    assert np.array_equal(np.flatnonzero(lam), np.sort(model.sv_index))
    bound = math.sqrt(2 * params.C * params.rho1)
    assert np.all((model.sv_coeffs < 0) & (model.sv_coeffs >= -bound))


def test_learned_model_kernel_sparsity(learned):
    _, _, _, (model, trace, _) = learned
    assert np.count_nonzero(model.d) < model.d.size
    assert abs(model.d.sum() - 1) <= 1e-12


def test_learned_model_stationarity_except_d(learned):
    _, _, _, (_, _, report) = learned
    rel = report.relative
    assert all(v <= 1e-2 for k, v in rel.items() if k != "stationarity_d")


@pytest.mark.xfail(strict=True, reason="projection and masking of d leave a "
                   "nonzero kernel-weight stationarity residual at the limit")
def test_learned_model_d_stationarity(learned):
    _, _, _, (_, _, report) = learned
    assert report.relative["stationarity_d"] <= 1e-2
