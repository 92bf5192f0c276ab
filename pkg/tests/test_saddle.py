import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kis.kernels import DenseOperator, GaussianKernelSpec, gaussian_cross
from kis.saddle import (PreconditionerState, SaddleOperator, apply_preconditioner, dense_saddle_matrix,
                        gmres_solve, refresh_preconditioner, solve_schur_approx)


def instance(n, k, seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, 2))
    K = gaussian_cross(X, X, GaussianKernelSpec(1.0))
    y = np.where(rng.random(n) < 0.5, 1.0, -1.0)
    theta = rng.uniform(0.5, 5.0, n)
    Z = rng.standard_normal((k, n)) / np.sqrt(n)
    return K, y, theta, Z, rng


@given(st.integers(2, 120), st.integers(0, 10**6))
def test_saddle_operator_matches_dense(n, seed):
    K, y, theta, _, rng = instance(n, 1, seed)
    z = rng.standard_normal(n + 1)
    A = dense_saddle_matrix(K, y, theta)
    got = SaddleOperator(DenseOperator(K), y, theta).apply(z)
    assert np.linalg.norm(got - A @ z) <= 1e-10 * np.linalg.norm(A @ z)


@given(st.integers(5, 80), st.integers(1, 8), st.integers(0, 10**6))
def test_smw_matches_dense_inverse(n, k, seed):
    _, y, theta, Z, rng = instance(n, k, seed)
    g = rng.standard_normal(n)
    state = PreconditionerState.create(Z, y, theta)
    Ahat = np.diag(theta) + (y[:, None] * (Z.T @ Z) * y[None, :])
    ref = np.linalg.solve(Ahat, g)
    assert np.linalg.norm(solve_schur_approx(state, g) - ref) <= 1e-10 * np.linalg.norm(ref)
    x1 = solve_schur_approx(state, g)
    assert np.linalg.norm(Ahat @ x1 - g) <= 1e-8 * np.linalg.norm(g)


def test_zero_factor_and_diagonal_case():
    n = 7
    rng = np.random.default_rng(0)
    theta = rng.uniform(1, 2, n)
    y = np.ones(n)
    state = PreconditionerState.create(np.zeros((3, n)), y, theta)
    np.testing.assert_array_equal(state.capacitance, np.eye(3))
    g = rng.standard_normal(n + 1)
    x = apply_preconditioner(state, g)
    np.testing.assert_allclose(x[:n], g[:n] / theta, rtol=1e-15)
    assert x[n] == pytest.approx(-x[:n].sum() - g[n])
    np.testing.assert_array_equal(apply_preconditioner(state, np.zeros(n + 1)), 0.0)


def test_capacitance_homogeneity():
    _, y, theta, Z, _ = instance(40, 4, 1)
    a = PreconditionerState.create(Z, y, theta).capacitance - np.eye(4)
    b = PreconditionerState.create(Z, y, 3.0 * theta).capacitance - np.eye(4)
    np.testing.assert_allclose(b, a / 3.0, rtol=1e-14)


def test_lu_breakdown_falls_back_to_diagonal(caplog):
    _, y, theta, Z, _ = instance(10, 2, 2)
    bad = PreconditionerState(Z * np.nan, y)
    state = refresh_preconditioner(bad, theta)
    assert state.kind == "diagonal"
    assert "falling back" in caplog.text


def exact_factor(K):
    w, V = np.linalg.eigh(K)
    return (V * np.sqrt(np.clip(w, 0, None))).T


def test_eigenvalue_clustering_and_fast_convergence():
    K, y, theta, _, rng = instance(60, 1, 3)
    Z = exact_factor(K)
    state = PreconditionerState.create(Z, y, theta)
    A = dense_saddle_matrix(K, y, theta)
    Pinv = np.column_stack([apply_preconditioner(state, e) for e in np.eye(61)])
    eig = np.linalg.eigvals(Pinv @ A)
    assert np.sum(np.abs(eig - 1) <= 1e-8) >= 60
    rhs = rng.standard_normal(61)
    x, stats = gmres_solve(DenseOperator(A), state, rhs, tol=1e-10, max_iter=50)
    assert stats.converged and stats.iterations <= 3
    assert np.linalg.norm(A @ x - rhs) <= 1e-10 * np.linalg.norm(rhs)


def test_gmres_zero_rhs():
    x, stats = gmres_solve(lambda v: 2 * v, None, np.zeros(5))
    assert stats.iterations == 0 and np.all(x == 0)


@given(st.integers(5, 60), st.integers(0, 10**6))
def test_gmres_residual_monotone_and_contract(n, seed):
    K, y, theta, Z, rng = instance(n, 3, seed)
    A = dense_saddle_matrix(K, y, theta)
    rhs = rng.standard_normal(n + 1)
    state = PreconditionerState.create(Z, y, theta)
    x, stats = gmres_solve(lambda v: A @ v, state, rhs, tol=1e-8, max_iter=n + 1, track_true_residual=True)
    hist = stats.true_history
    assert all(b <= a + 1e-12 for a, b in zip(hist, hist[1:]))
    if stats.converged:
        assert np.linalg.norm(rhs - A @ x) <= 1e-8 * np.linalg.norm(rhs) * (1 + 1e-9)


def test_gmres_max_iter_flag():
    rng = np.random.default_rng(5)
    A = np.diag(np.linspace(1, 1000, 200))
    x, stats = gmres_solve(lambda v: A @ v, None, rng.standard_normal(200), tol=1e-12, max_iter=5)
    assert not stats.converged and stats.iterations == 5


def test_rank_trend_gmres_iterations():
    from kis.lowrank import pivoted_cholesky_greedy
    rng = np.random.default_rng(6)
    n = 2000
    X = rng.standard_normal((n, 2))
    op = DenseOperator(gaussian_cross(X, X, GaussianKernelSpec(1.0)))
    y = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    alpha = 0.4 * (0.4 + 0.2 * rng.random(n))
    means = {}
    for k in (0, 50, 200):
        its = []
        f = pivoted_cholesky_greedy(op, k) if k else None
        for mu in (0.6, 0.36, 0.216, 0.1296):
            theta = mu * (1 / alpha**2 + 1 / (0.4 - alpha) ** 2)
            state = PreconditionerState.create(f, y, theta)
            _, s = gmres_solve(SaddleOperator(op, y, theta), state, rng.standard_normal(n + 1), 1e-3, 100)
            its.append(s.iterations)
        means[k] = np.mean(its)
    assert means[200] < means[50] < means[0]
