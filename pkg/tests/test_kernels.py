import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from kis.data import FeatureWindowing
from kis.errors import ConfigError
from kis.kernels import (AnovaKernelSpec, GaussianKernelSpec, anova_eval, dense_kernel_matrix,
                         exact_operator, gaussian_eval)

SPEC6 = AnovaKernelSpec(FeatureWindowing(((0, 2, 4), (1, 3)), [0.5, 0.5], [1.0, 2.0]))


def test_gaussian_values():
    g = GaussianKernelSpec(1.5)
    x = np.array([0.3, -1.0])
    assert gaussian_eval(x, x, g) == 1.0
    assert gaussian_eval([0.0, 0.0], [1.5, 0.0], g) == pytest.approx(math.exp(-1))
    rng = np.random.default_rng(0)
    a, b = rng.standard_normal(4), rng.standard_normal(4)
    longhand = math.exp(-sum((p - q) ** 2 for p, q in zip(a, b)) / 4.0)
    assert gaussian_eval(a, b, GaussianKernelSpec(2.0)) == pytest.approx(longhand, rel=1e-14)


def test_anova_values():
    rng = np.random.default_rng(1)
    x, z = rng.standard_normal(6), rng.standard_normal(6)
    assert anova_eval(x, x, SPEC6) == pytest.approx(1.0)
    brute = 0.5 * math.exp(-sum((x[j] - z[j]) ** 2 for j in (0, 2, 4))) \
        + 0.5 * math.exp(-sum((x[j] - z[j]) ** 2 for j in (1, 3)) / 4.0)
    assert anova_eval(x, z, SPEC6) == pytest.approx(brute, rel=1e-14)
    single = AnovaKernelSpec.single(3, 0.7)
    assert anova_eval(x[:3], z[:3], single) == pytest.approx(
        gaussian_eval(x[:3], z[:3], GaussianKernelSpec(0.7)), rel=1e-15)


def test_dense_matrix_properties():
    assert dense_kernel_matrix(np.zeros((1, 6)), SPEC6).tolist() == [[1.0]]
    X = np.random.default_rng(2).standard_normal((100, 6))
    K = dense_kernel_matrix(X, SPEC6, block=37)
    assert np.array_equal(K, K.T)
    np.testing.assert_allclose(np.diag(K), 1.0)
    assert np.linalg.eigvalsh(K).min() >= -1e-10


def test_size_guard():
    with pytest.raises(ConfigError):
        dense_kernel_matrix(np.zeros((11, 2)), AnovaKernelSpec.single(2), max_points=10)


def test_exact_operator():
    X = np.random.default_rng(3).standard_normal((500, 6))
    op = exact_operator(X, SPEC6)
    K = dense_kernel_matrix(X, SPEC6)
    e = np.zeros(500)
    e[0] = 1
    np.testing.assert_array_equal(op.apply(e), K[:, 0])
    np.testing.assert_array_equal(op.apply(np.zeros(500)), 0.0)
    v = np.random.default_rng(4).standard_normal(500)
    ref = np.array([sum(K[i, j] * v[j] for j in range(500)) for i in range(0, 500, 50)])
    assert np.linalg.norm(op.apply(v)[::50] - ref) <= 1e-12 * np.linalg.norm(ref)
    assert op.entry(3, 7) == op.entry(7, 3) == pytest.approx(anova_eval(X[3], X[7], SPEC6))
    with pytest.raises(ValueError):
        op.apply(np.zeros(3))


def test_anova_additivity():
    X = np.random.default_rng(5).standard_normal((300, 6))
    op = exact_operator(X, SPEC6)
    v = np.random.default_rng(6).standard_normal(300)
    parts = sum(eta * w.apply(v) for eta, w in zip(SPEC6.windowing.weights, op.window_operators()))
    assert np.linalg.norm(op.apply(v) - parts) <= 1e-12 * np.linalg.norm(parts)


@given(arrays(np.float64, (30, 6), elements=st.floats(-4, 4)),
       arrays(np.float64, 30, elements=st.floats(-10, 10)))
def test_psd_quadratic_form(X, v):
    op = exact_operator(X, SPEC6)
    assert v @ op.apply(v) >= -1e-10 * (v @ v)
    i, j = 4, 17
    assert op.entry(i, j) == op.entry(j, i)
