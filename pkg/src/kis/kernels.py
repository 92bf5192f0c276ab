"""Gaussian and ANOVA kernels, dense assembly, and the kernel-operator interface."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset, FeatureWindowing
from .errors import ConfigError

DENSE_LIMIT = 20000


@dataclass(frozen=True)
class GaussianKernelSpec:
    """exp(-||x - x'||^2 / length_scale^2)."""

    length_scale: float = 1.0

    def __post_init__(self):
        if not self.length_scale > 0:
            raise ConfigError("length_scale must be positive")


@dataclass(frozen=True)
class AnovaKernelSpec:
    """Weighted sum of Gaussians, each acting on one feature window."""

    windowing: FeatureWindowing

    @property
    def P(self):
        return self.windowing.P

    def window(self, l):
        """Feature indices, weight, and Gaussian spec of window ``l``."""
        w = self.windowing
        return w.windows[l], w.weights[l], GaussianKernelSpec(float(w.length_scales[l]))

    def scaled(self, factor):
        w = self.windowing
        return AnovaKernelSpec(FeatureWindowing(
            w.windows, w.weights * factor, w.length_scales, w.mi_scores, w.n_features))

    @classmethod
    def single(cls, d, length_scale=1.0):
        """One window over all ``d <= 3`` features with unit weight."""
        return cls(FeatureWindowing((tuple(range(d)),), [1.0], [length_scale]))


def _as_points(data):
    if isinstance(data, Dataset):
        return data.points
    return np.atleast_2d(np.asarray(data, dtype=float))


def gaussian_eval(x, x2, spec):
    diff = np.asarray(x, dtype=float) - np.asarray(x2, dtype=float)
    return float(np.exp(-np.dot(diff, diff) / spec.length_scale**2))


def anova_eval(x, x2, spec):
    x, x2 = np.asarray(x, dtype=float), np.asarray(x2, dtype=float)
    total = 0.0
    for l in range(spec.P):
        idx, eta, g = spec.window(l)
        total += eta * gaussian_eval(x[list(idx)], x2[list(idx)], g)
    return total


def _sqdist(A, B):
    """Pairwise squared distances by explicit differences (exactly symmetric)."""
    out = np.zeros((A.shape[0], B.shape[0]))
    for t in range(A.shape[1]):
        out += (A[:, None, t] - B[None, :, t]) ** 2
    return out


def gaussian_cross(A, B, spec):
    """Gaussian kernel block between rows of ``A`` and rows of ``B``."""
    return np.exp(-_sqdist(A, B) / spec.length_scale**2)


def anova_cross(A, B, spec):
    """ANOVA kernel block between rows of ``A`` and rows of ``B`` (full feature vectors)."""
    out = np.zeros((A.shape[0], B.shape[0]))
    for l in range(spec.P):
        idx, eta, g = spec.window(l)
        cols = list(idx)
        out += eta * gaussian_cross(A[:, cols], B[:, cols], g)
    return out


def dense_kernel_matrix(data, spec, max_points=DENSE_LIMIT, block=2048):
    """Assemble the full n x n ANOVA kernel matrix."""
    X = _as_points(data)
    n = X.shape[0]
    if n > max_points:
        raise ConfigError(f"dense kernel matrix refused for n={n} > {max_points}")
    K = np.empty((n, n))
    for s in range(0, n, block):
        K[s:s + block] = anova_cross(X[s:s + block], X, spec)
    return K


class KernelOperator:
    """Symmetric PSD operator known through its action and its entries.

    Subclasses implement ``apply`` and ``column``; ``entry``, ``diagonal`` and
    ``apply_block`` have generic fallbacks.
    """

    size: int

    def apply(self, v):
        raise NotImplementedError

    def apply_block(self, V):
        V = np.asarray(V, dtype=float)
        return np.column_stack([self.apply(V[:, j]) for j in range(V.shape[1])])

    def column(self, j):
        raise NotImplementedError

    def columns(self, index):
        return np.column_stack([self.column(j) for j in index])

    def entry(self, i, j):
        return float(self.column(j)[i])

    def diagonal(self):
        return np.array([self.entry(i, i) for i in range(self.size)])

    def _check(self, v):
        v = np.asarray(v, dtype=float)
        if v.shape != (self.size,):
            raise ValueError(f"expected a vector of length {self.size}, got shape {v.shape}")
        return v


class DenseOperator(KernelOperator):
    """Operator backed by an explicit symmetric matrix."""

    def __init__(self, matrix):
        self.matrix = np.asarray(matrix, dtype=float)
        self.size = self.matrix.shape[0]

    def apply(self, v):
        return self.matrix @ self._check(v)

    def apply_block(self, V):
        return self.matrix @ np.asarray(V, dtype=float)

    def column(self, j):
        return self.matrix[:, j].copy()

    def columns(self, index):
        return self.matrix[:, index]

    def entry(self, i, j):
        return float(self.matrix[i, j])

    def diagonal(self):
        return np.diag(self.matrix).copy()


class ExactKernelOperator(DenseOperator):
    """Dense ANOVA kernel matrix over a point set; the oracle backend."""

    def __init__(self, data, spec, max_points=DENSE_LIMIT):
        self.points = _as_points(data)
        self.spec = spec
        super().__init__(dense_kernel_matrix(self.points, spec, max_points))

    def window_operators(self):
        """One unweighted exact operator per window (weights live in the spec)."""
        ops = []
        for l in range(self.spec.P):
            idx, _, g = self.spec.window(l)
            X = self.points[:, list(idx)]
            ops.append(WindowDenseOperator(X, g))
        return ops


class WindowDenseOperator(DenseOperator):
    """Dense single-window Gaussian kernel; keeps the window points for RFF."""

    def __init__(self, points, gspec):
        self.points = np.asarray(points, dtype=float)
        self.gspec = gspec
        super().__init__(gaussian_cross(self.points, self.points, gspec))


def exact_operator(data, spec, max_points=DENSE_LIMIT):
    return ExactKernelOperator(data, spec, max_points)


class DirectEntries:
    """Mixin: kernel entries by direct evaluation of the ANOVA sum."""

    points: np.ndarray
    spec: AnovaKernelSpec

    def column(self, j):
        return anova_cross(self.points, self.points[j:j + 1], self.spec)[:, 0]

    def columns(self, index):
        return anova_cross(self.points, self.points[np.asarray(index)], self.spec)

    def entry(self, i, j):
        return anova_eval(self.points[i], self.points[j], self.spec)

    def diagonal(self):
        return np.full(self.points.shape[0], float(np.sum(self.spec.windowing.weights)))
