"""Synthetic binary classification problems used by tests and benchmarks."""

from __future__ import annotations

import numpy as np

from .data import Dataset


def gaussian_blobs(n, d=2, separation=3.0, margin=None, seed=0):
    """Two isotropic Gaussian clouds whose means differ by ``separation`` along the first axis.

    With ``margin`` set, the first coordinate is folded so that every point
    lies at least ``margin / 2`` from the hyperplane x_0 = 0 on its own side,
    making the classes linearly separable with a gap of width ``margin``.
    """
    rng = np.random.default_rng(seed)
    y = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    rng.shuffle(y)
    X = rng.standard_normal((n, d))
    if margin is None:
        X[:, 0] += y * separation / 2
    else:
        X[:, 0] = y * (margin / 2 + np.abs(X[:, 0]))
    return Dataset(X, y)


def concentric_circles(n, noise=0.1, inner=1.0, outer=2.0, seed=0):
    """Two noisy rings in the plane; the inner ring is the positive class."""
    rng = np.random.default_rng(seed)
    y = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    rng.shuffle(y)
    angle = rng.uniform(0, 2 * np.pi, n)
    radius = np.where(y > 0, inner, outer) + noise * rng.standard_normal(n)
    X = np.column_stack([radius * np.cos(angle), radius * np.sin(angle)])
    return Dataset(X, y)


def windowed_problem(n, d=6, informative=(0, 1, 3), imbalance=0.5, seed=0):
    """d-dimensional data whose label depends nonlinearly on a few features.

    ``imbalance`` is the fraction of positive labels; remaining features are
    pure noise.
    """
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d))
    score = np.zeros(n)
    for t, j in enumerate(informative):
        score += np.sin(1.5 * X[:, j]) if t % 2 else X[:, j] ** 2 - 1
    threshold = np.quantile(score, 1 - imbalance)
    y = np.where(score > threshold, 1.0, -1.0)
    return Dataset(X, y)
