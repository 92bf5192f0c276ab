"""NFFT-based fast summation for Gaussian kernels on windows of up to 3 features.

The Gaussian is replaced by a trigonometric polynomial of bandwidth N on the
unit torus, so ``K v`` factors into an adjoint NFFT (spread onto an
oversampled grid, FFT, deconvolve), a diagonal multiply by the Fourier
coefficients, and a forward NFFT (deconvolve, inverse FFT, gather). Spreading
uses a truncated Gaussian window.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import _backend
from .errors import ConfigError, DomainError
from .kernels import DirectEntries, GaussianKernelSpec, KernelOperator, _as_points, gaussian_cross


@dataclass(frozen=True)
class FastsumConfig:
    """Fast-summation parameters.

    Attributes
    ----------
    bandwidth : int
        N, even; Fourier indices run over [-N/2, N/2) per axis.
    cutoff : int
        m, half-width of the spreading window in grid cells.
    oversampling : float
        Grid size per axis is ``oversampling * bandwidth``.
    torus_radius : float or None
        Radius of the torus ball that receives the (padded) data. ``None``
        picks the radius that balances truncation against periodization error.
    margin : float
        Relative padding of the data radius so that nearby prediction targets
        still fit inside the plan's domain.
    """

    bandwidth: int = 32
    cutoff: int = 4
    oversampling: float = 2.0
    torus_radius: float | None = None
    margin: float = 0.2

    def __post_init__(self):
        N, m, sigma = self.bandwidth, self.cutoff, self.oversampling
        if N <= 0 or N % 2:
            raise ConfigError("bandwidth must be a positive even integer")
        if m < 2:
            raise ConfigError("cutoff must be at least 2")
        if sigma < 1 or abs(sigma * N - round(sigma * N)) > 1e-9:
            raise ConfigError("oversampling must be >= 1 with oversampling * bandwidth integral")
        if round(sigma * N) < 2 * m + 2:
            raise ConfigError("grid too small for the spreading window; raise bandwidth or lower cutoff")
        if self.torus_radius is not None and not 0 < self.torus_radius < 0.5:
            raise ConfigError("torus_radius must lie in (0, 1/2)")
        if self.margin < 0:
            raise ConfigError("margin must be nonnegative")

    @property
    def grid_size(self):
        return int(round(self.oversampling * self.bandwidth))

    @property
    def shape_parameter(self):
        sigma, m = self.oversampling, self.cutoff
        return 2 * sigma * m / ((2 * sigma - 1) * math.pi)


def balanced_scale(radius, length_scale, bandwidth):
    """Scale factor equalizing the two a-priori error exponents.

    Truncating the Gaussian's Fourier series at N/2 costs about
    exp(-(pi N a / 2)^2) and periodization costs about
    exp(-((1 - 2 R s) / a)^2), where a = length_scale * s is the scaled
    length-scale and R the data radius. Equating them gives a quadratic in s.
    """
    quad = math.pi * bandwidth * length_scale**2 / 2
    return (-2 * radius + math.sqrt(4 * radius**2 + 4 * quad)) / (2 * quad)


ERROR_LIMIT = 1e-4
GRID_BUDGET = 2**22
DIRECT_TARGETS = 256


def _span_geometry(X, extra_points, margin):
    """Center of the bounding box and the padded max distance of any point from it."""
    span = X if extra_points is None else np.vstack([X, np.atleast_2d(extra_points)])
    lo, hi = span.min(axis=0), span.max(axis=0)
    center = (lo + hi) / 2
    radius = float(np.max(np.linalg.norm(span - center, axis=1)))
    return center, radius * (1 + margin)


def _scaling(padded, length_scale, bandwidth, torus_radius=None):
    """``(scale, torus radius, a-priori error)`` for data of padded radius ``padded``."""
    if torus_radius is None:
        scale = balanced_scale(padded, length_scale, bandwidth)
    else:
        scale = torus_radius / padded if padded > 0 else 1.0
    radius = scale * padded
    a = length_scale * scale
    exponent = min((math.pi * bandwidth * a / 2) ** 2, ((1 - 2 * radius) / a) ** 2)
    return scale, radius, math.exp(-exponent)


def adapt_config(points, spec, cfg=None, extra_points=None):
    """Double the bandwidth until the a-priori error meets ERROR_LIMIT.

    Returns the adjusted config, or ``None`` when that would need more than
    GRID_BUDGET grid points (short length-scales on 3-feature windows).
    """
    cfg = cfg or FastsumConfig()
    X = np.atleast_2d(np.asarray(points, dtype=float))
    _, padded = _span_geometry(X, extra_points, cfg.margin)
    while True:
        if _scaling(padded, spec.length_scale, cfg.bandwidth, cfg.torus_radius)[2] <= ERROR_LIMIT:
            return cfg
        bigger = replace(cfg, bandwidth=2 * cfg.bandwidth)
        if bigger.grid_size ** X.shape[1] > GRID_BUDGET:
            return None
        cfg = bigger


def _centered_grid(N, d):
    t = np.arange(-N // 2, N // 2) / N
    mesh = np.meshgrid(*([t] * d), indexing="ij")
    return sum(c**2 for c in mesh)


class FastsumPlan:
    """Precomputed state for one window's fast Gaussian summation.

    Built from the source nodes; valid only for them (``apply``) or for
    targets mapped with the same scaling (``apply_cross``).
    """

    def __init__(self, points, spec, cfg=None, extra_points=None):
        cfg = cfg or FastsumConfig()
        X = np.atleast_2d(np.asarray(points, dtype=float))
        if X.ndim != 2 or X.shape[0] < 1:
            raise ValueError("points must be a nonempty (n, d) array")
        d = X.shape[1]
        if not 1 <= d <= 3:
            raise ConfigError(f"fast summation supports 1 to 3 features per window, got {d}")
        self.cfg, self.spec, self.d, self.n = cfg, spec, d, X.shape[0]

        self.center, padded = _span_geometry(X, extra_points, cfg.margin)
        ell = spec.length_scale
        N = cfg.bandwidth
        self.scale, self.radius, self.error_estimate = _scaling(padded, ell, N, cfg.torus_radius)
        a = ell * self.scale
        if self.error_estimate > ERROR_LIMIT:
            warnings.warn(
                f"fast summation a-priori error {self.error_estimate:.1e} for length-scale "
                f"{ell:g}; increase bandwidth", RuntimeWarning, stacklevel=2)

        # Fourier coefficients b_J of the scaled Gaussian, J in [-N/2, N/2)^d, centered.
        samples = np.exp(-_centered_grid(N, d) / a**2)
        coeff = np.fft.fftn(np.fft.ifftshift(samples)).real / N**d
        self.coefficients = np.fft.fftshift(coeff)

        M = cfg.grid_size
        self.grid_size = M
        self._filter = self._build_filter(M)
        self._idx, self._w = self._window(self.to_torus(X))

    def to_torus(self, points):
        return (np.atleast_2d(np.asarray(points, dtype=float)) - self.center) * self.scale

    def _window(self, Xt):
        cfg = self.cfg
        M, m, b = self.grid_size, cfg.cutoff, cfg.shape_parameter
        u = M * Xt
        base = np.floor(u).astype(np.intp) - m
        lines = base[:, :, None] + np.arange(2 * m + 2)
        w = np.exp(-((lines - u[:, :, None]) ** 2) / b) / math.sqrt(math.pi * b)
        return np.ascontiguousarray(lines % M), np.ascontiguousarray(w)

    def _build_filter(self, M):
        """Real, even multiplier on the rfft grid: coefficients times squared deconvolution.

        The J = -N/2 coefficient is split evenly between -N/2 and +N/2; this
        keeps the real part of the trigonometric polynomial unchanged and makes
        the discrete operator exactly symmetric.
        """
        N, d, b = self.cfg.bandwidth, self.d, self.cfg.shape_parameter
        sym = np.pad(self.coefficients, [(0, 1)] * d, mode="wrap")
        edge = np.ones(N + 1)
        edge[0] = edge[-1] = 0.5
        ks = np.arange(-N // 2, N // 2 + 1)
        axis_factor = edge * np.exp(2 * b * (math.pi * ks / M) ** 2)
        for t in range(d):
            shape = [1] * d
            shape[t] = N + 1
            sym = sym * axis_factor.reshape(shape)
        full = np.zeros((M,) * d)
        np.add.at(full, np.ix_(*([ks % M] * d)), sym * M**d)
        return full[..., : M // 2 + 1].copy()

    def _convolve(self, v):
        v = np.asarray(v, dtype=float)
        if v.shape != (self.n,):
            raise ValueError(f"expected a vector of length {self.n}, got shape {v.shape}")
        grid = _backend.spread(self._idx, self._w, v, self.grid_size)
        spectrum = np.fft.rfftn(grid) * self._filter
        return np.fft.irfftn(spectrum, s=grid.shape, axes=tuple(range(grid.ndim)))

    def apply(self, v):
        return _backend.gather(self._idx, self._w, self._convolve(v))

    def in_domain(self, targets):
        Xt = self.to_torus(targets)
        return np.linalg.norm(Xt, axis=1) <= self.radius * (1 + 1e-12)

    def apply_cross(self, targets, v):
        """Approximate ``K(targets, sources) @ v``; targets must lie in the plan's domain."""
        T = np.atleast_2d(np.asarray(targets, dtype=float))
        if T.shape[1] != self.d:
            raise ValueError("targets have the wrong number of features")
        inside = self.in_domain(T)
        if not inside.all():
            raise DomainError(
                f"{int((~inside).sum())} target(s) fall outside the plan's torus domain; re-plan")
        idx, w = self._window(self.to_torus(T))
        return _backend.gather(idx, w, self._convolve(v))


def plan_fastsum(points, spec, cfg=None, extra_points=None):
    return FastsumPlan(points, spec, cfg, extra_points)


def apply_fastsum(plan, v):
    return plan.apply(v)


def apply_fastsum_cross(plan, targets, v):
    return plan.apply_cross(targets, v)


def direct_gaussian_sum(targets, sources, spec, v, block=2048):
    """``K(targets, sources) @ v`` by blockwise direct evaluation."""
    out = np.empty(targets.shape[0])
    for s in range(0, targets.shape[0], block):
        out[s:s + block] = gaussian_cross(targets[s:s + block], sources, spec) @ v
    return out


class FastWindowOperator(KernelOperator):
    """Single-window Gaussian kernel operator backed by a fast-summation plan.

    With ``adaptive`` (the default) the bandwidth is raised as needed to keep
    the a-priori error below ERROR_LIMIT; where that would exceed the grid
    budget the operator sums directly instead (``plan`` is then ``None``).
    """

    def __init__(self, points, gspec, cfg=None, adaptive=True):
        self.points = np.atleast_2d(np.asarray(points, dtype=float))
        self.gspec = gspec
        self.size = self.points.shape[0]
        cfg = cfg or FastsumConfig()
        if adaptive:
            cfg = adapt_config(self.points, gspec, cfg)
            if cfg is None:
                warnings.warn(
                    f"length-scale {gspec.length_scale:g} needs a grid beyond the budget on a "
                    f"{self.points.shape[1]}-feature window; summing directly", RuntimeWarning, stacklevel=2)
        self.cfg = cfg
        self.plan = None if cfg is None else FastsumPlan(self.points, gspec, cfg)

    def apply(self, v):
        v = self._check(v)
        if self.plan is None:
            return direct_gaussian_sum(self.points, self.points, self.gspec, v)
        return self.plan.apply(v)

    def apply_cross(self, targets, v):
        """``K(targets, points) @ v``.

        Up to DIRECT_TARGETS targets outside the plan's domain are summed
        directly; with more, the window is re-planned over sources and targets.
        """
        T = np.atleast_2d(np.asarray(targets, dtype=float))
        if self.plan is not None:
            inside = self.plan.in_domain(T)
            if inside.all():
                return self.plan.apply_cross(T, v)
            if (~inside).sum() <= DIRECT_TARGETS:
                out = np.empty(T.shape[0])
                if inside.any():
                    out[inside] = self.plan.apply_cross(T[inside], v)
                out[~inside] = direct_gaussian_sum(T[~inside], self.points, self.gspec, v)
                return out
        cfg = None if self.cfg is None else adapt_config(self.points, self.gspec, self.cfg, extra_points=T)
        if cfg is None:
            return direct_gaussian_sum(T, self.points, self.gspec, v)
        return FastsumPlan(self.points, self.gspec, cfg, extra_points=T).apply_cross(T, v)

    def column(self, j):
        return gaussian_cross(self.points, self.points[j:j + 1], self.gspec)[:, 0]

    def columns(self, index):
        return gaussian_cross(self.points, self.points[np.asarray(index)], self.gspec)

    def diagonal(self):
        return np.ones(self.size)


class FastAnovaOperator(DirectEntries, KernelOperator):
    """ANOVA kernel operator: weighted sum of per-window fast summations.

    Entries come from direct kernel evaluation, never from the FFT path.
    Window applies may run on a thread pool (capped by ``KIS_THREADS``) and
    are always summed in window order.
    """

    def __init__(self, data, spec, cfg=None, adaptive=True):
        self.points = _as_points(data)
        self.spec = spec
        self.cfg = cfg or FastsumConfig()
        self.size = self.points.shape[0]
        self._windows = []
        for l in range(spec.P):
            idx, _, g = spec.window(l)
            self._windows.append(FastWindowOperator(self.points[:, list(idx)], g, self.cfg, adaptive))

    def window_operators(self):
        return list(self._windows)

    def apply_cross(self, targets, v):
        """Weighted sum over windows of ``K_l(targets, points) @ v``."""
        T = np.atleast_2d(np.asarray(targets, dtype=float))
        out = np.zeros(T.shape[0])
        for l, op in enumerate(self._windows):
            idx, eta, _ = self.spec.window(l)
            out += eta * op.apply_cross(T[:, list(idx)], v)
        return out

    def apply(self, v):
        v = self._check(v)
        weights = self.spec.windowing.weights
        workers = min(_backend.thread_cap(), len(self._windows))
        if workers > 1:
            with ThreadPoolExecutor(workers) as pool:
                parts = list(pool.map(lambda op: op.apply(v), self._windows))
        else:
            parts = [op.apply(v) for op in self._windows]
        out = np.zeros(self.size)
        for eta, part in zip(weights, parts):
            out += eta * part
        return out


def anova_fast_operator(data, spec, cfg=None, adaptive=True):
    return FastAnovaOperator(data, spec, cfg, adaptive)

