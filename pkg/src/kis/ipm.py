"""Interior point training of the soft-margin kernel SVM dual, and prediction.

Dual problem: max e^T a - 1/2 a^T Y K Y a  subject to 0 <= a <= C, y^T a = 0.
Each iteration reduces the barrier parameter by a constant factor, solves the
Newton saddle system inexactly with preconditioned GMRES, and takes a
fraction-to-boundary step.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, SolverStalled
from .fastsum import FastAnovaOperator, FastsumConfig
from .kernels import anova_cross
from .saddle import PreconditionerState, SaddleOperator, gmres_solve, refresh_preconditioner

log = logging.getLogger(__name__)

STALL_LIMIT = 3
INIT_SEED = 20240917


@dataclass(frozen=True)
class IpmConfig:
    C: float = 0.4
    sigma: float = 0.6
    gamma0: float = 0.99995
    tol_ip: float = 1e-1
    max_ip_iters: int = 50
    tol_gmres: float = 1e-3
    max_gmres_iters: int = 100
    mu0: float = 1.0
    sv_tol: float = 1e-4

    def __post_init__(self):
        if not self.C > 0:
            raise ConfigError("C must be positive")
        if not 0 < self.sigma < 1:
            raise ConfigError("sigma must lie in (0, 1)")
        if not 0 < self.gamma0 < 1:
            raise ConfigError("gamma0 must lie in (0, 1)")
        for name in ("tol_ip", "tol_gmres", "mu0", "sv_tol"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.max_ip_iters < 1 or self.max_gmres_iters < 1:
            raise ConfigError("iteration limits must be at least 1")


@dataclass
class IpmState:
    alpha: np.ndarray
    lam: float
    mu: float
    theta: np.ndarray
    xi_alpha: float
    xi_lambda: np.ndarray
    it: int = 0


@dataclass
class IterationRecord:
    it: int
    mu: float
    step_alpha: float
    step_lambda: float
    gmres: object
    rel_xi_alpha: float
    rel_xi_lambda: float
    alpha_min: float
    alpha_max: float


@dataclass
class TrainingResult:
    model: "TrainedModel"
    records: list = field(default_factory=list)
    status: str = "converged"
    fit_seconds: float = 0.0

    @property
    def gmres_stats(self):
        return [r.gmres for r in self.records]

    @property
    def mean_gmres_iterations(self):
        its = [r.gmres.iterations for r in self.records]
        return float(np.mean(its)) if its else 0.0


def initial_alpha(n, C, seed=INIT_SEED):
    """Deterministic interior start: C * (0.4 + 0.2 u) with u uniform per index."""
    u = np.random.default_rng(seed).random(n)
    return C * (0.4 + 0.2 * u)


def dual_residual(alpha, lam, Kya, y, C, mu):
    """e - YKY a + lam y + mu/a - mu/(C - a), with ``Kya = K (y * a)`` supplied."""
    return 1.0 - y * Kya + lam * y + mu / alpha - mu / (C - alpha)


def assemble_newton_rhs(state, op, y, C, mu, Kya=None):
    if Kya is None:
        Kya = op.apply(y * state.alpha)
    top = dual_residual(state.alpha, state.lam, Kya, y, C, mu)
    return np.append(top, y @ state.alpha)


def barrier_diagonal(alpha, C, mu):
    return mu * (1.0 / alpha**2 + 1.0 / (C - alpha) ** 2)


def step_lengths(state, d_alpha, d_lambda, gamma0, C):
    """Fraction-to-boundary steps. lambda is free, so its base step is 1."""
    alpha = state.alpha
    step = 1.0
    neg = d_alpha < 0
    if np.any(neg):
        step = min(step, float(np.min(-alpha[neg] / d_alpha[neg])))
    pos = d_alpha > 0
    if np.any(pos):
        step = min(step, float(np.min((C - alpha[pos]) / d_alpha[pos])))
    return gamma0 * step, gamma0 * 1.0


def _interior(alpha, C):
    return bool(np.all(alpha > 0) and np.all(alpha < C))


def compute_bias(alpha, y, op, C, sv_tol=None, Kya=None):
    """Bias from the KKT conditions at free support vectors.

    Mean of ``y_j - (K (a * y))_j`` over free SVs; median over all SVs if none
    are free; 0 (with a warning) without support vectors.
    """
    eps = 1e-4 * C if sv_tol is None else sv_tol
    if Kya is None:
        Kya = op.apply(alpha * y)
    gap = y - Kya
    free = (alpha > eps) & (alpha < C - eps)
    if np.any(free):
        return float(np.mean(gap[free]))
    sv = alpha > eps
    if np.any(sv):
        return float(np.median(gap[sv]))
    log.warning("no support vectors; bias set to 0")
    return 0.0


def ipm_train(train, spec, op, factor=None, cfg=None, precond="lowrank", fastsum_cfg=None):
    """Train on a balanced, normalized split; returns a TrainingResult.

    ``op`` is any kernel operator over ``train.points`` (exact or fast) and is
    used for both Newton matvecs and residual updates. ``factor`` is a stacked
    low-rank factor; ``precond="identity"`` disables preconditioning. Raises
    SolverStalled (carrying the result) after more than three consecutive
    GMRES solves that hit their iteration cap.

    ``status`` is ``"converged"``, ``"max_iter"``, or ``"precision_limit"``
    when tolerances tighter than double precision supports drive the iterate
    onto the box boundary; every recorded iterate is strictly interior.
    """
    cfg = cfg or IpmConfig()
    y = train.labels
    C = cfg.C
    n = train.n
    t0 = time.perf_counter()

    alpha = initial_alpha(n, C)
    lam = 0.0
    mu = cfg.mu0
    Kya = op.apply(y * alpha)
    xi_alpha0 = float(y @ alpha)
    xi_lambda0 = dual_residual(alpha, lam, Kya, y, C, mu)
    norm_xa0 = abs(xi_alpha0) or 1.0
    norm_xl0 = float(np.linalg.norm(xi_lambda0)) or 1.0
    state = IpmState(alpha, lam, mu, barrier_diagonal(alpha, C, mu), xi_alpha0, xi_lambda0)
    pstate = PreconditionerState.create(factor, y, identity=(precond == "identity"))

    records = []
    status = "converged"
    stalls = 0
    rel_xa = rel_xl = 1.0
    while state.mu > cfg.tol_ip or rel_xa > cfg.tol_ip or rel_xl > cfg.tol_ip:
        if state.it >= cfg.max_ip_iters:
            status = "max_iter"
            break
        mu = cfg.sigma * state.mu
        theta = barrier_diagonal(state.alpha, C, mu)
        pstate = refresh_preconditioner(pstate, theta)
        rhs = assemble_newton_rhs(state, op, y, C, mu, Kya)
        saddle = SaddleOperator(op, y, theta)
        sol, gstats = gmres_solve(saddle, pstate, rhs, cfg.tol_gmres, cfg.max_gmres_iters)
        d_alpha, d_lambda = sol[:n], float(sol[n])
        s_a, s_l = step_lengths(state, d_alpha, d_lambda, cfg.gamma0, C)
        alpha = state.alpha + s_a * d_alpha
        # near a bound the ratio test can be undone by rounding; back off until representably interior
        while not _interior(alpha, C) and s_a > 1e-12:
            s_a *= 0.5
            alpha = state.alpha + s_a * d_alpha
        if not _interior(alpha, C):
            # distances to the box have reached machine precision; keep the last interior iterate
            status = "precision_limit"
            log.warning("interior point iterate cannot stay inside the box at mu=%.3g; stopping", mu)
            break
        lam = state.lam + s_l * d_lambda
        Kya = op.apply(y * alpha)
        xi_alpha = float(y @ alpha)
        xi_lambda = dual_residual(alpha, lam, Kya, y, C, mu)
        state = IpmState(alpha, lam, mu, theta, xi_alpha, xi_lambda, state.it + 1)
        rel_xa = abs(xi_alpha) / norm_xa0
        rel_xl = float(np.linalg.norm(xi_lambda)) / norm_xl0
        records.append(IterationRecord(state.it, mu, s_a, s_l, gstats, rel_xa, rel_xl,
                                       float(alpha.min()), float(alpha.max())))
        log.debug("ipm it=%d mu=%.3g gmres=%d res=%.2e xi_a=%.2e xi_l=%.2e",
                  state.it, mu, gstats.iterations, gstats.residual, rel_xa, rel_xl)
        stalls = 0 if gstats.converged else stalls + 1
        if stalls > STALL_LIMIT:
            status = "stalled"
            break

    bias = compute_bias(state.alpha, y, op, C, cfg.sv_tol * C, Kya)
    model = TrainedModel(
        alpha=state.alpha, bias=bias, labels=y, points=train.points, spec=spec,
        normalization=train.normalization, fastsum=fastsum_cfg or FastsumConfig(),
        C=C, multiplier=state.lam, sv_tol=cfg.sv_tol * C,
    )
    result = TrainingResult(model, records, status, time.perf_counter() - t0)
    if status == "stalled":
        raise SolverStalled(f"GMRES stalled in {stalls} consecutive IPM iterations", result)
    return result


@dataclass
class TrainedModel:
    """Dual coefficients plus everything needed to evaluate the decision function.

    ``multiplier`` is the IPM's equality-constraint multiplier, reported for
    reference; ``bias`` comes from ``compute_bias``.
    """

    alpha: np.ndarray
    bias: float
    labels: np.ndarray
    points: np.ndarray
    spec: object
    normalization: object = None
    fastsum: FastsumConfig = field(default_factory=FastsumConfig)
    C: float = 1.0
    multiplier: float = 0.0
    sv_tol: float = 0.0

    @property
    def support(self):
        return np.flatnonzero(self.alpha > self.sv_tol)

    @property
    def d(self):
        return self.points.shape[1]

    def decision_function(self, X, backend="exact"):
        return decision_function(self, X, backend)

    def predict(self, X, backend="exact"):
        return predict(self, X, backend)


def _exact_decision(model, X, coef, block=4096):
    out = np.empty(X.shape[0])
    for s in range(0, X.shape[0], block):
        out[s:s + block] = anova_cross(X[s:s + block], model.points, model.spec) @ coef
    return out


def _fast_decision(model, X, coef):
    op = FastAnovaOperator(model.points, model.spec, model.fastsum)
    return op.apply_cross(X, coef)


def decision_function(model, X, backend="exact"):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.d:
        raise ConfigError(f"model expects {model.d} features, got {X.shape[1]}")
    coef = model.alpha * model.labels
    if backend == "exact":
        f = _exact_decision(model, X, coef)
    elif backend == "fast":
        f = _fast_decision(model, X, coef)
    else:
        raise ConfigError(f"unknown backend {backend!r}")
    return f + model.bias


def predict(model, test_points, backend="exact"):
    """Labels in {-1, +1}; a zero decision value maps to +1."""
    f = decision_function(model, test_points, backend)
    return np.where(f >= 0, 1.0, -1.0)
