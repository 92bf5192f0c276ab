"""Shared training pipeline: kernel operator, preconditioner factor, IPM."""

from __future__ import annotations

import time
from dataclasses import dataclass

from .errors import ConfigError
from .fastsum import FastsumConfig, anova_fast_operator
from .ipm import IpmConfig, ipm_train
from .kernels import exact_operator
from .lowrank import METHODS, build_factor

OPERATORS = ("fast", "exact")


@dataclass(frozen=True)
class PrecondConfig:
    """Preconditioner choice. ``rank`` is the total rank, or a tuple of per-window ranks."""

    method: str = "cholesky-greedy"
    rank: int | tuple = 200
    seed: int = 0
    err_tol: float = 1e-5
    ldl_threshold: float = 1e-8

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown preconditioner {self.method!r}; choose from {', '.join(METHODS)}")
        ranks = self.rank if isinstance(self.rank, tuple) else (self.rank,)
        if any(int(k) < 1 for k in ranks):
            raise ConfigError("preconditioner rank must be at least 1")


def make_operator(train, spec, kind="fast", fastsum_cfg=None):
    if kind == "fast":
        return anova_fast_operator(train, spec, fastsum_cfg or FastsumConfig())
    if kind == "exact":
        return exact_operator(train, spec)
    raise ConfigError(f"unknown operator {kind!r}; choose from {', '.join(OPERATORS)}")


@dataclass
class FitReport:
    result: object
    setup_seconds: float
    fit_seconds: float
    rank: int


def fit(train, spec, ipm_cfg=None, precond=None, operator="fast", fastsum_cfg=None):
    """Plan the operator, build the factor, and run the IPM; returns a FitReport.

    ``fit_seconds`` covers all three stages, ``setup_seconds`` only the factor.
    SolverStalled propagates from the IPM unchanged.
    """
    precond = precond or PrecondConfig()
    fastsum_cfg = fastsum_cfg or FastsumConfig()
    t0 = time.perf_counter()
    op = make_operator(train, spec, operator, fastsum_cfg)
    t1 = time.perf_counter()
    factor = build_factor(op, precond.method, precond.rank, precond.seed,
                          precond.err_tol, precond.ldl_threshold)
    setup = time.perf_counter() - t1
    kind = "identity" if factor is None else "lowrank"
    result = ipm_train(train, spec, op, factor, ipm_cfg or IpmConfig(), kind, fastsum_cfg)
    rank = 0 if factor is None else factor.rank
    return FitReport(result, setup, time.perf_counter() - t0, rank)
