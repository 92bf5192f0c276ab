"""Random search over per-window length-scales and the box bound C."""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, DataError, SolverStalled
from .ipm import IpmConfig
from .kernels import AnovaKernelSpec
from .pipeline import fit

BASELINE_LENGTH_SCALE = 1.0
BASELINE_C = 0.4


@dataclass(frozen=True)
class SearchSpace:
    """Length-scales log-uniform in ``ell_range`` (independently per window), C uniform in ``C_range``.

    With ``include_baseline`` the first trial is the fixed point
    (ell = 1 for every window, C = 0.4) instead of a random draw.
    """

    ell_range: tuple = (0.1, 10.0)
    C_range: tuple = (0.1, 0.7)
    trials: int = 25
    seed: int = 0
    shared_lengthscale: bool = False
    include_baseline: bool = True

    def __post_init__(self):
        lo, hi = self.ell_range
        if not 0 < lo <= hi:
            raise ConfigError("length-scale range must satisfy 0 < low <= high")
        lo, hi = self.C_range
        if not 0 < lo <= hi:
            raise ConfigError("C range must satisfy 0 < low <= high")
        if self.trials < 1:
            raise ConfigError("need at least one trial")

    def sample(self, P):
        """All trial parameters up front, as a list of (length_scales, C)."""
        rng = np.random.default_rng(self.seed)
        log_lo, log_hi = math.log(self.ell_range[0]), math.log(self.ell_range[1])
        out = []
        for t in range(self.trials):
            k = 1 if self.shared_lengthscale else P
            ells = np.exp(rng.uniform(log_lo, log_hi, size=k))
            C = float(rng.uniform(*self.C_range))
            ells = np.broadcast_to(ells, (P,)).copy()
            if t == 0 and self.include_baseline:
                ells, C = np.full(P, BASELINE_LENGTH_SCALE), BASELINE_C
            out.append((ells, C))
        return out


@dataclass
class Trial:
    trial: int
    length_scales: np.ndarray
    C: float
    accuracy: float
    fit_seconds: float
    predict_seconds: float
    mean_gmres_iters: float
    ipm_iters: int
    status: str


@dataclass
class SearchResult:
    best_spec: AnovaKernelSpec
    best_C: float
    log: list = field(default_factory=list)
    best_model: object = None

    @property
    def best_trial(self):
        return max((t for t in self.log if t.status != "stalled"), key=lambda t: t.accuracy)


def accuracy(predictions, labels):
    p = np.asarray(predictions, dtype=float).ravel()
    y = np.asarray(labels, dtype=float).ravel()
    if p.size == 0:
        raise DataError("accuracy of an empty prediction set is undefined")
    if p.shape != y.shape:
        raise DataError("predictions and labels differ in length")
    return float(np.mean(np.sign(p) == np.sign(y)))


def random_search(train, validation, windowing, space=None, ipm_cfg=None, precond=None,
                  operator="fast", fastsum_cfg=None):
    """Train one model per sampled parameter set and keep the most accurate.

    Ties go to the earlier trial. Stalled trials are logged with status
    ``"stalled"`` and never selected; if every trial stalls, SolverStalled is
    raised with the log as its result.
    """
    space = space or SearchSpace()
    ipm_cfg = ipm_cfg or IpmConfig()
    backend = "fast" if operator == "fast" else "exact"
    log = []
    best = None
    for t, (ells, C) in enumerate(space.sample(windowing.P)):
        spec = AnovaKernelSpec(windowing.with_length_scales(ells))
        cfg = replace(ipm_cfg, C=C)
        try:
            report = fit(train, spec, cfg, precond, operator, fastsum_cfg)
        except SolverStalled as exc:
            res = exc.result
            log.append(Trial(t, ells, C, float("nan"), res.fit_seconds, 0.0,
                             res.mean_gmres_iterations, len(res.records), "stalled"))
            continue
        res = report.result
        t0 = time.perf_counter()
        pred = res.model.predict(validation.points, backend)
        predict_s = time.perf_counter() - t0
        acc = accuracy(pred, validation.labels)
        log.append(Trial(t, ells, C, acc, report.fit_seconds, predict_s,
                         res.mean_gmres_iterations, len(res.records), res.status))
        if best is None or acc > best[0]:
            best = (acc, spec, C, res.model)
    if best is None:
        raise SolverStalled("every tuning trial stalled", log)
    return SearchResult(best[1], best[2], log, best[3])


def trial_log_header(P):
    return (["trial"] + [f"ell_{l + 1}" for l in range(P)]
            + ["C", "accuracy", "fit_seconds", "predict_seconds", "mean_gmres_iters", "ipm_iters", "status"])


def write_trial_log(log, path, P):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(trial_log_header(P))
        for t in log:
            w.writerow([t.trial, *(repr(float(v)) for v in t.length_scales), repr(float(t.C)),
                        repr(float(t.accuracy)), f"{t.fit_seconds:.6f}", f"{t.predict_seconds:.6f}",
                        repr(float(t.mean_gmres_iters)), t.ipm_iters, t.status])
