"""Newton saddle systems: operator, block-triangular preconditioner, and GMRES.

The system is

    [ YKY + Theta   -y ] [da]   [g1]
    [ -y^T           0 ] [dl] = [g2]

and the preconditioner replaces YKY + Theta by Theta + Y Z^T Z Y, whose
inverse is applied through the Sherman-Morrison-Woodbury identity with one
k x k LU factorization per refresh.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve

log = logging.getLogger(__name__)


class SaddleOperator:
    def __init__(self, op, y, theta):
        self.op = op
        self.y = np.asarray(y, dtype=float)
        self.theta = np.asarray(theta, dtype=float)
        if np.any(self.theta <= 0):
            raise ValueError("barrier diagonal must be positive")
        self.n = self.y.shape[0]

    def apply(self, z):
        v, w = z[:self.n], z[self.n]
        y = self.y
        top = y * self.op.apply(y * v) + self.theta * v - y * w
        return np.append(top, -(y @ v))


def dense_saddle_matrix(K, y, theta):
    """Explicit (n+1) x (n+1) saddle matrix, for checks on small problems."""
    n = len(y)
    A = np.zeros((n + 1, n + 1))
    A[:n, :n] = y[:, None] * K * y[None, :] + np.diag(theta)
    A[:n, n] = -y
    A[n, :n] = -y
    return A


@dataclass(frozen=True)
class PreconditionerState:
    """Factor, labels, barrier diagonal, and the LU of I + Z Theta^{-1} Z^T.

    ``kind`` is ``"lowrank"``, ``"diagonal"`` (A-hat = Theta; used when the
    capacitance LU breaks down or there is no factor rank), or ``"identity"``
    (no preconditioning at all).
    """

    Z: np.ndarray | None
    y: np.ndarray
    theta: np.ndarray | None = None
    lu: tuple | None = None
    kind: str = "lowrank"

    @classmethod
    def create(cls, factor, y, theta=None, identity=False):
        y = np.asarray(y, dtype=float)
        if identity:
            return cls(None, y, kind="identity")
        Z = None if factor is None else np.asarray(getattr(factor, "Z", factor), dtype=float)
        state = cls(Z, y, kind="lowrank" if Z is not None and Z.shape[0] else "diagonal")
        return state if theta is None else refresh_preconditioner(state, theta)

    @property
    def capacitance(self):
        return np.eye(self.Z.shape[0]) + (self.Z / self.theta) @ self.Z.T


def refresh_preconditioner(state, theta):
    """New state for barrier diagonal ``theta``; ``Z`` is reused as is."""
    theta = np.asarray(theta, dtype=float)
    if np.any(theta <= 0):
        raise ValueError("barrier diagonal must be positive")
    if state.kind == "identity":
        return state
    if state.Z is None or state.Z.shape[0] == 0:
        return PreconditionerState(state.Z, state.y, theta, None, "diagonal")
    cap = np.eye(state.Z.shape[0]) + (state.Z / theta) @ state.Z.T
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", LinAlgWarning)
            lu = lu_factor(cap, check_finite=True)
        if not np.all(np.isfinite(lu[0])) or np.min(np.abs(np.diag(lu[0]))) == 0.0:
            raise np.linalg.LinAlgError("singular capacitance matrix")
    except (np.linalg.LinAlgError, LinAlgWarning, ValueError) as exc:
        log.warning("capacitance LU failed (%s); falling back to diagonal preconditioner", exc)
        return PreconditionerState(state.Z, state.y, theta, None, "diagonal")
    return PreconditionerState(state.Z, state.y, theta, lu, "lowrank")


def solve_schur_approx(state, g1):
    """x1 = (Theta + Y Z^T Z Y)^{-1} g1 by Sherman-Morrison-Woodbury."""
    x = g1 / state.theta
    if state.kind != "lowrank":
        return x
    y = state.y
    inner = lu_solve(state.lu, state.Z @ (y * x))
    return x - y * ((state.Z.T @ inner) / state.theta)


def apply_preconditioner(state, g):
    if state.kind == "identity":
        return np.array(g, dtype=float)
    n = state.y.shape[0]
    x1 = solve_schur_approx(state, g[:n])
    return np.append(x1, -(state.y @ x1) - g[n])


@dataclass
class GmresStats:
    iterations: int
    residual: float
    breakdown: bool = False
    converged: bool = False
    history: list = field(default_factory=list)
    true_history: list = field(default_factory=list)


def gmres_solve(op, precond, rhs, tol=1e-3, max_iter=100, track_true_residual=False):
    """Right-preconditioned full GMRES (no restarts).

    ``op`` and ``precond`` are either objects with ``apply`` / a
    PreconditionerState, or plain callables. Arnoldi uses modified
    Gram-Schmidt with one reorthogonalization pass. Returns ``(x, stats)``
    where convergence means ``||rhs - A x|| <= tol ||rhs||`` measured on the
    true residual. On hitting ``max_iter`` the last (best) iterate is
    returned with ``converged=False``.
    """
    A = op.apply if hasattr(op, "apply") else op
    if precond is None:
        M = lambda v: v  # noqa: E731
    elif isinstance(precond, PreconditionerState):
        M = lambda v: apply_preconditioner(precond, v)  # noqa: E731
    else:
        M = precond
    rhs = np.asarray(rhs, dtype=float)
    N = rhs.shape[0]
    bnorm = float(np.linalg.norm(rhs))
    if bnorm == 0.0:
        return np.zeros(N), GmresStats(0, 0.0, converged=True)

    V = np.zeros((max_iter + 1, N))
    H = np.zeros((max_iter + 1, max_iter))
    cs = np.zeros(max_iter)
    sn = np.zeros(max_iter)
    g = np.zeros(max_iter + 1)
    g[0] = bnorm
    V[0] = rhs / bnorm
    stats = GmresStats(0, 1.0)

    def solution(k):
        coef = np.linalg.solve(np.triu(H[:k, :k]), g[:k]) if k else np.zeros(0)
        return M(V[:k].T @ coef)

    def true_residual(x):
        return float(np.linalg.norm(rhs - A(x))) / bnorm

    x = np.zeros(N)
    for j in range(max_iter):
        w = A(M(V[j]))
        wnorm0 = float(np.linalg.norm(w))
        for _ in range(2):
            for i in range(j + 1):
                h = V[i] @ w
                H[i, j] += h
                w -= h * V[i]
        hnext = float(np.linalg.norm(w))
        for i in range(j):
            H[i, j], H[i + 1, j] = cs[i] * H[i, j] + sn[i] * H[i + 1, j], -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
        rho = math.hypot(H[j, j], hnext)
        cs[j], sn[j] = (1.0, 0.0) if rho == 0.0 else (H[j, j] / rho, hnext / rho)
        H[j, j] = rho
        g[j + 1] = -sn[j] * g[j]
        g[j] = cs[j] * g[j]
        stats.iterations = j + 1
        estimate = abs(g[j + 1]) / bnorm
        stats.history.append(estimate)
        breakdown = hnext <= 1e-14 * max(wnorm0, 1e-300)
        if track_true_residual:
            stats.true_history.append(true_residual(solution(j + 1)))
        if breakdown or estimate <= tol:
            x = solution(j + 1)
            stats.residual = true_residual(x)
            if breakdown or stats.residual <= tol:
                stats.breakdown = breakdown
                stats.converged = stats.residual <= tol or breakdown
                return x, stats
        if not breakdown:
            V[j + 1] = w / hnext
    x = solution(max_iter)
    stats.residual = true_residual(x)
    stats.converged = stats.residual <= tol
    return x, stats
