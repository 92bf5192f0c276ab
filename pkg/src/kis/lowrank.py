"""Low-rank factorizations K ~ Z^T Z of kernel operators.

Four constructions: greedy pivoted Cholesky, randomly pivoted Cholesky,
Nystrom (coordinate columns or a Gaussian range sketch), and random Fourier
features. For ANOVA kernels one factor is built per window and the blocks are
stacked with the window weights folded in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import ConfigError

METHODS = ("cholesky-greedy", "cholesky-random", "nystrom-columns", "nystrom-gaussian", "rff", "none")


@dataclass(frozen=True)
class LowRankFactor:
    """``Z`` has shape (k, n) with K ~ Z^T Z.

    ``trace_residual`` is trace(K) - ||Z||_F^2 for the Cholesky variants and
    ``None`` otherwise.
    """

    Z: np.ndarray
    method: str
    achieved_rank: int
    trace_residual: float | None = None
    pivots: np.ndarray | None = None

    @property
    def n(self):
        return self.Z.shape[1]

    def apply(self, v):
        return self.Z.T @ (self.Z @ v)

    def dense(self):
        return self.Z.T @ self.Z


def _residual_trace(diag0, Z):
    return float(np.sum(diag0) - np.sum(Z * Z))


def pivoted_cholesky_greedy(op, rank, err_tol=1e-5):
    """Rank-``rank`` pivoted Cholesky, choosing the largest residual diagonal.

    Needs only the diagonal and ``rank`` kernel columns. Stops early once the
    largest residual diagonal or the residual trace drops to ``err_tol``.
    Ties go to the smallest index.
    """
    if rank < 1:
        raise ConfigError("rank must be at least 1")
    n = op.size
    rank = min(rank, n)
    diag0 = np.asarray(op.diagonal(), dtype=float)
    d = diag0.copy()
    scale = max(float(np.max(np.abs(diag0))), 1e-300)
    Z = np.zeros((rank, n))
    pivots = []
    for r in range(rank):
        j = int(np.argmax(d))
        if d[j] <= err_tol or np.sum(d) <= err_tol:
            break
        col = np.asarray(op.column(j), dtype=float) - Z[:r].T @ Z[:r, j]
        row = col / math.sqrt(d[j])
        Z[r] = row
        d -= row * row
        d[j] = 0.0
        if np.min(d) < -1e-8 * scale:
            raise np.linalg.LinAlgError("negative residual diagonal: operator is not positive semidefinite")
        np.maximum(d, 0.0, out=d)
        pivots.append(j)
    Z = Z[:len(pivots)]
    return LowRankFactor(Z, "cholesky-greedy", len(pivots), _residual_trace(diag0, Z), np.array(pivots, dtype=int))


def pivoted_cholesky_random(op, rank, seed=0):
    """Randomly pivoted Cholesky: pivots drawn with probability proportional to the residual diagonal.

    Exits early, with ``achieved_rank < rank``, once the residual trace is
    below 1e-12 of the initial trace.
    """
    if rank < 1:
        raise ConfigError("rank must be at least 1")
    rng = np.random.default_rng(seed)
    n = op.size
    rank = min(rank, n)
    diag0 = np.asarray(op.diagonal(), dtype=float)
    d = np.maximum(diag0, 0.0)
    trace0 = float(np.sum(d))
    Z = np.zeros((rank, n))
    pivots = []
    for r in range(rank):
        cumulative = np.cumsum(d)
        total = float(cumulative[-1])
        if total <= 1e-12 * trace0 or total <= 0.0:
            break
        # first index whose cumulative mass exceeds the draw; its diagonal is positive
        j = int(np.searchsorted(cumulative, rng.random() * total, side="right"))
        col = np.asarray(op.column(j), dtype=float) - Z[:r].T @ Z[:r, j]
        if col[j] <= 0.0:
            break
        row = col / math.sqrt(col[j])
        Z[r] = row
        d = np.maximum(d - row * row, 0.0)
        d[j] = 0.0
        pivots.append(j)
    Z = Z[:len(pivots)]
    return LowRankFactor(Z, "cholesky-random", len(pivots), _residual_trace(diag0, Z), np.array(pivots, dtype=int))


def ldl_safeguarded(C, threshold=1e-8):
    """Diagonally pivoted LDL^T of a symmetric matrix with a floor on small pivots.

    Returns ``(perm, L, D)`` with ``C[perm][:, perm] + E = L diag(D) L^T``,
    where ``E`` is diagonal and nonzero only where a pivot of magnitude below
    ``threshold`` was replaced by ``+-threshold`` (zero counts as positive).
    """
    A = np.array(C, dtype=float)
    k = A.shape[0]
    perm = np.arange(k)
    L = np.eye(k)
    D = np.zeros(k)
    for j in range(k):
        p = j + int(np.argmax(np.abs(np.diag(A)[j:])))
        if p != j:
            A[[j, p]] = A[[p, j]]
            A[:, [j, p]] = A[:, [p, j]]
            L[[j, p], :j] = L[[p, j], :j]
            perm[[j, p]] = perm[[p, j]]
        pivot = A[j, j]
        if abs(pivot) < threshold:
            pivot = threshold if pivot >= 0 else -threshold
        D[j] = pivot
        col = A[j + 1:, j] / pivot
        L[j + 1:, j] = col
        A[j + 1:, j + 1:] -= np.outer(col, A[j, j + 1:])
    return perm, L, D


def nystrom(op, rank, mode="columns", seed=0, ldl_threshold=1e-8):
    """Nystrom factor with ``Z^T Z = (KQ) C^{-1} (KQ)^T``, ``C = Q^T K Q``.

    ``mode="columns"`` takes Q as ``rank`` distinct coordinate vectors;
    ``mode="gaussian"`` takes Q = orth(K G) for a standard normal G and
    touches K only through matrix-vector products.
    """
    n = op.size
    if rank > n:
        raise ConfigError(f"Nystrom rank {rank} exceeds n={n}")
    if rank < 1:
        raise ConfigError("rank must be at least 1")
    rng = np.random.default_rng(seed)
    if mode == "columns":
        S = rng.choice(n, size=rank, replace=False)
        KQ = np.asarray(op.columns(S), dtype=float)
        C = KQ[S, :]
    elif mode == "gaussian":
        G = rng.standard_normal((n, rank))
        Q, _ = np.linalg.qr(op.apply_block(G))
        KQ = op.apply_block(Q)
        C = Q.T @ KQ
    else:
        raise ConfigError(f"unknown Nystrom mode {mode!r}")
    C = (C + C.T) / 2
    perm, L, D = ldl_safeguarded(C, ldl_threshold)
    W = solve_triangular(L, KQ[:, perm].T, lower=True, unit_diagonal=True)
    Z = W / np.sqrt(np.abs(D))[:, None]
    return LowRankFactor(Z, f"nystrom-{mode}", rank)


def random_fourier_features(points, spec, rank, seed=0):
    """Random Fourier features for exp(-||x - x'||^2 / l^2).

    Frequencies are normal with variance 2 / l^2 per coordinate, phases
    uniform on [0, 2 pi); row i of Z is sqrt(2/k) cos(w_i . x + b_i).
    """
    if rank < 1:
        raise ConfigError("rank must be at least 1")
    X = np.atleast_2d(np.asarray(points, dtype=float))
    rng = np.random.default_rng(seed)
    W = rng.normal(scale=math.sqrt(2.0) / spec.length_scale, size=(rank, X.shape[1]))
    b = rng.uniform(0.0, 2 * math.pi, size=rank)
    Z = math.sqrt(2.0 / rank) * np.cos(W @ X.T + b[:, None])
    return LowRankFactor(Z, "rff", rank)


@dataclass(frozen=True)
class StackedFactor:
    """Per-window factors stacked into one; block l carries sqrt(eta_l).

    ``Z^T Z = sum_l eta_l Z_l^T Z_l``.
    """

    blocks: tuple
    factors: tuple = ()

    @property
    def n(self):
        return self.blocks[0].shape[1]

    @property
    def rank(self):
        return sum(B.shape[0] for B in self.blocks)

    @property
    def Z(self):
        return np.vstack(self.blocks)

    def apply(self, v):
        out = np.zeros(self.n)
        for B in self.blocks:
            out += B.T @ (B @ v)
        return out


def stack_anova_factors(factors, weights):
    if not factors:
        raise ConfigError("need at least one factor")
    if len(weights) != len(factors):
        raise ConfigError("need one weight per factor")
    n = factors[0].n
    if any(f.n != n for f in factors):
        raise ConfigError("factors cover different numbers of points")
    blocks = tuple(math.sqrt(float(w)) * f.Z for f, w in zip(factors, weights))
    return StackedFactor(blocks, tuple(factors))


def window_ranks(total_rank, P):
    return [max(1, total_rank // P)] * P


def build_factor(op, method, rank, seed=0, err_tol=1e-5, ldl_threshold=1e-8, weights=None):
    """Stacked preconditioner factor for an ANOVA operator (``None`` for ``"none"``).

    ``op`` either exposes ``window_operators()`` (one unweighted operator per
    window, weights from ``op.spec``) or is treated as a single window of
    weight 1. ``rank`` is the total rank split evenly over windows, or an
    explicit per-window list.
    """
    if method == "none":
        return None
    if method not in METHODS:
        raise ConfigError(f"unknown preconditioner {method!r}; choose from {', '.join(METHODS)}")
    if hasattr(op, "window_operators"):
        windows = op.window_operators()
        if weights is None:
            weights = op.spec.windowing.weights
    else:
        windows = [op]
        weights = [1.0] if weights is None else weights
    ranks = list(rank) if np.ndim(rank) else window_ranks(int(rank), len(windows))
    factors = []
    for l, (wop, k) in enumerate(zip(windows, ranks)):
        s = seed + 7919 * l
        if method == "cholesky-greedy":
            f = pivoted_cholesky_greedy(wop, k, err_tol)
        elif method == "cholesky-random":
            f = pivoted_cholesky_random(wop, k, s)
        elif method == "nystrom-columns":
            f = nystrom(wop, k, "columns", s, ldl_threshold)
        elif method == "nystrom-gaussian":
            f = nystrom(wop, k, "gaussian", s, ldl_threshold)
        else:
            if not hasattr(wop, "gspec"):
                raise ConfigError("random Fourier features need a Gaussian window operator")
            f = random_fourier_features(wop.points, wop.gspec, k, s)
        factors.append(f)
    return stack_anova_factors(factors, weights)
