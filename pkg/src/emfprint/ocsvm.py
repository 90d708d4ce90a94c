r"""nu-one-class SVM with an RBF kernel, trained by SMO.

The dual problem is

.. math:: \min_\alpha \tfrac12 \alpha^\top K \alpha
          \quad\text{s.t.}\quad 0 \le \alpha_i \le \tfrac{1}{\nu N},\ \sum_i \alpha_i = 1

and the decision value of a point ``x`` is
``sum_i alpha_i k(sv_i, x) - rho``. Inputs are z-scored with statistics
fitted on the training matrix before any kernel evaluation.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .errors import DimensionMismatch, NonFiniteInput, NotConverged

STD_FLOOR = 1e-12
DEFAULT_NU = 0.1
DEFAULT_TOL = 1e-4
MAX_ITER_PER_SAMPLE = 100_000


class Verdict(enum.Enum):
    AUTHORIZED = "Authorized"
    REJECTED = "Rejected"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True, eq=False)
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "Standardizer":
        mean = X.mean(axis=0)
        std = np.maximum(X.std(axis=0), STD_FLOOR)
        return cls(mean, std)

    def transform(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=np.float64) - self.mean) / self.std


def rbf_kernel(x, y, gamma: float) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise DimensionMismatch(f"shapes {x.shape} and {y.shape} differ")
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    d = x - y
    return float(np.exp(-gamma * np.dot(d, d)))


def rbf_gram(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    return np.exp(-gamma * cdist(A, B, "sqeuclidean"))


def default_gamma(Z: np.ndarray) -> float:
    """``1 / (d * mean per-feature variance)``; falls back to ``1/d`` when flat."""
    d = Z.shape[1]
    v = float(Z.var(axis=0).mean())
    return 1.0 / (d * v) if v > 0 else 1.0 / d


@dataclass(frozen=True, eq=False)
class OneClassModel:
    support_vectors: np.ndarray
    alphas: np.ndarray
    rho: float
    gamma: float
    nu: float
    standardizer: Standardizer
    class_label: str | None = None
    support_indices: np.ndarray | None = None
    n_iter: int = 0

    @property
    def dimension(self) -> int:
        return self.support_vectors.shape[1]

    def decision_function(self, X) -> np.ndarray:
        """Scores for a batch of raw (unstandardized) rows."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.dimension:
            raise DimensionMismatch(f"expected {self.dimension} features, got {X.shape[1]}")
        Z = self.standardizer.transform(X)
        return rbf_gram(Z, self.support_vectors, self.gamma) @ self.alphas - self.rho


def score(model: OneClassModel, x) -> float:
    """Similarity score of one raw feature vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != model.dimension:
        raise DimensionMismatch(f"expected {model.dimension} features, got shape {x.shape}")
    z = model.standardizer.transform(x)
    diff = model.support_vectors - z
    k = np.exp(-model.gamma * np.einsum("ij,ij->i", diff, diff))
    return float(k @ model.alphas - model.rho)


def decide(score_value: float, threshold: float = 0.0) -> Verdict:
    return Verdict.AUTHORIZED if score_value >= threshold else Verdict.REJECTED


@dataclass
class DualSolution:
    alphas: np.ndarray
    gradient: np.ndarray  # K @ alphas
    rho: float
    upper: float
    n_iter: int
    gap: float


def solve_dual(K: np.ndarray, nu: float, tol: float = DEFAULT_TOL,
               max_iter: int | None = None) -> DualSolution:
    """SMO on the nu-one-class dual for a precomputed kernel matrix.

    Each step moves mass between the maximal violating pair: ``i`` with the
    smallest gradient among coordinates below the box cap, ``j`` with the
    largest gradient among positive coordinates. Stops when
    ``G[j] - G[i] < tol``.
    """
    N = K.shape[0]
    if max_iter is None:
        max_iter = MAX_ITER_PER_SAMPLE * N
    C = 1.0 / (nu * N)
    alphas = np.zeros(N)
    n_full = min(int(np.floor(nu * N)), N)
    alphas[:n_full] = C
    if n_full < N:
        alphas[n_full] = 1.0 - n_full * C
    alphas = np.clip(alphas, 0.0, C)
    G = K @ alphas
    diag = np.diag(K).copy()

    gap = np.inf
    for it in range(max_iter + 1):
        up = alphas < C
        low = alphas > 0
        G_up = np.where(up, G, np.inf)
        G_low = np.where(low, G, -np.inf)
        i = int(np.argmin(G_up))
        j = int(np.argmax(G_low))
        gap = G_low[j] - G_up[i]
        if gap < tol:
            break
        if it == max_iter:
            raise NotConverged(f"SMO did not reach tol={tol} within {max_iter} updates (gap {gap:.3g})")
        curvature = diag[i] + diag[j] - 2.0 * K[i, j]
        if curvature <= 0:
            curvature = 1e-12
        step = gap / curvature
        room_i = C - alphas[i]
        room_j = alphas[j]
        if step >= room_i or step >= room_j:
            if room_i <= room_j:
                step = room_i
                alphas[i] = C
                alphas[j] -= step
                if room_i == room_j:
                    alphas[j] = 0.0
            else:
                step = room_j
                alphas[i] += step
                alphas[j] = 0.0
        else:
            alphas[i] += step
            alphas[j] -= step
        G += step * (K[:, i] - K[:, j])

    return DualSolution(alphas, G, _offset(alphas, G, C), C, it, float(gap))


def _offset(alphas: np.ndarray, G: np.ndarray, C: float) -> float:
    free = (alphas > 0) & (alphas < C)
    if free.any():
        return float(G[free].mean())
    # No free coordinate: midpoint of the feasible interval for rho.
    at_cap = G[alphas >= C]
    at_zero = G[alphas <= 0]
    lb = at_cap.max() if at_cap.size else None
    ub = at_zero.min() if at_zero.size else None
    if lb is None:
        return float(ub)
    if ub is None:
        return float(lb)
    return float(0.5 * (lb + ub))


def train(features, nu: float = DEFAULT_NU, gamma: float | None = None,
          tol: float = DEFAULT_TOL, max_iter: int | None = None,
          class_label: str | None = None) -> OneClassModel:
    """Fit a standardizer and a nu-one-class SVM on an ``N x d`` matrix."""
    X = np.asarray(features, dtype=np.float64)
    if X.ndim != 2:
        raise DimensionMismatch("features must be a 2-D matrix")
    N = X.shape[0]
    if N < 2:
        raise ValueError(f"need >= 2 training samples, got {N}")
    if not 0 < nu <= 1:
        raise ValueError("nu must lie in (0, 1]")
    if not np.isfinite(X).all():
        raise NonFiniteInput("training matrix contains NaN or infinite values")
    standardizer = Standardizer.fit(X)
    Z = standardizer.transform(X)
    if gamma is None:
        gamma = default_gamma(Z)
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    K = rbf_gram(Z, Z, gamma)
    sol = solve_dual(K, nu, tol, max_iter)
    sv = np.flatnonzero(sol.alphas > 0)
    return OneClassModel(
        support_vectors=Z[sv],
        alphas=sol.alphas[sv],
        rho=sol.rho,
        gamma=float(gamma),
        nu=float(nu),
        standardizer=standardizer,
        class_label=class_label,
        support_indices=sv,
        n_iter=sol.n_iter,
    )


def dual_objective(K: np.ndarray, alphas: np.ndarray) -> float:
    return 0.5 * float(alphas @ K @ alphas)
