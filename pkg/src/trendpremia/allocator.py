r"""Minimum-variance allocation across horizon sleeves.

Four routes to the full-investment minimum-variance portfolio

.. math::

    \min_w \; w^\top S w \quad \text{s.t.} \quad \mathbf{1}^\top w = 1

are provided: the closed form :math:`S^{-1}\mathbf{1} / \mathbf{1}^\top S^{-1}\mathbf{1}`,
a Cholesky-whitened route, a pseudoinverse route for semidefinite input, and
an exact active-set enumeration for the long-only (simplex) problem.

The three-horizon Toeplitz model and its barbell solution live here too.
"""
from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Union

import numpy as np
from scipy.linalg import solve_triangular

from .errors import (
    DimensionTooLarge,
    DimensionZero,
    NotPositiveDefinite,
    NotSymmetric,
    OnesInKernel,
    ParameterOutOfRange,
    WOutOfRange,
)

SYMMETRY_TOL = 1e-12
PINV_RTOL = 1e-12
MAX_SIMPLEX_DIM = 12
TIE_TOL = 1e-12
FEAS_TOL = 1e-12

Number = Union[float, int]


class Route(str, enum.Enum):
    CLOSED_FORM = "ClosedForm"
    WHITENED = "Whitened"
    PSEUDOINVERSE = "Pseudoinverse"
    CONSTRAINED_SIMPLEX = "ConstrainedSimplex"


@dataclass(frozen=True)
class AllocationResult:
    weights: np.ndarray
    variance: float
    route: Route

    @property
    def vol(self) -> float:
        return math.sqrt(max(self.variance, 0.0))

    def to_dict(self) -> dict:
        return {"weights": [float(x) for x in self.weights], "variance": float(self.variance), "route": self.route.value}


def as_covariance(S) -> np.ndarray:
    """Validate and symmetrise a covariance matrix.

    Asymmetry above 1e-12 (relative to the largest entry) is rejected; below
    it the matrix is averaged with its transpose.
    """
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise NotSymmetric(f"covariance must be square, got shape {S.shape}")
    if S.shape[0] == 0:
        raise DimensionZero("covariance has dimension zero")
    if not np.all(np.isfinite(S)):
        raise NotSymmetric("covariance has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(S))))
    if np.max(np.abs(S - S.T)) > SYMMETRY_TOL * scale:
        raise NotSymmetric("covariance is not symmetric")
    S = 0.5 * (S + S.T)
    if np.any(np.diag(S) < 0):
        raise NotSymmetric("covariance has a negative diagonal entry")
    return S


def _cholesky(S: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        raise NotPositiveDefinite("covariance is not positive definite") from None


def _result(S: np.ndarray, w: np.ndarray, route: Route) -> AllocationResult:
    var = float(w @ S @ w)
    return AllocationResult(w, max(var, 0.0), route)


def min_variance_closed_form(S) -> AllocationResult:
    S = as_covariance(S)
    _cholesky(S)  # PD check only
    ones = np.ones(S.shape[0])
    x = np.linalg.solve(S, ones)
    return _result(S, x / x.sum(), Route.CLOSED_FORM)


def min_variance_whitened(S) -> AllocationResult:
    """Whitening route: S = L L^T, a = L^{-1} 1, x* = a/|a|^2, w* = L^{-T} x*."""
    S = as_covariance(S)
    L = _cholesky(S)
    a = solve_triangular(L, np.ones(S.shape[0]), lower=True)
    x = a / (a @ a)
    w = solve_triangular(L.T, x, lower=False)
    return _result(S, w, Route.WHITENED)


def _psd_eig(S: np.ndarray, rtol: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    vals, vecs = np.linalg.eigh(S)
    top = max(float(vals.max()), 0.0)
    keep = vals > rtol * top if top > 0 else np.zeros_like(vals, dtype=bool)
    return vals, vecs, keep


def pinv_psd(S: np.ndarray, rtol: float = PINV_RTOL) -> np.ndarray:
    """Moore-Penrose pseudoinverse of a symmetric PSD matrix; eigenvalues
    below ``rtol * max eigenvalue`` are treated as zero."""
    vals, vecs, keep = _psd_eig(S, rtol)
    inv = np.zeros_like(vals)
    inv[keep] = 1.0 / vals[keep]
    return (vecs * inv) @ vecs.T


def min_variance_psd(S) -> AllocationResult:
    """Minimum-norm minimiser for semidefinite ``S``.

    When 1 lies in the range of S this is S^+ 1 / (1^T S^+ 1). When the
    kernel of S has a direction with non-zero sum, zero variance is feasible
    and S^+ 1 is no longer optimal; the minimum-norm zero-variance point
    P_ker 1 / (1^T P_ker 1) is returned instead.
    """
    S = as_covariance(S)
    n = S.shape[0]
    ones = np.ones(n)
    vals, vecs, keep = _psd_eig(S, PINV_RTOL)
    coef = vecs.T @ ones
    range_part = vecs[:, keep] @ coef[keep]
    kernel_part = vecs[:, ~keep] @ coef[~keep]
    if np.linalg.norm(range_part) <= 1e-10 * math.sqrt(n):
        raise OnesInKernel("1^T S^+ 1 vanishes: the budget vector lies in the kernel")
    if np.linalg.norm(kernel_part) > 1e-10 * math.sqrt(n):
        w = kernel_part / kernel_part.sum()
    else:
        inv = np.zeros_like(vals)
        inv[keep] = 1.0 / vals[keep]
        x = (vecs * inv) @ coef
        w = x / x.sum()
    return _result(S, w, Route.PSEUDOINVERSE)


# -- long-only simplex ---------------------------------------------------------


@lru_cache(maxsize=None)
def _supports(n: int) -> tuple[tuple[int, ...], ...]:
    """All non-empty index subsets, largest first (ties broken lexicographically)."""
    subsets = []
    for k in range(n, 0, -1):
        subsets.extend(itertools.combinations(range(n), k))
    return tuple(subsets)


def _support_candidate(S: np.ndarray, supp: tuple[int, ...]) -> np.ndarray | None:
    """Minimum-variance point on the face spanned by ``supp`` via its KKT system.

    Returns None when the face yields no consistent stationary point.
    """
    k = len(supp)
    idx = np.asarray(supp)
    if k == 1:
        w = np.zeros(S.shape[0])
        w[idx[0]] = 1.0
        return w
    sub = S[np.ix_(idx, idx)]
    # [2 sub, -1; 1^T, 0] [w; nu] = [0; 1]
    A = np.zeros((k + 1, k + 1))
    A[:k, :k] = 2.0 * sub
    A[:k, k] = -1.0
    A[k, :k] = 1.0
    b = np.zeros(k + 1)
    b[k] = 1.0
    sol, *_ = np.linalg.lstsq(A, b, rcond=None)
    if np.max(np.abs(A @ sol - b)) > 1e-9:
        return None
    w = np.zeros(S.shape[0])
    w[idx] = sol[:k]
    return w


def _kkt_ok(S: np.ndarray, w: np.ndarray, supp: tuple[int, ...], tol: float) -> bool:
    if np.any(w[list(supp)] < -FEAS_TOL):
        return False
    g = S @ w
    var = float(w @ g)
    off = np.setdiff1d(np.arange(S.shape[0]), supp)
    # multipliers of inactive bounds are g_j - var, must be >= 0
    return bool(np.all(g[off] >= var - tol))


def min_variance_simplex(S) -> AllocationResult:
    """Exact long-only minimum variance by support enumeration.

    Every support whose stationary point is feasible and satisfies the KKT
    multiplier signs is a global minimiser (the problem is convex). Among
    certified candidates the smallest variance wins; ties within 1e-12 go to
    the largest support, then to the lexicographically first.
    """
    S = as_covariance(S)
    n = S.shape[0]
    if n > MAX_SIMPLEX_DIM:
        raise DimensionTooLarge(f"simplex enumeration refused for dimension {n} > {MAX_SIMPLEX_DIM}")
    scale = max(float(np.max(np.abs(np.diag(S)))), 1e-300)
    tol = 1e-10 * scale
    best = None
    for supp in _supports(n):
        w = _support_candidate(S, supp)
        if w is None or not _kkt_ok(S, w, supp, tol):
            continue
        var = float(w @ S @ w)
        if best is None or var < best[0] - TIE_TOL * scale:
            best = (var, w)
    if best is None:  # pragma: no cover - a convex QP on the simplex always has a KKT point
        raise NotPositiveDefinite("no KKT-certified support found")
    w = np.clip(best[1], 0.0, None)
    w = w / w.sum()
    return _result(S, w, Route.CONSTRAINED_SIMPLEX)


# -- three-horizon Toeplitz model ----------------------------------------------


@dataclass(frozen=True)
class ToeplitzModel:
    """Equal-vol three-horizon model with adjacent correlation ``rho`` and
    extreme-horizon correlation ``delta``."""

    rho: Number
    delta: Number
    mu: Number = 0.05
    sigma: Number = 1

    def __post_init__(self):
        if not 0 <= self.rho < 1:
            raise ParameterOutOfRange(f"rho={self.rho} outside [0, 1)")
        if not 0 <= self.delta < 1:
            raise ParameterOutOfRange(f"delta={self.delta} outside [0, 1)")
        if not self.mu > 0:
            raise ParameterOutOfRange(f"mu={self.mu} must be positive")
        if not self.sigma > 0:
            raise ParameterOutOfRange(f"sigma={self.sigma} must be positive")

    @property
    def is_positive_definite(self) -> bool:
        return self.rho * self.rho < (1 + self.delta) / 2

    @property
    def in_barbell_regime(self) -> bool:
        return self.rho >= (1 + self.delta) / 2

    @property
    def correlation(self) -> np.ndarray:
        r, d = float(self.rho), float(self.delta)
        return np.array([[1.0, r, d], [r, 1.0, r], [d, r, 1.0]])

    @property
    def covariance(self) -> np.ndarray:
        return float(self.sigma) ** 2 * self.correlation

    @property
    def determinant(self):
        """Closed-form sigma^6 (1 - delta)((1 + delta) - 2 rho^2)."""
        return self.sigma ** 6 * (1 - self.delta) * ((1 + self.delta) - 2 * self.rho ** 2)

    @property
    def stationary_point(self):
        """Critical point (1 - rho)/(3 + delta - 4 rho) of the symmetric profile;
        None when the profile is linear."""
        denom = 3 + self.delta - 4 * self.rho
        if denom == 0:
            return None
        return (1 - self.rho) / denom


def toeplitz_matrix(m: ToeplitzModel) -> np.ndarray:
    """Covariance sigma^2 R(rho, delta); not required to be positive definite."""
    return m.covariance


def barbell_profile(m: ToeplitzModel, w: Number):
    """Variance sigma^2 f(w) of the symmetric allocation (w, 1 - 2w, w).

    Plain arithmetic, so exact rationals (``fractions.Fraction``) pass
    through unrounded.
    """
    if not 0 <= w <= 0.5:
        raise WOutOfRange(f"w={w} outside [0, 1/2]")
    f = 1 + 4 * (m.rho - 1) * w + (6 + 2 * m.delta - 8 * m.rho) * w * w
    return m.sigma ** 2 * f


def barbell_optimal(m: ToeplitzModel) -> AllocationResult:
    """Long-only minimum variance for the Toeplitz model.

    In the barbell regime rho >= (1 + delta)/2 the answer is (1/2, 0, 1/2)
    with variance sigma^2 (1 + delta)/2; elsewhere the simplex solver decides.
    """
    if not m.is_positive_definite:
        raise NotPositiveDefinite(f"Toeplitz model rho={m.rho}, delta={m.delta} is not positive definite")
    if m.in_barbell_regime:
        w = np.array([0.5, 0.0, 0.5])
        var = float(m.sigma) ** 2 * (1 + float(m.delta)) / 2
        return AllocationResult(w, var, Route.CONSTRAINED_SIMPLEX)
    return min_variance_simplex(m.covariance)


def sharpe_of(m: ToeplitzModel, result: AllocationResult) -> float:
    """Sharpe ratio of an allocation in the model, zero risk-free rate."""
    return float(m.mu) * float(np.sum(result.weights)) / result.vol
