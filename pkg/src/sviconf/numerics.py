"""Dense linear algebra, chi-square quantiles and seeded random streams.

Matrices and vectors are plain float64 numpy arrays. The routines here are
small and dependency-light on purpose: the eigen-solver is a cyclic Jacobi
sweep and quantiles come from bisection on the regularized incomplete gamma
function, so results do not depend on which LAPACK build is installed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

PIVOT_RTOL = 1e-12
SYMMETRY_TOL = 1e-12
JACOBI_RTOL = 1e-12
JACOBI_MAX_SWEEPS = 100


class SingularMatrix(np.linalg.LinAlgError):
    pass


class NotSymmetric(ValueError):
    pass


def lu_factor(A):
    """LU factorization with partial pivoting.

    Returns ``(lu, perm)`` where ``lu`` stores L (unit lower, below the
    diagonal) and U (on and above it) and ``perm`` is the row permutation.
    Raises SingularMatrix when a pivot is below ``1e-12 * max|A|``.
    """
    A = np.array(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"lu_factor needs a square matrix, got shape {A.shape}")
    n = A.shape[0]
    scale = np.abs(A).max() if A.size else 0.0
    thresh = PIVOT_RTOL * scale
    perm = np.arange(n)
    for k in range(n):
        p = k + int(np.argmax(np.abs(A[k:, k])))
        if abs(A[p, k]) <= thresh or scale == 0.0:
            raise SingularMatrix(f"pivot {abs(A[p, k]):.3e} at column {k} below {thresh:.3e}")
        if p != k:
            A[[k, p]] = A[[p, k]]
            perm[[k, p]] = perm[[p, k]]
        A[k + 1:, k] /= A[k, k]
        A[k + 1:, k + 1:] -= np.outer(A[k + 1:, k], A[k, k + 1:])
    return A, perm


def lu_solve(A, B):
    """Solve ``A X = B`` by Gaussian elimination with partial pivoting."""
    lu, perm = lu_factor(A)
    B = np.asarray(B, dtype=float)
    if B.shape[0] != lu.shape[0]:
        raise ValueError(f"row mismatch: A is {lu.shape}, B is {B.shape}")
    X = B[perm].copy()
    n = lu.shape[0]
    for i in range(n):
        X[i] -= lu[i, :i] @ X[:i]
    for i in range(n - 1, -1, -1):
        X[i] = (X[i] - lu[i, i + 1:] @ X[i + 1:]) / lu[i, i]
    return X


def inverse(A):
    A = np.asarray(A, dtype=float)
    return lu_solve(A, np.eye(A.shape[0]))


def is_invertible(A) -> bool:
    try:
        lu_factor(A)
    except SingularMatrix:
        return False
    return True


@dataclass(frozen=True)
class EigenDecomposition:
    """``A = U.T @ diag(values) @ U``; rows of ``U`` are eigenvectors."""

    values: np.ndarray
    U: np.ndarray

    def reconstruct(self):
        return self.U.T @ np.diag(self.values) @ self.U


def eig_sym(A) -> EigenDecomposition:
    """Cyclic Jacobi eigen-decomposition of a symmetric matrix.

    Eigenvalues come back sorted in decreasing order.
    """
    A = np.array(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"eig_sym needs a square matrix, got shape {A.shape}")
    n = A.shape[0]
    norm = np.linalg.norm(A)
    if np.abs(A - A.T).max(initial=0.0) > SYMMETRY_TOL * max(norm, 1.0):
        raise NotSymmetric("matrix is not symmetric")
    A = 0.5 * (A + A.T)
    V = np.eye(n)
    target = JACOBI_RTOL * norm

    mask = ~np.eye(n, dtype=bool)

    def off(M):
        return math.sqrt(np.sum(M[mask] ** 2))

    for _ in range(JACOBI_MAX_SWEEPS):
        if off(A) <= target:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= 1e-300 or abs(apq) < 1e-18 * (abs(A[p, p]) + abs(A[q, q])):
                    continue
                # symmetric Schur 2x2 rotation
                tau = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, tau) / (abs(tau) + math.hypot(1.0, tau))
                c = 1.0 / math.hypot(1.0, t)
                s = t * c
                ap = A[:, p].copy()
                aq = A[:, q].copy()
                A[:, p] = c * ap - s * aq
                A[:, q] = s * ap + c * aq
                ap = A[p, :].copy()
                aq = A[q, :].copy()
                A[p, :] = c * ap - s * aq
                A[q, :] = s * ap + c * aq
                vp = V[:, p].copy()
                vq = V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    else:
        raise np.linalg.LinAlgError("Jacobi sweeps did not converge")

    values = np.diag(A).copy()
    order = np.argsort(-values, kind="stable")
    return EigenDecomposition(values=values[order], U=V[:, order].T.copy())


def sym_sqrt(A):
    """Symmetric PSD square root; negative rounding-level eigenvalues clip to 0."""
    eig = eig_sym(A)
    return eig.U.T @ np.diag(np.sqrt(np.clip(eig.values, 0.0, None))) @ eig.U


# --- incomplete gamma and chi-square quantiles ---------------------------------

_GAMMA_EPS = 1e-16
_GAMMA_MAXIT = 10_000
_TINY = 1e-300


def _gamma_series(a, x):
    # lower regularized P(a, x) via the power series, valid for x < a + 1
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(_GAMMA_MAXIT):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _GAMMA_EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_contfrac(a, x):
    # upper regularized Q(a, x) via modified Lentz, valid for x >= a + 1
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _GAMMA_MAXIT):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _GAMMA_EPS:
            break
    return h * math.exp(-x + a * math.log(x) - math.lgamma(a))


def gammaincc(a: float, x: float) -> float:
    """Regularized upper incomplete gamma function Q(a, x)."""
    if a <= 0:
        raise ValueError("a must be positive")
    if x <= 0:
        return 1.0
    if x < a + 1.0:
        return 1.0 - _gamma_series(a, x)
    return _gamma_contfrac(a, x)


def chi2_sf(x: float, dof: int) -> float:
    return gammaincc(0.5 * dof, 0.5 * x)


@lru_cache(maxsize=4096)
def chi2_quantile(dof: int, alpha: float) -> float:
    """The value c with ``P(chi2_dof > c) = alpha``."""
    if int(dof) != dof or dof < 1:
        raise ValueError(f"dof must be a positive integer, got {dof}")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    lo, hi = 0.0, max(2.0 * dof, 1.0)
    while chi2_sf(hi, dof) > alpha:
        lo, hi = hi, 2.0 * hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if chi2_sf(mid, dof) > alpha:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-14 * max(1.0, hi):
            break
    return 0.5 * (lo + hi)


# --- random streams -----------------------------------------------------------


@dataclass(frozen=True)
class RngStream:
    """Immutable descriptor of a counter-based random stream.

    The same ``(seed, stream_id, path)`` always produces the same draws
    (Philox keyed through a SeedSequence); distinct ids give independent
    streams. ``substream`` derives nested streams without consuming draws.
    """

    seed: int
    stream_id: int = 0
    path: tuple[int, ...] = ()

    def substream(self, key: int) -> RngStream:
        return RngStream(self.seed, self.stream_id, self.path + (int(key),))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id, *self.path))
        return np.random.Generator(np.random.Philox(ss))


def uniform(stream: RngStream, lo: float, hi: float, size=None):
    """Uniform draws on ``[lo, hi)``; a pure function of the stream."""
    if not lo < hi:
        raise ValueError(f"need lo < hi, got [{lo}, {hi})")
    u = stream.generator().random(size)
    return lo + (hi - lo) * u
