"""Confidence regions and intervals for the true normal-map solution.

Given an SAA solution ``z_n`` this module builds the derivative matrix of
the SAA normal map at ``z_n``, the ellipsoidal region (or its degenerate
variant when the sample covariance is nearly singular), the simultaneous
intervals of its bounding box, and the individual intervals. The
``LimitingLaw`` half of the module works with the population objects at
``z_0`` and estimates what individual intervals cover in the limit.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .box import (
    BoxSet,
    FacePattern,
    cells_at,
    classify,
    cone_signs,
    project,
    resolve_middle,
    selection_matrix,
)
from .model import CovarianceEstimate, SaaMap
from .numerics import (
    RngStream,
    SingularMatrix,
    chi2_quantile,
    eig_sym,
    inverse,
    lu_solve,
    sym_sqrt,
)
from .solver import SolveResult, newton_matrix

SPECTRAL_RTOL = 1e-8
CONE_TOL = 1e-12
CONE_TOL_RELAXED = 1e-9
MC_CHUNK = 1 << 18


class SingularCovariance(ValueError):
    pass


class NonInvertibleDerivative(ValueError):
    pass


class ThresholdAboveAllEigenvalues(ValueError):
    pass


class UnsupportedRegion(ValueError):
    pass


class SingularSelection(ValueError):
    pass


class NoConsistentCell(RuntimeError):
    pass


def _cov(sigma):
    return sigma.matrix if isinstance(sigma, CovarianceEstimate) else np.asarray(sigma, dtype=float)


def default_rho0(sigma) -> float:
    return SPECTRAL_RTOL * max(eig_sym(_cov(sigma)).values[0], 0.0)


@dataclass(frozen=True, eq=False)
class NormalMapDerivative:
    z: np.ndarray
    pattern: FacePattern
    matrix: np.ndarray
    is_linear: bool
    is_invertible: bool
    condition: float


def derivative_at(f: SaaMap, S: BoxSet, result: SolveResult | np.ndarray, tol: float | None = None) -> NormalMapDerivative:
    """Matrix of the SAA normal map's B-derivative at the solution.

    Boundary coordinates are resolved to the middle piece; ``is_linear``
    records whether that was needed.
    """
    z = result.z if isinstance(result, SolveResult) else np.asarray(result, dtype=float)
    pattern = classify(S, z, tol)
    M = newton_matrix(f.jacobian, selection_matrix(resolve_middle(pattern)))
    try:
        Minv = inverse(M)
        invertible = True
        cond = float(np.abs(M).sum(axis=0).max() * np.abs(Minv).sum(axis=0).max())
    except SingularMatrix:
        invertible = False
        cond = float("inf")
    return NormalMapDerivative(z, pattern, M, not pattern.boundary_coords, invertible, cond)


class RegionKind(enum.Enum):
    FULL_RANK = "full_rank"
    DEGENERATE = "degenerate"


@dataclass(frozen=True, eq=False)
class ConfidenceRegion:
    """``{z : n [M(z - c)]' W [M(z - c)] <= chi2_dof(alpha)}`` plus, when degenerate,
    the slab ``||sqrt(n) U2 M (z - c)||_inf <= epsilon``.

    ``W`` is the inverse sample covariance for full-rank regions and
    ``U1' D^-1 U1`` for degenerate ones; ``shape`` is ``M' W M``.
    """

    kind: RegionKind
    center: np.ndarray
    n: int
    alpha: float
    M: np.ndarray
    sigma: np.ndarray
    shape: np.ndarray
    dof: int
    U1: np.ndarray | None = None
    D: np.ndarray | None = None
    U2: np.ndarray | None = None
    epsilon: float = 0.0

    @property
    def critical_value(self) -> float:
        return chi2_quantile(self.dof, self.alpha)

    @property
    def radius(self) -> float:
        return self.critical_value / self.n

    def statistic(self, z) -> float:
        """``n [M(z - c)]' W [M(z - c)]``."""
        d = np.asarray(z, dtype=float) - self.center
        return float(self.n * d @ self.shape @ d)

    def slab_norm(self, z) -> float:
        if self.U2 is None or self.U2.shape[0] == 0:
            return 0.0
        w = self.M @ (np.asarray(z, dtype=float) - self.center)
        return float(np.abs(np.sqrt(self.n) * self.U2 @ w).max())


def region_fullrank(d: NormalMapDerivative, sigma, n: int, alpha: float, rho0: float | None = None) -> ConfidenceRegion:
    if not d.is_invertible:
        raise NonInvertibleDerivative("derivative matrix is singular")
    Sig = _cov(sigma)
    eig = eig_sym(Sig)
    if rho0 is None:
        rho0 = SPECTRAL_RTOL * max(eig.values[0], 0.0)
    if eig.values[-1] <= rho0:
        raise SingularCovariance(f"smallest eigenvalue {eig.values[-1]:.3e} <= rho0 {rho0:.3e}")
    M = d.matrix
    Q = M.T @ lu_solve(Sig, M)
    Q = 0.5 * (Q + Q.T)
    return ConfidenceRegion(RegionKind.FULL_RANK, d.z.copy(), int(n), float(alpha), M, Sig, Q, M.shape[0])


def region_degenerate(
    d: NormalMapDerivative, sigma, n: int, alpha: float, rho0: float | None = None, epsilon: float = 0.0
) -> ConfidenceRegion:
    """Region built from the eigenvalues of ``Sigma_n`` that are at least ``rho0``."""
    if not d.is_invertible:
        raise NonInvertibleDerivative("derivative matrix is singular")
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    Sig = _cov(sigma)
    eig = eig_sym(Sig)
    if rho0 is None:
        rho0 = SPECTRAL_RTOL * max(eig.values[0], 0.0)
    if rho0 <= 0:
        raise ValueError("rho0 must be positive")
    l = int(np.sum(eig.values >= rho0))
    if l == 0:
        raise ThresholdAboveAllEigenvalues(f"no eigenvalue reaches rho0 = {rho0:.3e}")
    U1, U2 = eig.U[:l], eig.U[l:]
    D = eig.values[:l]
    W = U1.T @ np.diag(1.0 / D) @ U1
    M = d.matrix
    Q = M.T @ W @ M
    Q = 0.5 * (Q + Q.T)
    return ConfidenceRegion(
        RegionKind.DEGENERATE, d.z.copy(), int(n), float(alpha), M, Sig, Q, l,
        U1=U1, D=D, U2=U2, epsilon=float(epsilon),
    )


def region_auto(d: NormalMapDerivative, sigma, n: int, alpha: float, rho0: float | None = None, epsilon: float = 0.0):
    """Full-rank region when every eigenvalue clears ``rho0``, degenerate otherwise."""
    try:
        return region_fullrank(d, sigma, n, alpha, rho0)
    except SingularCovariance:
        return region_degenerate(d, sigma, n, alpha, rho0, epsilon)


def region_contains(region: ConfidenceRegion, z, atol: float = 1e-12) -> bool:
    if region.statistic(z) > region.critical_value:
        return False
    if region.kind is RegionKind.DEGENERATE:
        return region.slab_norm(z) <= region.epsilon + atol
    return True


@dataclass(frozen=True, eq=False)
class IntervalSet:
    lo: np.ndarray
    hi: np.ndarray
    kind: str  # "sim" or "ind"
    alpha: float
    space: str = "z"
    center: np.ndarray | None = field(default=None, repr=False)

    @property
    def level(self) -> float:
        return 1.0 - self.alpha

    def covers(self, z):
        z = np.asarray(z, dtype=float)
        return (self.lo <= z) & (z <= self.hi)

    def contains(self, z) -> bool:
        return bool(np.all(self.covers(z)))


def simultaneous_intervals(region: ConfidenceRegion) -> IntervalSet:
    """Coordinate ranges of the region's minimum enclosing box."""
    Minv = inverse(region.M)
    if region.kind is RegionKind.FULL_RANK:
        C = Minv @ region.sigma @ Minv.T
        half = np.sqrt(region.radius * np.clip(np.diag(C), 0.0, None))
    elif region.epsilon == 0.0:
        B = Minv @ region.U1.T @ np.diag(np.sqrt(region.D))
        half = np.sqrt(region.radius) * np.linalg.norm(B, axis=1)
    else:
        raise UnsupportedRegion("enclosing box only available for epsilon = 0")
    c = region.center
    return IntervalSet(c - half, c + half, "sim", region.alpha, center=c.copy())


def individual_scales(d: NormalMapDerivative, sigma):
    """Standard deviations ``sqrt(diag(M^-1 Sigma M^-T))``; zeros if ``M`` is singular."""
    if not d.is_invertible:
        return np.zeros(d.z.size)
    Minv = inverse(d.matrix)
    C = Minv @ _cov(sigma) @ Minv.T
    return np.sqrt(np.clip(np.diag(C), 0.0, None))


def individual_intervals(d: NormalMapDerivative, sigma, n: int, alpha: float) -> IntervalSet:
    r = individual_scales(d, sigma)
    half = np.sqrt(chi2_quantile(1, alpha)) * r / np.sqrt(n)
    return IntervalSet(d.z - half, d.z + half, "ind", float(alpha), center=d.z.copy())


def project_intervals_to_x(intervals: IntervalSet, S: BoxSet) -> IntervalSet:
    center = None if intervals.center is None else project(S, intervals.center)
    return IntervalSet(
        np.clip(intervals.lo, S.lower, S.upper),
        np.clip(intervals.hi, S.lower, S.upper),
        intervals.kind,
        intervals.alpha,
        space="x",
        center=center,
    )


# --- limiting law -------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LimitingLaw:
    """Selections of the true normal map's B-derivative on every cell at ``z0``.

    ``M[i] = L A[i] + I - A[i]``, ``C[i] = M[i]^-1 Sigma0 M[i]^-T`` and
    ``r[i, j] = sqrt(C[i][j, j])``. ``cones[i]`` is the sign vector of the
    tangent cone of cell ``i`` at ``z0``.
    """

    L: np.ndarray
    sigma0: np.ndarray
    S: BoxSet
    z0: np.ndarray
    cells: list[FacePattern]
    A: list[np.ndarray]
    M: list[np.ndarray]
    Minv: list[np.ndarray]
    C: list[np.ndarray]
    r: np.ndarray
    cones: np.ndarray

    @property
    def k(self) -> int:
        return len(self.cells)


def limiting_law(L, sigma0, S: BoxSet, z0, tol: float | None = None) -> LimitingLaw:
    L = np.asarray(L, dtype=float)
    sigma0 = np.asarray(sigma0, dtype=float)
    z0 = np.asarray(z0, dtype=float)
    q = L.shape[0]
    cells = cells_at(S, z0, tol)
    As, Ms, Minvs, Cs = [], [], [], []
    for cell in cells:
        A = selection_matrix(cell)
        M = L @ A + np.eye(q) - A
        try:
            Minv = inverse(M)
        except SingularMatrix:
            raise SingularSelection(f"selection on cell {cell} is singular") from None
        C = Minv @ sigma0 @ Minv.T
        As.append(A)
        Ms.append(M)
        Minvs.append(Minv)
        Cs.append(0.5 * (C + C.T))
    r = np.sqrt(np.clip(np.array([np.diag(C) for C in Cs]), 0.0, None))
    cones = np.array([cone_signs(S, z0, cell, tol) for cell in cells])
    return LimitingLaw(L, sigma0, S, z0, cells, As, Ms, Minvs, Cs, r, cones)


def coherent_orientation(law: LimitingLaw, rtol: float = 1e-12) -> bool:
    signs = set()
    for M in law.M:
        det = np.linalg.det(M)
        scale = max(np.abs(M).max(), 1e-300) ** M.shape[0]
        if abs(det) <= rtol * scale:
            return False
        signs.add(det > 0)
    return len(signs) == 1


def independence_condition(law: LimitingLaw, rtol: float = 1e-10) -> str | None:
    """Name a known situation in which individual intervals are asymptotically exact.

    Returns ``"k<=2"`` or ``"diagonal"`` (every ``C[i]`` diagonal on a box),
    or None when neither applies; None does not mean the condition fails.
    """
    if law.k <= 2:
        return "k<=2"
    for C in law.C:
        off = C - np.diag(np.diag(C))
        if np.abs(off).max() > rtol * max(np.abs(C).max(), 1e-300):
            return None
    return "diagonal"


def _in_cones(law: LimitingLaw, H, i, tol):
    signs = law.cones[i]
    scale = 1.0 + np.abs(H).max(axis=-1)
    return np.all(H * signs >= -tol * scale[..., None], axis=-1)


def lk_inverse_batch(law: LimitingLaw, Y):
    """Invert the piecewise-linear map row by row.

    Returns ``(H, idx)``: ``H[m] = M[idx[m]]^-1 Y[m]`` with ``H[m]`` in
    cone ``idx[m]``; ties go to the lowest cell index.
    """
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    H = np.full_like(Y, np.nan)
    idx = np.full(Y.shape[0], -1)
    for tol in (CONE_TOL, CONE_TOL_RELAXED):
        for i in range(law.k):
            todo = idx < 0
            if not todo.any():
                break
            Hi = Y[todo] @ law.Minv[i].T
            ok = _in_cones(law, Hi, i, tol)
            rows = np.flatnonzero(todo)[ok]
            H[rows] = Hi[ok]
            idx[rows] = i
    if np.any(idx < 0):
        raise NoConsistentCell(f"{int(np.sum(idx < 0))} points matched no cone")
    return H, idx


def lk_inverse(law: LimitingLaw, y):
    H, _ = lk_inverse_batch(law, np.asarray(y, dtype=float)[None, :])
    return H[0]


def lk_apply(law: LimitingLaw, h):
    """Forward map ``h -> M[i] h`` on the first cone containing ``h``."""
    h = np.asarray(h, dtype=float)
    for tol in (CONE_TOL, CONE_TOL_RELAXED):
        for i in range(law.k):
            if _in_cones(law, h[None, :], i, tol)[0]:
                return law.M[i] @ h
    raise NoConsistentCell("direction lies in no cone")


def limiting_coverages(law: LimitingLaw, alpha: float, samples: int, stream: RngStream):
    """Monte Carlo limit of individual-interval coverage for every coordinate.

    Draws ``Y ~ N(0, Sigma0)`` in fixed-size chunks, each from its own
    substream, so the estimate does not depend on how work is split.
    """
    root = sym_sqrt(law.sigma0)
    c = np.sqrt(chi2_quantile(1, alpha))
    q = law.z0.size
    hits = np.zeros(q, dtype=np.int64)
    done = 0
    chunk_id = 0
    while done < samples:
        m = min(MC_CHUNK, samples - done)
        Y = stream.substream(chunk_id).generator().standard_normal(size=(m, q)) @ root
        G, idx = lk_inverse_batch(law, Y)
        hits += np.sum(np.abs(G) <= c * law.r[idx], axis=0)
        done += m
        chunk_id += 1
    return hits / samples


def limiting_individual_coverage(law: LimitingLaw, j: int, alpha: float, samples: int, stream: RngStream) -> float:
    return float(limiting_coverages(law, alpha, samples, stream)[j])
