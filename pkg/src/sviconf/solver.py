"""Zeros of the normal map ``f(Pi_S(z)) + z - Pi_S(z)`` for affine ``f`` on a box."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .box import (
    BoxSet,
    FacePattern,
    classify,
    project,
    resolve_middle,
    selection_matrix,
)
from .model import SaaMap
from .numerics import SingularMatrix, is_invertible, lu_solve

MAX_BRUTEFORCE_DIM = 14
Z_INIT_CLIP = 1e6


class MaxIterations(RuntimeError):
    pass


class SingularNewtonMatrix(RuntimeError):
    def __init__(self, pattern: FacePattern):
        super().__init__(f"singular Newton matrix on cell {pattern}")
        self.pattern = pattern


class DimensionTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-10
    max_iter: int = 100
    armijo_slope: float = 1e-4
    min_step: float = 2.0 ** -30
    pattern_tol: float | None = None

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tol must be positive")


@dataclass(frozen=True, eq=False)
class SolveResult:
    z: np.ndarray
    x: np.ndarray
    residual: float
    iterations: int
    pattern: FacePattern
    is_cell_interior: bool
    newton_matrix_invertible: bool


def normal_map_eval(f: SaaMap, S: BoxSet, z):
    z = np.asarray(z, dtype=float)
    x = project(S, z)
    return f(x) + z - x


def newton_matrix(jacobian, A):
    q = A.shape[0]
    return jacobian @ A + np.eye(q) - A


def _finish(f, S, z, iterations, cfg) -> SolveResult:
    pattern = classify(S, z, cfg.pattern_tol)
    A = selection_matrix(resolve_middle(pattern))
    return SolveResult(
        z=z,
        x=project(S, z),
        residual=float(np.linalg.norm(normal_map_eval(f, S, z))),
        iterations=iterations,
        pattern=pattern,
        is_cell_interior=not pattern.boundary_coords,
        newton_matrix_invertible=is_invertible(newton_matrix(f.jacobian, A)),
    )


def default_start(f: SaaMap):
    z = np.clip(-f.offset, -Z_INIT_CLIP, Z_INIT_CLIP)
    return z if np.all(np.isfinite(z)) else np.zeros(f.q)


def solve(f: SaaMap, S: BoxSet, cfg: SolverConfig = SolverConfig(), z_init=None) -> SolveResult:
    """Semismooth Newton with Armijo backtracking on the residual norm.

    Each step uses the selection ``J A + I - A`` where ``A`` comes from the
    cell at the current iterate, boundary coordinates committed to the
    middle piece.
    """
    z = default_start(f) if z_init is None else np.array(z_init, dtype=float)
    F = normal_map_eval(f, S, z)
    r = np.linalg.norm(F)
    for k in range(cfg.max_iter):
        if r <= cfg.tol:
            return _finish(f, S, z, k, cfg)
        pattern = resolve_middle(classify(S, z, cfg.pattern_tol))
        N = newton_matrix(f.jacobian, selection_matrix(pattern))
        try:
            step = lu_solve(N, -F)
        except SingularMatrix:
            raise SingularNewtonMatrix(pattern) from None
        t = 1.0
        while True:
            z_new = z + t * step
            F_new = normal_map_eval(f, S, z_new)
            r_new = np.linalg.norm(F_new)
            if r_new <= (1.0 - cfg.armijo_slope * t) * r:
                break
            t *= 0.5
            if t < cfg.min_step:
                # no descent along this selection; take the full step and move on
                z_new = z + step
                F_new = normal_map_eval(f, S, z_new)
                r_new = np.linalg.norm(F_new)
                break
        z, F, r = z_new, F_new, r_new
    if r <= cfg.tol:
        return _finish(f, S, z, cfg.max_iter, cfg)
    raise MaxIterations(f"residual {r:.3e} after {cfg.max_iter} iterations")


def solve_bruteforce(f: SaaMap, S: BoxSet, tol: float = 1e-9) -> list[SolveResult]:
    """Every solution found by enumerating lower/free/upper status per coordinate.

    Statuses whose free block is singular are skipped, so continua of
    solutions are not reported.
    """
    q = f.q
    if q > MAX_BRUTEFORCE_DIM:
        raise DimensionTooLarge(f"brute force enumeration limited to q <= {MAX_BRUTEFORCE_DIM}")
    J, b = f.jacobian, f.offset
    lo, up = S.lower, S.upper
    options = []
    for j in range(q):
        if lo[j] == up[j]:
            options.append(("fixed",))
            continue
        opts = ["free"]
        if np.isfinite(lo[j]):
            opts.append("lower")
        if np.isfinite(up[j]):
            opts.append("upper")
        options.append(tuple(opts))

    found: list[np.ndarray] = []
    for status in itertools.product(*options):
        free = np.array([s == "free" for s in status])
        x = np.where(np.array([s == "upper" for s in status]), up, lo).astype(float)
        x[free] = 0.0
        if free.any():
            rhs = -(b[free] + J[np.ix_(free, ~free)] @ x[~free])
            try:
                x[free] = lu_solve(J[np.ix_(free, free)], rhs[:, None])[:, 0]
            except SingularMatrix:
                continue
        scale = 1.0 + np.abs(x).max()
        if np.any(x < lo - tol * scale) or np.any(x > up + tol * scale):
            continue
        w = f(x)
        ok = True
        for j, s in enumerate(status):
            if s == "lower" and w[j] < -tol * scale:
                ok = False
            elif s == "upper" and w[j] > tol * scale:
                ok = False
        if not ok:
            continue
        x = np.clip(x, lo, up)
        if any(np.abs(x - y).max() <= 1e-9 * scale for y in found):
            continue
        found.append(x)

    cfg = SolverConfig()
    return [_finish(f, S, x - f(x), 0, cfg) for x in found]
