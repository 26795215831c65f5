"""Boxes, Euclidean projection onto them, and the cell structure of the projector.

For a box ``S = prod_j [lo_j, up_j]`` the projector is affine on every cell
``prod_j piece_j`` where each piece is ``(-inf, lo_j]``, ``[lo_j, up_j]`` or
``[up_j, inf)``. A point is described coordinatewise by a :class:`Tag`; a
*resolved* pattern (only BELOW, INTERIOR, ABOVE tags) names one cell, and
INTERIOR then means "middle piece".
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass

import numpy as np

DEFAULT_CELL_CAP = 4096


class Tag(enum.Enum):
    BELOW = "below_lower"
    AT_LOWER = "at_lower"
    INTERIOR = "interior"
    AT_UPPER = "at_upper"
    AT_BOTH = "at_both_bounds"
    ABOVE = "above_upper"


_RESOLVED = (Tag.BELOW, Tag.INTERIOR, Tag.ABOVE)
_BOUNDARY = (Tag.AT_LOWER, Tag.AT_UPPER, Tag.AT_BOTH)


class CombinatorialBlowup(RuntimeError):
    pass


class UnresolvedPattern(ValueError):
    pass


class NotInCommonCell(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class BoxSet:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float).reshape(-1)
        up = np.asarray(self.upper, dtype=float).reshape(-1)
        if lo.shape != up.shape:
            raise ValueError("lower and upper must have the same length")
        if np.any(lo > up) or np.any(lo == np.inf) or np.any(up == -np.inf):
            raise ValueError("invalid box bounds")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", up)

    @classmethod
    def nonnegative_orthant(cls, q: int) -> BoxSet:
        return cls(np.zeros(q), np.full(q, np.inf))

    @classmethod
    def unit_cube(cls, q: int) -> BoxSet:
        return cls(np.zeros(q), np.ones(q))

    @property
    def dim(self) -> int:
        return self.lower.size

    def __eq__(self, other):
        if not isinstance(other, BoxSet):
            return NotImplemented
        return np.array_equal(self.lower, other.lower) and np.array_equal(self.upper, other.upper)

    def contains(self, x, tol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))

    def permuted(self, perm) -> BoxSet:
        return BoxSet(self.lower[perm], self.upper[perm])


@dataclass(frozen=True)
class FacePattern:
    tags: tuple[Tag, ...]
    tol: float = 0.0

    @property
    def resolved(self) -> bool:
        return all(t in _RESOLVED for t in self.tags)

    @property
    def boundary_coords(self) -> list[int]:
        return [j for j, t in enumerate(self.tags) if t in _BOUNDARY]

    def __str__(self):
        short = {Tag.BELOW: "-", Tag.AT_LOWER: "l", Tag.INTERIOR: "o",
                 Tag.AT_UPPER: "u", Tag.AT_BOTH: "b", Tag.ABOVE: "+"}
        return "".join(short[t] for t in self.tags)


def default_tol(z) -> float:
    return 1e-8 * (1.0 + float(np.max(np.abs(z), initial=0.0)))


def project(S: BoxSet, z):
    return np.clip(np.asarray(z, dtype=float), S.lower, S.upper)


def classify(S: BoxSet, z, tol: float | None = None) -> FacePattern:
    z = np.asarray(z, dtype=float)
    if tol is None:
        tol = default_tol(z)
    tags = []
    for zj, lo, up in zip(z, S.lower, S.upper):
        at_lo = abs(zj - lo) <= tol
        at_up = abs(zj - up) <= tol
        if lo == up and (at_lo or at_up):
            tags.append(Tag.AT_BOTH)
        elif at_lo:
            tags.append(Tag.AT_LOWER)
        elif at_up:
            tags.append(Tag.AT_UPPER)
        elif zj < lo:
            tags.append(Tag.BELOW)
        elif zj > up:
            tags.append(Tag.ABOVE)
        else:
            tags.append(Tag.INTERIOR)
    return FacePattern(tuple(tags), tol)


def dpi_apply(S: BoxSet, z, h, tol: float | None = None):
    """Directional derivative of the box projector at ``z`` along ``h``."""
    pattern = classify(S, z, tol)
    h = np.asarray(h, dtype=float)
    out = np.empty_like(h)
    for j, t in enumerate(pattern.tags):
        if t is Tag.INTERIOR:
            out[j] = h[j]
        elif t is Tag.AT_LOWER:
            out[j] = max(h[j], 0.0)
        elif t is Tag.AT_UPPER:
            out[j] = min(h[j], 0.0)
        else:
            out[j] = 0.0
    return out


def _resolutions(tag: Tag) -> tuple[Tag, ...]:
    # middle piece first, so cells at a vertex of the orthant come out as
    # (+,+), (+,-), (-,+), (-,-)
    if tag is Tag.AT_LOWER:
        return (Tag.INTERIOR, Tag.BELOW)
    if tag is Tag.AT_UPPER:
        return (Tag.INTERIOR, Tag.ABOVE)
    if tag is Tag.AT_BOTH:
        # the middle piece of a degenerate interval is not full-dimensional
        return (Tag.BELOW, Tag.ABOVE)
    return (tag,)


def resolve_middle(pattern: FacePattern) -> FacePattern:
    """Commit every boundary tag to the middle piece (AT_BOTH goes below)."""
    tags = []
    for t in pattern.tags:
        if t in (Tag.AT_LOWER, Tag.AT_UPPER):
            tags.append(Tag.INTERIOR)
        elif t is Tag.AT_BOTH:
            tags.append(Tag.BELOW)
        else:
            tags.append(t)
    return FacePattern(tuple(tags), pattern.tol)


def cells_at(S: BoxSet, z, tol: float | None = None, cap: int = DEFAULT_CELL_CAP) -> list[FacePattern]:
    """All full-dimensional cells containing ``z``, as resolved patterns."""
    pattern = classify(S, z, tol)
    count = 2 ** len(pattern.boundary_coords)
    if count > cap:
        raise CombinatorialBlowup(f"{count} cells at z exceed the cap {cap}")
    choices = [_resolutions(t) for t in pattern.tags]
    return [FacePattern(tags, pattern.tol) for tags in itertools.product(*choices)]


def selection_matrix(pattern: FacePattern):
    if not pattern.resolved:
        raise UnresolvedPattern(f"pattern {pattern} has boundary tags")
    return np.diag([1.0 if t is Tag.INTERIOR else 0.0 for t in pattern.tags])


def cell_bounds(S: BoxSet, cell: FacePattern):
    """Per-coordinate ``(lo, hi)`` of the cell as arrays."""
    if not cell.resolved:
        raise UnresolvedPattern(f"pattern {cell} has boundary tags")
    lo = np.empty(S.dim)
    hi = np.empty(S.dim)
    for j, t in enumerate(cell.tags):
        if t is Tag.BELOW:
            lo[j], hi[j] = -np.inf, S.lower[j]
        elif t is Tag.ABOVE:
            lo[j], hi[j] = S.upper[j], np.inf
        else:
            lo[j], hi[j] = S.lower[j], S.upper[j]
    return lo, hi


def cone_signs(S: BoxSet, z, cell: FacePattern, tol: float | None = None):
    """Tangent cone of ``cell`` at ``z`` as a sign vector.

    Entry +1 means ``h_j >= 0``, -1 means ``h_j <= 0``, 0 means free.
    """
    z = np.asarray(z, dtype=float)
    if tol is None:
        tol = default_tol(z)
    lo, hi = cell_bounds(S, cell)
    signs = np.zeros(S.dim, dtype=int)
    signs[np.abs(z - lo) <= tol] = 1
    signs[np.abs(z - hi) <= tol] = -1
    return signs


def in_cell(S: BoxSet, cell: FacePattern, z, tol: float = 0.0) -> bool:
    lo, hi = cell_bounds(S, cell)
    z = np.asarray(z, dtype=float)
    return bool(np.all(z >= lo - tol) and np.all(z <= hi + tol))


def common_cells(S: BoxSet, x, y, tol: float | None = None) -> list[FacePattern]:
    cx = cells_at(S, x, tol)
    cy = {c.tags for c in cells_at(S, y, tol)}
    return [c for c in cx if c.tags in cy]


def dpi_symmetry_check(S: BoxSet, x, y, tol: float | None = None, atol: float = 1e-12) -> bool:
    """Check ``dPi(x)(y - x) == -dPi(y)(x - y)`` for points sharing a cell."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if not common_cells(S, x, y, tol):
        raise NotInCommonCell("x and y do not lie in a common cell")
    lhs = dpi_apply(S, x, y - x, tol)
    rhs = -dpi_apply(S, y, x - y, tol)
    return bool(np.allclose(lhs, rhs, rtol=0.0, atol=atol * (1.0 + np.abs(y - x).max())))
