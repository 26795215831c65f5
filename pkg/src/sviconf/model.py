"""Affine scenario models ``F(x, xi) = Lambda(xi) x + b(xi)`` with uniform entries.

A model draws :class:`ScenarioBatch` objects; a batch averages into an
:class:`SaaMap`, and the model's expectation is itself an ``SaaMap`` with
no batch attached.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .numerics import RngStream


class TooFewScenarios(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class AffineScenarioModel:
    """Independent uniform entries: ``Lambda_ij ~ U[lam_lo_ij, lam_hi_ij]``, ``b_i ~ U[b_lo_i, b_hi_i]``."""

    lam_lo: np.ndarray
    lam_hi: np.ndarray
    b_lo: np.ndarray
    b_hi: np.ndarray

    def __post_init__(self):
        for name in ("lam_lo", "lam_hi", "b_lo", "b_hi"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        q = self.b_lo.size
        if self.lam_lo.shape != (q, q) or self.lam_hi.shape != (q, q) or self.b_hi.shape != (q,):
            raise ValueError("inconsistent model dimensions")
        if np.any(self.lam_lo > self.lam_hi) or np.any(self.b_lo > self.b_hi):
            raise ValueError("uniform ranges need lo <= hi")

    @property
    def q(self) -> int:
        return self.b_lo.size

    def mean_jacobian(self):
        return 0.5 * (self.lam_lo + self.lam_hi)

    def mean_offset(self):
        return 0.5 * (self.b_lo + self.b_hi)

    def covariance_at(self, x):
        """Exact covariance of ``F(x, xi)``; diagonal since all entries are independent."""
        x = np.asarray(x, dtype=float)
        var_lam = (self.lam_hi - self.lam_lo) ** 2 / 12.0
        var_b = (self.b_hi - self.b_lo) ** 2 / 12.0
        return np.diag(var_lam @ (x * x) + var_b)


def two_dim_example() -> AffineScenarioModel:
    """2x2 model with ``E[Lambda] = [[1, .5], [1, 2]]`` and ``b ~ U[-1, 1]^2``."""
    return AffineScenarioModel(
        lam_lo=np.zeros((2, 2)),
        lam_hi=np.array([[2.0, 1.0], [2.0, 4.0]]),
        b_lo=-np.ones(2),
        b_hi=np.ones(2),
    )


def ten_dim_example(variant: int = 1) -> AffineScenarioModel:
    """10x10 model: diagonal U[0,4], upper U[0,3], lower U[0,2].

    ``variant`` picks the offset law: 1 is U[-1,1] throughout, 2 uses
    U[-1,0.8] for the first five components, 3 uses U[-1,0.8] for all.
    """
    q = 10
    hi = np.full((q, q), 2.0)
    hi[np.triu_indices(q, 1)] = 3.0
    np.fill_diagonal(hi, 4.0)
    b_hi = np.ones(q)
    if variant == 2:
        b_hi[:5] = 0.8
    elif variant == 3:
        b_hi[:] = 0.8
    elif variant != 1:
        raise ValueError(f"unknown variant {variant}")
    return AffineScenarioModel(np.zeros((q, q)), hi, -np.ones(q), b_hi)


@dataclass(frozen=True, eq=False)
class ScenarioBatch:
    lams: np.ndarray  # (n, q, q)
    bs: np.ndarray  # (n, q)
    stream: RngStream | None = None

    @property
    def n(self) -> int:
        return self.bs.shape[0]

    def values_at(self, x):
        """Realized ``F(x, xi^i)`` as an ``(n, q)`` array."""
        return self.lams @ np.asarray(x, dtype=float) + self.bs


@dataclass(frozen=True, eq=False)
class SaaMap:
    """Affine map ``x -> jacobian @ x + offset``."""

    jacobian: np.ndarray
    offset: np.ndarray
    batch: ScenarioBatch | None = field(default=None, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "jacobian", np.asarray(self.jacobian, dtype=float))
        object.__setattr__(self, "offset", np.asarray(self.offset, dtype=float))

    @property
    def q(self) -> int:
        return self.offset.size

    def __call__(self, x):
        return self.jacobian @ np.asarray(x, dtype=float) + self.offset


@dataclass(frozen=True, eq=False)
class CovarianceEstimate:
    matrix: np.ndarray
    n: int


def sample_batch(model: AffineScenarioModel, n: int, stream: RngStream) -> ScenarioBatch:
    if n < 1:
        raise ValueError("need at least one scenario")
    q = model.q
    u = stream.generator().random((n, q * q + q))
    lams = model.lam_lo + (model.lam_hi - model.lam_lo) * u[:, : q * q].reshape(n, q, q)
    bs = model.b_lo + (model.b_hi - model.b_lo) * u[:, q * q:]
    return ScenarioBatch(lams, bs, stream)


def true_map(model: AffineScenarioModel) -> SaaMap:
    return SaaMap(model.mean_jacobian(), model.mean_offset())


def assemble(batch: ScenarioBatch) -> SaaMap:
    return SaaMap(batch.lams.mean(axis=0), batch.bs.mean(axis=0), batch)


def sample_covariance(batch: ScenarioBatch, x) -> CovarianceEstimate:
    if batch.n < 2:
        raise TooFewScenarios(f"sample covariance needs n >= 2, got {batch.n}")
    F = batch.values_at(x)
    dev = F - F.mean(axis=0)
    cov = dev.T @ dev / (batch.n - 1)
    return CovarianceEstimate(0.5 * (cov + cov.T), batch.n)
