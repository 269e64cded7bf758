"""Validated value types: simplex points, couplings, cost matrices, GMM parameters, datasets.

All types are frozen dataclasses holding read-only numpy arrays, and all of
them support ``np.asarray(obj)`` so numerical routines can take either the
validated type or a bare array.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (
    InvalidCoupling,
    InvalidDataset,
    NonFiniteCost,
    NonPositiveDefiniteCovariance,
    NotASimplexPoint,
    ShapeMismatch,
)

SIMPLEX_SUM_TOL = 1e-12
COUPLING_TOL = 1e-10
SYMMETRY_TOL = 1e-12
# negatives this close to zero are rounding noise and are clamped
CLAMP_TOL = 1e-12


def _frozen(x, dtype=float) -> np.ndarray:
    arr = np.array(x, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


def _clamp_small_negatives(x: np.ndarray, tol: float = CLAMP_TOL) -> np.ndarray:
    return np.where((x < 0) & (x >= -tol), 0.0, x)


@dataclass(frozen=True)
class ProbabilityVector:
    """A point of the probability simplex."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise NotASimplexPoint(f"expected a non-empty vector, got shape {w.shape}")
        if not np.all(np.isfinite(w)):
            raise NotASimplexPoint("non-finite entry")
        w = _clamp_small_negatives(w)
        if np.any(w < 0):
            raise NotASimplexPoint(f"negative entry {w.min():.3e}")
        total = w.sum()
        if abs(total - 1.0) > SIMPLEX_SUM_TOL:
            raise NotASimplexPoint(f"entries sum to {total!r}, not 1")
        object.__setattr__(self, "weights", _frozen(w))

    def __array__(self, dtype=None, copy=None):
        return self.weights if dtype is None else self.weights.astype(dtype)

    def __len__(self) -> int:
        return self.weights.size

    @classmethod
    def uniform(cls, m: int) -> "ProbabilityVector":
        return cls(np.full(m, 1.0 / m))


def validate_simplex(v, tol: float = COUPLING_TOL) -> ProbabilityVector:
    """Coerce ``v`` onto the simplex, tolerating violations up to ``tol``.

    Entries in ``[-tol, 0)`` are clamped to zero and the vector is
    renormalized. Anything further off raises :class:`NotASimplexPoint`.
    """
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise NotASimplexPoint(f"expected a non-empty vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise NotASimplexPoint("non-finite entry")
    if v.min() < -tol:
        raise NotASimplexPoint(f"entry {v.min():.3e} is negative beyond tolerance {tol:g}")
    if abs(v.sum() - 1.0) > tol:
        raise NotASimplexPoint(f"entries sum to {v.sum()!r}, off by more than {tol:g}")
    v = np.maximum(v, 0.0)
    return ProbabilityVector(v / v.sum())


@dataclass(frozen=True)
class Coupling:
    """Nonnegative ``n x K`` transport plan with a prescribed row marginal.

    With ``column_marginal`` set the plan is a member of the full coupling
    set; without it, only of the semi-relaxed set. ``column_tol`` is the
    per-entry tolerance on the column sums (solvers that only reach the
    column marginal approximately widen it).
    """

    plan: np.ndarray
    row_marginal: ProbabilityVector
    column_marginal: Optional[ProbabilityVector] = None
    column_tol: float = COUPLING_TOL

    def __post_init__(self):
        plan = np.asarray(self.plan, dtype=float)
        if plan.ndim != 2:
            raise ShapeMismatch(f"plan must be a matrix, got shape {plan.shape}")
        if not np.all(np.isfinite(plan)):
            raise InvalidCoupling("non-finite entry in plan")
        plan = _clamp_small_negatives(plan)
        if np.any(plan < 0):
            raise InvalidCoupling(f"negative entry {plan.min():.3e}")
        a = self.row_marginal
        if not isinstance(a, ProbabilityVector):
            a = ProbabilityVector(a)
        if len(a) != plan.shape[0]:
            raise ShapeMismatch(f"row marginal has length {len(a)}, plan has {plan.shape[0]} rows")
        if np.max(np.abs(plan.sum(axis=1) - a.weights)) > COUPLING_TOL:
            raise InvalidCoupling("row sums do not match the row marginal")
        b = self.column_marginal
        if b is not None:
            if not isinstance(b, ProbabilityVector):
                b = ProbabilityVector(b)
            if len(b) != plan.shape[1]:
                raise ShapeMismatch(
                    f"column marginal has length {len(b)}, plan has {plan.shape[1]} columns"
                )
            if np.max(np.abs(plan.sum(axis=0) - b.weights)) > self.column_tol:
                raise InvalidCoupling("column sums do not match the column marginal")
        if abs(plan.sum() - 1.0) > COUPLING_TOL:
            raise InvalidCoupling(f"total mass {plan.sum()!r} is not 1")
        object.__setattr__(self, "plan", _frozen(plan))
        object.__setattr__(self, "row_marginal", a)
        object.__setattr__(self, "column_marginal", b)

    def __array__(self, dtype=None, copy=None):
        return self.plan if dtype is None else self.plan.astype(dtype)

    @property
    def shape(self) -> tuple[int, int]:
        return self.plan.shape

    @classmethod
    def semi_relaxed(cls, plan) -> "Coupling":
        """Wrap ``plan`` as a member of the semi-relaxed set with uniform rows ``1/n``."""
        plan = np.asarray(plan, dtype=float)
        return cls(plan, ProbabilityVector.uniform(plan.shape[0]))


def row_marginal(P) -> ProbabilityVector:
    """Row sums ``P 1_K`` of a coupling."""
    return ProbabilityVector(np.asarray(P, dtype=float).sum(axis=1))


def column_marginal(P) -> ProbabilityVector:
    """Column sums ``P^T 1_n`` of a coupling."""
    return ProbabilityVector(np.asarray(P, dtype=float).sum(axis=0))


@dataclass(frozen=True)
class CostMatrix:
    """``n x K`` matrix of negative log-densities, in nats."""

    costs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.costs, dtype=float)
        if c.ndim != 2 or c.size == 0:
            raise ShapeMismatch(f"cost matrix must be a non-empty matrix, got shape {c.shape}")
        if not np.all(np.isfinite(c)):
            raise NonFiniteCost("cost matrix has non-finite entries")
        object.__setattr__(self, "costs", _frozen(c))

    def __array__(self, dtype=None, copy=None):
        return self.costs if dtype is None else self.costs.astype(dtype)

    @property
    def shape(self) -> tuple[int, int]:
        return self.costs.shape


def check_covariance(cov) -> np.ndarray:
    cov = np.asarray(cov, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise ShapeMismatch(f"covariance must be square, got shape {cov.shape}")
    if not np.all(np.isfinite(cov)):
        raise NonPositiveDefiniteCovariance("covariance has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(cov))))
    if np.max(np.abs(cov - cov.T)) > SYMMETRY_TOL * scale:
        raise NonPositiveDefiniteCovariance("covariance is not symmetric")
    if np.linalg.eigvalsh(cov).min() <= 0:
        raise NonPositiveDefiniteCovariance("covariance is not positive definite")
    return cov


@dataclass(frozen=True)
class GmmParams:
    """Shared-covariance Gaussian mixture: ``K`` means, one covariance, weights."""

    means: np.ndarray
    covariance: np.ndarray
    weights: ProbabilityVector

    def __post_init__(self):
        means = np.asarray(self.means, dtype=float)
        if means.ndim == 1:
            means = means[:, None]
        if means.ndim != 2 or means.shape[0] == 0:
            raise ShapeMismatch(f"means must be K x d, got shape {means.shape}")
        if not np.all(np.isfinite(means)):
            raise ValueError("means have non-finite entries")
        cov = np.atleast_2d(np.asarray(self.covariance, dtype=float))
        cov = check_covariance(cov)
        if cov.shape[0] != means.shape[1]:
            raise ShapeMismatch(
                f"covariance is {cov.shape[0]}x{cov.shape[0]} but means have dimension {means.shape[1]}"
            )
        w = self.weights
        if not isinstance(w, ProbabilityVector):
            w = ProbabilityVector(w)
        if len(w) != means.shape[0]:
            raise ShapeMismatch(f"{len(w)} weights for {means.shape[0]} components")
        object.__setattr__(self, "means", _frozen(means))
        object.__setattr__(self, "covariance", _frozen(cov))
        object.__setattr__(self, "weights", w)

    @property
    def n_components(self) -> int:
        return self.means.shape[0]

    @property
    def dimension(self) -> int:
        return self.means.shape[1]


@dataclass(frozen=True)
class Dataset:
    """``n`` points in ``R^d``, optionally with 1-based integer labels."""

    points: np.ndarray
    labels: Optional[np.ndarray] = None

    def __post_init__(self):
        x = np.asarray(self.points, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
            raise InvalidDataset(f"points must be a non-empty n x d array, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise InvalidDataset("points have non-finite entries")
        object.__setattr__(self, "points", _frozen(x))
        if self.labels is not None:
            raw = np.asarray(self.labels)
            if raw.shape != (x.shape[0],):
                raise InvalidDataset(f"expected {x.shape[0]} labels, got shape {raw.shape}")
            lab = raw.astype(np.int64)
            if not np.all(lab == raw):
                raise InvalidDataset("labels must be integers")
            if np.any(lab < 1):
                raise InvalidDataset("labels must lie in [1, K]")
            object.__setattr__(self, "labels", _frozen(lab, dtype=np.int64))

    def __array__(self, dtype=None, copy=None):
        return self.points if dtype is None else self.points.astype(dtype)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dimension(self) -> int:
        return self.points.shape[1]
