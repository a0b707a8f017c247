"""Equivariant estimators for the coefficients and the population variances.

Two families live here.  For the coefficients: least squares plus an optional
bounded correction driven by the maximal invariant, which sweeps out every
estimator commuting with the blockwise location-scale group.  For the
variances: positive weights applied to the per-population sample variances.
The sklearn-style classes at the bottom wrap the same formulas behind
fit/predict so they compose with pipelines, cloning and grid search.
"""

from __future__ import annotations

from typing import Callable

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .groups import MaximalInvariant, maximal_invariant
from .model import (
    Design,
    block_means,
    block_variances,
    check_response,
    design_from_matrix,
)


class WrongShape(ValueError):
    """The design does not have the single-sample-rows shape this operation needs."""


class NotEstimable(ValueError):
    """Some population has fewer than two observations, so its variance is undefined."""


def require_single_sample_rows(design: Design) -> None:
    """Reject designs whose first p-1 populations are not singletons.

    The coefficient characterization anchors its scale statistic in the last
    population and needs exactly one observation at each of the other rows.
    """
    if any(r != 1 for r in design.reps[:-1]):
        raise WrongShape(
            f"need replication counts (1, ..., 1, n-p+1), got {design.reps}"
        )


class OmegaSpec:
    """A bounded map from the maximal invariant to a coefficient correction.

    The bound is declared at construction and enforced on every evaluation;
    an unbounded correction would have infinite risk.
    """

    def __init__(self, fn: Callable[[MaximalInvariant], np.ndarray], bound: float,
                 constant: np.ndarray | None = None):
        self._fn = fn
        self.bound = float(bound)
        if self.bound < 0 or not np.isfinite(self.bound):
            raise ValueError("bound must be finite and nonnegative")
        self.constant = constant

    @classmethod
    def zero(cls, p: int) -> "OmegaSpec":
        w = np.zeros(p)
        w.flags.writeable = False
        return cls(lambda z: w, 0.0, constant=w)

    @classmethod
    def const(cls, w) -> "OmegaSpec":
        w = np.array(w, dtype=float)
        if w.ndim != 1 or not np.all(np.isfinite(w)):
            raise ValueError("constant correction must be a finite vector")
        w.flags.writeable = False
        return cls(lambda z: w, float(np.max(np.abs(w), initial=0.0)), constant=w)

    @classmethod
    def custom(cls, fn: Callable[[MaximalInvariant], np.ndarray], bound: float) -> "OmegaSpec":
        return cls(fn, bound)

    @property
    def is_zero(self) -> bool:
        return self.constant is not None and not np.any(self.constant)

    def __call__(self, z: MaximalInvariant | None) -> np.ndarray:
        if self.constant is not None:
            return self.constant
        out = np.asarray(self._fn(z), dtype=float)
        if not np.all(np.isfinite(out)) or np.any(np.abs(out) > self.bound):
            raise ValueError(
                f"correction output exceeds its declared bound {self.bound:g}"
            )
        return out


class CovWeights:
    """Positive weights for the sample variances, constant or invariant-driven."""

    def __init__(self, fn: Callable[[MaximalInvariant], np.ndarray],
                 constant: np.ndarray | None = None):
        self._fn = fn
        self.constant = constant

    @classmethod
    def const(cls, h) -> "CovWeights":
        h = np.array(h, dtype=float)
        if h.ndim != 1 or not np.all(np.isfinite(h)) or np.any(h <= 0):
            raise ValueError("constant weights must be a positive finite vector")
        h.flags.writeable = False
        return cls(lambda z: h, constant=h)

    @classmethod
    def custom(cls, fn: Callable[[MaximalInvariant], np.ndarray]) -> "CovWeights":
        return cls(fn)

    def __call__(self, z: MaximalInvariant | None) -> np.ndarray:
        if self.constant is not None:
            return self.constant
        out = np.asarray(self._fn(z), dtype=float)
        if not np.all(np.isfinite(out)) or np.any(out <= 0):
            raise ValueError("weight outputs must be positive and finite")
        return out


def ols_beta(design: Design, y) -> np.ndarray:
    """Least squares coefficients, computed as the rows solved against block means.

    Identical to the normal-equations solution: replication only reweights
    rows, and the reweighting cancels into the per-population means.
    """
    y = check_response(design, y)
    if y.ndim != 1:
        raise ValueError("ols_beta estimates from a single response vector")
    return np.linalg.solve(design.xp, block_means(design, y))


def s0_scale(design: Design, y) -> np.ndarray:
    """The anchored scale statistic: zeros except the last population's
    sample standard deviation.

    Returns the square root of the unbiased variance, not the variance: the
    correction term must pick up one factor of the block's scale under a
    transformation for the corrected estimator to stay equivariant, and a
    variance would pick up two.
    """
    require_single_sample_rows(design)
    y = check_response(design, y)
    if y.ndim != 1:
        raise ValueError("s0_scale reduces a single response vector")
    out = np.zeros(design.p)
    out[-1] = np.sqrt(block_variances(design, y)[-1])
    return out


def equivariant_beta(design: Design, y, omega: OmegaSpec) -> np.ndarray:
    """Least squares plus the bounded invariant-driven correction.

    With the zero correction this IS least squares, bit for bit.  A constant
    correction never evaluates the maximal invariant, so it tolerates
    degenerate blocks; an invariant-driven one propagates DegenerateBlock.
    """
    if not isinstance(omega, OmegaSpec):
        raise TypeError("omega must be an OmegaSpec")
    require_single_sample_rows(design)
    base = ols_beta(design, y)
    if omega.is_zero:
        return base
    z = None if omega.constant is not None else maximal_invariant(design, y)
    w = omega(z)
    if w.shape != (design.p,):
        raise ValueError(f"correction output has shape {w.shape}, expected ({design.p},)")
    return base + np.linalg.solve(design.xp, s0_scale(design, y) * w)


def shrinkage_weights(design: Design) -> np.ndarray:
    """Per-population (n_i - 1)/(n_i + 1): the quadratic-loss-optimal multipliers."""
    if any(r < 2 for r in design.reps):
        raise NotEstimable(
            f"every population needs at least two observations, got {design.reps}"
        )
    reps = np.asarray(design.reps, dtype=float)
    return (reps - 1.0) / (reps + 1.0)


def cov_estimate(design: Design, y, weights: CovWeights) -> np.ndarray:
    """Weighted sample variances, one per population.

    Unit weights give the likelihood-loss-optimal estimator; shrinkage_weights
    give the quadratic-loss-optimal one.
    """
    if not isinstance(weights, CovWeights):
        weights = CovWeights.const(weights)
    if any(r < 2 for r in design.reps):
        raise NotEstimable(
            f"every population needs at least two observations, got {design.reps}"
        )
    y = check_response(design, y)
    if y.ndim != 1:
        raise ValueError("cov_estimate estimates from a single response vector")
    z = None if weights.constant is not None else maximal_invariant(design, y)
    h = weights(z)
    if h.shape != (design.p,):
        raise ValueError(f"weights output has shape {h.shape}, expected ({design.p},)")
    return h * block_variances(design, y)


def resolve_omega(omega, p: int) -> OmegaSpec:
    """Coerce None (least squares), an array, or an OmegaSpec to an OmegaSpec."""
    if omega is None:
        return OmegaSpec.zero(p)
    if isinstance(omega, OmegaSpec):
        return omega
    return OmegaSpec.const(omega)


def resolve_weights(weights, design: Design) -> CovWeights:
    """Coerce the weights parameter accepted by BlockVarianceEstimator."""
    if isinstance(weights, CovWeights):
        return weights
    if isinstance(weights, str):
        if weights == "shrinkage":
            return CovWeights.const(shrinkage_weights(design))
        if weights == "unit":
            return CovWeights.const(np.ones(design.p))
        raise ValueError(f"unknown weights name {weights!r}; use 'shrinkage' or 'unit'")
    if callable(weights):
        return CovWeights.custom(weights)
    return CovWeights.const(weights)


def _design_and_response(X, y) -> tuple[Design, np.ndarray]:
    if isinstance(X, Design):
        design = X
        y = np.asarray(y, dtype=float).ravel()
    else:
        X = check_array(X, ensure_min_samples=2)
        y = check_array(y, ensure_2d=False).ravel()
        if y.shape[0] != X.shape[0]:
            raise ValueError(
                f"X and y have inconsistent lengths: {X.shape[0]} and {y.shape[0]}"
            )
        design = design_from_matrix(X)
    return design, check_response(design, y)


class EquivariantRegressor(RegressorMixin, BaseEstimator):
    """Coefficient estimator for replicated fixed designs.

    With ``omega=None`` this is least squares, which is the minimum-risk
    member of the equivariant family.  A nonzero ``omega`` adds the bounded
    correction and exists mainly to demonstrate that it only ever increases
    the risk.

    Parameters
    ----------
    omega : None, array-like or OmegaSpec, default=None
        None for least squares; an array for a constant correction; an
        OmegaSpec for an invariant-driven one.

    Attributes
    ----------
    coef_ : ndarray of shape (p,)
        Estimated coefficients.
    design_ : Design
        The replicated design recovered from (or passed as) X.
    """

    def __init__(self, omega=None):
        self.omega = omega

    def fit(self, X, y):
        design, yv = _design_and_response(X, y)
        spec = resolve_omega(self.omega, design.p)
        # Least squares works on any design; the corrected family needs the
        # single-sample-rows shape that anchors its scale statistic.
        if spec.is_zero:
            self.coef_ = ols_beta(design, yv)
        else:
            self.coef_ = equivariant_beta(design, yv, spec)
        self.design_ = design
        self.n_features_in_ = design.p
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        if isinstance(X, Design):
            X = X.matrix()
        X = check_array(X)
        return X @ self.coef_


class BlockVarianceEstimator(BaseEstimator):
    """Per-population variance estimator: weights times sample variances.

    Parameters
    ----------
    weights : {"shrinkage", "unit"}, array-like, callable or CovWeights, \
            default="shrinkage"
        "shrinkage" applies (n_i - 1)/(n_i + 1), the quadratic-loss-optimal
        choice; "unit" leaves the sample variances alone, the
        likelihood-loss-optimal choice.

    Attributes
    ----------
    variances_ : ndarray of shape (p,)
        Estimated per-population variances.
    design_ : Design
        The replicated design recovered from (or passed as) X.
    """

    def __init__(self, weights="shrinkage"):
        self.weights = weights

    def fit(self, X, y):
        design, yv = _design_and_response(X, y)
        self.variances_ = cov_estimate(design, yv, resolve_weights(self.weights, design))
        self.design_ = design
        self.n_features_in_ = design.p
        return self


def estimator_from_spec(spec: str):
    """Parse a CLI estimator string into an estimator instance.

    Accepted forms: "ols", "equivariant:omega=<v1,v2,...>", "cov:W",
    "cov:I", "cov:h=<v1,v2,...>".
    """
    spec = spec.strip()
    if spec == "ols":
        return EquivariantRegressor()
    if spec.startswith("equivariant:omega="):
        values = _parse_vector(spec.removeprefix("equivariant:omega="))
        return EquivariantRegressor(omega=values)
    if spec == "cov:W":
        return BlockVarianceEstimator(weights="shrinkage")
    if spec == "cov:I":
        return BlockVarianceEstimator(weights="unit")
    if spec.startswith("cov:h="):
        return BlockVarianceEstimator(weights=_parse_vector(spec.removeprefix("cov:h=")))
    raise ValueError(
        f"unknown estimator spec {spec!r}; expected 'ols', 'equivariant:omega=...', "
        "'cov:W', 'cov:I' or 'cov:h=...'"
    )


def _parse_vector(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(part) for part in text.split(","))
    except ValueError as exc:
        raise ValueError(f"cannot parse vector from {text!r}") from exc
