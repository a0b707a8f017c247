"""Invariant loss functions for the coefficient and variance targets.

All three losses are computed in the p-dimensional population
parameterization; nothing here materializes an n-by-n matrix.
"""

from __future__ import annotations

from enum import Enum

import numpy as np

from .model import Design, ParameterPoint


class LossKind(str, Enum):
    """Loss selector, by the names used in CLI configs."""

    BETA = "beta"
    QUAD = "quad"
    LIK = "lik"


class ZeroVariance(ValueError):
    """A variance estimate of exactly zero, for which the likelihood loss diverges."""


def _check_pair(d_var, sigma2) -> tuple[np.ndarray, np.ndarray]:
    d_var = np.asarray(d_var, dtype=float)
    sigma2 = np.asarray(sigma2, dtype=float)
    if d_var.ndim != 1 or d_var.shape != sigma2.shape:
        raise ValueError(
            f"variance decision and sigma2 must be vectors of equal length, "
            f"got shapes {d_var.shape} and {sigma2.shape}"
        )
    if not np.all(np.isfinite(sigma2)) or np.any(sigma2 <= 0):
        raise ValueError("sigma2 must be positive and finite")
    if not np.all(np.isfinite(d_var)) or np.any(d_var < 0):
        raise ValueError("variance decisions must be nonnegative and finite")
    return d_var, sigma2


def loss_beta(design: Design, d, theta: ParameterPoint) -> float:
    """Squared error of a coefficient decision in the precision metric.

    The residual d - beta is mapped through the population rows and weighted
    by the inverse variances, which is exactly what makes the value blind to
    blockwise rescaling and shifting.
    """
    d = np.asarray(d, dtype=float)
    if d.shape != theta.beta.shape:
        raise ValueError(f"decision shape {d.shape} does not match beta {theta.beta.shape}")
    u = design.xp @ (d - theta.beta)
    return float(np.sum(u * u / theta.sigma2))


def loss_quad(d_var, sigma2) -> float:
    """Quadratic variance loss: sum of (d_i/sigma_i^2 - 1)^2."""
    d_var, sigma2 = _check_pair(d_var, sigma2)
    if np.any(d_var == 0):
        raise ValueError("quadratic loss requires a positive variance decision")
    r = d_var / sigma2
    return float(np.sum((r - 1.0) ** 2))


def loss_lik(d_var, sigma2) -> float:
    """Likelihood (Stein-type) variance loss: sum of r_i - ln r_i - 1, r_i = d_i/sigma_i^2.

    Zero only when the decision matches sigma2 exactly, and asymmetric: it
    punishes underestimation harder than the same-factor overestimation.
    """
    d_var, sigma2 = _check_pair(d_var, sigma2)
    if np.any(d_var == 0):
        raise ZeroVariance("variance estimate is exactly zero; likelihood loss diverges")
    r = d_var / sigma2
    return float(np.sum(r - np.log(r) - 1.0))
