"""Seeded Monte Carlo risk evaluation with analytic oracles.

Determinism contract: every per-replicate quantity is a pure function of
(seed, replicate index), replicate work avoids BLAS reductions whose result
could depend on batch shape, and final aggregation uses math.fsum (exactly
rounded, hence order independent).  Changing the chunk size or the worker
count therefore cannot change any reported number.

Because sampling is location-scale (y = mean + sd * z with z depending only
on the seed and draw index), evaluating mc_risk at two parameter points with
one seed reuses the same z, which is exactly the group transport of draws
from one point to the other.  That is what orbit_constancy_check relies on.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import digamma
from sklearn.base import clone

from .estimators import (
    BlockVarianceEstimator,
    EquivariantRegressor,
    estimator_from_spec,
    require_single_sample_rows,
    resolve_omega,
    resolve_weights,
)
from .groups import (
    DegenerateBlock,
    SampleTransform,
    apply_sample,
    induce_decision_beta,
    induce_decision_cov,
    maximal_invariant,
)
from .losses import LossKind
from .model import (
    Design,
    ParameterPoint,
    block_means,
    block_variances,
    draw_responses,
)

_CHUNK = 8192


class IncompatiblePair(ValueError):
    """Estimator and loss talk about different targets."""


@dataclass(frozen=True)
class RiskEstimate:
    """Monte Carlo mean loss with its standard error.

    ``failures`` counts replicates whose loss was undefined (degenerate
    sample); they are excluded from the mean.
    """

    mean_loss: float
    std_error: float
    replicates: int
    seed: int
    failures: int = 0


@dataclass(frozen=True, eq=False)
class SweepResult:
    """Risk curve over a grid of constant variance weights."""

    h_grid: np.ndarray
    estimates: tuple[RiskEstimate, ...]
    population_mean: np.ndarray
    population_se: np.ndarray
    argmin_index: tuple[int, ...]
    replicates: int
    seed: int

    def argmin_h(self) -> np.ndarray:
        return self.h_grid[list(self.argmin_index)]


@dataclass(frozen=True, eq=False)
class OrbitConstancyReport:
    """Risks of one estimator across parameter points of the single orbit."""

    estimates: tuple[RiskEstimate, ...]
    max_sigma: float
    passed: bool


@dataclass(frozen=True)
class EquivarianceReport:
    """Worst relative commutation error over random transform/sample pairs."""

    max_deviation: float
    pairs: int
    resampled: int
    passed: bool

    tolerance: float = 1e-10


def _fsum(values: np.ndarray) -> float:
    return math.fsum(values.tolist())


def _mean_and_se(losses: np.ndarray, replicates: int, seed: int) -> RiskEstimate:
    finite = np.isfinite(losses)
    failures = int(losses.size - np.count_nonzero(finite))
    vals = losses[finite]
    if vals.size < 2:
        raise ArithmeticError(
            f"only {vals.size} of {losses.size} replicates produced a finite loss"
        )
    mean = _fsum(vals) / vals.size
    var = _fsum((vals - mean) ** 2) / (vals.size - 1)
    return RiskEstimate(
        mean_loss=mean,
        std_error=math.sqrt(var / vals.size),
        replicates=replicates,
        seed=seed,
        failures=failures,
    )


def _matvec_rows(M: np.ndarray, V: np.ndarray) -> np.ndarray:
    """Rows of the result are M applied to rows of V.

    Fixed-order column accumulation keeps each output row bit-identical no
    matter how many rows are processed together.
    """
    out = np.zeros((V.shape[0], M.shape[0]))
    for k in range(M.shape[1]):
        out += V[:, k, None] * M[:, k][None, :]
    return out


def _is_beta_estimator(estimator) -> bool:
    return isinstance(estimator, EquivariantRegressor)


def _is_cov_estimator(estimator) -> bool:
    return isinstance(estimator, BlockVarianceEstimator)


def _check_compatible(estimator, loss: LossKind) -> None:
    if _is_beta_estimator(estimator):
        if loss is not LossKind.BETA:
            raise IncompatiblePair(
                f"coefficient estimators pair with the 'beta' loss, not {loss.value!r}"
            )
    elif _is_cov_estimator(estimator):
        if loss not in (LossKind.QUAD, LossKind.LIK):
            raise IncompatiblePair(
                f"variance estimators pair with 'quad' or 'lik', not {loss.value!r}"
            )
    else:
        raise TypeError(
            f"unsupported estimator type {type(estimator).__name__}; "
            "use EquivariantRegressor or BlockVarianceEstimator"
        )


def _batch_beta_estimates(design: Design, estimator, Y: np.ndarray) -> np.ndarray:
    xp_inv = np.linalg.inv(design.xp)
    base = _matvec_rows(xp_inv, block_means(design, Y))
    spec = resolve_omega(estimator.omega, design.p)
    if spec.is_zero:
        return base
    require_single_sample_rows(design)
    s0 = np.sqrt(block_variances(design, Y)[:, -1])
    direction = xp_inv[:, -1]
    if spec.constant is not None:
        # The scale statistic is zero outside the last population, so only
        # the correction's last component ever enters.
        return base + (spec.constant[-1] * s0)[:, None] * direction[None, :]
    out = base.copy()
    for i in range(Y.shape[0]):
        try:
            w_last = spec(maximal_invariant(design, Y[i]))[-1]
        except DegenerateBlock:
            out[i] = np.nan
            continue
        out[i] = base[i] + s0[i] * w_last * direction
    return out


def _batch_cov_estimates(design: Design, estimator, Y: np.ndarray) -> np.ndarray:
    weights = resolve_weights(estimator.weights, design)
    s2 = block_variances(design, Y)
    if weights.constant is not None:
        return s2 * weights.constant[None, :]
    out = np.empty_like(s2)
    for i in range(Y.shape[0]):
        try:
            out[i] = weights(maximal_invariant(design, Y[i])) * s2[i]
        except DegenerateBlock:
            out[i] = np.nan
    return out


def _batch_losses(
    loss: LossKind, design: Design, estimates: np.ndarray, theta: ParameterPoint
) -> np.ndarray:
    count = estimates.shape[0]
    total = np.zeros(count)
    if loss is LossKind.BETA:
        u = _matvec_rows(design.xp, estimates - theta.beta[None, :])
        for j in range(design.p):
            total += u[:, j] * u[:, j] / theta.sigma2[j]
        return total
    with np.errstate(divide="ignore", invalid="ignore"):
        r = estimates / theta.sigma2[None, :]
        r = np.where(r > 0, r, np.nan)
        if loss is LossKind.QUAD:
            per_pop = (r - 1.0) ** 2
        else:
            per_pop = r - np.log(r) - 1.0
    for j in range(design.p):
        total += per_pop[:, j]
    return total


def _run_chunked(replicates: int, workers: int, work) -> None:
    spans = [(a, min(a + _CHUNK, replicates)) for a in range(0, replicates, _CHUNK)]
    if workers <= 1 or len(spans) == 1:
        for a, b in spans:
            work(a, b)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for future in [pool.submit(work, a, b) for a, b in spans]:
            future.result()


def mc_risk(
    design: Design,
    estimator,
    loss,
    theta: ParameterPoint,
    replicates: int,
    seed: int,
    workers: int = 1,
) -> RiskEstimate:
    """Mean loss of the estimator over seeded model draws, with standard error.

    A pure function of its arguments: replicate i's draw comes from the
    (seed, i) substream, and aggregation is order independent.
    """
    loss = LossKind(loss)
    _check_compatible(estimator, loss)
    replicates = int(replicates)
    if replicates < 2:
        raise ValueError("need at least two replicates")
    losses = np.empty(replicates)

    def work(a: int, b: int) -> None:
        Y = draw_responses(design, theta, seed, b - a, first=a)
        if _is_beta_estimator(estimator):
            est = _batch_beta_estimates(design, estimator, Y)
        else:
            est = _batch_cov_estimates(design, estimator, Y)
        losses[a:b] = _batch_losses(loss, design, est, theta)

    _run_chunked(replicates, workers, work)
    return _mean_and_se(losses, replicates, int(seed))


def analytic_risk_beta(design: Design) -> float:
    """Constant risk of least squares under the coefficient loss.

    (p - 1) singleton populations contribute unit variance each; the last
    block's mean contributes the reciprocal of its size.  Constant on the
    whole parameter space because the space is one orbit.
    """
    require_single_sample_rows(design)
    return (design.p - 1) + 1.0 / design.reps[-1]


def analytic_risk_quad(h: float, nu: int) -> float:
    """Per-population quadratic risk of weight h with nu degrees of freedom.

    Uses E s^2 = 1 and E s^4 = (nu+2)/nu for s^2 ~ chi2_nu/nu; minimized at
    h = nu/(nu+2) = (n_i-1)/(n_i+1) with minimum 2/(nu+2).
    """
    nu = int(nu)
    if nu < 1:
        raise ValueError("degrees of freedom must be at least 1")
    h = float(h)
    if h < 0 or not math.isfinite(h):
        raise ValueError("weight must be nonnegative and finite")
    return h * h * (nu + 2) / nu - 2.0 * h + 1.0


def analytic_risk_lik(nu: int) -> float:
    """Per-population minimum likelihood-loss risk: ln nu - ln 2 - digamma(nu/2).

    This is -E ln s^2 for s^2 ~ chi2_nu/nu, reached by leaving the sample
    variance unweighted.
    """
    nu = int(nu)
    if nu < 1:
        raise ValueError("degrees of freedom must be at least 1")
    return math.log(nu) - math.log(2.0) - float(digamma(nu / 2.0))


def analytic_risk_lik_at(h: float, nu: int) -> float:
    """Per-population likelihood risk of constant weight h (h=1 is optimal)."""
    h = float(h)
    if h <= 0 or not math.isfinite(h):
        raise ValueError("weight must be positive and finite")
    return (h - math.log(h) - 1.0) + analytic_risk_lik(nu)


def dominance_sweep(
    design: Design,
    loss,
    h_grid,
    theta: ParameterPoint,
    replicates: int,
    seed: int,
    workers: int = 1,
) -> SweepResult:
    """Risk of h * (sample variances) over a weight grid, shared draws per point.

    All grid points reuse the same replicate draws (common random numbers),
    so the location of the per-population argmin is far more stable than the
    pointwise standard errors suggest.
    """
    loss = LossKind(loss)
    if loss is LossKind.BETA:
        raise IncompatiblePair("weight sweeps apply to variance estimators")
    if any(r < 2 for r in design.reps):
        raise ValueError(f"every population needs at least two observations, got {design.reps}")
    h_grid = np.asarray(h_grid, dtype=float)
    if h_grid.ndim != 1 or h_grid.size < 1:
        raise ValueError("h_grid must be a nonempty vector")
    if np.any(h_grid <= 0) or not np.all(np.isfinite(h_grid)):
        raise ValueError("h_grid must be positive and finite")
    if np.any(np.diff(h_grid) <= 0):
        raise ValueError("h_grid must be strictly increasing")
    replicates = int(replicates)
    if replicates < 2:
        raise ValueError("need at least two replicates")

    s2 = np.empty((replicates, design.p))

    def work(a: int, b: int) -> None:
        Y = draw_responses(design, theta, seed, b - a, first=a)
        s2[a:b] = block_variances(design, Y)

    _run_chunked(replicates, workers, work)

    m = h_grid.size
    estimates: list[RiskEstimate] = []
    pop_mean = np.empty((m, design.p))
    pop_se = np.empty((m, design.p))
    for k, h in enumerate(h_grid):
        with np.errstate(divide="ignore", invalid="ignore"):
            r = (h * s2) / theta.sigma2[None, :]
            r = np.where(r > 0, r, np.nan)
            if loss is LossKind.QUAD:
                per_pop = (r - 1.0) ** 2
            else:
                per_pop = r - np.log(r) - 1.0
        total = np.zeros(replicates)
        for j in range(design.p):
            col = per_pop[:, j]
            total += col
            finite = col[np.isfinite(col)]
            if finite.size < 2:
                raise ArithmeticError(
                    f"population {j + 1} produced {finite.size} finite losses at h={h!r}"
                )
            mean_j = _fsum(finite) / finite.size
            var_j = _fsum((finite - mean_j) ** 2) / (finite.size - 1)
            pop_mean[k, j] = mean_j
            pop_se[k, j] = math.sqrt(var_j / finite.size)
        estimates.append(_mean_and_se(total, replicates, int(seed)))

    argmin = tuple(int(np.argmin(pop_mean[:, j])) for j in range(design.p))
    h_grid = h_grid.copy()
    h_grid.flags.writeable = False
    pop_mean.flags.writeable = False
    pop_se.flags.writeable = False
    return SweepResult(
        h_grid=h_grid,
        estimates=tuple(estimates),
        population_mean=pop_mean,
        population_se=pop_se,
        argmin_index=argmin,
        replicates=replicates,
        seed=int(seed),
    )


def orbit_constancy_check(
    design: Design,
    estimator,
    loss,
    thetas,
    replicates: int,
    seed: int,
    workers: int = 1,
    band: float = 4.0,
) -> OrbitConstancyReport:
    """Estimate the risk at every parameter point and compare all pairs.

    One seed is reused across points, which transports the same underlying
    draws through the group; for an equivariant estimator under an invariant
    loss the per-replicate losses then agree up to rounding, making the
    constancy of the risk visible directly.
    """
    thetas = list(thetas)
    if not thetas:
        raise ValueError("need at least one parameter point")
    estimates = tuple(
        mc_risk(design, estimator, loss, theta, replicates, seed, workers=workers)
        for theta in thetas
    )
    max_sigma = 0.0
    for i in range(len(estimates)):
        for j in range(i + 1, len(estimates)):
            a, b = estimates[i], estimates[j]
            gap = abs(a.mean_loss - b.mean_loss)
            scale = math.hypot(a.std_error, b.std_error)
            if scale == 0.0:
                if gap > 0.0:
                    max_sigma = math.inf
                continue
            max_sigma = max(max_sigma, gap / scale)
    return OrbitConstancyReport(
        estimates=estimates, max_sigma=max_sigma, passed=max_sigma <= band
    )


def _point_estimate(design: Design, estimator, y) -> np.ndarray:
    fitted = clone(estimator).fit(design, y)
    if _is_beta_estimator(estimator):
        return fitted.coef_
    return fitted.variances_


def equivariance_check(
    design: Design,
    estimator,
    transform_count: int = 1000,
    sample_count: int = 1,
    seed: int = 0,
) -> EquivarianceReport:
    """Worst relative gap between estimate-then-transform and transform-then-estimate.

    Evaluates transform_count * sample_count random pairs at the reference
    parameter point.  Degenerate samples are resampled a bounded number of
    times and counted.
    """
    if isinstance(estimator, str):
        estimator = estimator_from_spec(estimator)
    _check_compatible(
        estimator, LossKind.BETA if _is_beta_estimator(estimator) else LossKind.QUAD
    )
    rng = np.random.default_rng(seed)
    worst = 0.0
    resampled = 0
    pairs = 0
    for _ in range(int(transform_count)):
        g = SampleTransform(
            c=np.exp(rng.uniform(-1.2, 1.2, design.p)),
            a=rng.normal(0.0, 2.0, design.p),
        )
        for _ in range(int(sample_count)):
            for attempt in range(8):
                y = rng.normal(0.0, 1.0, design.n)
                try:
                    d_direct = _point_estimate(design, estimator, apply_sample(design, g, y))
                    d_base = _point_estimate(design, estimator, y)
                    break
                except DegenerateBlock:
                    resampled += 1
            else:
                raise DegenerateBlock("eight consecutive degenerate samples")
            if _is_beta_estimator(estimator):
                d_induced = induce_decision_beta(design, g, d_base)
            else:
                d_induced = induce_decision_cov(g, d_base)
            gap = np.max(np.abs(d_direct - d_induced))
            scale = max(1.0, float(np.max(np.abs(d_induced))))
            worst = max(worst, float(gap) / scale)
            pairs += 1
    return EquivarianceReport(
        max_deviation=worst, pairs=pairs, resampled=resampled, passed=worst <= 1e-10
    )
