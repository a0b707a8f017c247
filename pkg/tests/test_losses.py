import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from equivar import (
    ParameterPoint,
    ZeroVariance,
    induce_decision_beta,
    induce_decision_cov,
    induce_param,
    loss_beta,
    loss_lik,
    loss_quad,
)
from equivar.checks import random_theta, random_transform, rel_gap


class TestBetaLoss:
    def test_zero_at_truth(self, design31, rng):
        theta = random_theta(rng, 2)
        assert loss_beta(design31, theta.beta, theta) == 0.0

    def test_scalar_quadratic(self):
        from equivar import Design

        d = Design(xp=[[1.0]], reps=(2,))
        theta = ParameterPoint(beta=[1.0], sigma2=[1.0])
        assert loss_beta(d, [3.0], theta) == 4.0

    def test_positive_away_from_truth(self, design31, rng):
        theta = random_theta(rng, 2)
        d_vec = theta.beta + rng.normal(size=2) * 0.1 + 0.01
        assert loss_beta(design31, d_vec, theta) > 0.0

    def test_invariance(self, design31, rng):
        for _ in range(200):
            g = random_transform(rng, 2)
            theta = random_theta(rng, 2)
            d_vec = theta.beta + rng.normal(size=2)
            before = loss_beta(design31, d_vec, theta)
            after = loss_beta(
                design31,
                induce_decision_beta(design31, g, d_vec),
                induce_param(design31, g, theta),
            )
            assert rel_gap(after, before) < 1e-10


class TestQuadLoss:
    def test_zero_at_truth(self):
        assert loss_quad([1.5, 2.5], [1.5, 2.5]) == 0.0

    def test_unit_offsets(self):
        assert loss_quad([2.0, 2.0], [1.0, 1.0]) == 2.0

    def test_direct_formula(self):
        assert loss_quad([2.0, 3.0], [1.0, 1.0]) == 5.0  # 1 + 4

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            loss_quad([1.0, 0.0], [1.0, 1.0])
        with pytest.raises(ValueError):
            loss_quad([1.0, 1.0], [1.0, -1.0])

    def test_not_symmetric(self):
        assert loss_quad([2.0], [1.0]) != loss_quad([1.0], [2.0])


class TestLikLoss:
    def test_zero_at_truth(self):
        assert loss_lik([0.3, 4.0], [0.3, 4.0]) == 0.0

    def test_overestimate(self):
        assert loss_lik([2.0], [1.0]) == pytest.approx(1.0 - math.log(2.0), rel=1e-12)

    def test_underestimate_asymmetry(self):
        assert loss_lik([0.5], [1.0]) == pytest.approx(math.log(2.0) - 0.5, rel=1e-12)
        assert loss_lik([0.5], [1.0]) != loss_lik([1.0], [0.5])

    def test_zero_variance_estimate(self):
        with pytest.raises(ZeroVariance):
            loss_lik([0.0, 1.0], [1.0, 1.0])

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            loss_lik([-1.0], [1.0])
        with pytest.raises(ValueError):
            loss_lik([1.0], [0.0])

    @settings(deadline=None)
    @given(r=st.floats(0.01, 100.0))
    def test_nonnegative_everywhere(self, r):
        assert loss_lik([r], [1.0]) >= 0.0

    def test_invariance_both_variance_losses(self, design31, rng):
        for _ in range(200):
            g = random_transform(rng, 2)
            theta = random_theta(rng, 2)
            d_var = theta.sigma2 * np.exp(rng.uniform(-1, 1, 2))
            moved_d = induce_decision_cov(g, d_var)
            moved_sigma = induce_param(design31, g, theta).sigma2
            assert rel_gap(loss_quad(moved_d, moved_sigma), loss_quad(d_var, theta.sigma2)) < 1e-10
            assert rel_gap(loss_lik(moved_d, moved_sigma), loss_lik(d_var, theta.sigma2)) < 1e-10


class TestShapeChecks:
    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            loss_quad([1.0, 2.0], [1.0])
        with pytest.raises(ValueError):
            loss_lik([1.0], [1.0, 2.0])

    def test_beta_shape_mismatch(self, design31, theta0):
        with pytest.raises(ValueError):
            loss_beta(design31, [1.0, 2.0, 3.0], theta0)
