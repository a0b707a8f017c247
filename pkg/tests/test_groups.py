import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from equivar import (
    DegenerateBlock,
    Design,
    ParameterPoint,
    SampleTransform,
    apply_sample,
    compose,
    draw_responses,
    induce_decision_beta,
    induce_decision_cov,
    induce_param,
    inverse,
    maximal_invariant,
    transport,
)
from equivar.checks import random_theta, random_transform, rel_gap


def transforms(p=2):
    return st.builds(
        lambda c, a: SampleTransform(c=c, a=a),
        st.lists(st.floats(0.05, 20.0), min_size=p, max_size=p),
        st.lists(st.floats(-50.0, 50.0), min_size=p, max_size=p),
    )


class TestSampleTransform:
    def test_requires_positive_scales(self):
        with pytest.raises(ValueError):
            SampleTransform(c=[1.0, 0.0], a=[0.0, 0.0])
        with pytest.raises(ValueError):
            SampleTransform(c=[1.0, -2.0], a=[0.0, 0.0])

    def test_identity(self):
        e = SampleTransform.identity(3)
        assert np.array_equal(e.c, np.ones(3))
        assert np.array_equal(e.a, np.zeros(3))

    def test_json_round_trip(self):
        g = SampleTransform(c=[2.0, 0.5], a=[1.0, -3.0])
        again = SampleTransform.from_json(g.to_json())
        assert np.array_equal(again.c, g.c)
        assert np.array_equal(again.a, g.a)


class TestCompose:
    def test_scalar_example(self):
        g1 = SampleTransform(c=[2.0], a=[1.0])
        g2 = SampleTransform(c=[3.0], a=[4.0])
        g21 = compose(g2, g1)
        assert np.array_equal(g21.c, [6.0])
        assert np.array_equal(g21.a, [7.0])

    def test_matches_sequential_application(self, design31, rng):
        # oracle: composing must equal applying one after the other
        for _ in range(50):
            g1 = random_transform(rng, 2)
            g2 = random_transform(rng, 2)
            y = rng.normal(size=design31.n)
            assert rel_gap(
                apply_sample(design31, compose(g2, g1), y),
                apply_sample(design31, g2, apply_sample(design31, g1, y)),
            ) < 1e-12

    def test_identity_is_unit(self, rng):
        g = random_transform(rng, 3)
        e = SampleTransform.identity(3)
        for h in (compose(e, g), compose(g, e)):
            assert np.array_equal(h.c, g.c)
            assert np.array_equal(h.a, g.a)

    def test_inverse_law(self, rng):
        g = random_transform(rng, 2)
        gi = compose(g, inverse(g))
        assert rel_gap(gi.c, np.ones(2)) < 1e-12
        assert rel_gap(gi.a, np.zeros(2)) < 1e-12

    @settings(deadline=None)
    @given(g1=transforms(), g2=transforms(), g3=transforms())
    def test_associativity(self, g1, g2, g3):
        left = compose(g3, compose(g2, g1))
        right = compose(compose(g3, g2), g1)
        assert rel_gap(left.c, right.c) < 1e-12
        assert rel_gap(left.a, right.a) < 1e-12

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            compose(SampleTransform.identity(2), SampleTransform.identity(3))


class TestInverse:
    def test_scalar_example(self):
        g = inverse(SampleTransform(c=[2.0], a=[6.0]))
        assert np.array_equal(g.c, [0.5])
        assert np.array_equal(g.a, [-3.0])

    def test_componentwise(self):
        g = inverse(SampleTransform(c=[2.0, 4.0], a=[0.0, 8.0]))
        assert np.array_equal(g.c, [0.5, 0.25])
        assert np.array_equal(g.a, [0.0, -2.0])

    def test_identity_fixed(self):
        e = SampleTransform.identity(2)
        gi = inverse(e)
        assert np.array_equal(gi.c, e.c)
        assert np.array_equal(gi.a, e.a)


class TestApplySample:
    def test_blockwise_example(self, design31):
        g = SampleTransform(c=[2.0, 3.0], a=[1.0, -1.0])
        out = apply_sample(design31, g, np.ones(4))
        assert np.array_equal(out, [3.0, 2.0, 2.0, 2.0])

    def test_identity_leaves_y(self, design31, rng):
        y = rng.normal(size=4)
        assert np.array_equal(apply_sample(design31, SampleTransform.identity(2), y), y)

    def test_round_trip(self, design31, rng):
        g = random_transform(rng, 2)
        y = rng.normal(size=4)
        back = apply_sample(design31, g, apply_sample(design31, inverse(g), y))
        assert rel_gap(back, y) < 1e-12


class TestInducedActions:
    def test_identity_rows_reduce_to_componentwise(self):
        d = Design(xp=np.eye(2), reps=(2, 2))
        g = SampleTransform(c=[2.0, 3.0], a=[1.0, -1.0])
        theta = ParameterPoint(beta=[1.0, 1.0], sigma2=[1.0, 2.0])
        moved = induce_param(d, g, theta)
        assert np.allclose(moved.beta, [3.0, 2.0])
        assert np.allclose(moved.sigma2, [4.0, 18.0])

    def test_matrix_example(self, design31):
        theta = ParameterPoint(beta=[1.0, 2.0], sigma2=[1.0, 1.0])
        g = SampleTransform(c=[2.0, 2.0], a=[0.0, 0.0])
        moved = induce_param(design31, g, theta)
        assert np.allclose(moved.beta, [2.0, 4.0])
        assert np.allclose(moved.sigma2, [4.0, 4.0])

    def test_distributional_compatibility(self, design31, rng):
        # transforming draws from theta matches drawing from the induced point
        theta = random_theta(rng, 2)
        g = random_transform(rng, 2)
        moved = induce_param(design31, g, theta)
        n_draws = 100_000
        Y_g = apply_sample(design31, g, draw_responses(design31, theta, seed=3, count=n_draws))
        mean = design31.expand(design31.xp @ moved.beta)
        var = design31.expand(moved.sigma2)
        assert np.all(np.abs(Y_g.mean(axis=0) - mean) < 4 * np.sqrt(var / n_draws))
        assert np.all(
            np.abs(Y_g.var(axis=0, ddof=1) - var) < 4 * var * np.sqrt(2.0 / (n_draws - 1))
        )

    def test_decision_beta_identity_rows(self):
        d = Design(xp=np.eye(2), reps=(2, 2))
        g = SampleTransform(c=[2.0, 3.0], a=[1.0, 0.0])
        assert np.allclose(induce_decision_beta(d, g, [1.0, 1.0]), [3.0, 3.0])

    def test_decision_beta_identity_transform(self, design31, rng):
        d_vec = rng.normal(size=2)
        out = induce_decision_beta(design31, SampleTransform.identity(2), d_vec)
        assert rel_gap(out, d_vec) < 1e-12

    def test_decision_beta_round_trip(self, design31, rng):
        g = random_transform(rng, 2)
        d_vec = rng.normal(size=2)
        out = induce_decision_beta(design31, g, induce_decision_beta(design31, inverse(g), d_vec))
        assert rel_gap(out, d_vec) < 1e-10

    def test_decision_cov(self):
        g = SampleTransform(c=[2.0, 3.0], a=[0.0, 0.0])
        assert np.array_equal(induce_decision_cov(g, [1.0, 1.0]), [4.0, 9.0])
        half = SampleTransform(c=[0.5], a=[0.0])
        assert np.array_equal(induce_decision_cov(half, [4.0]), [1.0])
        assert np.array_equal(
            induce_decision_cov(SampleTransform.identity(2), [3.0, 7.0]), [3.0, 7.0]
        )

    def test_decision_cov_rejects_nonpositive(self):
        g = SampleTransform.identity(2)
        with pytest.raises(ValueError):
            induce_decision_cov(g, [1.0, 0.0])

    def test_homomorphism(self, design31, rng):
        for _ in range(25):
            g1, g2 = random_transform(rng, 2), random_transform(rng, 2)
            theta = random_theta(rng, 2)
            one = induce_param(design31, compose(g2, g1), theta)
            seq = induce_param(design31, g2, induce_param(design31, g1, theta))
            assert rel_gap(one.beta, seq.beta) < 1e-12
            assert rel_gap(one.sigma2, seq.sigma2) < 1e-12


class TestTransport:
    def test_scalar_example(self):
        d = Design(xp=[[1.0]], reps=(2,))
        g = transport(d, ParameterPoint(beta=[0.0], sigma2=[1.0]),
                      ParameterPoint(beta=[5.0], sigma2=[4.0]))
        assert np.array_equal(g.c, [2.0])
        assert np.array_equal(g.a, [5.0])

    def test_same_point_gives_identity(self, design31, rng):
        theta = random_theta(rng, 2)
        g = transport(design31, theta, theta)
        assert rel_gap(g.c, np.ones(2)) < 1e-12
        assert rel_gap(g.a, np.zeros(2)) < 1e-12

    def test_round_trip_is_identity(self, design31, rng):
        t1, t2 = random_theta(rng, 2), random_theta(rng, 2)
        g = compose(transport(design31, t2, t1), transport(design31, t1, t2))
        assert rel_gap(g.c, np.ones(2)) < 1e-12
        assert rel_gap(g.a, np.zeros(2)) < 1e-10

    @settings(deadline=None, max_examples=50)
    @given(
        b1=st.lists(st.floats(-10, 10), min_size=2, max_size=2),
        v1=st.lists(st.floats(0.1, 10), min_size=2, max_size=2),
        b2=st.lists(st.floats(-10, 10), min_size=2, max_size=2),
        v2=st.lists(st.floats(0.1, 10), min_size=2, max_size=2),
    )
    def test_reaches_any_target(self, b1, v1, b2, v2):
        design = Design(xp=[[1.0, 0.0], [1.0, 1.0]], reps=(1, 3))
        t1 = ParameterPoint(beta=b1, sigma2=v1)
        t2 = ParameterPoint(beta=b2, sigma2=v2)
        moved = induce_param(design, transport(design, t1, t2), t1)
        assert rel_gap(moved.beta, t2.beta) < 1e-10
        assert rel_gap(moved.sigma2, t2.sigma2) < 1e-10


class TestMaximalInvariant:
    def test_final_block_example(self, design31):
        z = maximal_invariant(design31, np.array([0.7, 1.0, 2.0, 5.0]))
        assert z.blocks == (1,)
        assert np.array_equal(z.ratios[0], [0.25])
        assert np.array_equal(z.signs, [1.0])

    def test_unchanged_by_transform(self, design31):
        y = np.array([0.7, 1.0, 2.0, 5.0])
        g = SampleTransform(c=[9.0, 2.0], a=[4.0, 3.0])
        z = maximal_invariant(design31, apply_sample(design31, g, y))
        assert np.array_equal(z.ratios[0], [0.25])
        assert np.array_equal(z.signs, [1.0])

    def test_degenerate_block(self):
        d = Design(xp=np.eye(2), reps=(2, 2))
        with pytest.raises(DegenerateBlock):
            maximal_invariant(d, np.array([4.0, 4.0, 1.0, 2.0]))

    def test_negative_span_sign(self, design31):
        z = maximal_invariant(design31, np.array([0.0, 5.0, 2.0, 1.0]))
        assert np.array_equal(z.signs, [-1.0])
        assert np.array_equal(z.ratios[0], [0.75])

    def test_singleton_blocks_contribute_nothing(self, design31):
        z = maximal_invariant(design31, np.array([123.0, 1.0, 2.0, 5.0]))
        assert z.blocks == (1,)
        assert z.as_vector().size == 2  # one ratio + one sign

    def test_per_block_generalization(self, design33, rng):
        y = rng.normal(size=design33.n)
        z = maximal_invariant(design33, y)
        assert z.blocks == (0, 1)
        assert all(r.size == 1 for r in z.ratios)
        assert z.as_vector().size == 4

    def test_two_observation_block_gives_sign_only(self):
        d = Design(xp=np.eye(2), reps=(2, 2))
        z = maximal_invariant(d, np.array([1.0, 3.0, 7.0, 2.0]))
        assert z.blocks == (0, 1)
        assert all(r.size == 0 for r in z.ratios)
        assert np.array_equal(z.signs, [1.0, -1.0])

    def test_invariance_randomized(self, design33, rng):
        for _ in range(50):
            y = rng.normal(size=design33.n)
            g = random_transform(rng, 2)
            z = maximal_invariant(design33, y)
            z_g = maximal_invariant(design33, apply_sample(design33, g, y))
            assert z.blocks == z_g.blocks
            assert np.array_equal(z.signs, z_g.signs)
            assert rel_gap(z_g.as_vector(), z.as_vector()) < 1e-10
