"""Randomized suites verifying the group and loss structure.

Each suite runs a fixed number of seeded random trials and reports the worst
relative gap it saw, so a failure is reproducible from the seed alone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .groups import (
    SampleTransform,
    apply_sample,
    compose,
    induce_decision_beta,
    induce_decision_cov,
    induce_param,
    inverse,
    maximal_invariant,
    transport,
)
from .losses import loss_beta, loss_lik, loss_quad
from .model import Design, ParameterPoint


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    worst: float
    tolerance: float
    trials: int

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "worst": self.worst,
            "tolerance": self.tolerance,
            "trials": self.trials,
        }


def rel_gap(got, want) -> float:
    """Largest absolute difference, relative to the target's magnitude (floored at 1)."""
    got = np.asarray(got, dtype=float)
    want = np.asarray(want, dtype=float)
    scale = max(1.0, float(np.max(np.abs(want), initial=0.0)))
    return float(np.max(np.abs(got - want), initial=0.0)) / scale


def random_transform(rng: np.random.Generator, p: int) -> SampleTransform:
    return SampleTransform(
        c=np.exp(rng.uniform(-1.2, 1.2, p)),
        a=rng.normal(0.0, 2.0, p),
    )


def random_theta(rng: np.random.Generator, p: int) -> ParameterPoint:
    return ParameterPoint(
        beta=rng.normal(0.0, 2.0, p),
        sigma2=np.exp(rng.uniform(-1.5, 1.5, p)),
    )


def group_axioms(design: Design, trials: int = 1000, seed: int = 0,
                 tolerance: float = 1e-12) -> CheckResult:
    """Closure, associativity, identity, inverse, and the three homomorphism laws."""
    rng = np.random.default_rng(seed)
    p = design.p
    worst = 0.0
    for _ in range(trials):
        g1 = random_transform(rng, p)
        g2 = random_transform(rng, p)
        g3 = random_transform(rng, p)
        y = rng.normal(0.0, 1.0, design.n)
        theta = random_theta(rng, p)
        d = rng.normal(0.0, 2.0, p)
        d_var = np.exp(rng.uniform(-1.5, 1.5, p))

        # closure: composing matches acting twice
        g21 = compose(g2, g1)
        worst = max(worst, rel_gap(
            apply_sample(design, g21, y),
            apply_sample(design, g2, apply_sample(design, g1, y)),
        ))
        # associativity on (c, a)
        left = compose(g3, compose(g2, g1))
        right = compose(compose(g3, g2), g1)
        worst = max(worst, rel_gap(left.c, right.c), rel_gap(left.a, right.a))
        # identity and inverse
        e = SampleTransform.identity(p)
        ge = compose(g1, e)
        eg = compose(e, g1)
        worst = max(worst, rel_gap(ge.c, g1.c), rel_gap(ge.a, g1.a))
        worst = max(worst, rel_gap(eg.c, g1.c), rel_gap(eg.a, g1.a))
        gi = compose(g1, inverse(g1))
        worst = max(worst, rel_gap(gi.c, e.c), rel_gap(gi.a, e.a))
        worst = max(worst, rel_gap(apply_sample(design, inverse(g1), apply_sample(design, g1, y)), y))
        # homomorphisms of the induced actions
        t_seq = induce_param(design, g2, induce_param(design, g1, theta))
        t_one = induce_param(design, g21, theta)
        worst = max(worst, rel_gap(t_one.beta, t_seq.beta), rel_gap(t_one.sigma2, t_seq.sigma2))
        worst = max(worst, rel_gap(
            induce_decision_beta(design, g21, d),
            induce_decision_beta(design, g2, induce_decision_beta(design, g1, d)),
        ))
        worst = max(worst, rel_gap(
            induce_decision_cov(g21, d_var),
            induce_decision_cov(g2, induce_decision_cov(g1, d_var)),
        ))
    return CheckResult("group_axioms", worst <= tolerance, worst, tolerance, trials)


def loss_invariance(design: Design, trials: int = 1000, seed: int = 1,
                    tolerance: float = 1e-10) -> CheckResult:
    """Each loss is unchanged when decision and parameter move together."""
    rng = np.random.default_rng(seed)
    p = design.p
    worst = 0.0
    for _ in range(trials):
        g = random_transform(rng, p)
        theta = random_theta(rng, p)
        theta_g = induce_param(design, g, theta)

        d = theta.beta + rng.normal(0.0, 1.0, p)
        worst = max(worst, rel_gap(
            loss_beta(design, induce_decision_beta(design, g, d), theta_g),
            loss_beta(design, d, theta),
        ))
        d_var = theta.sigma2 * np.exp(rng.uniform(-1.0, 1.0, p))
        worst = max(worst, rel_gap(
            loss_quad(induce_decision_cov(g, d_var), theta_g.sigma2),
            loss_quad(d_var, theta.sigma2),
        ))
        worst = max(worst, rel_gap(
            loss_lik(induce_decision_cov(g, d_var), theta_g.sigma2),
            loss_lik(d_var, theta.sigma2),
        ))
    return CheckResult("loss_invariance", worst <= tolerance, worst, tolerance, trials)


def transitivity(design: Design, trials: int = 1000, seed: int = 2,
                 tolerance: float = 1e-10) -> CheckResult:
    """transport really carries any parameter point onto any other."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        theta1 = random_theta(rng, design.p)
        theta2 = random_theta(rng, design.p)
        moved = induce_param(design, transport(design, theta1, theta2), theta1)
        worst = max(worst, rel_gap(moved.beta, theta2.beta))
        worst = max(worst, rel_gap(moved.sigma2, theta2.sigma2))
    return CheckResult("transitivity", worst <= tolerance, worst, tolerance, trials)


def maximal_invariance(design: Design, trials: int = 1000, seed: int = 3,
                       tolerance: float = 1e-10) -> CheckResult:
    """The invariant reduction is blind to every blockwise transformation."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        g = random_transform(rng, design.p)
        y = rng.normal(0.0, 1.0, design.n)
        z = maximal_invariant(design, y)
        z_g = maximal_invariant(design, apply_sample(design, g, y))
        if z.blocks != z_g.blocks or not np.array_equal(z.signs, z_g.signs):
            worst = np.inf
            continue
        worst = max(worst, rel_gap(z_g.as_vector(), z.as_vector()))
    return CheckResult("maximal_invariance", worst <= tolerance, worst, tolerance, trials)
