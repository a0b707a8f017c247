"""Per-population location-scale transformations and their induced actions.

A sample transformation rescales and shifts every response, with one positive
scale and one shift shared by each population block.  It acts on responses
directly, on model parameters through the design, and on decisions for the
coefficient and for the variance targets.  The same (c, a) pair represents
the transformation in all four roles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Design, ParameterPoint, check_response


class DegenerateBlock(ValueError):
    """A block's first and last observations coincide, so ratios are undefined."""


@dataclass(frozen=True, eq=False)
class SampleTransform:
    """One positive scale and one shift per population: y -> c*y + a blockwise."""

    c: np.ndarray
    a: np.ndarray

    def __post_init__(self) -> None:
        c = np.array(self.c, dtype=float)
        a = np.array(self.a, dtype=float)
        if c.ndim != 1 or c.shape != a.shape:
            raise ValueError(
                f"scales and shifts must be vectors of equal length, "
                f"got shapes {c.shape} and {a.shape}"
            )
        if not np.all(np.isfinite(c)) or np.any(c <= 0):
            raise ValueError("all scales must be positive and finite")
        if not np.all(np.isfinite(a)):
            raise ValueError("shifts contain non-finite values")
        c.flags.writeable = False
        a.flags.writeable = False
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "a", a)

    @property
    def p(self) -> int:
        return self.c.size

    @classmethod
    def identity(cls, p: int) -> "SampleTransform":
        return cls(c=np.ones(p), a=np.zeros(p))

    def to_json(self) -> dict:
        return {"c": self.c.tolist(), "a": self.a.tolist()}

    @classmethod
    def from_json(cls, doc: dict) -> "SampleTransform":
        return cls(c=doc["c"], a=doc["a"])


def compose(outer: SampleTransform, inner: SampleTransform) -> SampleTransform:
    """The transformation applying `inner` first, then `outer`."""
    if outer.p != inner.p:
        raise ValueError("cannot compose transformations of different dimension")
    return SampleTransform(c=outer.c * inner.c, a=outer.c * inner.a + outer.a)


def inverse(g: SampleTransform) -> SampleTransform:
    return SampleTransform(c=1.0 / g.c, a=-g.a / g.c)


def apply_sample(design: Design, g: SampleTransform, y) -> np.ndarray:
    """Transform responses blockwise; y may carry leading batch dimensions."""
    y = check_response(design, y)
    if g.p != design.p:
        raise ValueError(f"transformation dimension {g.p} does not match design p={design.p}")
    return design.expand(g.c) * y + design.expand(g.a)


def induce_param(design: Design, g: SampleTransform, theta: ParameterPoint) -> ParameterPoint:
    """The parameter taking the place of `theta` after transforming responses.

    If y follows the model at theta, then g(y) follows the model at the
    returned point: the coefficient moves so the block means match the
    transformed means, and each variance picks up the squared scale.
    """
    mu = design.xp @ theta.beta
    return ParameterPoint(
        beta=np.linalg.solve(design.xp, g.c * mu + g.a),
        sigma2=g.c * g.c * theta.sigma2,
    )


def induce_decision_beta(design: Design, g: SampleTransform, d) -> np.ndarray:
    """Action of g on a coefficient decision (same map as the beta component)."""
    d = np.asarray(d, dtype=float)
    return np.linalg.solve(design.xp, g.c * (design.xp @ d) + g.a)


def induce_decision_cov(g: SampleTransform, d_var) -> np.ndarray:
    """Action of g on a per-population variance decision: multiply by c squared."""
    d_var = np.asarray(d_var, dtype=float)
    if np.any(d_var <= 0) or not np.all(np.isfinite(d_var)):
        raise ValueError("variance decisions must be positive and finite")
    return g.c * g.c * d_var


def transport(design: Design, source: ParameterPoint, target: ParameterPoint) -> SampleTransform:
    """The transformation whose induced action maps `source` to `target`.

    Always exists: scales are ratios of standard deviations and shifts absorb
    the mean difference, which is what makes the parameter space a single
    orbit.
    """
    if source.p != design.p or target.p != design.p:
        raise ValueError("parameter dimensions do not match the design")
    c = np.sqrt(target.sigma2 / source.sigma2)
    a = design.xp @ target.beta - c * (design.xp @ source.beta)
    return SampleTransform(c=c, a=a)


@dataclass(frozen=True, eq=False)
class MaximalInvariant:
    """Scale-and-shift-free content of a response vector.

    Each population with at least two observations contributes the sign of
    (last - first) and, when it has three or more, the interior observations
    rescaled to the first/last span.  Singleton blocks contribute nothing.
    """

    blocks: tuple[int, ...]
    ratios: tuple[np.ndarray, ...]
    signs: np.ndarray

    def as_vector(self) -> np.ndarray:
        """Flatten to (ratios..., sign) per qualifying block, in block order."""
        parts = [np.append(r, s) for r, s in zip(self.ratios, self.signs)]
        return np.concatenate(parts) if parts else np.empty(0)


def maximal_invariant(design: Design, y) -> MaximalInvariant:
    """Compute the per-block invariant; rejects blocks with zero span."""
    y = check_response(design, y)
    if y.ndim != 1:
        raise ValueError("maximal_invariant reduces a single response vector")
    blocks: list[int] = []
    ratios: list[np.ndarray] = []
    signs: list[float] = []
    for i, (lo, hi) in enumerate(design.block_slices()):
        if hi - lo < 2:
            continue
        first, last = y[lo], y[hi - 1]
        span = last - first
        if span == 0.0:
            raise DegenerateBlock(
                f"population {i}: first and last observations coincide ({first!r})"
            )
        r = (y[lo + 1 : hi - 1] - first) / span
        r.flags.writeable = False
        blocks.append(i)
        ratios.append(r)
        signs.append(1.0 if span > 0 else -1.0)
    signs_arr = np.array(signs)
    signs_arr.flags.writeable = False
    return MaximalInvariant(blocks=tuple(blocks), ratios=tuple(ratios), signs=signs_arr)
