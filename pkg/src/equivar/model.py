"""Replicated fixed-design normal linear models.

A design is a small set of distinct covariate rows, each observed a known
number of times; responses are laid out in contiguous population blocks.
All diagonal objects are kept in the p-dimensional population
parameterization and expanded to observation length only on demand.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np
from scipy.special import ndtri

CONDITION_LIMIT = 1e12

# Philox-4x64 emits four 64-bit words per counter increment, and
# Generator.random() consumes exactly one word per double.
_WORDS_PER_BLOCK = 4


class SingularDesign(ValueError):
    """The population covariate rows are numerically rank deficient."""


class BadReplication(ValueError):
    """Replication counts leave the model unidentifiable."""


def _frozen(values, dtype=float) -> np.ndarray:
    out = np.array(values, dtype=dtype)
    out.flags.writeable = False
    return out


@dataclass(frozen=True, eq=False)
class Design:
    """A replicated fixed design.

    ``xp`` holds the p distinct population rows (one per population) and
    ``reps[i]`` is the number of responses observed at row i.  Responses
    bound to the design are ordered by population, i.e. the first
    ``reps[0]`` entries belong to population 0 and so on.
    """

    xp: np.ndarray
    reps: tuple[int, ...]

    def __post_init__(self) -> None:
        xp = np.array(self.xp, dtype=float)
        if xp.ndim != 2 or xp.shape[0] != xp.shape[1]:
            raise SingularDesign(
                f"population rows must form a square matrix, got shape {xp.shape}"
            )
        if not np.all(np.isfinite(xp)):
            raise SingularDesign("population rows contain non-finite values")
        if np.linalg.cond(xp) > CONDITION_LIMIT:
            raise SingularDesign(
                f"population rows are singular at condition limit {CONDITION_LIMIT:g}"
            )
        reps = tuple(int(r) for r in self.reps)
        if len(reps) != xp.shape[0]:
            raise BadReplication(
                f"need one replication count per population, got {len(reps)} for p={xp.shape[0]}"
            )
        if any(r < 1 for r in reps):
            raise BadReplication("replication counts must be positive")
        if sum(reps) < len(reps) + 1:
            raise BadReplication(
                f"n={sum(reps)} observations cannot identify p={len(reps)} coefficients "
                "and a residual scale (need n >= p + 1)"
            )
        xp.flags.writeable = False
        object.__setattr__(self, "xp", xp)
        object.__setattr__(self, "reps", reps)

    @property
    def p(self) -> int:
        return len(self.reps)

    @property
    def n(self) -> int:
        return sum(self.reps)

    @property
    def bounds(self) -> tuple[int, ...]:
        """Cumulative block boundaries (0, n_1, n_1+n_2, ..., n)."""
        out = [0]
        for r in self.reps:
            out.append(out[-1] + r)
        return tuple(out)

    def block_slices(self) -> Iterator[tuple[int, int]]:
        bounds = self.bounds
        for i in range(self.p):
            yield bounds[i], bounds[i + 1]

    def expand(self, v) -> np.ndarray:
        """Replicate a population p-vector into observation length n."""
        v = np.asarray(v, dtype=float)
        if v.shape != (self.p,):
            raise ValueError(f"expected a vector of length {self.p}, got shape {v.shape}")
        return np.repeat(v, self.reps)

    def matrix(self) -> np.ndarray:
        """The full n-by-p design matrix (population rows replicated)."""
        return np.repeat(self.xp, self.reps, axis=0)


def design_from_matrix(X) -> Design:
    """Recover a Design from a full n-by-p matrix of contiguously repeated rows."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise BadReplication(f"design matrix must be 2-dimensional, got shape {X.shape}")
    n, p = X.shape
    if n == 0:
        raise BadReplication("design matrix is empty")
    changed = np.any(X[1:] != X[:-1], axis=1)
    starts = np.concatenate(([0], np.flatnonzero(changed) + 1))
    if starts.size != p:
        raise BadReplication(
            f"expected {p} contiguous populations (one per column), found {starts.size}"
        )
    reps = tuple(int(r) for r in np.diff(np.concatenate((starts, [n]))))
    return Design(xp=X[starts], reps=reps)


def design_from_json(doc: dict) -> Design:
    """Build a Design from a JSON document with keys "xp" and "reps"."""
    try:
        return Design(xp=doc["xp"], reps=tuple(doc["reps"]))
    except KeyError as exc:
        raise BadReplication(f"design document is missing key {exc}") from exc


@dataclass(frozen=True, eq=False)
class ParameterPoint:
    """Model parameters: coefficients plus one positive variance per population."""

    beta: np.ndarray
    sigma2: np.ndarray

    def __post_init__(self) -> None:
        beta = np.array(self.beta, dtype=float)
        sigma2 = np.array(self.sigma2, dtype=float)
        if beta.ndim != 1 or beta.shape != sigma2.shape:
            raise ValueError(
                f"beta and sigma2 must be vectors of equal length, "
                f"got shapes {beta.shape} and {sigma2.shape}"
            )
        if not np.all(np.isfinite(beta)):
            raise ValueError("beta contains non-finite values")
        if not np.all(np.isfinite(sigma2)) or np.any(sigma2 <= 0):
            raise ValueError("all population variances must be positive and finite")
        beta.flags.writeable = False
        sigma2.flags.writeable = False
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "sigma2", sigma2)

    @property
    def p(self) -> int:
        return self.beta.size

    @classmethod
    def origin(cls, p: int) -> "ParameterPoint":
        """The reference point: zero coefficients, unit variances."""
        return cls(beta=np.zeros(p), sigma2=np.ones(p))


def parameter_from_json(doc: dict) -> ParameterPoint:
    """Build a ParameterPoint from a JSON document with keys "beta" and "sigma2"."""
    try:
        return ParameterPoint(beta=doc["beta"], sigma2=doc["sigma2"])
    except KeyError as exc:
        raise ValueError(f"parameter document is missing key {exc}") from exc


@dataclass(frozen=True, eq=False)
class SufficientStats:
    """Per-population sample means and unbiased variances.

    A population observed once has no variance; its entry is NaN.
    """

    means: np.ndarray
    variances: np.ndarray
    reps: tuple[int, ...]


def check_response(design: Design, y) -> np.ndarray:
    """Validate a response array against the design's block layout."""
    y = np.asarray(y, dtype=float)
    if y.ndim < 1 or y.shape[-1] != design.n:
        raise ValueError(
            f"response length {y.shape[-1] if y.ndim else 0} does not match design n={design.n}"
        )
    return y


def block_means(design: Design, y) -> np.ndarray:
    """Per-population means; y may carry leading batch dimensions."""
    y = check_response(design, y)
    out = np.empty(y.shape[:-1] + (design.p,))
    for i, (lo, hi) in enumerate(design.block_slices()):
        out[..., i] = y[..., lo:hi].sum(axis=-1) / (hi - lo)
    return out


def block_variances(design: Design, y, means: np.ndarray | None = None) -> np.ndarray:
    """Per-population unbiased variances (NaN for single-observation blocks)."""
    y = check_response(design, y)
    if means is None:
        means = block_means(design, y)
    out = np.empty(y.shape[:-1] + (design.p,))
    for i, (lo, hi) in enumerate(design.block_slices()):
        w = hi - lo
        if w < 2:
            out[..., i] = np.nan
            continue
        centered = y[..., lo:hi] - means[..., i, None]
        out[..., i] = (centered * centered).sum(axis=-1) / (w - 1)
    return out


def sufficient_stats(design: Design, y) -> SufficientStats:
    """Reduce one response vector to its per-population means and variances."""
    y = check_response(design, y)
    if y.ndim != 1:
        raise ValueError("sufficient_stats reduces a single response vector")
    means = block_means(design, y)
    return SufficientStats(
        means=_frozen(means),
        variances=_frozen(block_variances(design, y, means)),
        reps=design.reps,
    )


def _check_seed(seed) -> int:
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError("seed must fit in an unsigned 64-bit integer")
    return seed


def _substream_uniforms(seed: int, first: int, count: int, width: int) -> np.ndarray:
    """Uniform draws for substreams [first, first+count), each of fixed width.

    Substream i owns the Philox counter words [i*b, (i+1)*b) with
    b = 4*ceil(width/4), so any substream can be produced in isolation or
    inside any contiguous batch with bit-identical output.
    """
    blocks = -(-width // _WORDS_PER_BLOCK)
    gen = np.random.Generator(np.random.Philox(key=seed, counter=first * blocks))
    u = gen.random(count * blocks * _WORDS_PER_BLOCK)
    u = u.reshape(count, blocks * _WORDS_PER_BLOCK)[:, :width]
    # random() can return exactly 0.0, whose normal quantile is -inf
    return np.maximum(u, 2.0**-54)


def draw_responses(
    design: Design, theta: ParameterPoint, seed, count: int, first: int = 0
) -> np.ndarray:
    """Draw `count` response vectors as rows, starting at draw index `first`.

    Row i is a pure function of (seed, first + i): the same draw index always
    yields the same vector regardless of batch boundaries, which is what makes
    parallel and chunked Monte Carlo reproducible.  Normals come from the
    inverse CDF so each response consumes a fixed number of uniforms.
    """
    if theta.p != design.p:
        raise ValueError(f"parameter dimension {theta.p} does not match design p={design.p}")
    seed = _check_seed(seed)
    z = ndtri(_substream_uniforms(seed, first, count, design.n))
    mean = design.expand(design.xp @ theta.beta)
    sd = design.expand(np.sqrt(theta.sigma2))
    return mean + sd * z


def sample_responses(
    design: Design, theta: ParameterPoint, seed, count: int, first: int = 0
) -> Iterator[np.ndarray]:
    """Yield `count` response vectors one at a time (see draw_responses)."""
    for i in range(first, first + count):
        yield draw_responses(design, theta, seed, 1, first=i)[0]
