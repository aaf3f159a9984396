"""Seeded random streams and the samplers used by the models.

Streams are Philox counter-based generators keyed by ``(seed, stream_id)``,
so the same pair yields the same sequence on every platform and regardless
of how work is scheduled. Experiments lay streams out as
``stream_id = rep * 2**20 + batch`` (see :func:`stream_id`).
"""

from __future__ import annotations

import math

import numpy as np

from .exceptions import InvalidScale, NotPositiveDefinite, OutOfRange
from .measures import EmpiricalMeasure, ProjectionSet

_MASK64 = (1 << 64) - 1
BATCH_BITS = 20


def stream_id(rep: int, batch: int) -> int:
    """Stream id of projection/sampling batch ``batch`` in replication ``rep``."""
    if not 0 <= batch < (1 << BATCH_BITS):
        raise OutOfRange(f"batch index {batch} outside [0, 2**{BATCH_BITS})")
    if rep < 0:
        raise OutOfRange("replication index must be non-negative")
    return (rep << BATCH_BITS) + batch


class RngStream:
    """Reproducible random stream identified by ``(seed, stream_id)``.

    Wraps a :class:`numpy.random.Generator`; the stream is single-owner and
    advances as draws are taken.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = int(seed) & _MASK64
        self.stream_id = int(stream_id) & _MASK64
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,))
        self.generator = np.random.Generator(np.random.Philox(seq))

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"

    def standard_normal(self, size=None):
        return self.generator.standard_normal(size)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self.generator.uniform(low, high, size)

    def standard_exponential(self, size=None):
        return self.generator.standard_exponential(size)


def as_generator(rng) -> np.random.Generator:
    """Accept an :class:`RngStream`, a Generator, or an int seed."""
    if isinstance(rng, RngStream):
        return rng.generator
    if isinstance(rng, np.random.Generator):
        return rng
    if rng is None or isinstance(rng, (int, np.integer)):
        return RngStream(0 if rng is None else int(rng)).generator
    raise TypeError(f"cannot use {type(rng).__name__} as a random stream")


def sample_sphere(d: int, rng) -> np.ndarray:
    """One direction drawn uniformly on the unit sphere of R^d."""
    return sample_projections(d, 1, rng).directions[0]


def sample_projections(d: int, L: int, rng) -> ProjectionSet:
    """``L`` i.i.d. uniform directions: normalized standard Gaussian vectors."""
    if d < 1 or L < 1:
        raise OutOfRange("need d >= 1 and L >= 1")
    gen = as_generator(rng)
    g = gen.standard_normal((L, d))
    norms = np.linalg.norm(g, axis=1)
    # a zero draw has probability 0; redraw rather than divide by it
    while np.any(norms == 0.0):
        bad = norms == 0.0
        g[bad] = gen.standard_normal((int(bad.sum()), d))
        norms = np.linalg.norm(g, axis=1)
    return ProjectionSet(g / norms[:, None])


def sample_gaussian(m, sigma2: float, n: int, rng) -> EmpiricalMeasure:
    """``n`` draws of N(m, sigma2 * I) computed as ``m + sqrt(sigma2) * z``."""
    if not sigma2 > 0:
        raise InvalidScale(f"sigma2 must be positive, got {sigma2}")
    m = np.atleast_1d(np.asarray(m, dtype=float))
    z = as_generator(rng).standard_normal((int(n), m.shape[0]))
    return EmpiricalMeasure(m + math.sqrt(sigma2) * z)


def positive_stable_scale(alpha: float) -> float:
    """Scale of the positive (alpha/2)-stable mixing variable.

    Chosen so that ``sqrt(A) * G`` with G ~ N(0, Sigma) has characteristic
    function ``exp(-(t' Sigma t) ** (alpha / 2))``.
    """
    return 2.0 * math.cos(math.pi * alpha / 4.0) ** (2.0 / alpha)


def sample_positive_stable(alpha_half: float, rng, size=None):
    """Totally skewed positive stable draws S_{alpha_half}(1, gamma, 0).

    Chambers-Mallows-Stuck transform in the 1-parametrization with
    ``gamma = 2 cos(pi * alpha_half / 2) ** (1 / alpha_half)``, i.e. the mixing
    law of an elliptically contoured (2 * alpha_half)-stable vector.
    """
    a = float(alpha_half)
    if not 0.0 < a < 1.0:
        raise OutOfRange(f"alpha_half must lie in (0, 1), got {alpha_half}")
    gen = as_generator(rng)
    v = gen.uniform(-math.pi / 2, math.pi / 2, size)
    w = gen.standard_exponential(size)
    # beta = 1, a < 1: shift B = pi/2 and S = cos(pi a / 2) ** (-1 / a)
    shift = math.pi / 2
    s = math.cos(math.pi * a / 2) ** (-1.0 / a)
    x = (
        s
        * np.sin(a * (v + shift))
        / np.cos(v) ** (1.0 / a)
        * (np.cos(v - a * (v + shift)) / w) ** ((1.0 - a) / a)
    )
    out = positive_stable_scale(2.0 * a) * x
    return float(out) if size is None else out


def _cholesky(Sigma):
    Sigma = np.atleast_2d(np.asarray(Sigma, dtype=float))
    if Sigma.shape[0] != Sigma.shape[1] or not np.allclose(Sigma, Sigma.T):
        raise NotPositiveDefinite("Sigma must be a symmetric square matrix")
    try:
        return np.linalg.cholesky(Sigma)
    except np.linalg.LinAlgError:
        raise NotPositiveDefinite("Sigma is not positive definite") from None


def ecs_noise(alpha: float, Sigma, n: int, rng) -> np.ndarray:
    """Zero-location elliptically contoured stable draws, ``(n, d)``.

    Draws the n mixing variables first, then the Gaussian block.
    """
    if not 0.0 < alpha < 2.0:
        raise OutOfRange(f"alpha must lie in (0, 2), got {alpha}")
    chol = _cholesky(Sigma)
    d = chol.shape[0]
    gen = as_generator(rng)
    a = sample_positive_stable(alpha / 2.0, gen, size=int(n))
    g = gen.standard_normal((int(n), d))
    if not np.array_equal(chol, np.eye(d)):
        g = g @ chol.T
    return np.sqrt(a)[:, None] * g


def sample_ecs(params, n: int, rng) -> EmpiricalMeasure:
    """``n`` draws of sqrt(A) * G + m for an :class:`ECSParams`."""
    noise = ecs_noise(params.alpha, params.Sigma, n, rng)
    return EmpiricalMeasure(noise + params.m)


class ECSParams:
    """Elliptically contoured stable law: tail index, dispersion, location."""

    def __init__(self, alpha: float, Sigma, m):
        if not 0.0 < alpha < 2.0:
            raise OutOfRange(f"alpha must lie in (0, 2), got {alpha}")
        self.alpha = float(alpha)
        self.m = np.atleast_1d(np.asarray(m, dtype=float))
        self.Sigma = np.atleast_2d(np.asarray(Sigma, dtype=float))
        if self.Sigma.shape != (self.m.shape[0],) * 2:
            raise NotPositiveDefinite("Sigma must be d x d with d = len(m)")
        _cholesky(self.Sigma)

    def __repr__(self):
        return f"ECSParams(alpha={self.alpha}, d={self.m.shape[0]})"


def ecs_characteristic_function(t, params: ECSParams) -> complex:
    """Closed-form characteristic function of an ECS law at frequency ``t``."""
    t = np.asarray(t, dtype=float)
    quad = float(t @ params.Sigma @ t)
    return complex(np.exp(-(quad ** (params.alpha / 2.0)) + 1j * float(t @ params.m)))
