"""Parametric generative models: isotropic Gaussian and ECS location family.

Both are sampled either directly (:func:`sample_model`) or through cached
base noise (:func:`draw_base` then :func:`reparametrized_sample`), which
makes the generated sample a deterministic function of the parameters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .exceptions import InvalidScale, OutOfRange, ShapeMismatch
from .measures import EmpiricalMeasure
from .sampling import as_generator, ecs_noise, sample_gaussian


@dataclass(frozen=True, eq=False)
class GaussianParams:
    """N(m, sigma2 * I)."""

    m: np.ndarray
    sigma2: float

    def __post_init__(self):
        m = np.atleast_1d(np.array(self.m, dtype=float))
        m.setflags(write=False)
        object.__setattr__(self, "m", m)
        if not (self.sigma2 > 0 and math.isfinite(self.sigma2)):
            raise InvalidScale(f"sigma2 must be positive and finite, got {self.sigma2}")
        object.__setattr__(self, "sigma2", float(self.sigma2))

    @property
    def d(self) -> int:
        return self.m.shape[0]

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.m, [self.sigma2]])

    @classmethod
    def from_vector(cls, v) -> "GaussianParams":
        v = np.asarray(v, dtype=float)
        return cls(v[:-1], float(v[-1]))

    def __repr__(self):
        return f"GaussianParams(d={self.d}, sigma2={self.sigma2:.6g})"


@dataclass(frozen=True, eq=False)
class ECSLocationParams:
    """Elliptically contoured alpha-stable law with identity dispersion."""

    m: np.ndarray
    alpha: float = 1.8

    def __post_init__(self):
        m = np.atleast_1d(np.array(self.m, dtype=float))
        m.setflags(write=False)
        object.__setattr__(self, "m", m)
        if not 0.0 < self.alpha < 2.0:
            raise OutOfRange(f"alpha must lie in (0, 2), got {self.alpha}")
        object.__setattr__(self, "alpha", float(self.alpha))

    @property
    def d(self) -> int:
        return self.m.shape[0]

    def to_vector(self) -> np.ndarray:
        return self.m.copy()

    def with_location(self, m) -> "ECSLocationParams":
        return ECSLocationParams(m, self.alpha)

    def __repr__(self):
        return f"ECSLocationParams(d={self.d}, alpha={self.alpha})"


def gaussian_projected_cdf(params: GaussianParams, u, t):
    """CDF at ``t`` of the projection of N(m, sigma2 I) on direction ``u``.

    The projected law is N(<u, m>, sigma2 * |u|^2).
    """
    u = np.asarray(u, dtype=float)
    scale = params.sigma * float(np.linalg.norm(u))
    out = ndtr((np.asarray(t, dtype=float) - float(u @ params.m)) / scale)
    return float(out) if np.ndim(out) == 0 else out


def sample_model(params, n: int, rng) -> EmpiricalMeasure:
    """``n`` i.i.d. draws from the model at ``params``."""
    if isinstance(params, GaussianParams):
        return sample_gaussian(params.m, params.sigma2, n, rng)
    if isinstance(params, ECSLocationParams):
        noise = ecs_noise(params.alpha, np.eye(params.d), n, rng)
        return EmpiricalMeasure(noise + params.m)
    raise TypeError(f"unknown model parameters {type(params).__name__}")


def draw_base(params, n: int, rng) -> np.ndarray:
    """Parameter-free noise consumed by :func:`reparametrized_sample`.

    Standard normal for the Gaussian model, zero-location ECS draws for the
    stable model. Uses the stream exactly as :func:`sample_model` does.
    """
    if isinstance(params, GaussianParams):
        return as_generator(rng).standard_normal((int(n), params.d))
    if isinstance(params, ECSLocationParams):
        return ecs_noise(params.alpha, np.eye(params.d), n, rng)
    raise TypeError(f"unknown model parameters {type(params).__name__}")


def reparametrized_sample(params, base) -> EmpiricalMeasure:
    """Generated sample at ``params`` from cached base noise.

    Gaussian: ``m + sigma * base``; ECS location: ``base + m``.
    """
    base = np.asarray(base, dtype=float)
    if base.ndim != 2 or base.shape[1] != params.d:
        raise ShapeMismatch(f"base noise of shape {base.shape} does not match d = {params.d}")
    if isinstance(params, GaussianParams):
        return EmpiricalMeasure(params.m + params.sigma * base)
    if isinstance(params, ECSLocationParams):
        return EmpiricalMeasure(base + params.m)
    raise TypeError(f"unknown model parameters {type(params).__name__}")
