"""ADAM and Nelder-Mead minimizers returning :class:`EstimateResult`."""

from __future__ import annotations

import time
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .exceptions import MaxIterExceeded, NonFiniteObjective, OutOfRange


@dataclass(frozen=True)
class AdamConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps_hat: float = 1e-8
    iters: int = 5000

    def __post_init__(self):
        if not self.lr > 0:
            raise OutOfRange("lr must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise OutOfRange("beta1 and beta2 must lie in [0, 1)")
        if self.iters < 1:
            raise OutOfRange("iters must be >= 1")


@dataclass(frozen=True)
class NelderMeadConfig:
    """Simplex settings.

    The initial simplex perturbs coordinate i of ``theta0`` by
    ``max(simplex_rel * |theta0_i|, simplex_min)``. Iteration stops once both
    the spread of function values is below ``fatol`` and the spread of
    vertices is below ``xatol``.
    """

    simplex_rel: float = 0.05
    simplex_min: float = 0.1
    reflection: float = 1.0
    expansion: float = 2.0
    contraction: float = 0.5
    shrink: float = 0.5
    max_iters: int = 2000
    fatol: float = 1e-8
    xatol: float = 1e-8

    def __post_init__(self):
        if not (
            self.reflection > 0
            and self.expansion > max(1.0, self.reflection)
            and 0 < self.contraction < 1
            and 0 < self.shrink < 1
        ):
            raise OutOfRange("Nelder-Mead coefficients out of range")
        if self.max_iters < 1:
            raise OutOfRange("max_iters must be >= 1")


@dataclass
class EstimateResult:
    """Outcome of one fit.

    ``theta_hat`` is in the natural parametrization of the model (``m`` then
    ``sigma2`` for the Gaussian model, ``m`` for ECS location).
    """

    theta_hat: np.ndarray
    objective_trace: np.ndarray
    n_evals: int
    n_iter: int
    wall_time: float
    converged: bool = True
    message: str = ""
    config: dict = field(default_factory=dict)
    seed: int | None = None

    def to_dict(self) -> dict:
        return {
            "theta_hat": [float(v) for v in self.theta_hat],
            "objective_trace": [float(v) for v in self.objective_trace],
            "n_evals": int(self.n_evals),
            "n_iter": int(self.n_iter),
            "wall_time": float(self.wall_time),
            "converged": bool(self.converged),
            "message": self.message,
            "config": self.config,
            "seed": self.seed,
        }


def adam_minimize(value_and_grad, theta0, cfg: AdamConfig | None = None) -> EstimateResult:
    """Run ``cfg.iters`` ADAM steps on ``value_and_grad(theta) -> (f, g)``.

    The trace records ``f`` at each visited iterate; the returned estimate is
    the final iterate. Stochastic objectives are welcome: each call may use
    fresh randomness.
    """
    cfg = cfg or AdamConfig()
    theta = np.array(theta0, dtype=float)
    m1 = np.zeros_like(theta)
    m2 = np.zeros_like(theta)
    trace = np.empty(cfg.iters)
    start = time.perf_counter()
    for it in range(1, cfg.iters + 1):
        value, grad = value_and_grad(theta)
        grad = np.asarray(grad, dtype=float)
        if not (np.isfinite(value) and np.all(np.isfinite(grad))):
            result = EstimateResult(
                theta, trace[: it - 1], it, it - 1, time.perf_counter() - start,
                converged=False, message=f"non-finite objective at iteration {it}",
                config=asdict(cfg),
            )
            raise NonFiniteObjective(result.message, result=result)
        trace[it - 1] = value
        m1 = cfg.beta1 * m1 + (1 - cfg.beta1) * grad
        m2 = cfg.beta2 * m2 + (1 - cfg.beta2) * grad**2
        m_hat = m1 / (1 - cfg.beta1**it)
        v_hat = m2 / (1 - cfg.beta2**it)
        theta = theta - cfg.lr * m_hat / (np.sqrt(v_hat) + cfg.eps_hat)
    return EstimateResult(
        theta, trace, cfg.iters, cfg.iters, time.perf_counter() - start,
        message="iteration budget reached", config=asdict(cfg),
    )


def _initial_simplex(x0, cfg):
    steps = np.maximum(cfg.simplex_rel * np.abs(x0), cfg.simplex_min)
    return np.vstack([x0, x0 + np.diag(steps)])


def nelder_mead_minimize(fn, theta0, cfg: NelderMeadConfig | None = None) -> EstimateResult:
    """Derivative-free simplex minimization of ``fn(theta) -> float``.

    Exhausting ``max_iters`` returns the best vertex with ``converged=False``
    and emits :class:`MaxIterExceeded`.
    """
    cfg = cfg or NelderMeadConfig()
    start = time.perf_counter()
    x0 = np.atleast_1d(np.array(theta0, dtype=float))
    sim = _initial_simplex(x0, cfg)
    n_evals = 0

    def f(x):
        nonlocal n_evals
        n_evals += 1
        val = float(fn(x))
        if not np.isfinite(val):
            raise NonFiniteObjective(f"non-finite objective at evaluation {n_evals}")
        return val

    fsim = np.array([f(x) for x in sim])
    trace = []
    converged = False
    n_iter = 0
    for n_iter in range(1, cfg.max_iters + 1):
        order = np.argsort(fsim, kind="stable")
        sim, fsim = sim[order], fsim[order]
        trace.append(fsim[0])
        if (np.max(np.abs(fsim[1:] - fsim[0])) <= cfg.fatol
                and np.max(np.abs(sim[1:] - sim[0])) <= cfg.xatol):
            converged = True
            break
        centroid = sim[:-1].mean(axis=0)
        worst = sim[-1]
        xr = centroid + cfg.reflection * (centroid - worst)
        fr = f(xr)
        if fr < fsim[0]:
            xe = centroid + cfg.expansion * (xr - centroid)
            fe = f(xe)
            sim[-1], fsim[-1] = (xe, fe) if fe < fr else (xr, fr)
            continue
        if fr < fsim[-2]:
            sim[-1], fsim[-1] = xr, fr
            continue
        if fr < fsim[-1]:
            xc = centroid + cfg.contraction * (xr - centroid)
            fc = f(xc)
            accept = fc <= fr
        else:
            xc = centroid + cfg.contraction * (worst - centroid)
            fc = f(xc)
            accept = fc < fsim[-1]
        if accept:
            sim[-1], fsim[-1] = xc, fc
            continue
        sim[1:] = sim[0] + cfg.shrink * (sim[1:] - sim[0])
        fsim[1:] = [f(x) for x in sim[1:]]

    best = int(np.argmin(fsim))
    message = "tolerance reached" if converged else "maximum iterations reached"
    if not converged:
        warnings.warn(f"Nelder-Mead stopped after {cfg.max_iters} iterations", MaxIterExceeded)
    return EstimateResult(
        sim[best].copy(), np.asarray(trace), n_evals, n_iter, time.perf_counter() - start,
        converged=converged, message=message, config=asdict(cfg),
    )
