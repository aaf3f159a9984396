"""Wasserstein and Sliced-Wasserstein distances between empirical measures.

One-dimensional transport is solved exactly from sorted samples, or by the
two Monte Carlo approximations used inside the estimators. Multivariate
baselines (exact assignment and log-domain Sinkhorn) exist for comparison.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from .exceptions import (
    DimensionMismatch,
    NoConvergence,
    OutOfRange,
    SizeCapExceeded,
    SizeMismatch,
)
from .measures import (
    SortedSample1D,
    as_points,
    as_projection_set,
    interp_quantile,
    project_sorted,
)
from .sampling import as_generator, sample_projections


@dataclass(frozen=True)
class SwConfig:
    """Order ``p``, projection count ``L``, 1D Monte Carlo size ``K``, seed."""

    p: float = 2.0
    L: int = 1
    K: int = 1000
    seed: int = 0

    def __post_init__(self):
        if not self.p >= 1:
            raise OutOfRange("order p must be >= 1")
        if self.L < 1 or self.K < 1:
            raise OutOfRange("L and K must be >= 1")


@dataclass(frozen=True)
class SinkhornConfig:
    """Entropic regularization settings.

    ``epsilon`` is multiplied by the max or median of the cost matrix unless
    ``epsilon_scale`` is ``"absolute"``. ``tol`` bounds the L1 violation of
    the row marginal (columns are exact after each sweep).
    """

    epsilon: float = 0.01
    epsilon_scale: str = "max"
    max_iter: int = 10000
    tol: float = 1e-5
    strict: bool = True

    def __post_init__(self):
        if not (self.epsilon > 0 and self.tol > 0 and self.max_iter > 0):
            raise OutOfRange("epsilon, tol and max_iter must be positive")
        if self.epsilon_scale not in ("absolute", "max", "median"):
            raise ValueError(f"unknown epsilon_scale {self.epsilon_scale!r}")


def _sorted_values(s):
    if isinstance(s, SortedSample1D):
        return s.values
    return np.sort(np.asarray(s, dtype=float))


def _merged_grid(n, m):
    """Quantile-level breakpoints shared by step quantiles of sizes n and m.

    Returns interval weights and the step-quantile index of each sample on
    every interval; breakpoints are exact integers over ``n * m``.
    """
    ticks = np.union1d(np.arange(n + 1) * m, np.arange(m + 1) * n)
    weights = np.diff(ticks) / (n * m)
    left = ticks[:-1]
    return weights, left // m, left // n


def w1d_power(a_rows, b_rows, p) -> np.ndarray:
    """``W_p^p`` between sorted rows of ``a_rows`` and ``b_rows``.

    Rows are ascending samples; the last axis is the sample axis. Unequal
    sizes integrate the step quantile functions over merged breakpoints.
    """
    a_rows = np.asarray(a_rows, dtype=float)
    b_rows = np.asarray(b_rows, dtype=float)
    n, m = a_rows.shape[-1], b_rows.shape[-1]
    if n == m:
        return np.mean(np.abs(a_rows - b_rows) ** p, axis=-1)
    weights, ia, ib = _merged_grid(n, m)
    diff = np.abs(a_rows[..., ia] - b_rows[..., ib]) ** p
    return diff @ weights


def w1d_exact(a, b, p: float = 2.0) -> float:
    """Exact ``W_p`` between two one-dimensional empirical measures.

    Both inputs are :class:`SortedSample1D` or array-likes (sorted here).
    Unequal sizes are handled for every ``p >= 1``.
    """
    if not p >= 1:
        raise OutOfRange("order p must be >= 1")
    return float(w1d_power(_sorted_values(a), _sorted_values(b), p)) ** (1.0 / p)


def w1d_quantile_mc(a, b, p: float, K: int, rng) -> float:
    """Monte Carlo ``W_p`` from K uniform levels and interpolated quantiles."""
    t = as_generator(rng).uniform(0.0, 1.0, int(K))
    qa = interp_quantile(_sorted_values(a), t)
    qb = interp_quantile(_sorted_values(b), t)
    return float(np.mean(np.abs(qa - qb) ** p)) ** (1.0 / p)


def w1d_cdf_mc(draw, cdf_fn, b, p: float, K: int, rng) -> float:
    """Monte Carlo ``W_p`` transporting draws of a reference law onto ``b``.

    ``draw(K, rng)`` returns K samples ``s_k`` of the reference law and
    ``cdf_fn(s)`` evaluates its CDF; each ``s_k`` is matched to the
    interpolated quantile of ``b`` at level ``cdf_fn(s_k)``.
    """
    s = np.asarray(draw(int(K), as_generator(rng)), dtype=float)
    levels = np.clip(np.asarray(cdf_fn(s), dtype=float), 0.0, 1.0)
    q = interp_quantile(_sorted_values(b), levels)
    return float(np.mean(np.abs(s - q) ** p)) ** (1.0 / p)


def _check_pair(X, Y):
    x, y = as_points(X), as_points(Y)
    if x.shape[1] != y.shape[1]:
        raise DimensionMismatch(f"dimensions differ: {x.shape[1]} vs {y.shape[1]}")
    return x, y


def sw_power(X, Y, proj, p: float = 2.0) -> np.ndarray:
    """Per-direction ``W_p^p`` of the projected measures, shape ``(L,)``."""
    x, y = _check_pair(X, Y)
    dirs = as_projection_set(proj).directions
    if dirs.shape[1] != x.shape[1]:
        raise DimensionMismatch(
            f"projections live in R^{dirs.shape[1]}, measures in R^{x.shape[1]}"
        )
    return w1d_power(project_sorted(x, dirs), project_sorted(y, dirs), p)


def sw_distance(X, Y, proj, p: float = 2.0) -> float:
    """Sliced-Wasserstein distance of order ``p`` over a fixed projection set.

    ``((1/L) sum_l W_p^p(u_l # X, u_l # Y)) ** (1/p)``; with a shared
    projection set this is a (pseudo)metric on empirical measures.
    """
    if not p >= 1:
        raise OutOfRange("order p must be >= 1")
    return float(np.mean(sw_power(X, Y, proj, p))) ** (1.0 / p)


def sliced_wasserstein(X, Y, n_projections: int = 100, p: float = 2.0, rng=None) -> float:
    """:func:`sw_distance` with ``n_projections`` fresh uniform directions."""
    d = as_points(X).shape[1]
    return sw_distance(X, Y, sample_projections(d, n_projections, rng), p)


def expected_sw(sampler, theta, Y, R: int, m: int, rng, p: float = 2.0,
                n_projections: int = 1, proj=None) -> float:
    """Average SW distance between ``Y`` and R generated datasets of size m.

    ``sampler(theta, m, rng)`` draws one dataset. Without ``proj`` a fresh set
    of ``n_projections`` directions is drawn once per call and shared by the
    R replicates.
    """
    if R < 1 or m < 1:
        raise OutOfRange("R and m must be >= 1")
    gen = as_generator(rng)
    y = as_points(Y)
    if proj is None:
        proj = sample_projections(y.shape[1], n_projections, gen)
    total = 0.0
    for _ in range(int(R)):
        total += sw_distance(y, sampler(theta, int(m), gen), proj, p)
    return total / R


def _cost_matrix(x, y, p):
    if p == 2:
        return cdist(x, y, "sqeuclidean")
    return cdist(x, y, "euclidean") ** p


def w_exact_assignment(X, Y, p: float = 2.0, cap: int = 512) -> float:
    """Exact ``W_p`` between equal-size uniform empirical measures.

    Solved as a linear assignment problem (O(n^3)).
    """
    x, y = _check_pair(X, Y)
    if x.shape[0] != y.shape[0]:
        raise SizeMismatch(f"sizes differ: {x.shape[0]} vs {y.shape[0]}")
    if x.shape[0] > cap:
        raise SizeCapExceeded(f"n = {x.shape[0]} exceeds the assignment cap {cap}")
    cost = _cost_matrix(x, y, p)
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].mean()) ** (1.0 / p)


def _lse(M, axis):
    mx = M.max(axis=axis, keepdims=True)
    return np.squeeze(mx, axis) + np.log(np.exp(M - mx).sum(axis=axis))


def _sinkhorn_log(kernel, max_iter, tol):
    n, m = kernel.shape
    log_a = -np.log(n)
    log_b = -np.log(m)
    f = np.zeros(n)
    g = np.zeros(m)
    violation = np.inf
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        f_new = -_lse(kernel + (g + log_b)[None, :], axis=1)
        if n_iter > 1:
            # row sums of the plan built from (f, g) equal a * exp(f - f_new)
            violation = float(np.sum(np.abs(np.expm1(f - f_new)))) / n
            if violation < tol:
                break
        f = f_new
        g = -_lse(kernel + (f + log_a)[:, None], axis=0)
    plan = np.exp(kernel + f[:, None] + g[None, :] + log_a + log_b)
    return plan, violation, n_iter


def _sinkhorn_scaling(kernel, max_iter, tol):
    """Same iterates as :func:`_sinkhorn_log` with ``u = exp(f)``, ``v = exp(g)``.

    Returns None when a scaling leaves the floating-point range.
    """
    n, m = kernel.shape
    K = np.exp(kernel)
    Kt = np.ascontiguousarray(K.T)
    a = 1.0 / n
    b = 1.0 / m
    u = np.ones(n)
    v = np.ones(m)
    violation = np.inf
    n_iter = 0
    with np.errstate(all="ignore"):
        for n_iter in range(1, max_iter + 1):
            u_new = 1.0 / (K @ (v * b))
            if not np.all(np.isfinite(u_new)):
                return None
            if n_iter > 1:
                violation = float(np.sum(np.abs(u / u_new - 1.0))) / n
                if violation < tol:
                    break
            u = u_new
            v = 1.0 / (Kt @ (u * a))
            if not np.all(np.isfinite(v)):
                return None
        plan = (u * a)[:, None] * K * (v * b)[None, :]
    if not np.all(np.isfinite(plan)):
        return None
    return plan, violation, n_iter


def sinkhorn_plan(cost, epsilon: float, max_iter: int, tol: float):
    """Sinkhorn iterations with uniform marginals.

    Row and column minima of the cost are absorbed first, so every row and
    column of ``exp(-cost / epsilon)`` holds a 1. Plain scaling runs on that
    kernel; if a scaling overflows, the log-domain recursion is used instead.
    Returns ``(plan, violation, n_iter)`` where ``violation`` is the L1 error
    of the row marginal of the returned plan.
    """
    shifted = cost - cost.min(axis=1, keepdims=True)
    shifted = shifted - shifted.min(axis=0, keepdims=True)
    kernel = -shifted / epsilon
    out = _sinkhorn_scaling(kernel, max_iter, tol)
    if out is None:
        out = _sinkhorn_log(kernel, max_iter, tol)
    return out


def sinkhorn_distance(X, Y, p: float = 2.0, cfg: SinkhornConfig | None = None) -> float:
    """Transport cost ``<P, C> ** (1/p)`` of the entropic optimal plan."""
    cfg = cfg or SinkhornConfig()
    x, y = _check_pair(X, Y)
    cost = _cost_matrix(x, y, p)
    if cfg.epsilon_scale == "max":
        ref = float(cost.max())
    elif cfg.epsilon_scale == "median":
        ref = float(np.median(cost))
    else:
        ref = 1.0
    if not cost.any():
        return 0.0
    if ref == 0.0:
        ref = float(cost.max())
    plan, violation, n_iter = sinkhorn_plan(cost, cfg.epsilon * ref, cfg.max_iter, cfg.tol)
    if violation >= cfg.tol and cfg.strict:
        raise NoConvergence(
            f"Sinkhorn stopped after {n_iter} iterations with marginal violation {violation:.3e}",
            violation=violation,
            n_iter=n_iter,
        )
    return float(np.sum(plan * cost)) ** (1.0 / p)
