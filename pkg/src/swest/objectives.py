"""MSWE / MESWE objectives and their gradients.

All objectives return the power-p quantity ``SW_p^p`` (averaged over
projections and Monte Carlo levels), which is what the gradients below
differentiate. Gradients are taken with the random inputs held fixed:

* MSWE (Gaussian model, analytic projected CDF): ``s = <u, m> + sigma * eps``
  with ``eps`` fixed, matched to the data quantile at level ``Phi(eps)``.
* MESWE: generated sample ``m + sigma * base`` (Gaussian) or ``base + m``
  (ECS location), compared with the data through interpolated quantiles at
  fixed levels ``t``.

Residuals enter the gradients with their sign; ``p`` may be any order >= 1.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtr

from .measures import as_points, as_projection_set, interp_quantile, project_sorted
from .exceptions import ShapeMismatch
from .models import ECSLocationParams, GaussianParams, reparametrized_sample
from .sampling import as_generator
from .transport import sw_power


def _residual_weights(r, p):
    """d|r|^p / dr, already divided by the number of terms."""
    if p == 2:
        g = 2.0 * r
    elif p == 1:
        g = np.sign(r)
    else:
        g = p * np.abs(r) ** (p - 1) * np.sign(r)
    return g / r.size


def mswe_gaussian_value_and_grad(params: GaussianParams, Y, proj, eps, p=2.0, y_sorted=None):
    """Objective and gradient of the analytic-CDF MSWE for the Gaussian model.

    Parameters
    ----------
    params : GaussianParams
    Y : array-like or EmpiricalMeasure, shape (n, d)
    proj : ProjectionSet or array, shape (L, d)
    eps : array, shape (L, K)
        Standard normal draws; ``s = <u, m> + sigma * eps`` are the model
        samples along each direction.
    y_sorted : array, shape (L, n), optional
        Pre-sorted projections of ``Y`` on ``proj``.

    Returns
    -------
    value : float
    grad : array, shape (d + 1,)
        Derivatives with respect to ``m`` then ``sigma2``.
    """
    dirs = as_projection_set(proj).directions
    eps = np.atleast_2d(np.asarray(eps, dtype=float))
    if y_sorted is None:
        y_sorted = project_sorted(as_points(Y), dirs)
    sigma = params.sigma
    loc = dirs @ params.m
    s = loc[:, None] + sigma * eps
    levels = ndtr((s - loc[:, None]) / sigma)
    r = s - interp_quantile(y_sorted, levels)
    value = float(np.mean(np.abs(r) ** p))
    g = _residual_weights(r, p)
    grad_m = g.sum(axis=1) @ dirs
    grad_sigma2 = float(np.sum(g * eps)) / (2.0 * sigma)
    return value, np.concatenate([grad_m, [grad_sigma2]])


def mswe_objective_gaussian(params: GaussianParams, Y, proj, K: int, rng, p=2.0) -> float:
    """Analytic-CDF MSWE objective with K fresh model draws per direction."""
    L = as_projection_set(proj).L
    eps = as_generator(rng).standard_normal((L, int(K)))
    return mswe_gaussian_value_and_grad(params, Y, proj, eps, p)[0]


def grad_mswe_gaussian(params: GaussianParams, Y, proj, eps, p=2.0):
    """``(grad_m, grad_sigma2)`` of the MSWE objective at fixed ``eps``."""
    grad = mswe_gaussian_value_and_grad(params, Y, proj, eps, p)[1]
    return grad[:-1], float(grad[-1])


def mswe_gaussian_density_term(params: GaussianParams, Y, proj, n_grid=2001, width=8.0):
    """Quadrature of ``int |s - Q_Y(F(s))|^2 grad_theta p_theta(s) ds``.

    This is the density-derivative part of the MSWE gradient (it treats
    the data quantile ``Q_Y(F(s))`` as fixed in theta). It omits the term
    coming from the dependence of ``F`` on theta and so differs from the
    full gradient; kept as a diagnostic to compare against
    :func:`grad_mswe_gaussian`.
    """
    dirs = as_projection_set(proj).directions
    y_sorted = project_sorted(as_points(Y), dirs)
    sigma2 = params.sigma2
    sigma = params.sigma
    z = np.linspace(-width, width, n_grid)
    dz = z[1] - z[0]
    loc = dirs @ params.m
    s = loc[:, None] + sigma * z[None, :]
    h = (s - interp_quantile(y_sorted, np.broadcast_to(ndtr(z), s.shape))) ** 2
    dens = np.exp(-0.5 * z**2) / np.sqrt(2 * np.pi) / sigma
    ds = sigma * dz
    w_m = h * dens * (z / sigma)[None, :] * ds
    w_s = h * dens * (0.5 / sigma2) * (z**2 - 1.0)[None, :] * ds
    L = dirs.shape[0]
    grad_m = w_m.sum(axis=1) @ dirs / L
    grad_sigma2 = float(w_s.sum()) / L
    return grad_m, grad_sigma2


def meswe_value_and_grad(params, Y, base, proj, t, p=2.0, y_sorted=None):
    """Quantile-grid MESWE objective and gradient for one generated dataset.

    Parameters
    ----------
    params : GaussianParams or ECSLocationParams
    Y : array-like, shape (n, d)
    base : array, shape (m, d)
        Cached base noise (see :func:`swest.models.draw_base`).
    proj : ProjectionSet or array, shape (L, d)
    t : array, shape (K,) or (L, K)
        Quantile levels in [0, 1].

    Returns
    -------
    value : float
    grad : array
        Same layout as ``params.to_vector()``.
    """
    dirs = as_projection_set(proj).directions
    t = np.asarray(t, dtype=float)
    if y_sorted is None:
        y_sorted = project_sorted(as_points(Y), dirs)
    base = np.asarray(base, dtype=float)
    if base.ndim != 2 or base.shape[1] != params.d:
        raise ShapeMismatch(f"base noise of shape {base.shape} does not match d = {params.d}")
    # projections are affine in the parameters, so sort the base once
    loc = dirs @ params.m
    scale = params.sigma if isinstance(params, GaussianParams) else 1.0
    qz = loc[:, None] + scale * interp_quantile(project_sorted(base, dirs), t)
    r = qz - interp_quantile(y_sorted, t)
    value = float(np.mean(np.abs(r) ** p))
    g = _residual_weights(r, p)
    grad_m = g.sum(axis=1) @ dirs
    if isinstance(params, GaussianParams):
        grad_sigma2 = float(np.sum(g * (qz - loc[:, None]))) / (2.0 * params.sigma2)
        return value, np.concatenate([grad_m, [grad_sigma2]])
    if isinstance(params, ECSLocationParams):
        return value, grad_m
    raise TypeError(f"unknown model parameters {type(params).__name__}")


def grad_meswe_location(params, Y, proj, t, base, p=2.0) -> np.ndarray:
    """Gradient of the quantile-grid MESWE objective with respect to ``m``."""
    grad = meswe_value_and_grad(params, Y, base, proj, t, p)[1]
    return grad[: params.d]


def meswe_objective(params, Y, bases, proj, p=2.0) -> float:
    """``(1/R) sum_r SW_p^p(Y, Z_r)`` with exact 1D transport.

    ``bases`` is a sequence of R cached base-noise arrays; each yields one
    generated dataset via :func:`swest.models.reparametrized_sample`.
    """
    total = 0.0
    for base in bases:
        z = reparametrized_sample(params, base)
        total += float(np.mean(sw_power(Y, z, proj, p)))
    return total / len(bases)
