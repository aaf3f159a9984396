"""Minimum (expected) Sliced-Wasserstein estimators.

Functional entry points :func:`fit_mswe`, :func:`fit_meswe` and
:func:`fit_mewe` return an :class:`~swest.optim.EstimateResult`; the
:class:`MSWE` and :class:`MESWE` classes wrap them behind the scikit-learn
estimator protocol (``fit``, ``get_params``/``set_params``, ``score``).

Gaussian fits optimize ``(m, log sigma2)`` internally so the variance stays
positive; results are reported as ``(m, sigma2)``.
"""

from __future__ import annotations

import time
from dataclasses import asdict

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .measures import as_points, project_sorted
from .models import (
    ECSLocationParams,
    GaussianParams,
    draw_base,
    reparametrized_sample,
    sample_model,
)
from .objectives import (
    meswe_objective,
    meswe_value_and_grad,
    mswe_gaussian_value_and_grad,
)
from .optim import AdamConfig, NelderMeadConfig, adam_minimize, nelder_mead_minimize
from .sampling import RngStream, as_generator, sample_projections
from .transport import SinkhornConfig, sinkhorn_distance, sw_distance, w_exact_assignment

METHODS = ("adam", "nelder-mead")


def _model_template(model, d, alpha):
    if model == "gaussian":
        return GaussianParams(np.zeros(d), 1.0)
    if model == "ecs":
        return ECSLocationParams(np.zeros(d), alpha)
    raise ValueError(f"unknown model {model!r}; expected 'gaussian' or 'ecs'")


def _to_internal(params):
    if isinstance(params, GaussianParams):
        return np.concatenate([params.m, [np.log(params.sigma2)]])
    return params.m.copy()


def _from_internal(template, phi):
    if isinstance(template, GaussianParams):
        return GaussianParams(phi[:-1], float(np.exp(phi[-1])))
    return template.with_location(phi)


def _chain_rule(params, grad):
    """Map a gradient in (m, sigma2) to one in (m, log sigma2)."""
    if isinstance(params, GaussianParams):
        grad = grad.copy()
        grad[-1] *= params.sigma2
    return grad


def _initial_params(template, theta0):
    if theta0 is None:
        return template
    if isinstance(theta0, (GaussianParams, ECSLocationParams)):
        return theta0
    theta0 = np.asarray(theta0, dtype=float)
    if isinstance(template, GaussianParams):
        return GaussianParams.from_vector(theta0)
    return template.with_location(theta0)


def _seed_of(rng):
    if isinstance(rng, RngStream):
        return rng.seed
    if isinstance(rng, (int, np.integer)):
        return int(rng)
    return None


def _check_method(method):
    if method not in METHODS:
        raise ValueError(f"unknown optimizer {method!r}; expected one of {METHODS}")


def _finish(result, template, snapshot, rng, start):
    result.theta_hat = _from_internal(template, result.theta_hat).to_vector()
    result.config = {**snapshot, "optimizer": result.config}
    result.seed = _seed_of(rng)
    result.wall_time = time.perf_counter() - start
    return result


def fit_mswe(Y, *, p=2.0, n_projections=1, n_levels=1000, method="adam",
             adam=None, nelder_mead=None, crn=True, theta0=None, rng=None):
    """Minimum Sliced-Wasserstein estimate for the isotropic Gaussian model.

    The model side uses the analytic projected normal CDF; ``n_levels``
    model draws per direction feed the Monte Carlo 1D transport. ADAM draws
    fresh directions and draws at every step. Nelder-Mead keeps them fixed
    when ``crn`` is true and redraws them per evaluation otherwise.
    """
    _check_method(method)
    start = time.perf_counter()
    y = as_points(Y)
    d = y.shape[1]
    gen = as_generator(rng)
    template = _initial_params(GaussianParams(np.zeros(d), 1.0), theta0)
    snapshot = {
        "estimator": "mswe", "model": "gaussian", "p": p, "n_projections": n_projections,
        "n_levels": n_levels, "method": method, "crn": crn,
    }

    def draw():
        proj = sample_projections(d, n_projections, gen)
        eps = gen.standard_normal((n_projections, n_levels))
        return proj, eps

    if method == "adam":
        def value_and_grad(phi):
            params = _from_internal(template, phi)
            proj, eps = draw()
            y_sorted = project_sorted(y, proj.directions)
            value, grad = mswe_gaussian_value_and_grad(params, y, proj, eps, p, y_sorted)
            return value, _chain_rule(params, grad)

        result = adam_minimize(value_and_grad, _to_internal(template), adam)
    else:
        fixed = draw() if crn else None
        y_sorted = project_sorted(y, fixed[0].directions) if crn else None

        def value(phi):
            proj, eps = fixed if crn else draw()
            params = _from_internal(template, phi)
            return mswe_gaussian_value_and_grad(params, y, proj, eps, p, y_sorted)[0]

        result = nelder_mead_minimize(value, _to_internal(template), nelder_mead)
    return _finish(result, template, snapshot, rng, start)


def fit_meswe(Y, model="gaussian", *, alpha=1.8, n_generated=None, n_datasets=1, p=2.0,
              n_projections=1, n_levels=1000, method="adam", adam=None, nelder_mead=None,
              crn=True, theta0=None, rng=None):
    """Minimum expected Sliced-Wasserstein estimate.

    ``n_generated`` (default: number of observations) samples per generated
    dataset, ``n_datasets`` datasets per objective evaluation. ADAM uses the
    quantile-grid objective with ``n_levels`` uniform levels per direction;
    Nelder-Mead uses exact 1D transport. With ``crn`` the base noise is drawn
    once per fit (and, for Nelder-Mead, the directions too).
    """
    _check_method(method)
    start = time.perf_counter()
    y = as_points(Y)
    n, d = y.shape
    m_gen = int(n_generated or n)
    gen = as_generator(rng)
    template = _initial_params(_model_template(model, d, alpha), theta0)
    snapshot = {
        "estimator": "meswe", "model": model, "alpha": alpha if model == "ecs" else None,
        "p": p, "n_generated": m_gen, "n_datasets": n_datasets,
        "n_projections": n_projections, "n_levels": n_levels, "method": method, "crn": crn,
    }

    def bases():
        return [draw_base(template, m_gen, gen) for _ in range(n_datasets)]

    cached = bases() if crn else None

    if method == "adam":
        def value_and_grad(phi):
            params = _from_internal(template, phi)
            proj = sample_projections(d, n_projections, gen)
            t = gen.uniform(0.0, 1.0, (n_projections, n_levels))
            y_sorted = project_sorted(y, proj.directions)
            total, grad = 0.0, 0.0
            for base in cached if crn else bases():
                v, g = meswe_value_and_grad(params, y, base, proj, t, p, y_sorted)
                total += v
                grad = grad + g
            return total / n_datasets, _chain_rule(params, grad / n_datasets)

        result = adam_minimize(value_and_grad, _to_internal(template), adam)
    else:
        proj_fixed = sample_projections(d, n_projections, gen) if crn else None

        def value(phi):
            params = _from_internal(template, phi)
            if crn:
                return meswe_objective(params, y, cached, proj_fixed, p)
            return meswe_objective(params, y, bases(), sample_projections(d, n_projections, gen), p)

        result = nelder_mead_minimize(value, _to_internal(template), nelder_mead)
    return _finish(result, template, snapshot, rng, start)


def fit_mewe(Y, model="ecs", *, solver="exact", alpha=1.8, n_generated=None, n_datasets=1,
             p=2.0, nelder_mead=None, sinkhorn=None, crn=True, theta0=None, rng=None, cap=512):
    """Minimum expected Wasserstein estimate by Nelder-Mead.

    ``solver`` is ``"exact"`` (assignment) or ``"sinkhorn"``; the objective is
    ``(1/R) sum_r W_p^p(Y, Z_r)``.
    """
    if solver not in ("exact", "sinkhorn"):
        raise ValueError(f"unknown solver {solver!r}")
    start = time.perf_counter()
    y = as_points(Y)
    n, d = y.shape
    m_gen = int(n_generated or n)
    gen = as_generator(rng)
    template = _initial_params(_model_template(model, d, alpha), theta0)
    sk_cfg = sinkhorn or SinkhornConfig()
    snapshot = {
        "estimator": "mewe", "solver": solver, "model": model,
        "alpha": alpha if model == "ecs" else None, "p": p, "n_generated": m_gen,
        "n_datasets": n_datasets, "method": "nelder-mead", "crn": crn,
        "sinkhorn": asdict(sk_cfg) if solver == "sinkhorn" else None,
    }

    def bases():
        return [draw_base(template, m_gen, gen) for _ in range(n_datasets)]

    cached = bases() if crn else None

    def distance_power(z):
        if solver == "exact":
            return w_exact_assignment(y, z, p, cap) ** p
        return sinkhorn_distance(y, z, p, sk_cfg) ** p

    def value(phi):
        params = _from_internal(template, phi)
        draws = cached if crn else bases()
        return sum(distance_power(reparametrized_sample(params, b)) for b in draws) / len(draws)

    result = nelder_mead_minimize(value, _to_internal(template), nelder_mead)
    return _finish(result, template, snapshot, rng, start)


def _rng_from_state(random_state):
    if isinstance(random_state, (RngStream, np.random.Generator)):
        return random_state
    return RngStream(0 if random_state is None else int(random_state))


def _optimizer_configs(optimizer, lr, max_iter):
    if optimizer == "adam":
        return {"adam": AdamConfig(lr=lr, iters=max_iter)}
    return {"nelder_mead": NelderMeadConfig(max_iters=max_iter)}


class _BaseSWEstimator(BaseEstimator):
    def _validate(self, X, reset=True):
        X = check_array(X, dtype=np.float64, ensure_min_samples=1)
        if reset:
            self.n_features_in_ = X.shape[1]
        elif X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, but {type(self).__name__} "
                f"was fitted with {self.n_features_in_}"
            )
        return X

    def _store(self, result, template):
        self.result_ = result
        self.params_ = _initial_params(template, result.theta_hat)
        self.location_ = self.params_.m.copy()
        if isinstance(self.params_, GaussianParams):
            self.variance_ = self.params_.sigma2
        self.n_iter_ = result.n_iter

    def sample(self, n_samples=1, random_state=None):
        """Draw ``n_samples`` points from the fitted model."""
        check_is_fitted(self, "params_")
        return sample_model(self.params_, n_samples, _rng_from_state(random_state)).points

    def score(self, X, y=None, n_projections=100, random_state=0):
        """Negative SW distance between ``X`` and a same-size model sample."""
        check_is_fitted(self, "params_")
        X = self._validate(X, reset=False)
        gen = as_generator(_rng_from_state(random_state))
        z = sample_model(self.params_, X.shape[0], gen)
        proj = sample_projections(X.shape[1], n_projections, gen)
        return -sw_distance(X, z, proj, self.p)


class MSWE(_BaseSWEstimator):
    """Minimum Sliced-Wasserstein estimator for N(m, sigma2 I).

    Parameters
    ----------
    p : float
        Order of the Sliced-Wasserstein distance.
    n_projections : int
        Directions per objective evaluation.
    n_levels : int
        Model draws per direction in the 1D transport approximation.
    optimizer : {"adam", "nelder-mead"}
    lr : float
        ADAM step size (ignored by Nelder-Mead).
    max_iter : int
    crn : bool
        Freeze randomness across Nelder-Mead evaluations.
    init : array-like of shape (d + 1,), optional
        Starting ``(m, sigma2)``; defaults to ``(0, 1)``.
    random_state : int, RngStream or Generator, optional

    Attributes
    ----------
    location_ : ndarray of shape (d,)
    variance_ : float
    result_ : EstimateResult
    """

    def __init__(self, p=2.0, n_projections=1, n_levels=1000, optimizer="adam", lr=1e-3,
                 max_iter=5000, crn=True, init=None, random_state=None):
        self.p = p
        self.n_projections = n_projections
        self.n_levels = n_levels
        self.optimizer = optimizer
        self.lr = lr
        self.max_iter = max_iter
        self.crn = crn
        self.init = init
        self.random_state = random_state

    def fit(self, X, y=None):
        X = self._validate(X)
        result = fit_mswe(
            X, p=self.p, n_projections=self.n_projections, n_levels=self.n_levels,
            method=self.optimizer, crn=self.crn, theta0=self.init,
            rng=_rng_from_state(self.random_state),
            **_optimizer_configs(self.optimizer, self.lr, self.max_iter),
        )
        self._store(result, GaussianParams(np.zeros(X.shape[1]), 1.0))
        return self


class MESWE(_BaseSWEstimator):
    """Minimum expected Sliced-Wasserstein estimator.

    Parameters
    ----------
    model : {"gaussian", "ecs"}
        Isotropic Gaussian (location and variance) or elliptically contoured
        stable with identity dispersion (location only).
    alpha : float
        Tail index of the ECS model.
    n_generated : int, optional
        Size of each generated dataset; defaults to the number of samples.
    n_datasets : int
        Generated datasets averaged per objective evaluation.
    p, n_projections, n_levels, optimizer, lr, max_iter, crn, init, random_state
        As in :class:`MSWE`.
    """

    def __init__(self, model="gaussian", alpha=1.8, n_generated=None, n_datasets=1, p=2.0,
                 n_projections=1, n_levels=1000, optimizer="adam", lr=1e-3, max_iter=5000,
                 crn=True, init=None, random_state=None):
        self.model = model
        self.alpha = alpha
        self.n_generated = n_generated
        self.n_datasets = n_datasets
        self.p = p
        self.n_projections = n_projections
        self.n_levels = n_levels
        self.optimizer = optimizer
        self.lr = lr
        self.max_iter = max_iter
        self.crn = crn
        self.init = init
        self.random_state = random_state

    def fit(self, X, y=None):
        X = self._validate(X)
        result = fit_meswe(
            X, self.model, alpha=self.alpha, n_generated=self.n_generated,
            n_datasets=self.n_datasets, p=self.p, n_projections=self.n_projections,
            n_levels=self.n_levels, method=self.optimizer, crn=self.crn, theta0=self.init,
            rng=_rng_from_state(self.random_state),
            **_optimizer_configs(self.optimizer, self.lr, self.max_iter),
        )
        self._store(result, _model_template(self.model, X.shape[1], self.alpha))
        return self
