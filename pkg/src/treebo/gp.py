"""Additive GP inference: per-component posteriors, log marginal likelihood,
its gradient, and hyperparameter fitting in log-space."""

from __future__ import annotations

import math
import warnings

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.optimize import minimize

from .domain import Dataset, DependencyForest, HyperParams, components_of
from .kernel import (
    NumericalDegeneracyError,
    _dimension_factors,
    _group_matrix,
    _sqdist_1d,
    component_scale,
    jitter_cholesky,
)

LOG_BOUNDS = (math.log(1e-3), math.log(1e3))


class PosteriorState:
    """Factorized additive GP conditioned on a dataset.

    The Cholesky factor of ``K + eta^2 I`` and ``(K + eta^2 I)^{-1} y`` are
    computed once, on first use, and reused by every posterior query.
    ``n_factorizations`` counts how often that happened.
    """

    def __init__(self, data: Dataset, forest: DependencyForest, params: HyperParams):
        self.data = data
        self.forest = forest
        self.params = params
        self.groups = components_of(forest)
        self.n_factorizations = 0
        self._chol = None
        self._alpha = None
        self.jitter = 0.0

    def _factorize(self):
        if self._chol is None:
            X = self.data.points
            E = _dimension_factors(X, X, self.params)
            K = np.zeros((len(self.data), len(self.data)))
            for g in self.groups:
                K += _group_matrix(g, E, self.params)
            L, self.jitter = jitter_cholesky(K, self.params.noise_std ** 2)
            self._chol = L
            self._alpha = cho_solve((L, True), self.data.values, check_finite=False)
            self.n_factorizations += 1
        return self._chol, self._alpha

    def cross_kernel(self, group, x_group) -> np.ndarray:
        """``k_G(x*, X)`` for points given in group coordinates, shape (m, n)."""
        x_group = np.asarray(x_group, dtype=float).reshape(-1, len(group))
        acc = np.zeros((x_group.shape[0], len(self.data)))
        for pos, i in enumerate(group):
            acc += _sqdist_1d(x_group[:, pos], self.data.points[:, i]) / self.params.lengthscales[i] ** 2
        return component_scale(group, self.params.scale_components) * np.exp(-0.5 * acc)

    def posterior(self, group, x_group):
        """Mean and variance of component ``group`` at points in group coordinates.

        ``x_group`` has shape ``(m, |G|)``; returns two ``(m,)`` arrays.
        """
        group = tuple(group)
        x_group = np.asarray(x_group, dtype=float).reshape(-1, len(group))
        prior = component_scale(group, self.params.scale_components)
        m = x_group.shape[0]
        if len(self.data) == 0:
            return np.zeros(m), np.full(m, prior)
        L, alpha = self._factorize()
        k = self.cross_kernel(group, x_group)
        mean = k @ alpha
        v = solve_triangular(L, k.T, lower=True, check_finite=False)
        var = prior - np.einsum("ij,ij->j", v, v)
        return mean, np.maximum(var, 0.0)


def component_posterior(state: PosteriorState, group, x_star):
    """Posterior ``(mean, variance)`` of one component at full ``D``-vectors.

    Scalars are returned for a single point, arrays for an ``(m, D)`` batch.
    """
    x_star = np.asarray(x_star, dtype=float)
    single = x_star.ndim == 1
    X = np.atleast_2d(x_star)
    mean, var = state.posterior(group, X[:, list(group)])
    if single:
        return float(mean[0]), float(var[0])
    return mean, var


def _lml(X, y, groups, params: HyperParams, with_grad: bool):
    n, D = X.shape
    E = _dimension_factors(X, X, params)
    mats = [_group_matrix(g, E, params) for g in groups]
    K = np.sum(mats, axis=0) if mats else np.zeros((n, n))
    L, _ = jitter_cholesky(K, params.noise_std ** 2)
    alpha = cho_solve((L, True), y, check_finite=False)
    rho = -0.5 * y @ alpha - np.sum(np.log(np.diag(L))) - 0.5 * n * math.log(2 * math.pi)
    if not with_grad:
        return float(rho), None
    W = np.outer(alpha, alpha) - cho_solve((L, True), np.eye(n), check_finite=False)
    ls = params.lengthscales
    sc = params.scale_components
    grad = np.zeros(2 * D)
    for g, Kg in zip(groups, mats):
        WK = W * Kg
        total = WK.sum()
        sg2 = sum(sc[i] ** 2 for i in g)
        for i in g:
            grad[i] += 0.5 * np.sum(WK * _sqdist_1d(X[:, i], X[:, i])) / ls[i] ** 2
            grad[D + i] += 0.5 * total * sc[i] ** 2 / sg2
    return float(rho), grad


def _groups_for(forest):
    return forest if isinstance(forest, list) else components_of(forest)


def log_marginal_likelihood(forest, params: HyperParams, data: Dataset) -> float:
    if len(data) < 1:
        raise ValueError("log marginal likelihood needs at least one observation")
    return _lml(data.points, data.values, _groups_for(forest), params, False)[0]


def lml_gradient(forest, params: HyperParams, data: Dataset) -> np.ndarray:
    """Gradient of the log marginal likelihood w.r.t. ``HyperParams.to_log()``.

    The noise std is held fixed and has no entry.
    """
    if len(data) < 1:
        raise ValueError("log marginal likelihood needs at least one observation")
    return _lml(data.points, data.values, _groups_for(forest), params, True)[1]


def fit_hyperparameters(data: Dataset, forest, init: HyperParams, max_iter: int = 100,
                        gtol: float = 1e-5) -> HyperParams:
    """Maximize the log marginal likelihood over log-lengthscales and log-scales.

    Uses L-BFGS-B inside the box ``[log 1e-3, log 1e3]``. The result never
    scores below ``init``; if the optimizer cannot improve, ``init`` is
    returned and a ``RuntimeWarning`` is issued when it failed outright.
    """
    if len(data) < 2:
        raise ValueError("fitting needs at least two observations")
    groups = _groups_for(forest)
    X, y = data.points, data.values
    eta = init.noise_std

    def objective(theta):
        try:
            rho, grad = _lml(X, y, groups, HyperParams.from_log(theta, eta), True)
        except NumericalDegeneracyError:
            return 1e25, np.zeros_like(theta)
        if not np.isfinite(rho):
            return 1e25, np.zeros_like(theta)
        return -rho, -grad

    theta0 = np.clip(init.to_log(), *LOG_BOUNDS)
    try:
        rho0 = -objective(init.to_log())[0]
    except NumericalDegeneracyError:
        rho0 = -np.inf
    res = minimize(objective, theta0, jac=True, method="L-BFGS-B",
                   bounds=[LOG_BOUNDS] * theta0.size,
                   options={"maxiter": max_iter, "gtol": gtol})
    if not np.all(np.isfinite(res.x)) or -res.fun < rho0:
        if not res.success:
            warnings.warn(f"hyperparameter fit failed: {res.message}", RuntimeWarning, stacklevel=2)
        return init
    return HyperParams.from_log(res.x, eta)
