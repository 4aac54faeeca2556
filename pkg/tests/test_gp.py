import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from treebo import (
    Dataset, DependencyForest, HyperParams, PosteriorState, additive_gram, component_posterior,
    fit_hyperparameters, lml_gradient, log_marginal_likelihood,
)
from treebo.domain import components_of

from conftest import random_forest


def random_problem(rng, n_max=20, d_max=6):
    D = int(rng.integers(1, d_max + 1))
    n = int(rng.integers(1, n_max + 1))
    X = rng.random((n, D))
    y = rng.normal(size=n)
    p = HyperParams(rng.uniform(0.15, 1.0, D), rng.uniform(0.3, 2.0, D), rng.uniform(0.05, 0.5))
    return Dataset(X, y), random_forest(rng, D), p


def dense_lml(data, forest, p):
    """Explicit inverse and determinant."""
    n = len(data)
    A = additive_gram(data.points, forest, p) + p.noise_std ** 2 * np.eye(n)
    y = data.values
    return -0.5 * y @ np.linalg.inv(A) @ y - 0.5 * math.log(np.linalg.det(A)) - 0.5 * n * math.log(2 * math.pi)


def test_prior_posterior_without_data():
    p = HyperParams([0.2, 0.2], [3.0, 4.0])
    state = PosteriorState(Dataset.empty(2), DependencyForest.from_edges(2, [(0, 1)]), p)
    assert component_posterior(state, (0, 1), [0.3, 0.3]) == (0.0, 5.0)


def test_interpolation_with_tiny_noise():
    X = np.array([[0.1], [0.5], [0.9]])
    y = np.array([0.3, -1.2, 0.8])
    state = PosteriorState(Dataset(X, y), DependencyForest.empty(1), HyperParams([0.2], [1.0], 1e-6))
    mean, var = component_posterior(state, (0,), X)
    assert np.allclose(mean, y, atol=1e-6)
    assert np.all(var < 1e-6)


@pytest.mark.parametrize("seed", range(50))
def test_component_means_sum_to_full_gp_mean(seed):
    rng = np.random.default_rng(seed)
    data, forest, p = random_problem(rng)
    Xs = rng.random((8, data.dim))
    A = additive_gram(data.points, forest, p) + p.noise_std ** 2 * np.eye(len(data))
    full = additive_gram(Xs, forest, p, data.points) @ np.linalg.solve(A, data.values)
    state = PosteriorState(data, forest, p)
    total = sum(component_posterior(state, g, Xs)[0] for g in components_of(forest))
    assert np.max(np.abs(total - full)) <= 1e-8
    for g in components_of(forest):
        var = component_posterior(state, g, Xs)[1]
        assert np.all(var <= math.sqrt(sum(p.scale_components[i] ** 2 for i in g)) + 1e-9)
    assert state.n_factorizations == 1


def test_lml_single_zero_observation():
    p = HyperParams([0.3, 0.3], [0.5, 0.5], 0.1)
    data = Dataset(np.array([[0.2, 0.4]]), np.array([0.0]))
    k0 = 1.0
    expected = -0.5 * math.log(k0 + 0.01) - 0.5 * math.log(2 * math.pi)
    assert log_marginal_likelihood(DependencyForest.empty(2), p, data) == pytest.approx(expected, rel=1e-12)
    with pytest.raises(ValueError):
        log_marginal_likelihood(DependencyForest.empty(2), p, Dataset.empty(2))


@pytest.mark.parametrize("seed", range(20))
def test_lml_matches_dense_determinant(seed):
    rng = np.random.default_rng(100 + seed)
    data, forest, p = random_problem(rng, n_max=6)
    assert log_marginal_likelihood(forest, p, data) == pytest.approx(dense_lml(data, forest, p), rel=1e-10, abs=1e-10)


def test_lml_decreases_when_quadratic_form_grows():
    rng = np.random.default_rng(5)
    data, forest, p = random_problem(rng, n_max=10)
    scaled = Dataset(data.points, 10 * data.values)
    assert log_marginal_likelihood(forest, p, scaled) < log_marginal_likelihood(forest, p, data)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_lml_permutation_invariant(seed):
    rng = np.random.default_rng(seed)
    data, forest, p = random_problem(rng)
    perm = rng.permutation(len(data))
    shuffled = Dataset(data.points[perm], data.values[perm])
    assert log_marginal_likelihood(forest, p, shuffled) == pytest.approx(
        log_marginal_likelihood(forest, p, data), rel=1e-10, abs=1e-10)


def fd_lml_grad(forest, p, data, h=1e-5):
    theta = p.to_log()
    out = np.zeros_like(theta)
    for k in range(theta.size):
        tp, tm = theta.copy(), theta.copy()
        tp[k] += h
        tm[k] -= h
        out[k] = (log_marginal_likelihood(forest, HyperParams.from_log(tp, p.noise_std), data)
                  - log_marginal_likelihood(forest, HyperParams.from_log(tm, p.noise_std), data)) / (2 * h)
    return out


@pytest.mark.parametrize("seed", range(20))
def test_lml_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(200 + seed)
    data, forest, p = random_problem(rng)
    g = lml_gradient(forest, p, data)
    fd = fd_lml_grad(forest, p, data)
    assert np.all(np.abs(g - fd) <= 1e-4 * np.maximum(np.abs(fd), 1e-2))


def test_gradient_structural_zero_for_constant_dimension():
    rng = np.random.default_rng(9)
    X = rng.random((8, 3))
    X[:, 2] = 0.4
    p = HyperParams([0.3, 0.3, 0.3], [1.0, 1.0, 1.0])
    g = lml_gradient(DependencyForest.from_edges(3, [(0, 1)]), p, Dataset(X, rng.normal(size=8)))
    assert g[2] == 0.0 and g[5] != 0.0


def sample_dataset(forest, p, n, seed):
    rng = np.random.default_rng(seed)
    X = rng.random((n, forest.dim))
    K = additive_gram(X, forest, p) + p.noise_std ** 2 * np.eye(n)
    return Dataset(X, np.linalg.cholesky(K) @ rng.normal(size=n))


def test_fit_recovers_lengthscales():
    forest = DependencyForest.from_edges(3, [(0, 1)])
    truth = HyperParams([0.2, 0.4, 0.3], [1.0, 1.0, 1.0], 0.1)
    data = sample_dataset(forest, truth, 100, seed=4)
    fit = fit_hyperparameters(data, forest, HyperParams.default(3, 0.1, 0.5, 0.1))
    assert np.all(np.abs(np.log(fit.lengthscales) - np.log(truth.lengthscales)) <= 0.5)
    assert np.linalg.norm(lml_gradient(forest, fit, data)) <= 1e-2 * len(data)


def test_fit_never_descends():
    forest = DependencyForest.empty(2)
    truth = HyperParams([0.3, 0.3], [0.8, 0.8], 0.1)
    data = sample_dataset(forest, truth, 40, seed=1)
    once = fit_hyperparameters(data, forest, truth)
    twice = fit_hyperparameters(data, forest, once)
    assert log_marginal_likelihood(forest, once, data) >= log_marginal_likelihood(forest, truth, data)
    assert log_marginal_likelihood(forest, twice, data) >= log_marginal_likelihood(forest, once, data) - 1e-12


def test_fit_repeated_input_does_not_crash():
    X = np.full((6, 2), 0.5)
    y = np.array([1.0, -1.0, 0.5, -0.5, 2.0, -2.0])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        fit = fit_hyperparameters(Dataset(X, y), DependencyForest.empty(2), HyperParams.default(2))
    assert np.all(np.isfinite(fit.to_log()))
    with pytest.raises(ValueError):
        fit_hyperparameters(Dataset(X[:1], y[:1]), DependencyForest.empty(2), HyperParams.default(2))
