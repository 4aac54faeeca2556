"""RBF-ARD component kernels with per-dimension scale components.

A component over the variable group ``G`` is

    k_G(x, x') = s_G * exp(-0.5 * sum_{i in G} (x_i - x'_i)^2 / l_i^2),
    s_G = sqrt(sum_{i in G} s_i^2),

and the additive kernel is the sum of the components of a forest. The
amplitude ``s_G`` enters linearly (not squared).
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import cho_factor

from .domain import DependencyForest, HyperParams, components_of


class NumericalDegeneracyError(np.linalg.LinAlgError):
    """Kernel matrix could not be factorized even after adding jitter."""


def component_scale(group, scale_components) -> float:
    if len(group) == 0:
        raise ValueError("empty variable group")
    s = np.asarray(scale_components, dtype=float)[list(group)]
    return float(np.sqrt(np.sum(s * s)))


def kernel_eval(group, x_g, x2_g, params: HyperParams) -> float:
    """Component kernel at two sub-vectors indexed by ``group``."""
    idx = list(group)
    x_g = np.atleast_1d(np.asarray(x_g, dtype=float))
    x2_g = np.atleast_1d(np.asarray(x2_g, dtype=float))
    if x_g.shape != (len(idx),) or x2_g.shape != (len(idx),):
        raise ValueError("sub-vector length does not match the group size")
    r = (x_g - x2_g) / params.lengthscales[idx]
    return component_scale(group, params.scale_components) * float(np.exp(-0.5 * r @ r))


def _sqdist_1d(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = a[:, None] - b[None, :]
    return d * d


def component_gram(group, A, B, params: HyperParams) -> np.ndarray:
    """``k_G`` between the rows of ``A`` (m, D) and ``B`` (n, D)."""
    A = np.atleast_2d(A)
    B = np.atleast_2d(B)
    acc = np.zeros((A.shape[0], B.shape[0]))
    for i in group:
        acc += _sqdist_1d(A[:, i], B[:, i]) / params.lengthscales[i] ** 2
    return component_scale(group, params.scale_components) * np.exp(-0.5 * acc)


def additive_gram(points, forest, params: HyperParams, points2=None) -> np.ndarray:
    """Sum of component Gram matrices over the groups of ``forest``.

    ``forest`` may also be a plain list of groups, which lets callers build
    kernels for non-tree structures.
    """
    X = np.atleast_2d(np.asarray(points, dtype=float))
    Y = X if points2 is None else np.atleast_2d(np.asarray(points2, dtype=float))
    groups = forest if isinstance(forest, list) else components_of(forest)
    E = _dimension_factors(X, Y, params)
    K = np.zeros((X.shape[0], Y.shape[0]))
    for g in groups:
        K += _group_matrix(g, E, params)
    return K


def _dimension_factors(X, Y, params):
    """Per-dimension ``exp(-0.5 (x_i - y_i)^2 / l_i^2)`` matrices."""
    return [
        np.exp(-0.5 * _sqdist_1d(X[:, i], Y[:, i]) / params.lengthscales[i] ** 2)
        for i in range(X.shape[1])
    ]


def _group_matrix(group, E, params):
    scale = component_scale(group, params.scale_components)
    if len(group) == 1:
        return scale * E[group[0]]
    return scale * (E[group[0]] * E[group[1]])


def kernel_grad(points, forest, params: HyperParams) -> np.ndarray:
    """Partial derivatives of ``additive_gram`` w.r.t. the log-parameters.

    Returns an array of shape ``(2D, n, n)``: entries ``0..D-1`` are
    ``dK/dlog l_i`` and ``D..2D-1`` are ``dK/dlog s_i``.
    """
    X = np.atleast_2d(np.asarray(points, dtype=float))
    n, D = X.shape
    ls = params.lengthscales
    sc = params.scale_components
    E = _dimension_factors(X, X, params)
    out = np.zeros((2 * D, n, n))
    for g in components_of(forest):
        Kg = _group_matrix(g, E, params)
        sg2 = sum(sc[i] ** 2 for i in g)
        for i in g:
            # d/dlog l_i of exp(-0.5 r^2/l^2) = r^2/l^2 * exp(...)
            out[i] += Kg * (_sqdist_1d(X[:, i], X[:, i]) / ls[i] ** 2)
            # s_G = sqrt(sum s_i^2): ds_G/dlog s_i = s_i^2 / s_G
            out[D + i] += Kg * (sc[i] ** 2 / sg2)
    return out


def jitter_cholesky(K: np.ndarray, noise_var: float = 0.0):
    """Lower Cholesky factor of ``K + noise_var*I`` with jitter escalation.

    Jitter starts at ``1e-8 * mean(diag)`` and grows tenfold up to
    ``1e-2 * mean(diag)``. Returns ``(L, jitter)``.
    """
    A = K + noise_var * np.eye(K.shape[0])
    try:
        L, _ = cho_factor(A, lower=True, check_finite=False)
        return np.tril(L), 0.0
    except np.linalg.LinAlgError:
        pass
    base = float(np.mean(np.diag(A)))
    if not np.isfinite(base) or base <= 0:
        base = 1.0
    jitter = 1e-8 * base
    while jitter <= 1e-2 * base * (1 + 1e-9):
        try:
            L, _ = cho_factor(A + jitter * np.eye(A.shape[0]), lower=True, check_finite=False)
            return np.tril(L), jitter
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise NumericalDegeneracyError("kernel matrix is not positive definite even with jitter")
