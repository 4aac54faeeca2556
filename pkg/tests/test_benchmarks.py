import json
import math

import numpy as np
import pytest
from scipy.optimize import minimize, minimize_scalar

from treebo.benchmarks import (
    HARTMANN6_ARGMAX, HARTMANN6_MAX, STYBTANG_ARGMAX_1D, STYBTANG_MAX_1D, GpSampleFunction,
    GridGpSampleFunction, StructureSpec, augment_aux, hartmann6, make_benchmark, make_structure,
    sample_gp_function, stybtang, with_noise,
)


def test_named_structures():
    star = make_structure("star", 25)
    assert star.sum() // 2 == 24 and np.all(star[0, 1:] == 1)
    grid = make_structure(StructureSpec("grid", rows=3))
    assert grid.shape == (9, 9) and grid.sum() // 2 == 12
    part = make_structure("partition", 12)
    assert part.sum() // 2 == 12
    assert all(part[b:b + 3, b:b + 3].sum() == 6 for b in range(0, 12, 3))
    for A in (star, grid, part, make_structure("grid", rows=2, cols=5)):
        assert np.array_equal(A, A.T) and not np.any(np.diag(A))
    with pytest.raises(ValueError):
        make_structure("partition", 10)


def test_gp_sample_consistency_and_determinism():
    f = sample_gp_function(make_structure("star", 5), seed=3)
    x = np.full(5, 0.3)
    assert f(x) == f(x)
    g = sample_gp_function(make_structure("star", 5), seed=3)
    assert g(x) == f(np.full(5, 0.3))


def test_gp_sample_marginal_variance():
    A = make_structure("star", 5)
    x0 = np.full(5, 0.5)
    values = np.array([GpSampleFunction(A, 1.0, 0.2, seed=s)(x0) for s in range(200)])
    expected = 4 * math.sqrt(2)
    assert abs(values.var(ddof=1) - expected) <= 0.2 * expected


def test_gp_sample_far_points_uncorrelated():
    A = make_structure("star", 5)
    a, b = [], []
    for s in range(200):
        f = GpSampleFunction(A, 1.0, 0.2, seed=s)
        a.append(f(np.zeros(5)))
        b.append(f(np.ones(5)))
    assert abs(np.corrcoef(a, b)[0, 1]) <= 3 / math.sqrt(200)


def test_gp_sample_replay():
    f = GpSampleFunction(make_structure("grid", rows=2), seed=7)
    rng = np.random.default_rng(0)
    for x in rng.random((15, 4)):
        f(x)
    clone = GpSampleFunction.from_state(json.loads(json.dumps(f.state_dict())))
    for x in rng.random((10, 4)):
        assert clone(x) == pytest.approx(f(x), rel=1e-9, abs=1e-9)


def test_grid_sample_exact_max_matches_enumeration():
    f = GridGpSampleFunction(make_structure("star", 3), levels=12, seed=1)
    grid = f.grid
    best = max(f(np.array([grid[0][i], grid[1][j], grid[2][k]]))
               for i in range(12) for j in range(12) for k in range(12))
    assert f.f_max == pytest.approx(best, abs=1e-9)
    tri = GridGpSampleFunction(make_structure("partition", 3), levels=8, seed=2)
    best = max(tri(np.array([tri.grid[0][i], tri.grid[1][j], tri.grid[2][k]]))
               for i in range(8) for j in range(8) for k in range(8))
    assert tri.f_max == pytest.approx(best, abs=1e-9)
    assert GridGpSampleFunction(make_structure("grid", rows=2), levels=5).f_max is None


def test_grid_sample_marginal_variance():
    A = make_structure("star", 5)
    values = [GridGpSampleFunction(A, levels=10, seed=s)(np.full(5, 0.5)) for s in range(200)]
    expected = 4 * math.sqrt(2)
    assert abs(np.var(values, ddof=1) - expected) <= 0.2 * expected


def test_stybtang_values_and_separability():
    assert stybtang(np.zeros(4)) == 0.0
    x = np.array([1.0, -2.0, 0.5])
    assert stybtang(x) == pytest.approx(sum(stybtang(v * e) for v, e in zip(x, np.eye(3))))


def test_stybtang_constants_against_grid_refine_oracle():
    g = np.linspace(-5, 5, 10001)
    vals = -0.5 * (g ** 4 - 16 * g ** 2 + 5 * g)
    k = int(np.argmax(vals))
    res = minimize_scalar(lambda v: 0.5 * (v ** 4 - 16 * v ** 2 + 5 * v),
                          bounds=(g[k - 1], g[k + 1]), method="bounded", options={"xatol": 1e-12})
    assert STYBTANG_ARGMAX_1D == pytest.approx(res.x, abs=1e-6)
    assert STYBTANG_MAX_1D == pytest.approx(-res.fun, abs=1e-9)
    assert stybtang(np.full(3, STYBTANG_ARGMAX_1D)) == pytest.approx(3 * STYBTANG_MAX_1D)


def test_hartmann6_against_multistart_oracle():
    rng = np.random.default_rng(0)
    best = -np.inf
    arg = None
    for x0 in rng.random((40, 6)):
        res = minimize(lambda x: -hartmann6(x), x0, method="L-BFGS-B", bounds=[(0, 1)] * 6)
        if -res.fun > best:
            best, arg = -res.fun, res.x
    assert HARTMANN6_MAX == pytest.approx(best, abs=1e-6)
    assert np.allclose(arg, HARTMANN6_ARGMAX, atol=1e-3)
    assert hartmann6(HARTMANN6_ARGMAX) == pytest.approx(HARTMANN6_MAX, abs=1e-5)


def test_augment_aux_ignores_extra_axes():
    b = make_benchmark("hartmann6_aux", aux=14)
    assert b.domain.dim == 20 and b.f.dim == 20
    rng = np.random.default_rng(1)
    x = rng.random(20)
    base = b.f(x)
    h = 1e-6
    for d in range(6, 20):
        xp, xm = x.copy(), x.copy()
        xp[d] += h
        xm[d] -= h
        assert (b.f(xp) - b.f(xm)) / (2 * h) == 0.0
        y = x.copy()
        y[d] = rng.random()
        assert b.f(y) == base
    with pytest.raises(ValueError):
        augment_aux(hartmann6, 2)(np.zeros(6))


def test_with_noise():
    f = lambda x: 1.25
    clean = with_noise(f, 0.0, np.random.default_rng(0))
    assert clean(np.zeros(2)) == 1.25 and clean.observe(None) == (1.25, 1.25)
    noisy = with_noise(f, 0.15, np.random.default_rng(1))
    draws = np.array([noisy(None) for _ in range(10_000)])
    assert abs(draws.mean() - 1.25) <= 4 * 0.15 / 100
    assert make_benchmark("gp_sample", structure="star", size=5).truth.noise_std == 0.15
    with pytest.raises(ValueError):
        with_noise(f, -1.0, np.random.default_rng(0))


def test_make_benchmark_kinds():
    b = make_benchmark("stybtang", dim=4)
    assert b.f_max == pytest.approx(4 * STYBTANG_MAX_1D)
    assert b.domain.dim == 4 and b.domain.lower[0] == -5
    grid_b = make_benchmark("gp_sample", structure="grid", rows=3, levels=10)
    assert grid_b.domain.dim == 9 and grid_b.f_max is None
    assert make_benchmark("gp_sample", structure="star", size=5, levels=10).f_max is not None
    with pytest.raises(ValueError):
        make_benchmark("nope")
