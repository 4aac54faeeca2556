"""Synthetic objectives: additive GP draws on named structures, Styblinski-Tang,
Hartmann6 with auxiliary dimensions, and a Gaussian noise wrapper.

All objectives are written for maximization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .domain import BoxDomain, DependencyForest, HyperParams, graph_components
from .kernel import _sqdist_1d, component_scale


# --------------------------------------------------------------------------
# dependency structures
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class StructureSpec:
    """``kind`` is ``star``, ``grid`` or ``partition``.

    ``size`` is the vertex count for star and partition; grids use
    ``rows`` x ``cols`` (``cols`` defaults to ``rows``).
    """

    kind: str
    size: int = 0
    rows: int = 0
    cols: int = 0


def make_structure(spec: StructureSpec | str, size: int | None = None, **kw) -> np.ndarray:
    """Adjacency matrix of a named dependency graph (not necessarily a forest).

    >>> int(make_structure("grid", rows=3).sum()) // 2
    12
    """
    if isinstance(spec, str):
        spec = StructureSpec(spec, size=size or 0, **kw)
    kind = spec.kind.lower()
    if kind == "star":
        n = spec.size
        if n < 2:
            raise ValueError("a star needs at least 2 vertices")
        A = np.zeros((n, n), dtype=np.int8)
        A[0, 1:] = A[1:, 0] = 1
        return A
    if kind == "grid":
        r = spec.rows or spec.size
        c = spec.cols or r
        if r < 1 or c < 1 or r * c < 2:
            raise ValueError("grid needs at least 2 vertices")
        A = np.zeros((r * c, r * c), dtype=np.int8)
        for a in range(r):
            for b in range(c):
                v = a * c + b
                if b + 1 < c:
                    A[v, v + 1] = A[v + 1, v] = 1
                if a + 1 < r:
                    A[v, v + c] = A[v + c, v] = 1
        return A
    if kind == "partition":
        n = spec.size
        if n < 3 or n % 3:
            raise ValueError("partition size must be a positive multiple of 3")
        A = np.zeros((n, n), dtype=np.int8)
        for base in range(0, n, 3):
            for i in range(3):
                for j in range(i + 1, 3):
                    A[base + i, base + j] = A[base + j, base + i] = 1
        return A
    raise ValueError(f"unknown structure kind {spec.kind!r}")


def _is_forest(adjacency) -> bool:
    try:
        DependencyForest(adjacency)
    except ValueError:
        return False
    return True


# --------------------------------------------------------------------------
# GP-sampled functions
# --------------------------------------------------------------------------

class GpSampleFunction:
    """One draw of an additive GP, materialized lazily by sequential conditioning.

    Each new query is sampled from the GP conditioned on every value returned
    so far, so the answers are jointly an exact GP sample. Repeated queries
    hit the cache. Points whose conditional variance is negligible are
    answered with the conditional mean and not stored.
    """

    def __init__(self, structure, sigma: float = 1.0, lengthscale: float = 0.2, seed=0,
                 domain: BoxDomain | None = None):
        self.structure = np.array(structure, dtype=np.int8)
        D = self.structure.shape[0]
        self.domain = BoxDomain.unit(D) if domain is None else domain
        self.params = HyperParams(np.full(D, lengthscale), np.full(D, sigma), 0.0)
        self.groups = graph_components(self.structure)
        self.prior_var = sum(component_scale(g, self.params.scale_components) for g in self.groups)
        self.rng = np.random.default_rng(seed)
        self.X = np.empty((0, D))
        self.f = np.empty(0)
        self._chol = np.empty((0, 0))
        self._w = np.empty(0)
        self._index: dict[bytes, int] = {}
        self.nugget = 1e-10 * self.prior_var

    @property
    def dim(self) -> int:
        return self.structure.shape[0]

    @property
    def f_max(self):
        return None

    def _k(self, x, X):
        out = np.zeros(X.shape[0])
        ls = self.params.lengthscales
        for g in self.groups:
            acc = np.zeros(X.shape[0])
            for i in g:
                acc += (X[:, i] - x[i]) ** 2 / ls[i] ** 2
            out += component_scale(g, self.params.scale_components) * np.exp(-0.5 * acc)
        return out

    def _condition(self, x):
        if self.f.size == 0:
            return np.empty(0), 0.0, self.prior_var
        l = solve_triangular(self._chol, self._k(x, self.X), lower=True, check_finite=False)
        return l, float(l @ self._w), self.prior_var - float(l @ l)

    def _store(self, x, l, mean, var, value):
        n = self.f.size
        d = math.sqrt(var + self.nugget)
        L = np.zeros((n + 1, n + 1))
        L[:n, :n] = self._chol
        L[n, :n] = l
        L[n, n] = d
        self._chol = L
        self._w = np.append(self._w, (value - mean) / d)
        self.X = np.vstack([self.X, x])
        self.f = np.append(self.f, value)
        self._index[x.tobytes()] = n

    def __call__(self, x) -> float:
        x = np.asarray(x, dtype=float).reshape(-1)
        hit = self._index.get(x.tobytes())
        if hit is not None:
            return float(self.f[hit])
        l, mean, var = self._condition(x)
        z = self.rng.standard_normal()
        if var <= self.nugget:
            return mean
        value = mean + math.sqrt(var) * z
        self._store(x, l, mean, var, value)
        return value

    def state_dict(self) -> dict:
        """JSON-friendly snapshot of the cache and generator state."""
        return {
            "structure": self.structure.tolist(),
            "sigma": float(self.params.scale_components[0]),
            "lengthscale": float(self.params.lengthscales[0]),
            "X": self.X.tolist(),
            "f": self.f.tolist(),
            "rng": self.rng.bit_generator.state,
        }

    @classmethod
    def from_state(cls, state: dict) -> "GpSampleFunction":
        obj = cls(state["structure"], state["sigma"], state["lengthscale"], seed=0)
        obj.rng.bit_generator.state = state["rng"]
        X = np.asarray(state["X"], dtype=float).reshape(-1, obj.dim)
        for x, value in zip(X, state["f"]):
            obj._store(x, *obj._condition(x), float(value))
        return obj


def _psd_sqrt(K: np.ndarray) -> np.ndarray:
    w, U = np.linalg.eigh(K)
    return U * np.sqrt(np.clip(w, 0.0, None))


class GridGpSampleFunction:
    """Additive GP draw tabulated on a regular grid of ``levels`` points per axis.

    Every component is drawn in full on its 1-D or 2-D grid, so the function
    does not depend on query order and its maximum is computable exactly for
    forest structures and small cyclic components. Queries are snapped to the
    nearest grid level.
    """

    def __init__(self, structure, sigma: float = 1.0, lengthscale: float = 0.2,
                 levels: int = 50, seed=0, domain: BoxDomain | None = None):
        self.structure = np.array(structure, dtype=np.int8)
        D = self.structure.shape[0]
        self.domain = BoxDomain.unit(D) if domain is None else domain
        self.levels = levels
        self.grid = self.domain.grid_levels(levels)
        self.params = HyperParams(np.full(D, lengthscale), np.full(D, sigma), 0.0)
        self.groups = graph_components(self.structure)
        rng = np.random.default_rng(seed)
        roots = [
            _psd_sqrt(np.exp(-0.5 * _sqdist_1d(g, g) / lengthscale ** 2)) for g in self.grid
        ]
        self.tables = {}
        for grp in self.groups:
            s = math.sqrt(component_scale(grp, self.params.scale_components))
            if len(grp) == 1:
                self.tables[grp] = s * roots[grp[0]] @ rng.standard_normal(levels)
            else:
                Z = rng.standard_normal((levels, levels))
                self.tables[grp] = s * roots[grp[0]] @ Z @ roots[grp[1]].T
        self._f_max = self._exact_max()

    @property
    def dim(self) -> int:
        return self.structure.shape[0]

    @property
    def f_max(self):
        return self._f_max

    def index_of(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        u = (x - self.domain.lower) / self.domain.widths
        return np.clip(np.rint(u * (self.levels - 1)).astype(int), 0, self.levels - 1)

    def __call__(self, x) -> float:
        idx = self.index_of(x)
        return float(sum(self.tables[g][tuple(idx[list(g)])] for g in self.groups))

    def _exact_max(self):
        from .acquisition import msg_passing_discrete

        A = self.structure
        comp_of = _connected_components(A)
        total = 0.0
        for comp in comp_of:
            sub = A[np.ix_(comp, comp)]
            local = {v: k for k, v in enumerate(comp)}
            groups = [g for g in self.groups if g[0] in local]
            if _is_forest(sub):
                forest = DependencyForest(sub)
                tables = {tuple(local[v] for v in g): self.tables[g] for g in groups}

                def phi(g, coords, tables=tables):
                    ix = coords.astype(int)
                    return tables[g][tuple(ix.T)]

                axes = [np.arange(self.levels)] * len(comp)
                _, _, value = msg_passing_discrete(axes, forest, phi)
                total += value
            elif len(comp) <= 3:
                grids = np.meshgrid(*[np.arange(self.levels)] * len(comp), indexing="ij")
                acc = np.zeros(grids[0].shape)
                for g in groups:
                    acc += self.tables[g][tuple(grids[local[v]] for v in g)]
                total += float(acc.max())
            else:
                return None
        return total


def _connected_components(A) -> list[list[int]]:
    n = A.shape[0]
    seen = [False] * n
    out = []
    for s in range(n):
        if seen[s]:
            continue
        seen[s] = True
        stack, comp = [s], []
        while stack:
            v = stack.pop()
            comp.append(v)
            for w in np.flatnonzero(A[v]):
                if not seen[w]:
                    seen[w] = True
                    stack.append(int(w))
        out.append(sorted(comp))
    return out


def sample_gp_function(structure, sigma: float = 1.0, lengthscale: float = 0.2, seed=0,
                       levels: int | None = None):
    """GP-sampled objective; continuous when ``levels`` is None, else tabulated on a grid."""
    if sigma <= 0 or lengthscale <= 0:
        raise ValueError("sigma and lengthscale must be positive")
    if levels is None:
        return GpSampleFunction(structure, sigma, lengthscale, seed)
    return GridGpSampleFunction(structure, sigma, lengthscale, levels, seed)


# --------------------------------------------------------------------------
# closed-form benchmarks
# --------------------------------------------------------------------------

def stybtang(x) -> float:
    """Negated Styblinski-Tang, ``-0.5 * sum(x^4 - 16 x^2 + 5 x)``, on ``[-5, 5]^D``."""
    x = np.asarray(x, dtype=float)
    return float(-0.5 * np.sum(x ** 4 - 16 * x ** 2 + 5 * x))


STYBTANG_ARGMAX_1D = -2.903534027771177
STYBTANG_MAX_1D = 39.16616570377142

_H6_ALPHA = np.array([1.0, 1.2, 3.0, 3.2])
_H6_A = np.array([
    [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
    [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
    [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
    [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
])
_H6_P = 1e-4 * np.array([
    [1312, 1696, 5569, 124, 8283, 5886],
    [2329, 4135, 8307, 3736, 1004, 9991],
    [2348, 1451, 3522, 2883, 3047, 6650],
    [4047, 8828, 8732, 5743, 1091, 381],
])

HARTMANN6_ARGMAX = np.array([0.20169, 0.150011, 0.476874, 0.275332, 0.311652, 0.6573])
HARTMANN6_MAX = 3.32236801141551


def hartmann6(x) -> float:
    """Hartmann6 (sign flipped for maximization) on ``[0, 1]^6``."""
    x = np.asarray(x, dtype=float)
    if x.shape != (6,):
        raise ValueError("hartmann6 takes a 6-vector")
    inner = np.sum(_H6_A * (x[None, :] - _H6_P) ** 2, axis=1)
    return float(np.sum(_H6_ALPHA * np.exp(-inner)))


def augment_aux(f, d_aux: int, d_base: int = 6):
    """Wrap ``f`` so it accepts ``d_base + d_aux`` coordinates and ignores the extras."""

    def augmented(x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != d_base + d_aux:
            raise ValueError(f"expected {d_base + d_aux} coordinates")
        return f(x[..., :d_base])

    augmented.dim = d_base + d_aux
    return augmented


class NoisyObjective:
    """``f(x) + N(0, std^2)`` with the clean value available via :meth:`clean`."""

    def __init__(self, f, std: float, rng: np.random.Generator):
        if std < 0:
            raise ValueError("noise std must be non-negative")
        self.f = f
        self.std = float(std)
        self.rng = rng

    def clean(self, x) -> float:
        return float(self.f(x))

    def observe(self, x) -> tuple[float, float]:
        """``(noisy, clean)`` values at ``x``."""
        value = self.clean(x)
        if self.std == 0:
            return value, value
        return value + self.std * float(self.rng.standard_normal()), value

    def __call__(self, x) -> float:
        return self.observe(x)[0]


def with_noise(f, std: float, rng: np.random.Generator) -> NoisyObjective:
    return NoisyObjective(f, std, rng)


# --------------------------------------------------------------------------
# named benchmark problems
# --------------------------------------------------------------------------

@dataclass
class Benchmark:
    """An objective with its domain and whatever ground truth is known."""

    name: str
    f: object
    domain: BoxDomain
    f_max: float | None = None
    graph: np.ndarray | None = None
    truth: HyperParams | None = None


def make_benchmark(kind: str, seed: int = 0, *, structure: str = "star", size: int = 25,
                   rows: int = 0, sigma: float = 1.0, lengthscale: float = 0.2,
                   levels: int | None = None, dim: int = 2, aux: int = 14,
                   noise_std: float = 0.15) -> Benchmark:
    """Build a benchmark by name: ``gp_sample``, ``stybtang``, ``hartmann6`` or ``hartmann6_aux``."""
    kind = kind.lower()
    if kind == "gp_sample":
        A = make_structure(StructureSpec(structure, size=size, rows=rows))
        D = A.shape[0]
        f = sample_gp_function(A, sigma, lengthscale, seed=seed, levels=levels)
        truth = HyperParams(np.full(D, lengthscale), np.full(D, sigma), noise_std)
        return Benchmark(f"gp_sample-{structure}-{D}", f, BoxDomain.unit(D), f.f_max, A, truth)
    if kind == "stybtang":
        return Benchmark(f"stybtang-{dim}", stybtang, BoxDomain.uniform(dim, -5, 5),
                         dim * STYBTANG_MAX_1D, np.zeros((dim, dim), dtype=np.int8))
    if kind == "hartmann6":
        return Benchmark("hartmann6", hartmann6, BoxDomain.unit(6), HARTMANN6_MAX)
    if kind == "hartmann6_aux":
        return Benchmark(f"hartmann6+{aux}aux", augment_aux(hartmann6, aux),
                         BoxDomain.unit(6 + aux), HARTMANN6_MAX)
    raise ValueError(f"unknown benchmark {kind!r}")
