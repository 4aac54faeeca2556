"""Core value types: box domains, datasets, dependency forests, hyperparameters
and run configuration.

Variables are indexed ``0..D-1`` everywhere in code; 1-based labels are only
used when printing.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

Group = tuple  # tuple of 1 or 2 variable indices


class ConfigError(ValueError):
    """Raised when a run configuration violates one of its invariants."""


class InvalidForestError(ValueError):
    """Raised for adjacency matrices that are not symmetric acyclic graphs."""


@dataclass(frozen=True)
class BoxDomain:
    """Axis-aligned box ``[lower, upper]`` in ``D`` dimensions."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.atleast_1d(np.asarray(self.lower, dtype=float)).copy()
        upper = np.atleast_1d(np.asarray(self.upper, dtype=float)).copy()
        if lower.ndim != 1 or lower.shape != upper.shape or lower.size < 1:
            raise ValueError("lower and upper must be 1-D vectors of equal length >= 1")
        if not np.all(lower < upper):
            raise ValueError("every lower bound must be strictly below its upper bound")
        lower.flags.writeable = False
        upper.flags.writeable = False
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def unit(cls, dim: int) -> "BoxDomain":
        return cls(np.zeros(dim), np.ones(dim))

    @classmethod
    def uniform(cls, dim: int, low: float, high: float) -> "BoxDomain":
        return cls(np.full(dim, float(low)), np.full(dim, float(high)))

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def widths(self) -> np.ndarray:
        return self.upper - self.lower

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))

    def sample(self, rng: np.random.Generator, n: int | None = None) -> np.ndarray:
        size = (self.dim,) if n is None else (n, self.dim)
        return self.lower + rng.random(size) * self.widths

    def grid_levels(self, levels: int) -> list[np.ndarray]:
        """Equally spaced levels per axis, endpoints included."""
        return [np.linspace(lo, hi, levels) for lo, hi in zip(self.lower, self.upper)]


@dataclass(frozen=True)
class Dataset:
    """Observations ``(x_t, y_t)``, stored as an ``(n, D)`` array and an ``(n,)`` array."""

    points: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.points, dtype=float)
        y = np.asarray(self.values, dtype=float).reshape(-1)
        if X.ndim == 1:
            X = X.reshape(len(y), -1) if len(y) else X.reshape(0, max(X.size, 0))
        if X.shape[0] != y.shape[0]:
            raise ValueError(f"{X.shape[0]} points but {y.shape[0]} values")
        object.__setattr__(self, "points", X)
        object.__setattr__(self, "values", y)

    @classmethod
    def empty(cls, dim: int) -> "Dataset":
        return cls(np.empty((0, dim)), np.empty(0))

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def check_within(self, domain: BoxDomain) -> None:
        if len(self) and not (
            np.all(self.points >= domain.lower) and np.all(self.points <= domain.upper)
        ):
            raise ValueError("dataset contains points outside the domain")

    def append(self, x, y: float) -> "Dataset":
        x = np.asarray(x, dtype=float).reshape(1, -1)
        return Dataset(np.vstack([self.points, x]), np.append(self.values, y))


def _find_cycle(adjacency: np.ndarray) -> bool:
    """Iterative DFS; True if the undirected graph contains a cycle."""
    n = adjacency.shape[0]
    seen = np.zeros(n, dtype=bool)
    for root in range(n):
        if seen[root]:
            continue
        seen[root] = True
        stack = [(root, -1)]
        while stack:
            v, parent = stack.pop()
            for w in np.flatnonzero(adjacency[v]):
                if w == parent:
                    continue
                if seen[w]:
                    return True
                seen[w] = True
                stack.append((w, v))
    return False


def graph_components(adjacency: np.ndarray) -> list[Group]:
    """Additive groups of an arbitrary graph: one pair per edge, then isolated vertices."""
    A = np.asarray(adjacency)
    iu, ju = np.nonzero(np.triu(A, 1))
    groups: list[Group] = [(int(i), int(j)) for i, j in zip(iu, ju)]
    degree = A.sum(axis=1)
    groups.extend((int(v),) for v in np.flatnonzero(degree == 0))
    return groups


class DependencyForest:
    """Acyclic dependency structure over ``D`` variables.

    Edges become 2-D additive components and isolated vertices 1-D
    components. Instances are immutable; the adjacency array is read-only.
    """

    __slots__ = ("_adj", "_groups", "_key")

    def __init__(self, adjacency):
        A = np.array(adjacency, dtype=np.int8)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
            raise InvalidForestError("adjacency must be a non-empty square matrix")
        if not np.isin(A, (0, 1)).all():
            raise InvalidForestError("adjacency must be binary")
        if not np.array_equal(A, A.T):
            raise InvalidForestError("adjacency must be symmetric")
        if np.any(np.diag(A)):
            raise InvalidForestError("adjacency must have a zero diagonal")
        if _find_cycle(A):
            raise InvalidForestError("adjacency contains a cycle")
        A.flags.writeable = False
        self._adj = A
        self._groups = None
        self._key = None

    @classmethod
    def empty(cls, dim: int) -> "DependencyForest":
        return cls(np.zeros((dim, dim), dtype=np.int8))

    @classmethod
    def from_edges(cls, dim: int, edges: Iterable[Sequence[int]]) -> "DependencyForest":
        A = np.zeros((dim, dim), dtype=np.int8)
        for i, j in edges:
            if i == j:
                raise InvalidForestError(f"self-loop on vertex {i}")
            A[i, j] = A[j, i] = 1
        return cls(A)

    @classmethod
    def from_groups(cls, dim: int, groups: Iterable[Sequence[int]]) -> "DependencyForest":
        return cls.from_edges(dim, [g for g in groups if len(g) == 2])

    @property
    def adjacency(self) -> np.ndarray:
        return self._adj

    @property
    def dim(self) -> int:
        return self._adj.shape[0]

    @property
    def edges(self) -> list[tuple[int, int]]:
        iu, ju = np.nonzero(np.triu(self._adj, 1))
        return [(int(i), int(j)) for i, j in zip(iu, ju)]

    @property
    def n_edges(self) -> int:
        return int(self._adj.sum()) // 2

    @property
    def isolated(self) -> list[int]:
        return [int(v) for v in np.flatnonzero(self._adj.sum(axis=1) == 0)]

    @property
    def groups(self) -> list[Group]:
        if self._groups is None:
            self._groups = graph_components(self._adj)
        return list(self._groups)

    def key(self) -> bytes:
        if self._key is None:
            self._key = self._adj.tobytes()
        return self._key

    def __eq__(self, other):
        if not isinstance(other, DependencyForest):
            return NotImplemented
        return self._adj.shape == other._adj.shape and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        edges = ", ".join(f"({i + 1},{j + 1})" for i, j in self.edges)
        return f"DependencyForest(dim={self.dim}, edges=[{edges}])"


def components_of(forest) -> list[Group]:
    """Additive decomposition induced by a forest.

    Edges ``(i, j)`` with ``i < j`` come first in lexicographic order, followed
    by isolated vertices in ascending order.

    >>> components_of(DependencyForest.from_edges(3, [(0, 2)]))
    [(0, 2), (1,)]
    """
    if not isinstance(forest, DependencyForest):
        forest = DependencyForest(forest)
    return forest.groups


@dataclass(frozen=True)
class HyperParams:
    """Per-dimension lengthscales and scale components plus noise std ``eta``."""

    lengthscales: np.ndarray
    scale_components: np.ndarray
    noise_std: float = 0.1

    def __post_init__(self):
        ls = np.atleast_1d(np.asarray(self.lengthscales, dtype=float)).copy()
        sc = np.atleast_1d(np.asarray(self.scale_components, dtype=float)).copy()
        if ls.shape != sc.shape or ls.ndim != 1:
            raise ValueError("lengthscales and scale_components must have equal length")
        if not (np.all(ls > 0) and np.all(sc > 0)):
            raise ValueError("lengthscales and scale components must be positive")
        if self.noise_std < 0:
            raise ValueError("noise_std must be non-negative")
        ls.flags.writeable = False
        sc.flags.writeable = False
        object.__setattr__(self, "lengthscales", ls)
        object.__setattr__(self, "scale_components", sc)
        object.__setattr__(self, "noise_std", float(self.noise_std))

    @classmethod
    def default(cls, dim: int, lengthscale: float = 0.1, scale: float = 0.5,
                noise_std: float = 0.1) -> "HyperParams":
        return cls(np.full(dim, lengthscale), np.full(dim, scale), noise_std)

    @property
    def dim(self) -> int:
        return self.lengthscales.size

    def to_log(self) -> np.ndarray:
        """``[log l_0..l_{D-1}, log s_0..s_{D-1}]``."""
        return np.concatenate([np.log(self.lengthscales), np.log(self.scale_components)])

    @classmethod
    def from_log(cls, theta, noise_std: float) -> "HyperParams":
        theta = np.asarray(theta, dtype=float)
        d = theta.size // 2
        return cls(np.exp(theta[:d]), np.exp(theta[d:]), noise_std)


@dataclass(frozen=True)
class RunConfig:
    """Optimizer settings. Defaults are the published experimental settings."""

    n_init: int = 10
    n_iter: int = 1000
    relearn_interval: int = 15
    structure_samples: int = 250
    gibbs_prior: float = 0.5
    mode: str = "continuous"
    discrete_levels: int = 50
    zoom_grid: int = 4
    zoom_levels: int = 4
    acquisition_eval_cap: int = 1000
    noise_std: float = 0.1
    init_lengthscale: float = 0.1
    init_scale: float = 0.5
    seed: int = 0

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(RunConfig)}


def _coerce(name: str, value):
    kind = _FIELD_TYPES[name]
    if isinstance(value, str):
        value = value.strip()
    if kind == "int":
        if isinstance(value, float) and not value.is_integer():
            raise ConfigError(f"{name} must be an integer")
        return int(float(value)) if isinstance(value, str) else int(value)
    if kind == "float":
        return float(value)
    return str(value)


def validate_config(cfg=None, domain: BoxDomain | None = None) -> RunConfig:
    """Fill defaults and check invariants, raising ``ConfigError`` on the first violation."""
    if cfg is None:
        cfg = {}
    if isinstance(cfg, RunConfig):
        cfg = dataclasses.asdict(cfg)
    unknown = set(cfg) - set(_FIELD_TYPES)
    if unknown:
        raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
    try:
        values = {k: _coerce(k, v) for k, v in cfg.items()}
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    out = RunConfig(**values)

    checks = [
        (out.n_init >= 1, "n_init must be >= 1"),
        # n_init == n_iter is allowed: a pure random-search run.
        (out.n_init <= out.n_iter, "n_init must not exceed n_iter"),
        (out.relearn_interval >= 1, "relearn_interval must be >= 1"),
        (out.structure_samples >= 1, "structure_samples must be >= 1"),
        (0.0 < out.gibbs_prior < 1.0, "gibbs_prior must lie in (0, 1)"),
        (out.mode in ("continuous", "discrete"), "mode must be 'continuous' or 'discrete'"),
        (out.discrete_levels >= 2, "discrete_levels must be >= 2"),
        (out.zoom_grid >= 2, "zoom_grid must be >= 2"),
        (out.zoom_levels >= 1, "zoom_levels must be >= 1"),
        (out.acquisition_eval_cap >= 1, "acquisition_eval_cap must be >= 1"),
        (out.noise_std >= 0, "noise_std must be >= 0"),
        (out.init_lengthscale > 0, "init_lengthscale must be > 0"),
        (out.init_scale > 0, "init_scale must be > 0"),
    ]
    for ok, message in checks:
        if not ok:
            raise ConfigError(message)
    return out


def parse_key_values(text: str) -> dict[str, str]:
    """Parse flat ``key = value`` lines; ``#`` starts a comment."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" in line:
            key, value = line.split("=", 1)
        elif ":" in line:
            key, value = line.split(":", 1)
        else:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        out[key.strip()] = value.strip()
    return out


def load_config(path, overrides: Mapping[str, str] | None = None) -> dict[str, str]:
    with open(path, encoding="utf-8") as fh:
        values = parse_key_values(fh.read())
    values.update(overrides or {})
    return values


def run_config_from(values: Mapping[str, object], domain: BoxDomain | None = None) -> RunConfig:
    """Pick the RunConfig keys out of a larger mapping and validate them."""
    return validate_config({k: v for k, v in values.items() if k in _FIELD_TYPES}, domain)
