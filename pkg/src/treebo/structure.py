"""Tree/forest structure learning by Gibbs growth and edge mutation.

Adjacency matrices are handled as ``int8`` numpy arrays internally; the public
entry point :func:`tree_learning` takes and returns :class:`DependencyForest`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import cho_solve
from scipy.special import expit

from .domain import Dataset, DependencyForest, HyperParams, graph_components
from .kernel import _dimension_factors, component_scale, jitter_cholesky


class UnionFind:
    """Disjoint sets with union by size and path compression."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    @classmethod
    def from_adjacency(cls, adjacency) -> "UnionFind":
        A = np.asarray(adjacency)
        uf = cls(A.shape[0])
        for i, j in zip(*np.nonzero(np.triu(A, 1))):
            uf.union(int(i), int(j))
        return uf

    def find(self, v: int) -> int:
        root = v
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[v] != root:
            self.parent[v], v = root, self.parent[v]
        return root

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        return True

    def reset(self, adjacency) -> None:
        fresh = UnionFind.from_adjacency(adjacency)
        self.parent, self.size = fresh.parent, fresh.size

    def members(self, v: int) -> list[int]:
        r = self.find(v)
        return [u for u in range(len(self.parent)) if self.find(u) == r]

    def partition(self) -> list[frozenset]:
        blocks: dict[int, set] = {}
        for v in range(len(self.parent)):
            blocks.setdefault(self.find(v), set()).add(v)
        return sorted((frozenset(b) for b in blocks.values()), key=min)


def cycle_check(uf: UnionFind, i: int, j: int) -> bool:
    """True if adding edge ``(i, j)`` would close a cycle."""
    if i == j:
        raise ValueError("cycle_check needs two distinct vertices")
    return uf.find(i) == uf.find(j)


class StructureScorer:
    """Log marginal likelihood of many adjacency matrices under fixed ``params``.

    Gram matrices are updated incrementally: neighbouring structures differ by
    a handful of components, so only those matrices are added or subtracted.
    A full rebuild happens every ``rebuild_every`` updates to bound round-off.
    """

    def __init__(self, data: Dataset, params: HyperParams, rebuild_every: int = 64):
        if len(data) < 1:
            raise ValueError("structure scoring needs at least one observation")
        self.X = data.points
        self.y = data.values
        self.params = params
        self.noise_var = params.noise_std ** 2
        self._E = _dimension_factors(self.X, self.X, params)
        self._singletons = {}
        self._anchor_groups: frozenset | None = None
        self._anchor_K = None
        self._updates = 0
        self._rebuild_every = rebuild_every
        self._memo: dict[bytes, float] = {}
        self.n_factorizations = 0

    def _group(self, g):
        if len(g) == 1:
            m = self._singletons.get(g)
            if m is None:
                m = component_scale(g, self.params.scale_components) * self._E[g[0]]
                self._singletons[g] = m
            return m
        return component_scale(g, self.params.scale_components) * (self._E[g[0]] * self._E[g[1]])

    def _gram(self, groups: frozenset) -> np.ndarray:
        anchor = self._anchor_groups
        if anchor is not None and self._updates < self._rebuild_every:
            added = groups - anchor
            removed = anchor - groups
            if len(added) + len(removed) < len(groups):
                K = self._anchor_K.copy()
                for g in added:
                    K += self._group(g)
                for g in removed:
                    K -= self._group(g)
                self._updates += 1
                return K
        K = np.zeros((self.X.shape[0],) * 2)
        for g in sorted(groups):
            K += self._group(g)
        self._updates = 0
        return K

    def score(self, adjacency) -> float:
        A = np.asarray(adjacency, dtype=np.int8)
        key = A.tobytes()
        rho = self._memo.get(key)
        if rho is not None:
            return rho
        groups = frozenset(graph_components(A))
        K = self._gram(groups)
        self._anchor_groups, self._anchor_K = groups, K
        L, _ = jitter_cholesky(K, self.noise_var)
        self.n_factorizations += 1
        alpha = cho_solve((L, True), self.y, check_finite=False)
        n = self.y.shape[0]
        rho = float(-0.5 * self.y @ alpha - np.sum(np.log(np.diag(L)))
                    - 0.5 * n * math.log(2 * math.pi))
        self._memo[key] = rho
        return rho


@dataclass
class StructureSampleSet:
    """Adjacency matrices visited during learning, with their scores."""

    states: list = field(default_factory=list)
    scores: list = field(default_factory=list)

    def add(self, adjacency, score: float) -> None:
        if not np.isfinite(score):
            raise ValueError("structure score must be finite")
        self.states.append(np.array(adjacency, dtype=np.int8))
        self.scores.append(float(score))

    def __len__(self):
        return len(self.states)

    def best(self) -> np.ndarray:
        # np.argmax returns the earliest maximum, which is the tie-break we want
        return self.states[int(np.argmax(self.scores))]


def _with_edge(adjacency, i, j, value):
    A = np.array(adjacency, dtype=np.int8)
    A[i, j] = A[j, i] = value
    return A


def edge_posterior_logits(adjacency, i: int, j: int, scorer: StructureScorer, gamma: float):
    """Unnormalized log posteriors ``(logit_1, logit_0)`` for ``Z_ij``."""
    rho1 = scorer.score(_with_edge(adjacency, i, j, 1))
    rho0 = scorer.score(_with_edge(adjacency, i, j, 0))
    return math.log(gamma) + rho1, math.log1p(-gamma) + rho0


def edge_probability(logit1: float, logit0: float) -> float:
    return float(expit(logit1 - logit0))


def _sample_edge(adjacency, i, j, scorer, gamma, rng):
    l1, l0 = edge_posterior_logits(adjacency, i, j, scorer, gamma)
    value = int(rng.random() < edge_probability(l1, l0))
    score = l1 - math.log(gamma) if value else l0 - math.log1p(-gamma)
    return value, score


StateHook = Callable[[np.ndarray, UnionFind], None]


def gibbs_sweep(adjacency, scorer: StructureScorer, gamma: float, uf: UnionFind,
                sample_budget: int, rng: np.random.Generator,
                samples: StructureSampleSet | None = None, on_state: StateHook | None = None):
    """One Gibbs pass over the pairs ``(i, j)``, ``j`` ascending, ``i < j`` ascending.

    A pair is resampled unless switching it on would close a cycle; a pair
    that is already an edge is always eligible, so edges can be dropped again.
    ``uf`` is kept equal to the component partition of the returned matrix.
    Every pair visited consumes one unit of budget.

    Returns ``(samples, adjacency, consumed)``.
    """
    Z = np.array(adjacency, dtype=np.int8)
    D = Z.shape[0]
    if Z.sum() // 2 >= D - 1:
        raise ValueError("gibbs_sweep expects a forest with fewer than D-1 edges")
    samples = StructureSampleSet() if samples is None else samples
    k = 0
    for j in range(D):
        for i in range(j):
            if k >= sample_budget:
                return samples, Z, k
            if Z[i, j] or not cycle_check(uf, i, j):
                old = Z[i, j]
                new, score = _sample_edge(Z, i, j, scorer, gamma, rng)
                if new != old:
                    Z[i, j] = Z[j, i] = new
                    if new:
                        uf.union(i, j)
                    else:
                        uf.reset(Z)
                samples.add(Z, score)
                if on_state is not None:
                    on_state(Z, uf)
            k += 1
    return samples, Z, k


def mutate(adjacency, scorer: StructureScorer, gamma: float, rng: np.random.Generator,
           samples: StructureSampleSet | None = None, on_state: StateHook | None = None):
    """Drop a random edge, then resample one edge between the two split subtrees.

    If the proposal is rejected the result has one edge fewer.
    Returns ``(samples, adjacency, consumed)`` with ``consumed == 1``.
    """
    Z = np.array(adjacency, dtype=np.int8)
    iu, ju = np.nonzero(np.triu(Z, 1))
    if iu.size == 0:
        raise ValueError("mutate needs at least one edge")
    e = int(rng.integers(iu.size))
    i, j = int(iu[e]), int(ju[e])
    Z[i, j] = Z[j, i] = 0
    uf = UnionFind.from_adjacency(Z)
    a = int(rng.choice(uf.members(i)))
    b = int(rng.choice(uf.members(j)))
    a, b = min(a, b), max(a, b)
    new, score = _sample_edge(Z, a, b, scorer, gamma, rng)
    if new:
        Z[a, b] = Z[b, a] = 1
        uf.union(a, b)
    samples = StructureSampleSet() if samples is None else samples
    samples.add(Z, score)
    if on_state is not None:
        on_state(Z, uf)
    return samples, Z, 1


def tree_learning(forest: DependencyForest, params: HyperParams, data: Dataset,
                  samples: int = 250, gamma: float = 0.5,
                  rng: np.random.Generator | None = None,
                  scorer: StructureScorer | None = None,
                  on_state: StateHook | None = None,
                  return_samples: bool = False):
    """Grow the structure with Gibbs sweeps, then explore it by mutation.

    Runs until ``samples`` units of budget are consumed and returns the
    highest-scoring structure visited (earliest on ties).
    """
    rng = np.random.default_rng() if rng is None else rng
    if scorer is None:
        scorer = StructureScorer(data, params)
    Z = np.array(forest.adjacency, dtype=np.int8)
    D = Z.shape[0]
    visited = StructureSampleSet()
    visited.add(Z, scorer.score(Z))
    uf = UnionFind.from_adjacency(Z)
    k = 0
    while k < samples and D > 1:
        if Z.sum() // 2 < D - 1:
            _, Z, used = gibbs_sweep(Z, scorer, gamma, uf, samples - k, rng, visited, on_state)
        else:
            _, Z, used = mutate(Z, scorer, gamma, rng, visited, on_state)
            uf = UnionFind.from_adjacency(Z)
        k += used
    best = DependencyForest(visited.best())
    if return_samples:
        return best, visited
    return best


def format_edge_list(forest: DependencyForest) -> str:
    """One ``"i j"`` line per edge, 0-based."""
    return "".join(f"{i} {j}\n" for i, j in forest.edges)


def parse_edge_list(text: str, dim: int) -> DependencyForest:
    edges = []
    for line in text.splitlines():
        line = line.strip()
        if line:
            i, j = line.split()
            edges.append((int(i), int(j)))
    return DependencyForest.from_edges(dim, edges)
