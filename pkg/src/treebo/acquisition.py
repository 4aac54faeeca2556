"""UCB acquisition and its maximization by max-sum message passing on forests.

Continuous domains are handled by recursive zooming: discretize every axis
into ``R`` cells with one random representative each, solve the discrete
problem exactly, then zoom into the winning cell and repeat ``L`` times.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .domain import BoxDomain, DependencyForest, components_of
from .gp import PosteriorState

# phi(group, coords) -> values; coords has shape (m, len(group))
ComponentFunction = Callable[[tuple, np.ndarray], np.ndarray]


class CostCounter:
    """Running count of component acquisition evaluations."""

    def __init__(self, count: int = 0):
        self.count = int(count)

    def add(self, n: int) -> None:
        if n < 0:
            raise ValueError("cost increments must be non-negative")
        self.count += int(n)

    def __int__(self):
        return self.count

    def __repr__(self):
        return f"CostCounter({self.count})"


def beta(t: int) -> float:
    """UCB trade-off ``0.5 * log(2t)`` (natural log)."""
    if t < 1:
        raise ValueError("beta is defined for t >= 1")
    return 0.5 * math.log(2 * t)


class UCBAcquisition:
    """Per-component UCB ``mu_G + sqrt(beta_t) * sigma_G`` over one posterior.

    Calling the object evaluates one component at a batch of points given in
    group coordinates and charges the batch size to ``counter``.
    """

    def __init__(self, state: PosteriorState, t: int, counter: CostCounter | None = None):
        self.state = state
        self.t = t
        self.sqrt_beta = math.sqrt(beta(t))
        self.counter = CostCounter() if counter is None else counter

    def __call__(self, group, coords) -> np.ndarray:
        coords = np.asarray(coords, dtype=float).reshape(-1, len(group))
        mean, var = self.state.posterior(tuple(group), coords)
        self.counter.add(coords.shape[0])
        return mean + self.sqrt_beta * np.sqrt(var)

    def total(self, x) -> np.ndarray:
        """Global acquisition (sum over components) at full ``D``-vectors."""
        X = np.atleast_2d(np.asarray(x, dtype=float))
        return sum(self(g, X[:, list(g)]) for g in self.state.groups)


def component_ucb(state: PosteriorState, group, x_group, t: int,
                  counter: CostCounter | None = None):
    """UCB of one component at a single point or a batch (group coordinates)."""
    x_group = np.asarray(x_group, dtype=float)
    single = x_group.ndim <= 1 and x_group.size == len(group)
    values = UCBAcquisition(state, t, counter)(tuple(group), x_group)
    return float(values[0]) if single else values


@dataclass(frozen=True)
class DiscretizedAxis:
    """Representatives of one axis and the cells that own them."""

    index: int
    points: np.ndarray
    cell_lower: np.ndarray
    cell_upper: np.ndarray

    def cell(self, k: int) -> tuple[float, float]:
        return float(self.cell_lower[k]), float(self.cell_upper[k])


def discretize_axis(index: int, lower: float, upper: float, R: int,
                    rng: np.random.Generator) -> DiscretizedAxis:
    """Split ``[lower, upper]`` into ``R`` equal cells with a uniform random point in each."""
    edges = np.linspace(lower, upper, R + 1)
    lo, hi = edges[:-1], edges[1:]
    u = rng.random(R)
    pts = np.clip(lo + u * (hi - lo), lo, hi)
    return DiscretizedAxis(index, pts, lo, hi)


def zoom_strategy(selected_x, current_bounds, R: int, rng: np.random.Generator):
    """Shrink each axis to the cell holding ``selected_x`` and re-discretize it.

    ``current_bounds`` is a pair of arrays ``(a, b)``. Returns the new bounds
    and the list of :class:`DiscretizedAxis` for the next level.
    """
    a, b = (np.asarray(v, dtype=float) for v in current_bounds)
    x = np.asarray(selected_x, dtype=float)
    if np.any(x < a) or np.any(x > b):
        raise ValueError("selected point lies outside the current bounds")
    width = (b - a) / R
    k = np.minimum(np.floor((x - a) / width).astype(int), R - 1)
    new_a = a + k * width
    new_b = np.where(k == R - 1, b, a + (k + 1) * width)
    axes = [discretize_axis(d, new_a[d], new_b[d], R, rng) for d in range(a.size)]
    return (new_a, new_b), axes


def _rooted_order(forest: DependencyForest):
    """BFS order and parent map per tree, each rooted at its lowest vertex."""
    A = forest.adjacency
    D = forest.dim
    parent = [-1] * D
    seen = [False] * D
    order = []
    for root in range(D):
        if seen[root]:
            continue
        seen[root] = True
        queue = deque([root])
        while queue:
            v = queue.popleft()
            order.append(v)
            for w in np.flatnonzero(A[v]):
                w = int(w)
                if not seen[w]:
                    seen[w] = True
                    parent[w] = v
                    queue.append(w)
    return order, parent


def _evaluate_tables(groups, values: Sequence[np.ndarray], phi: ComponentFunction,
                     counter: CostCounter, cap: int | None):
    """Component tables in ``groups`` order.

    With a cap, a table is filled row-major until the budget runs out; missing
    entries are ``-inf`` and a table with no entries at all is ``None``.
    """
    tables = {}
    budget = math.inf if cap is None else cap
    for g in groups:
        shape = tuple(values[v].size for v in g)
        size = int(np.prod(shape))
        take = int(min(size, budget))
        if take <= 0:
            tables[g] = None
            continue
        if len(g) == 1:
            coords = values[g[0]][:take, None]
        else:
            ia, ib = np.unravel_index(np.arange(take), shape)
            coords = np.column_stack([values[g[0]][ia], values[g[1]][ib]])
        vals = np.asarray(phi(g, coords), dtype=float)
        counter.add(take)
        budget -= take
        flat = np.full(size, -np.inf)
        flat[:take] = vals
        tables[g] = flat.reshape(shape)
    return tables


def msg_passing_discrete(axes, forest: DependencyForest, phi: ComponentFunction,
                         counter: CostCounter | None = None, cap: int | None = None):
    """Exact max-sum of ``sum_G phi_G`` over the product of per-axis point sets.

    ``axes`` holds one 1-D array (or :class:`DiscretizedAxis`) of candidate
    values per variable. Each tree is rooted at its lowest-index vertex;
    ties go to the lowest grid index.

    If ``cap`` is reached, components whose table was never evaluated drop
    out of the objective and a partly evaluated table only offers its
    evaluated entries, so the result is the best point among evaluated ones.

    Returns ``(indices, x, value)``.
    """
    values = [np.asarray(ax.points if isinstance(ax, DiscretizedAxis) else ax, dtype=float)
              for ax in axes]
    if len(values) != forest.dim:
        raise ValueError("need exactly one axis per variable")
    if any(v.size == 0 for v in values):
        raise ValueError("every axis needs at least one representative")
    counter = CostCounter() if counter is None else counter
    groups = components_of(forest)
    tables = _evaluate_tables(groups, values, phi, counter, cap)

    order, parent = _rooted_order(forest)
    D = forest.dim
    msg = [np.zeros(values[v].size) for v in range(D)]
    for v in range(D):
        t = tables.get((v,))
        if t is not None:
            msg[v] = msg[v] + t
    # best child index for every parent value, filled bottom-up
    back = [None] * D
    for c in reversed(order):
        p = parent[c]
        if p < 0:
            continue
        g = (min(p, c), max(p, c))
        t = tables[g]
        if t is None:
            pair = np.zeros((values[p].size, values[c].size))
        else:
            pair = t if g[0] == p else t.T
        score = pair + msg[c][None, :]
        best = np.argmax(score, axis=1)
        back[c] = best
        msg[p] = msg[p] + score[np.arange(score.shape[0]), best]

    idx = np.zeros(D, dtype=int)
    value = 0.0
    for v in order:
        if parent[v] < 0:
            idx[v] = int(np.argmax(msg[v]))
            value += float(msg[v][idx[v]])
        else:
            idx[v] = int(back[v][idx[parent[v]]])
    x = np.array([values[d][idx[d]] for d in range(D)])
    return idx, x, value


def pass_cost(forest: DependencyForest, sizes) -> int:
    """Number of component evaluations in one uncapped discrete pass."""
    sizes = list(sizes)
    return sum(int(np.prod([sizes[v] for v in g])) for g in components_of(forest))


def msg_passing_continuous(domain: BoxDomain, forest: DependencyForest, phi: ComponentFunction,
                           R: int, L: int, rng: np.random.Generator,
                           counter: CostCounter | None = None):
    """Maximize ``sum_G phi_G`` on a box by ``L`` levels of zooming with grid size ``R``.

    Returns ``(x, value)`` for the representative chosen at the last level.
    """
    if R < 2 or L < 1:
        raise ValueError("need R >= 2 and L >= 1")
    counter = CostCounter() if counter is None else counter
    bounds = (np.array(domain.lower), np.array(domain.upper))
    axes = [discretize_axis(d, bounds[0][d], bounds[1][d], R, rng) for d in range(domain.dim)]
    for level in range(L):
        _, x, value = msg_passing_discrete(axes, forest, phi, counter)
        if level < L - 1:
            bounds, axes = zoom_strategy(x, bounds, R, rng)
    return x, value


def subsample_size(forest: DependencyForest, levels: int, cap: int) -> int:
    """Largest per-axis candidate count whose full pass fits within ``cap``."""
    n_edges = forest.n_edges
    n_iso = len(forest.isolated)
    r = levels
    while r > 1 and n_edges * r * r + n_iso * r > cap:
        r -= 1
    return r


def maximize_on_grid(grid, forest: DependencyForest, phi: ComponentFunction, cap: int,
                     rng: np.random.Generator, counter: CostCounter | None = None):
    """Discrete-mode maximization over a fixed per-axis grid under an evaluation cap.

    When the full grid would exceed ``cap``, each axis is restricted to the
    same number of randomly chosen levels so that one complete pass fits.
    Returns ``(x, value)``.
    """
    counter = CostCounter() if counter is None else counter
    levels = len(grid[0])
    r = subsample_size(forest, levels, cap)
    if r < levels:
        axes = [np.sort(rng.choice(g, size=r, replace=False)) for g in grid]
    else:
        axes = [np.asarray(g, dtype=float) for g in grid]
    _, x, value = msg_passing_discrete(axes, forest, phi, counter, cap)
    return x, value
