import functools

import numpy as np
import pytest

from treebo import DependencyForest

ACCEPTANCE_LINES = []


@pytest.fixture
def record_acceptance():
    """Collects one PASS/FAIL line per acceptance criterion for the summary."""

    def record(number, passed, detail):
        line = f"[criterion {number:>2}] {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


def random_forest(rng, dim, p_edge=0.5):
    """Random forest: shuffled candidate edges kept only when they join two trees."""
    parent = list(range(dim))

    def find(v):
        while parent[v] != v:
            v = parent[v]
        return v

    pairs = [(i, j) for j in range(dim) for i in range(j)]
    rng.shuffle(pairs)
    edges = []
    for i, j in pairs:
        if rng.random() < p_edge and find(i) != find(j):
            parent[find(i)] = find(j)
            edges.append((i, j))
    return DependencyForest.from_edges(dim, edges)


def random_tree(rng, dim):
    """Uniform-ish spanning tree: attach each vertex to an earlier one."""
    order = rng.permutation(dim)
    edges = [(int(order[k]), int(order[rng.integers(k)])) for k in range(1, dim)]
    return DependencyForest.from_edges(dim, edges)


def dfs_components(adjacency):
    """Connected components by explicit DFS, as a sorted list of frozensets."""
    A = np.asarray(adjacency)
    n = A.shape[0]
    seen = [False] * n
    comps = []
    for s in range(n):
        if seen[s]:
            continue
        stack, comp = [s], set()
        seen[s] = True
        while stack:
            v = stack.pop()
            comp.add(v)
            for w in range(n):
                if A[v, w] and not seen[w]:
                    seen[w] = True
                    stack.append(w)
        comps.append(frozenset(comp))
    return sorted(comps, key=min)


def dfs_has_cycle(adjacency):
    """Edge count vs. component count: a forest has exactly n - #components edges."""
    A = np.asarray(adjacency)
    return int(A.sum()) // 2 != A.shape[0] - len(dfs_components(A))


@functools.lru_cache(maxsize=None)
def star5_recovery_f1(n_seeds=25, n_obs=150, samples=250):
    """F1 of the structure learned from a fresh GP-sampled Star-5 dataset, per seed.

    Noise 0.15 on the observations; learning starts from the empty graph
    with the default initial hyperparameters.
    """
    from treebo import Dataset, HyperParams, tree_learning
    from treebo.benchmarks import GpSampleFunction, make_structure
    from treebo.metrics import f1_score

    truth = make_structure("star", 5)
    scores = []
    for seed in range(n_seeds):
        f = GpSampleFunction(truth, 1.0, 0.2, seed=seed)
        rng = np.random.default_rng(1000 + seed)
        X = rng.random((n_obs, 5))
        y = np.array([f(x) for x in X]) + 0.15 * rng.standard_normal(n_obs)
        learned = tree_learning(DependencyForest.empty(5), HyperParams.default(5), Dataset(X, y),
                                samples, 0.5, np.random.default_rng(seed))
        scores.append(f1_score(learned, truth))
    return tuple(scores)
