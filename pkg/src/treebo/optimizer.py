"""Tree-GP-UCB outer loop plus the Random and Oracle baselines."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .acquisition import CostCounter, UCBAcquisition, maximize_on_grid, msg_passing_continuous
from .benchmarks import with_noise
from .domain import BoxDomain, Dataset, DependencyForest, HyperParams, RunConfig, validate_config
from .gp import PosteriorState, fit_hyperparameters
from .structure import tree_learning


@dataclass
class IterationRecord:
    t: int
    x: np.ndarray
    y: float
    f: float
    f_star: float
    cum_cost: int
    edges: tuple
    relearned: bool = False
    wall_time: float = 0.0


@dataclass
class RunTrace:
    """Everything that happened in one run, one record per objective evaluation.

    ``y`` is the noisy observation and ``f`` the noiseless value; ``f_star``
    is the running maximum of ``y``.
    """

    algorithm: str
    dim: int
    records: list = field(default_factory=list)
    forest: DependencyForest | None = None
    params: HyperParams | None = None

    def __len__(self):
        return len(self.records)

    @property
    def points(self) -> np.ndarray:
        return np.array([r.x for r in self.records]).reshape(-1, self.dim)

    @property
    def observations(self) -> np.ndarray:
        return np.array([r.y for r in self.records])

    @property
    def clean_values(self) -> np.ndarray:
        return np.array([r.f for r in self.records])

    @property
    def cum_cost(self) -> np.ndarray:
        return np.array([r.cum_cost for r in self.records], dtype=np.int64)

    @property
    def relearn_steps(self) -> list[int]:
        return [r.t for r in self.records if r.relearned]

    @property
    def best(self):
        """``(x, y)`` of the largest observation."""
        k = int(np.argmax(self.observations))
        return self.records[k].x, self.records[k].y

    def final_structure(self) -> DependencyForest:
        edges = self.records[-1].edges if self.records else ()
        return DependencyForest.from_edges(self.dim, edges)


class RunAborted(RuntimeError):
    """The objective raised; ``trace`` holds everything recorded before that."""

    def __init__(self, message, trace: RunTrace):
        super().__init__(message)
        self.trace = trace


def seed_streams(seed) -> dict[str, np.random.Generator]:
    """Independent generators for initial points, structure learning,
    acquisition randomness and observation noise."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    names = ("init", "structure", "acquisition", "noise")
    return {name: np.random.default_rng(child) for name, child in zip(names, ss.spawn(4))}


def _run(objective, domain: BoxDomain, cfg, seed, noise_std, algorithm,
         forest=None, params=None, learn=True):
    cfg = validate_config(cfg, domain)
    seed = cfg.seed if seed is None else seed
    streams = seed_streams(seed)
    noisy = with_noise(objective, noise_std, streams["noise"])
    D = domain.dim
    discrete = cfg.mode == "discrete"
    grid = domain.grid_levels(cfg.discrete_levels) if discrete else None
    init_rng = streams["init"]

    def draw():
        if discrete:
            idx = init_rng.integers(cfg.discrete_levels, size=D)
            return np.array([grid[d][idx[d]] for d in range(D)])
        return domain.sample(init_rng)

    if forest is None:
        forest = DependencyForest.empty(D)
    if params is None:
        params = HyperParams.default(D, cfg.init_lengthscale, cfg.init_scale, cfg.noise_std)
    counter = CostCounter()
    trace = RunTrace(algorithm, D)
    X, Y = [], []
    best = -np.inf
    start = time.perf_counter()

    for t in range(1, cfg.n_iter + 1):
        relearned = False
        if t <= cfg.n_init or algorithm == "random":
            x = draw()
        else:
            data = Dataset(np.array(X), np.array(Y))
            if learn and t % cfg.relearn_interval == 0:
                forest = tree_learning(forest, params, data, cfg.structure_samples,
                                       cfg.gibbs_prior, streams["structure"])
                if len(data) >= 2:
                    params = fit_hyperparameters(data, forest, params)
                relearned = True
            # the maximizer charges evaluations to ``counter`` itself
            phi = UCBAcquisition(PosteriorState(data, forest, params), t)
            if discrete:
                x, _ = maximize_on_grid(grid, forest, phi, cfg.acquisition_eval_cap,
                                        streams["acquisition"], counter)
            else:
                x, _ = msg_passing_continuous(domain, forest, phi, cfg.zoom_grid,
                                              cfg.zoom_levels, streams["acquisition"], counter)
        try:
            y, f = noisy.observe(x)
        except Exception as exc:
            raise RunAborted(f"objective failed at t={t}: {exc}", trace) from exc
        X.append(np.asarray(x, dtype=float))
        Y.append(y)
        best = max(best, y)
        trace.records.append(IterationRecord(
            t, X[-1], y, f, best, counter.count, tuple(forest.edges), relearned,
            time.perf_counter() - start))
    trace.forest = forest
    trace.params = params
    return trace


def run_tree_gp_ucb(objective, domain: BoxDomain, cfg: RunConfig | dict | None = None,
                    seed=None, noise_std: float = 0.0) -> RunTrace:
    """Tree-GP-UCB.

    ``objective`` returns noiseless values; Gaussian noise with ``noise_std``
    is added from the run's own noise stream. Structure and hyperparameters
    are relearned whenever ``t % relearn_interval == 0``.
    """
    return _run(objective, domain, cfg, seed, noise_std, "tree")


def run_random(objective, domain: BoxDomain, cfg: RunConfig | dict | None = None,
               seed=None, noise_std: float = 0.0) -> RunTrace:
    return _run(objective, domain, cfg, seed, noise_std, "random")


def run_oracle(objective, domain: BoxDomain, cfg: RunConfig | dict | None = None,
               truth=None, seed=None, noise_std: float = 0.0) -> RunTrace:
    """Tree-GP-UCB with the true forest and hyperparameters, never relearned.

    ``truth`` is a ``(forest, params)`` pair.
    """
    if truth is None:
        raise ValueError("run_oracle needs the true (forest, params)")
    forest, params = truth
    if not isinstance(forest, DependencyForest):
        forest = DependencyForest(forest)
    return _run(objective, domain, cfg, seed, noise_std, "oracle", forest, params, learn=False)
