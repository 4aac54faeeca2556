"""Graph-recovery F1, best regret and multi-run aggregation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .domain import DependencyForest


def _edge_set(graph) -> tuple[int, set]:
    A = graph.adjacency if isinstance(graph, DependencyForest) else np.asarray(graph)
    iu, ju = np.nonzero(np.triu(A, 1))
    return A.shape[0], {(int(i), int(j)) for i, j in zip(iu, ju)}


def f1_score(graph, graph_opt) -> float:
    """Harmonic mean of edge precision and recall of ``graph`` against ``graph_opt``.

    Two empty edge sets score 1; exactly one empty set scores 0.
    """
    d1, e = _edge_set(graph)
    d2, e_opt = _edge_set(graph_opt)
    if d1 != d2:
        raise ValueError(f"dimension mismatch: {d1} vs {d2}")
    if not e and not e_opt:
        return 1.0
    hit = len(e & e_opt)
    if hit == 0:
        return 0.0
    precision = hit / len(e)
    recall = hit / len(e_opt)
    return 2 * precision * recall / (precision + recall)


@dataclass
class MetricSeries:
    """One value per iteration. ``kind`` names what the values are."""

    values: np.ndarray
    kind: str = "regret"

    def __len__(self):
        return len(self.values)


def best_regret(trace, f_max: float | None = None) -> MetricSeries:
    """``f_max - max_{s<=t} f(x_s)`` per iteration, on noiseless values.

    Without ``f_max`` the running best value itself is returned
    (``kind == "best_value"``).
    """
    f = trace.clean_values if hasattr(trace, "clean_values") else np.asarray(trace, dtype=float)
    if f.size == 0:
        raise ValueError("empty trace")
    running = np.maximum.accumulate(f)
    if f_max is None:
        return MetricSeries(running, "best_value")
    return MetricSeries(f_max - running, "regret")


@dataclass
class AggregateCurve:
    """Pointwise mean with a band of +/- 0.25 sample standard deviations."""

    mean: np.ndarray
    half_width: np.ndarray
    n_runs: int

    @property
    def lower(self) -> np.ndarray:
        return self.mean - self.half_width

    @property
    def upper(self) -> np.ndarray:
        return self.mean + self.half_width


def aggregate_runs(series) -> AggregateCurve:
    """Aggregate equally long series.

    Sums use ``math.fsum`` so the result does not depend on run order.
    """
    rows = [np.asarray(s.values if isinstance(s, MetricSeries) else s, dtype=float)
            for s in series]
    if len(rows) < 2:
        raise ValueError("need at least two runs to aggregate")
    if len({r.shape for r in rows}) != 1:
        raise ValueError("runs have different lengths")
    M = np.vstack(rows)
    n = M.shape[0]
    mean = np.array([math.fsum(col) / n for col in M.T])
    var = np.array([math.fsum((col - m) ** 2) / (n - 1) for col, m in zip(M.T, mean)])
    return AggregateCurve(mean, 0.25 * np.sqrt(var), n)
