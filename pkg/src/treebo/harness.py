"""Experiment driver: runs every (algorithm, seed) cell, writes per-run CSV
traces, aggregated curves, plots and a manifest.

Configuration is a flat ``key = value`` file; any key can be overridden on
the command line with ``--key value``::

    python -m treebo experiment.cfg --out results/ --n_iter 100

Trace CSV columns are fixed: ``t, x1..xD, y, f_star, cum_cost, f1, regret``.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import io
import json
import logging
import os
import sys
import tempfile
import traceback
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .benchmarks import make_benchmark
from .domain import ConfigError, DependencyForest, RunConfig, parse_key_values, run_config_from
from .metrics import aggregate_runs, best_regret, f1_score
from .optimizer import RunAborted, run_oracle, run_random, run_tree_gp_ucb
from .structure import format_edge_list

log = logging.getLogger(__name__)

ALGORITHMS = ("tree", "random", "oracle")

HARNESS_DEFAULTS = {
    "objective": "gp_sample",
    "structure": "star",
    "size": "25",
    "rows": "0",
    "sigma": "1.0",
    "lengthscale": "0.2",
    "dim": "2",
    "aux": "14",
    "objective_noise": "0.15",
    "algorithms": "tree,random",
    "seeds": "25",
    "workers": "1",
    "output": "results",
}

CONFIG_KEYS = tuple(HARNESS_DEFAULTS) + tuple(f.name for f in dataclasses.fields(RunConfig))


def trace_columns(dim: int) -> list[str]:
    return ["t"] + [f"x{d + 1}" for d in range(dim)] + ["y", "f_star", "cum_cost", "f1", "regret"]


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _benchmark(cfg: dict, seed: int, run_cfg: RunConfig):
    levels = run_cfg.discrete_levels if run_cfg.mode == "discrete" else None
    return make_benchmark(
        cfg["objective"], seed,
        structure=cfg["structure"], size=int(cfg["size"]), rows=int(cfg["rows"]),
        sigma=float(cfg["sigma"]), lengthscale=float(cfg["lengthscale"]),
        levels=levels, dim=int(cfg["dim"]), aux=int(cfg["aux"]),
        noise_std=float(cfg["objective_noise"]))


def _seed_list(cfg: dict) -> list[int]:
    raw = str(cfg["seeds"]).strip()
    base = int(cfg.get("seed", 0))
    if "," in raw:
        return [int(s) for s in raw.split(",") if s.strip()]
    return [base + k for k in range(int(raw))]


def run_cell(cfg: dict, algorithm: str, seed: int) -> dict:
    """Run one (algorithm, seed) cell and return its metric series and CSV text."""
    run_cfg = run_config_from(cfg)
    bench = _benchmark(cfg, seed, run_cfg)
    noise = float(cfg["objective_noise"])
    kw = dict(seed=seed, noise_std=noise)
    if algorithm == "tree":
        trace = run_tree_gp_ucb(bench.f, bench.domain, run_cfg, **kw)
    elif algorithm == "random":
        trace = run_random(bench.f, bench.domain, run_cfg, **kw)
    elif algorithm == "oracle":
        if bench.graph is None or bench.truth is None:
            raise ValueError(f"{bench.name} has no ground truth for the oracle")
        truth = (DependencyForest(bench.graph), bench.truth)
        trace = run_oracle(bench.f, bench.domain, run_cfg, truth=truth, **kw)
    else:
        raise ValueError(f"unknown algorithm {algorithm!r}")

    regret = best_regret(trace, bench.f_max)
    if bench.graph is not None and algorithm != "random":
        f1 = [f1_score(DependencyForest.from_edges(trace.dim, r.edges), bench.graph)
              for r in trace.records]
    else:
        f1 = [float("nan")] * len(trace)
    regret_col = regret.values if regret.kind == "regret" else [float("nan")] * len(trace)
    rows = [
        [_fmt(r.t)] + [_fmt(v) for v in r.x]
        + [_fmt(r.y), _fmt(r.f_star), _fmt(r.cum_cost), _fmt(f), _fmt(g)]
        for r, f, g in zip(trace.records, f1, regret_col)
    ]
    snapshots = "".join(
        f"# t={r.t}\n" + format_edge_list(DependencyForest.from_edges(trace.dim, r.edges))
        for r in trace.records if r.relearned)
    return {
        "algorithm": algorithm,
        "seed": seed,
        "csv": _csv_text(trace_columns(trace.dim), rows),
        "regret": regret.values.tolist(),
        "regret_kind": regret.kind,
        "cost": trace.cum_cost.tolist(),
        "f1": list(f1),
        "structures": snapshots,
    }


def _safe_cell(args):
    cfg, algorithm, seed = args
    try:
        return run_cell(cfg, algorithm, seed)
    except RunAborted as exc:
        return {"algorithm": algorithm, "seed": seed, "error": str(exc)}
    except Exception as exc:  # a failed cell must not stop the experiment
        return {"algorithm": algorithm, "seed": seed,
                "error": f"{type(exc).__name__}: {exc}\n{traceback.format_exc()}"}


def _config_hash(cfg: dict) -> str:
    canon = json.dumps({k: str(cfg[k]) for k in sorted(cfg)}, sort_keys=True)
    return hashlib.sha256(canon.encode()).hexdigest()


def resolve_config(config=None, overrides: dict | None = None) -> dict:
    """Merge defaults, a config file or mapping, and overrides; validate."""
    cfg = dict(HARNESS_DEFAULTS)
    if isinstance(config, (str, os.PathLike)):
        cfg.update(parse_key_values(Path(config).read_text(encoding="utf-8")))
    elif config is not None:
        cfg.update({k: str(v) for k, v in config.items()})
    cfg.update({k: str(v) for k, v in (overrides or {}).items() if v is not None})
    unknown = set(cfg) - set(CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
    run_config_from(cfg)
    algos = [a.strip() for a in cfg["algorithms"].split(",") if a.strip()]
    bad = [a for a in algos if a not in ALGORITHMS]
    if bad or not algos:
        raise ConfigError(f"algorithms must be drawn from {ALGORITHMS}, got {cfg['algorithms']!r}")
    return cfg


def run_experiment(config=None, output=None, overrides: dict | None = None) -> Path:
    """Execute every (algorithm, seed) cell and write the artifact directory.

    Layout::

        traces/<algorithm>_seed<k>.csv      one per cell
        structures/<algorithm>_seed<k>.txt  learned edge lists at relearn steps
        aggregate_regret.csv, aggregate_cost.csv, aggregate_f1.csv
        regret_vs_iteration.png, regret_vs_cost.png, f1_vs_iteration.png
        manifest.json

    Returns the output directory. ``manifest.json`` lists failed cells.
    """
    cfg = resolve_config(config, overrides)
    out = Path(output if output is not None else cfg["output"])
    algos = [a.strip() for a in cfg["algorithms"].split(",") if a.strip()]
    seeds = _seed_list(cfg)
    cells = [(cfg, a, s) for a in algos for s in seeds]
    workers = int(cfg["workers"])
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_safe_cell, cells))
    else:
        results = [_safe_cell(c) for c in cells]

    failures = []
    done = {a: [] for a in algos}
    for res in results:
        name = f"{res['algorithm']}_seed{res['seed']}"
        if "error" in res:
            log.error("cell %s failed: %s", name, res["error"])
            failures.append({"cell": name, "error": res["error"]})
            continue
        _atomic_write(out / "traces" / f"{name}.csv", res["csv"])
        if res["structures"]:
            _atomic_write(out / "structures" / f"{name}.txt", res["structures"])
        done[res["algorithm"]].append(res)

    curves = _write_aggregates(out, done)
    _write_plots(out, curves)
    manifest = {
        "config": {k: cfg[k] for k in sorted(cfg)},
        "config_hash": _config_hash(cfg),
        "algorithms": algos,
        "seeds": seeds,
        "completed": sorted(f"{r['algorithm']}_seed{r['seed']}" for rs in done.values() for r in rs),
        "failed": failures,
    }
    _atomic_write(out / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return out


def _write_aggregates(out: Path, done: dict) -> dict:
    curves = {}
    for metric in ("regret", "cost", "f1"):
        rows = []
        for algo, results in done.items():
            if not results:
                continue
            series = [np.asarray(r[metric], dtype=float) for r in results]
            if len(series) >= 2:
                agg = aggregate_runs(series)
                mean, half = agg.mean, agg.half_width
            else:
                mean, half = series[0], np.zeros_like(series[0])
            kind = results[0]["regret_kind"] if metric == "regret" else metric
            curves[(metric, algo)] = (mean, half, kind, np.asarray(results[0]["cost"]))
            for t, (m, h) in enumerate(zip(mean, half), 1):
                rows.append([algo, str(t), _fmt(m), _fmt(m - h), _fmt(m + h)])
        _atomic_write(out / f"aggregate_{metric}.csv",
                      _csv_text(["algorithm", "t", "mean", "lower", "upper"], rows))
    return curves


def _write_plots(out: Path, curves: dict) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    specs = [
        ("regret", "iteration", "regret_vs_iteration.png"),
        ("regret", "cost", "regret_vs_cost.png"),
        ("f1", "iteration", "f1_vs_iteration.png"),
    ]
    for metric, xaxis, fname in specs:
        fig, ax = plt.subplots(figsize=(5, 3.5))
        lines = []
        for (m, algo), (mean, half, kind, _) in curves.items():
            if m != metric or np.all(np.isnan(mean)):
                continue
            if xaxis == "cost":
                x = curves[("cost", algo)][0]
                if not np.any(x):
                    continue
            else:
                x = np.arange(1, mean.size + 1)
            (line,) = ax.plot(x, mean, label=algo)
            ax.fill_between(x, mean - half, mean + half, alpha=0.25, color=line.get_color())
            lines.append((mean[-1], line))
            ylabel = "best regret" if kind == "regret" else ("best value" if metric == "regret" else "F1")
            ax.set_ylabel(ylabel)
        # legend ordered by the final y-value of each curve
        lines.sort(key=lambda p: -p[0])
        if lines:
            ax.legend([l for _, l in lines], [l.get_label() for _, l in lines])
        ax.set_xlabel("cumulative message-passing cost" if xaxis == "cost" else "iteration")
        fig.tight_layout()
        tmp = out / f".{fname}.tmp.png"
        fig.savefig(tmp, dpi=100, metadata={"Software": None})
        plt.close(fig)
        os.replace(tmp, out / fname)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="python -m treebo",
                                     description="Run a Tree-GP-UCB benchmark experiment.")
    parser.add_argument("config", nargs="?", help="flat key = value configuration file")
    parser.add_argument("--out", help="output directory (overrides 'output')")
    for key in CONFIG_KEYS:
        parser.add_argument(f"--{key}", dest=key, default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    overrides = {k: getattr(args, k) for k in CONFIG_KEYS}
    try:
        out = run_experiment(args.config, args.out, overrides)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    manifest = json.loads((out / "manifest.json").read_text())
    print(f"wrote {out} ({len(manifest['completed'])} cells, {len(manifest['failed'])} failed)")
    return 0 if not manifest["failed"] else 1
