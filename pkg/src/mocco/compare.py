"""Multi-seed sweeps: exploration-mode comparisons and hyperparameter ablations.

Each cell of a sweep is an ordinary training run in its own directory. The
per-run score is the mean of its last 10 evaluation scores; a cell reports the
mean and std of that score across seeds plus the median step of the first
successful training episode (``inf`` when a run never succeeded).
"""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .agent import canonical_mode
from .config import RunConfig, coerce
from .training import final_score, read_metrics, run_training

log = logging.getLogger(__name__)

ABLATION_PARAMS = {
    "beta": "beta",
    "window": "scaling_window",
    "n": "scaling_window",
    "scaling_window": "scaling_window",
    "mc_capacity": "mc_capacity",
    "dmc": "mc_capacity",
}


@dataclass
class RunRow:
    label: str
    seed: int
    status: str
    final10_mean: float | None
    first_success_step: int | None
    output_dir: str


def _run_one(config: RunConfig) -> dict:
    try:
        r = run_training(config)
        return {"status": r.status, "final10_mean": r.final10_mean, "first_success_step": r.first_success_step}
    except Exception as exc:  # a failed cell must not take the sweep down
        log.exception("run %s failed", config.output_dir)
        Path(config.output_dir).mkdir(parents=True, exist_ok=True)
        (Path(config.output_dir) / "FAILED").write_text(f"{type(exc).__name__}: {exc}\n")
        return {"status": "failed", "final10_mean": None, "first_success_step": None}


def _sweep(cells: list[tuple[str, RunConfig]], jobs: int) -> list[RunRow]:
    configs = [c for _, c in cells]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_one, configs))
    else:
        results = [_run_one(c) for c in configs]
    return [
        RunRow(label, c.seed, r["status"], r["final10_mean"], r["first_success_step"], str(c.output_dir))
        for (label, c), r in zip(cells, results)
    ]


def summarize(rows: Sequence[RunRow]) -> list[dict]:
    """Aggregate per-run rows into one record per label, in first-seen label order."""
    labels = list(dict.fromkeys(r.label for r in rows))
    table = []
    for label in labels:
        group = [r for r in rows if r.label == label]
        ok = [r for r in group if r.status == "ok" and r.final10_mean is not None]
        scores = np.array([r.final10_mean for r in ok])
        firsts = [r.first_success_step if r.first_success_step is not None else math.inf for r in ok]
        table.append({
            "label": label,
            "runs": len(group),
            "failed": len(group) - len(ok),
            "final10_mean": float(scores.mean()) if len(ok) else None,
            "final10_std": float(scores.std()) if len(ok) else None,
            "median_first_success": float(np.median(firsts)) if ok else None,
            "successful_runs": sum(1 for f in firsts if math.isfinite(f)),
        })
    return table


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return "inf" if math.isinf(v) else repr(v)
    return v


def _write_csv(path: Path, rows: list[dict]):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        if not rows:
            return
        w.writerow(rows[0].keys())
        for r in rows:
            w.writerow([_fmt(v) for v in r.values()])


def _write_outputs(out: Path, column: str, rows: list[RunRow], table: list[dict], plot: bool) -> list[dict]:
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "runs.csv", [
        {column: r.label, "seed": r.seed, "status": r.status, "final10_mean": r.final10_mean,
         "first_success_step": r.first_success_step, "output_dir": r.output_dir} for r in rows
    ])
    renamed = [{column: t["label"], **{k: v for k, v in t.items() if k != "label"}} for t in table]
    _write_csv(out / "comparison.csv", renamed)
    (out / "comparison.json").write_text(json.dumps(renamed, indent=1, default=_fmt) + "\n")
    if plot:
        from .plots import plot_comparison

        plot_comparison(out, column, rows, renamed)
    return renamed


def run_comparison(base: RunConfig, modes: Sequence[str], seeds: Sequence[int], output_dir: str | Path,
                   jobs: int = 1, plot: bool = True) -> list[dict]:
    """Train ``base`` once per (exploration mode, seed) and tabulate per mode."""
    if not modes or not seeds:
        raise ValueError("need at least one mode and one seed")
    out = Path(output_dir)
    cells = []
    for mode in modes:
        m = canonical_mode(mode)
        for seed in seeds:
            cells.append((m, base.replace(exploration_mode=m, seed=int(seed), output_dir=str(out / m / f"seed{seed}"))))
    rows = _sweep(cells, jobs)
    return _write_outputs(out, "mode", rows, summarize(rows), plot)


def run_ablation(base: RunConfig, param: str, values: Sequence, seeds: Sequence[int], output_dir: str | Path,
                 jobs: int = 1, plot: bool = True) -> list[dict]:
    """Sweep one MOCCO hyperparameter (beta, scaling window N, or MC buffer size)."""
    try:
        field = ABLATION_PARAMS[param.lower()]
    except KeyError:
        raise ValueError(f"unknown ablation parameter {param!r}; choose from {sorted(ABLATION_PARAMS)}") from None
    out = Path(output_dir)
    cells = []
    for v in values:
        value = coerce(field, v)
        for seed in seeds:
            cfg = base.replace(**{field: value}, seed=int(seed), output_dir=str(out / f"{field}={value}" / f"seed{seed}"))
            cells.append((str(value), cfg))
    rows = _sweep(cells, jobs)
    return _write_outputs(out, field, rows, summarize(rows), plot)


def recompute_from_runs(runs_csv: str | Path) -> dict[str, float]:
    """Mean final-10 score per label, recomputed from each run's own metrics file."""
    with open(runs_csv) as f:
        rows = list(csv.DictReader(f))
    label_key = next(iter(rows[0])) if rows else "mode"
    per_label: dict[str, list[float]] = {}
    for r in rows:
        if r["status"] != "ok":
            continue
        scores = [m["eval_return_mean"] for m in read_metrics(r["output_dir"])]
        per_label.setdefault(r[label_key], []).append(final_score(scores))
    return {k: float(np.mean(v)) for k, v in per_label.items()}
