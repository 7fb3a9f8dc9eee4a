"""Figure rendering for run directories and sweep outputs.

Every function reads the CSV/JSONL artifacts already on disk and writes a PNG
next to them, so figures can always be regenerated from a finished run.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .diagnostics import read_csv_columns  # noqa: E402
from .training import read_metrics  # noqa: E402

golden_mean = (np.sqrt(5) - 1.0) / 2.0
fig_width = 6.0

params = {
    "axes.labelsize": 10,
    "font.size": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "figure.figsize": [fig_width, fig_width * golden_mean],
    "figure.dpi": 120,
    "lines.linewidth": 1.2,
    "axes.spines.top": False,
    "axes.spines.right": False,
}


def _figure(nrows=1, ncols=1, **kw):
    with plt.rc_context(params):
        return plt.subplots(nrows, ncols, **kw)


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_learning_curve(run_dir: str | Path) -> Path:
    run_dir = Path(run_dir)
    rows = read_metrics(run_dir)
    fig, ax = _figure()
    if rows:
        steps = np.array([r["step"] for r in rows])
        mean = np.array([r["eval_return_mean"] for r in rows])
        std = np.array([r["eval_return_std"] for r in rows])
        ax.plot(steps, mean)
        ax.fill_between(steps, mean - std, mean + std, alpha=0.25)
    ax.set_xlabel("environment steps")
    ax.set_ylabel("evaluation return")
    return _save(fig, run_dir / "learning_curve.png")


def plot_q_diagnostics(run_dir: str | Path) -> Path | None:
    """Critic Q, rollout Q-true and ensemble Q-MC against training steps."""
    run_dir = Path(run_dir)
    path = run_dir / "q_diagnostics.csv"
    if not path.exists():
        return None
    cols = read_csv_columns(path)
    fig, ax = _figure()
    if cols:
        ax.plot(cols["step"], cols["q_td_mean"], label="Q")
        ax.plot(cols["step"], cols["q_true_mean"], label="Q-true")
        if not np.all(np.isnan(cols["q_mc_mean"])):
            ax.plot(cols["step"], cols["q_mc_mean"], label="Q-MC")
        ax.legend(frameon=False)
    ax.set_xlabel("environment steps")
    ax.set_ylabel("mean Q over probe batch")
    return _save(fig, run_dir / "q_diagnostics.png")


def plot_traces(run_dir: str | Path, smooth: int = 100) -> Path | None:
    """zeta (mean over action dims) and each a_e component along training."""
    run_dir = Path(run_dir)
    path = run_dir / "trace.csv"
    if not path.exists():
        return None
    cols = read_csv_columns(path)
    fig, (ax1, ax2) = _figure(1, 2, figsize=(fig_width * 1.4, fig_width * golden_mean))
    if cols:
        step = cols["step"]
        zeta = np.mean([v for k, v in cols.items() if k.startswith("zeta_")], axis=0)
        k = max(1, min(smooth, len(zeta)))
        kernel = np.ones(k) / k
        ax1.plot(step[k - 1:], np.convolve(zeta, kernel, mode="valid"))
        for name, v in cols.items():
            if name.startswith("a_e_"):
                ax2.plot(step, v, lw=0.4, label=name)
        ax2.legend(frameon=False)
    ax1.set_xlabel("environment steps")
    ax1.set_ylabel("zeta (mean over dims)")
    ax1.set_ylim(0, 1.05)
    ax2.set_xlabel("environment steps")
    ax2.set_ylabel("a_e")
    return _save(fig, run_dir / "traces.png")


def plot_surface(run_dir: str | Path) -> Path | None:
    """Side-by-side heatmaps of ensemble uncertainty and critic Q over the action plane."""
    run_dir = Path(run_dir)
    path = run_dir / "surface.csv"
    if not path.exists():
        return None
    cols = read_csv_columns(path)
    r = int(round(np.sqrt(len(cols["a1"]))))
    extent = (cols["a2"].min(), cols["a2"].max(), cols["a1"].min(), cols["a1"].max())
    fig, axes = _figure(1, 2, figsize=(fig_width * 1.4, fig_width * 0.6))
    for ax, key, title in zip(axes, ("psi", "q"), ("uncertainty", "critic Q")):
        im = ax.imshow(cols[key].reshape(r, r), origin="lower", extent=extent, aspect="auto", cmap="viridis")
        ax.set_title(title)
        ax.set_xlabel("a2")
        ax.set_ylabel("a1")
        fig.colorbar(im, ax=ax, shrink=0.8)
    return _save(fig, run_dir / "surface.png")


def plot_run(run_dir: str | Path) -> list[Path]:
    out = [plot_learning_curve(run_dir)]
    for fn in (plot_q_diagnostics, plot_traces, plot_surface):
        p = fn(run_dir)
        if p is not None:
            out.append(p)
    return out


def plot_comparison(out_dir: str | Path, column: str, rows, table: list[dict]) -> Path:
    """Mean evaluation curve per sweep label (averaged over seeds), plus a bar of final scores."""
    out_dir = Path(out_dir)
    fig, (ax1, ax2) = _figure(1, 2, figsize=(fig_width * 1.5, fig_width * golden_mean))
    for t in table:
        label = str(t[column])
        curves = []
        for r in rows:
            if str(r.label) == label and r.status == "ok":
                m = read_metrics(r.output_dir)
                if m:
                    curves.append([x["eval_return_mean"] for x in m])
        if curves:
            n = min(len(c) for c in curves)
            steps = [x["step"] for x in read_metrics(next(r.output_dir for r in rows if str(r.label) == label))][:n]
            ax1.plot(steps, np.mean([c[:n] for c in curves], axis=0), label=label)
    ax1.set_xlabel("environment steps")
    ax1.set_ylabel("evaluation return")
    ax1.legend(frameon=False, title=column)
    labels = [str(t[column]) for t in table]
    means = [t["final10_mean"] if t["final10_mean"] is not None else np.nan for t in table]
    stds = [t["final10_std"] if t["final10_std"] is not None else 0.0 for t in table]
    ax2.bar(labels, means, yerr=stds, capsize=3, color="#4eb3d3")
    ax2.set_ylabel("mean of last 10 evaluations")
    ax2.set_xlabel(column)
    return _save(fig, out_dir / "comparison.png")
