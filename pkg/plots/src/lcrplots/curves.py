"""Learning-curve and sensitivity charts from training metrics CSVs.

Input files follow the documented schema (one row per episode per run):

    run_id,seed,episode,total_env_steps,episode_return,epsilon,
    mean_td_loss,lcr_loss_first,lcr_loss_last

All statistics (trailing moving average, per-episode mean and standard
error across runs) are computed here; the raw CSVs are never modified.
Rendering is deterministic: fixed figure geometry, fixed style, no
timestamps in the output.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

EXPECTED_HEADER = (
    "run_id,seed,episode,total_env_steps,episode_return,epsilon,"
    "mean_td_loss,lcr_loss_first,lcr_loss_last"
)

DEFAULT_COLORS = ("tab:red", "tab:blue", "tab:green", "tab:orange", "tab:purple", "tab:brown")


class PlotError(ValueError):
    """Bad plotting input (schema mismatch, too few files, duplicate keys)."""


@dataclass
class CurveSpec:
    """What to draw: (metrics file, label, color) triples plus styling."""

    curves: list  # (path, label, color) triples
    smoothing_window: int = 100
    output: str = "curves.png"
    show_epsilon: bool = True
    title: str | None = None


def load_metrics(path) -> dict:
    """Parse one metrics CSV into per-run arrays keyed by run id."""
    path = Path(path)
    with open(path) as fh:
        header = fh.readline().strip()
    if header != EXPECTED_HEADER:
        raise PlotError(
            f"{path}: unexpected metrics schema; first line is {header!r}, expected {EXPECTED_HEADER!r}"
        )
    raw = np.genfromtxt(path, delimiter=",", skip_header=1, usecols=(0, 2, 4, 5), dtype=np.float64)
    if raw.ndim == 1:
        raw = raw[None]
    runs = {}
    for run_id in np.unique(raw[:, 0]).astype(int):
        block = raw[raw[:, 0] == run_id]
        order = np.argsort(block[:, 1])
        runs[run_id] = {
            "episode": block[order, 1].astype(int),
            "episode_return": block[order, 2],
            "epsilon": block[order, 3],
        }
    return runs


def trailing_average(values: np.ndarray, window: int) -> np.ndarray:
    """Moving average over the trailing `window` points.

    The first window-1 entries average whatever prefix exists, so the output
    has the same length as the input and window=1 is the identity.
    """
    if window < 1:
        raise PlotError(f"smoothing window must be >= 1, got {window}")
    sums = np.cumsum(values)
    out = np.empty_like(values, dtype=np.float64)
    out[:window] = sums[:window] / np.arange(1, min(window, len(values)) + 1)
    if len(values) > window:
        out[window:] = (sums[window:] - sums[:-window]) / window
    return out


def curve_statistics(runs: dict, window: int):
    """(episodes, mean, stderr, mean_epsilon) of smoothed returns across runs."""
    n_episodes = min(len(r["episode"]) for r in runs.values())
    smoothed = np.stack(
        [trailing_average(r["episode_return"][:n_episodes], window) for r in runs.values()]
    )
    eps = np.stack([r["epsilon"][:n_episodes] for r in runs.values()]).mean(axis=0)
    mean = smoothed.mean(axis=0)
    if len(runs) > 1:
        stderr = smoothed.std(axis=0, ddof=1) / np.sqrt(len(runs))
    else:
        stderr = np.zeros_like(mean)
    episodes = next(iter(runs.values()))["episode"][:n_episodes]
    return episodes, mean, stderr, eps


def plot_learning_curves(spec: CurveSpec):
    """Banded mean learning curves per file, epsilon overlaid as dotted black."""
    if not spec.curves:
        raise PlotError("no curves to draw")
    fig, ax = plt.subplots(figsize=(7.0, 4.2), dpi=120)
    eps_axis = None
    for i, (path, label, color) in enumerate(spec.curves):
        runs = load_metrics(path)
        episodes, mean, stderr, eps = curve_statistics(runs, spec.smoothing_window)
        color = color or DEFAULT_COLORS[i % len(DEFAULT_COLORS)]
        ax.plot(episodes, mean, color=color, label=label, linewidth=1.4)
        ax.fill_between(episodes, mean - stderr, mean + stderr, color=color, alpha=0.25, linewidth=0)
        if spec.show_epsilon and eps_axis is None:
            eps_axis = ax.twinx()
            eps_axis.plot(episodes, eps, color="black", linestyle=":", linewidth=1.0)
            eps_axis.set_ylabel("epsilon")
            eps_axis.set_ylim(0.0, 1.05)
    ax.set_xlabel("episode")
    ax.set_ylabel(f"return (trailing mean over {spec.smoothing_window})")
    if spec.title:
        ax.set_title(spec.title)
    ax.legend(loc="best")
    fig.tight_layout()
    out = Path(spec.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, metadata={"Software": "lcrplots"})
    plt.close(fig)
    return out


def plot_sensitivity(files_by_value: dict, param_name: str, output, smoothing_window: int = 100):
    """One smoothed mean curve per hyperparameter value on shared axes."""
    if len(files_by_value) < 2:
        raise PlotError(f"sensitivity chart needs >= 2 values, got {len(files_by_value)}")
    fig, ax = plt.subplots(figsize=(7.0, 4.2), dpi=120)
    for i, (value, path) in enumerate(sorted(files_by_value.items(), key=lambda kv: kv[0])):
        runs = load_metrics(path)
        episodes, mean, stderr, _ = curve_statistics(runs, smoothing_window)
        color = DEFAULT_COLORS[i % len(DEFAULT_COLORS)]
        ax.plot(episodes, mean, color=color, label=f"{param_name}={value}", linewidth=1.4)
        ax.fill_between(episodes, mean - stderr, mean + stderr, color=color, alpha=0.25, linewidth=0)
    ax.set_xlabel("episode")
    ax.set_ylabel(f"return (trailing mean over {smoothing_window})")
    ax.set_title(f"sensitivity to {param_name}")
    ax.legend(loc="best")
    fig.tight_layout()
    out = Path(output)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, metadata={"Software": "lcrplots"})
    plt.close(fig)
    return out


def sweep_value_from_name(path) -> float:
    """Value encoded in a sweep filename metrics_<param>_<value>.csv."""
    stem = Path(path).stem
    tail = stem.rsplit("_", 1)
    try:
        return float(tail[1])
    except (IndexError, ValueError):
        raise PlotError(f"{path}: cannot read a sweep value from the filename") from None
