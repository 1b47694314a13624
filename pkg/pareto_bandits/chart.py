"""Static SVG charts of aggregated results."""
import logging
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd

logger = logging.getLogger(__name__)

LABELS = {
    "linucb++": "LinUCB++",
    "linucb": "LinUCB",
    "linucb_oracle": "LinUCB Oracle",
    "smooth_corral": "Smooth Corral",
    "linucb++_corral": "LinUCB++ (corral)",
    "ucb": "UCB",
}


def _save(fig, path: Path, config_hash: str):
    # Fixed hash salt and no date: identical results give identical bytes.
    with plt.rc_context({"svg.hashsalt": config_hash, "svg.fonttype": "none"}):
        fig.savefig(path, format="svg", metadata={"Date": None, "Description": f"config_hash={config_hash}"})
    plt.close(fig)
    logger.info("wrote %s", path)


def plot_curves(curves: pd.DataFrame, path: Path, config_hash: str, title: str = None):
    """Mean cumulative regret per algorithm, one curve each, with shaded 2-sigma bands."""
    fig, ax = plt.subplots(figsize=(6.4, 4.8))

    for name, table in curves.groupby("algorithm", sort=False):
        step = table["step"].to_numpy()
        mean = table["mean_regret"].to_numpy()
        band = table["band_halfwidth"].to_numpy()

        line, = ax.plot(step, mean, label=LABELS.get(name, name))
        line.set_gid(f"curve-{name}")
        fill = ax.fill_between(step, mean - band, mean + band, alpha=0.2, linewidth=0, color=line.get_color())
        fill.set_gid(f"band-{name}")

    ax.set_xlabel("step")
    ax.set_ylabel("cumulative regret")
    if title:
        ax.set_title(title)
    if len(curves):
        ax.legend(loc="upper left")
    ax.grid(alpha=0.3)
    fig.tight_layout()

    _save(fig, path, config_hash)


def plot_sweep(sweep: pd.DataFrame, path: Path, config_hash: str, title: str = None):
    """Mean terminal regret against the hardness level, with 2-sigma error bars."""
    fig, ax = plt.subplots(figsize=(6.4, 4.8))

    for name, table in sweep.groupby("algorithm", sort=False):
        table = table.sort_values("alpha")
        container = ax.errorbar(
            table["alpha"], table["mean_terminal_regret"], yerr=table["band_halfwidth"],
            marker="o", capsize=3, label=LABELS.get(name, name)
        )
        container.lines[0].set_gid(f"curve-{name}")

    ax.set_xlabel("hardness level alpha")
    ax.set_ylabel("terminal cumulative regret")
    if title:
        ax.set_title(title)
    if len(sweep):
        ax.legend(loc="upper left")
    ax.grid(alpha=0.3)
    fig.tight_layout()

    _save(fig, path, config_hash)
