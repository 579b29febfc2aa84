"""Static PNG figures for the report subcommands.

Rendering uses the Agg backend and strips PNG metadata so that a fixed
seed gives byte-identical files.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_META = {"Software": None}


def _save(fig, path):
    fig.savefig(path, dpi=100, metadata=_META)
    plt.close(fig)


def plot_weight_intervals(times, summaries, path, title="posterior sociabilities"):
    """One panel line per node: posterior mean with a shaded 90% interval.

    ``summaries`` maps node label -> (mean, lo, hi) arrays over ``times``.
    """
    fig, ax = plt.subplots(figsize=(7, 4))
    for label, (mean, lo, hi) in summaries.items():
        line, = ax.plot(times, mean, lw=1.2, label=str(label))
        ax.fill_between(times, lo, hi, color=line.get_color(), alpha=0.2, lw=0)
    ax.set_xlabel("time")
    ax.set_ylabel("weight")
    ax.set_title(title)
    if summaries:
        ax.legend(fontsize=7, ncol=2, frameon=False)
    fig.tight_layout()
    _save(fig, path)


def plot_traces(traces, path):
    """Hyperparameter traces, one row per parameter."""
    names = list(traces)
    fig, axes = plt.subplots(len(names), 1, figsize=(7, 1.6 * max(len(names), 1)), squeeze=False)
    for ax, name in zip(axes[:, 0], names):
        ax.plot(np.asarray(traces[name]), lw=0.6)
        ax.set_ylabel(name)
    axes[-1, 0].set_xlabel("sample")
    fig.tight_layout()
    _save(fig, path)


def plot_sparsity(rows, path, dense_rows=None):
    """Median edge / node^2 ratio against alpha on log-log axes."""
    fig, ax = plt.subplots(figsize=(5, 4))
    a = [r["alpha"] for r in rows if np.isfinite(r["median_ratio"])]
    v = [r["median_ratio"] for r in rows if np.isfinite(r["median_ratio"])]
    ax.loglog(a, v, "o-", label="model")
    if dense_rows:
        ax.loglog([r["alpha"] for r in dense_rows], [r["median_ratio"] for r in dense_rows],
                  "s--", label="constant weights")
    ax.set_xlabel("alpha")
    ax.set_ylabel("median edges / nodes^2")
    ax.legend(frameon=False)
    fig.tight_layout()
    _save(fig, path)
