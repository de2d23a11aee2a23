"""Figure rendering for the CLI report paths.

Every command that writes delimited output can also render a PNG next to it.
Figures are deterministic for identical inputs (fixed size, dpi, and no
timestamp metadata), so repeated runs produce byte-identical files.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["plot_trace", "plot_nonstationary", "plot_stationary", "plot_network"]

DPI = 140

ARM_LABELS = {
    "rap": "adaptive (exact)",
    "rap_approx": "adaptive (diag approx)",
    "stepwise": "stepwise CV",
    "fixed_cv": "fixed CV",
}
ARM_COLORS = {
    "rap": "tab:blue",
    "rap_approx": "tab:cyan",
    "stepwise": "tab:orange",
    "fixed_cv": "tab:red",
}


def _save(fig, path):
    fig.savefig(path, dpi=DPI)
    plt.close(fig)


def plot_trace(records, path, title="stream trace"):
    """Penalty, look-ahead loss, and active-set size over one run."""
    t = np.array([rec.t for rec in records])
    lam = np.array([rec.lam for rec in records])
    loss = np.array([rec.lookahead_loss for rec in records])
    size = np.array([rec.active_size for rec in records])

    fig, axes = plt.subplots(3, 1, sharex=True, figsize=(7, 7))
    axes[0].plot(t, lam, color="tab:blue")
    axes[0].set_ylabel("penalty")
    axes[1].plot(t, loss, color="tab:gray", lw=0.8)
    if len(loss) >= 20:
        k = max(len(loss) // 30, 5)
        kernel = np.ones(k) / k
        smooth = np.convolve(loss, kernel, mode="valid")
        axes[1].plot(t[k - 1:], smooth, color="tab:red", label="moving avg")
        axes[1].legend(loc="upper right", fontsize=8)
    axes[1].set_ylabel("look-ahead loss")
    axes[2].step(t, size, color="tab:green", where="post")
    axes[2].set_ylabel("active size")
    axes[2].set_xlabel("t")
    axes[0].set_title(title)
    for ax in axes:
        ax.grid(alpha=0.3)
    fig.tight_layout()
    _save(fig, path)


def plot_nonstationary(result, path):
    """Median penalty track and mean look-ahead loss per arm, with change points."""
    fig, axes = plt.subplots(1, 2, figsize=(11, 4))
    t = np.arange(1, next(iter(result.arms.values())).lam_traces.shape[1] + 1)
    for arm, res in result.arms.items():
        axes[0].plot(t, np.median(res.lam_traces, axis=0),
                     color=ARM_COLORS[arm], label=ARM_LABELS[arm])
        axes[1].plot(t, np.mean(res.loss_traces, axis=0),
                     color=ARM_COLORS[arm], label=ARM_LABELS[arm], lw=0.9)
    for cp in result.changepoints:
        for ax in axes:
            ax.axvline(cp + 0.5, color="k", ls=":", lw=0.8)
    axes[0].set_ylabel("median penalty")
    axes[1].set_ylabel("mean look-ahead loss")
    axes[1].set_yscale("log")
    for ax in axes:
        ax.set_xlabel("t")
        ax.grid(alpha=0.3)
        ax.legend(fontsize=8)
    fig.suptitle(f"non-stationary benchmark, {result.family}, "
                 f"{result.n_reps} replications")
    fig.tight_layout()
    _save(fig, path)


def plot_stationary(result, path):
    """Violin plot of the l1-norm differences by dimensionality."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    data = [result.deltas[p] for p in result.p_values]
    ax.violinplot(data, showmedians=True)
    ax.axhline(0.0, color="k", lw=0.8, ls="--")
    ax.set_xticks(np.arange(1, len(result.p_values) + 1))
    ax.set_xticklabels([str(p) for p in result.p_values])
    ax.set_xlabel("p")
    ax.set_ylabel("l1 norm difference (CV - adaptive)")
    ax.set_title(f"stationary benchmark, {result.family}, "
                 f"{result.n_reps} replications")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    _save(fig, path)


def plot_network(checkpoints, edge_counts, lam_traces, path, n_nodes):
    """Edge count per checkpoint and per-node penalty tracks."""
    fig, axes = plt.subplots(1, 2, figsize=(11, 4))
    axes[0].plot(checkpoints, edge_counts, marker="o", ms=3, color="tab:blue")
    axes[0].set_xlabel("t")
    axes[0].set_ylabel("edges")
    axes[0].set_title(f"edges over time ({n_nodes} nodes)")
    t = np.arange(1, lam_traces.shape[0] + 1)
    for j in range(lam_traces.shape[1]):
        axes[1].plot(t, lam_traces[:, j], lw=0.7, alpha=0.7)
    axes[1].set_xlabel("t")
    axes[1].set_ylabel("penalty")
    axes[1].set_title("per-node penalty")
    for ax in axes:
        ax.grid(alpha=0.3)
    fig.tight_layout()
    _save(fig, path)
