"""Heatmap figures for parameters, supports and confusion matrices.

matplotlib is imported on first use and forced onto the non-interactive Agg
backend; nothing else in the package depends on it.
"""

from __future__ import annotations

import numpy as np


def _pyplot():
    import matplotlib

    matplotlib.use("Agg", force=True)
    import matplotlib.pyplot as plt

    return plt


def _ticks(ax, d, offset=0):
    step = max(1, d // 10)
    ax.set_xticks(np.arange(0, d, step))
    ax.set_xticklabels(np.arange(offset, d + offset, step))


def plot_params(mu, alpha, path, title=None):
    """``mu`` as a column on the left, ``alpha`` as a matrix on the right."""
    plt = _pyplot()
    mu = np.asarray(mu, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    d = mu.size
    fig, (ax_mu, ax_a) = plt.subplots(1, 2, figsize=(7.5, 5.5),
                                      gridspec_kw={"width_ratios": [1, d]})
    im_mu = ax_mu.imshow(mu[:, None], cmap="Reds", aspect="auto", vmin=0)
    ax_mu.set_xticks([0])
    ax_mu.set_xticklabels(["mu"])
    step = max(1, d // 10)
    ax_mu.set_yticks(np.arange(0, d, step))
    ax_mu.set_ylabel("j")
    im_a = ax_a.imshow(alpha, cmap="Blues", aspect="auto", vmin=0)
    _ticks(ax_a, d)
    ax_a.set_yticks([])
    ax_a.set_xlabel("j'")
    fig.colorbar(im_mu, ax=ax_mu, location="left", pad=0.6)
    fig.colorbar(im_a, ax=ax_a)
    if title:
        fig.suptitle(title)
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)


def plot_support(alpha, path, title=None):
    plt = _pyplot()
    support = np.asarray(alpha) != 0
    fig, ax = plt.subplots(figsize=(5.5, 5))
    ax.imshow(support, cmap="Greys", vmin=0, vmax=1)
    ax.set_xlabel("j'")
    ax.set_ylabel("j")
    ax.set_title(title or f"estimated support ({int(support.sum())} active)")
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)


def plot_confusion(matrix, path, title=None):
    plt = _pyplot()
    m = np.asarray(matrix, dtype=float)
    K = m.shape[0]
    fig, ax = plt.subplots(figsize=(1.2 * K + 2.5, 1.2 * K + 2))
    im = ax.imshow(m, cmap="viridis", vmin=0, vmax=1)
    for i in range(K):
        for j in range(K):
            ax.text(j, i, f"{m[i, j]:.2f}", ha="center", va="center",
                    color="white" if m[i, j] < 0.5 else "black")
    ax.set_xticks(range(K))
    ax.set_yticks(range(K))
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    ax.set_title(title or "confusion matrix")
    fig.colorbar(im, ax=ax)
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
