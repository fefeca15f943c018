"""Figure rendering for the indexing report."""

from __future__ import annotations

import numpy as np

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .classify import CLASS_COLORS, PixelClass, find_modes  # noqa: E402
from .ipf import ipf_color  # noqa: E402


def plot_mean_ip_histogram(path, mean_ip, thresholds=None, modes=None):
    """Histogram of the mean inner products with mode and cut markers."""
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist(np.ravel(mean_ip), bins=80, color="0.6", edgecolor="none")
    if modes is None:
        modes = find_modes(mean_ip, min_height=0.01)
    for loc, _ in modes:
        ax.axvline(loc, color="tab:green", ls=":", lw=1)
    if thresholds is not None:
        ax.axvline(thresholds.t_anomaly, color="tab:red", lw=1.2,
                   label=f"anomaly cut {thresholds.t_anomaly:.4f}")
        ax.axvline(thresholds.t_subclass, color="tab:blue", lw=1.2,
                   label=f"subclass cut {thresholds.t_subclass:.4f}")
        ax.legend(loc="upper left", fontsize=8)
    ax.set_xlabel("mean inner product")
    ax.set_ylabel("pixels")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_overlap_histogram(path, overlap_norm, mixture=None, threshold=None):
    """Histogram of the normalized neighborhood overlap with the fit."""
    x = np.ravel(overlap_norm)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist(x, bins=60, density=True, color="0.6", edgecolor="none")
    if mixture is not None:
        grid = np.linspace(x.min(), x.max(), 400)
        total = np.zeros_like(grid)
        for w, m, v in zip(mixture.weights, mixture.means, mixture.variances):
            comp = w * np.exp(-0.5 * (grid - m) ** 2 / v) / np.sqrt(2 * np.pi * v)
            ax.plot(grid, comp, lw=1, color="tab:blue")
            total += comp
        ax.plot(grid, total, lw=1.5, color="tab:orange", label="mixture fit")
        ax.legend(fontsize=8)
    if threshold is not None:
        ax.axvline(threshold, color="tab:red", lw=1.2)
    ax.set_xlabel("normalized neighborhood overlap")
    ax.set_ylabel("density")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_rank_curve(path, scores):
    """Mean similarity against match rank, with its point of largest bend."""
    mean_curve = np.asarray(scores, dtype=np.float64).reshape(-1, scores.shape[-1]).mean(axis=0)
    ranks = np.arange(1, mean_curve.size + 1)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(ranks, mean_curve, marker=".", lw=1)
    if mean_curve.size >= 3:
        knee = int(np.argmin(np.diff(mean_curve, 2))) + 1
        ax.axvline(ranks[knee], color="tab:red", ls="--", lw=1,
                   label=f"knee at rank {ranks[knee]}")
        ax.legend(fontsize=8)
    ax.set_xlabel("match rank")
    ax.set_ylabel("mean similarity")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_class_map(path, class_map):
    """Class map rendered with the fixed class color scheme."""
    labels = class_map.labels
    img = np.zeros(labels.shape + (3,), dtype=np.float64)
    for cls in PixelClass:
        img[labels == cls] = np.array(CLASS_COLORS[cls]) / 255.0
    fig, ax = plt.subplots(figsize=(5, 5 * labels.shape[0] / labels.shape[1]))
    ax.imshow(img, interpolation="nearest")
    ax.set_axis_off()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_ipf_map(path, quats, width, height, group=None):
    """Inverse pole figure map (sample normal direction)."""
    rgb = ipf_color(quats, group).reshape(height, width, 3)
    fig, ax = plt.subplots(figsize=(5, 5 * height / width))
    ax.imshow(rgb, interpolation="nearest")
    ax.set_axis_off()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_confidence_map(path, cone_deg, width, height, cap=0.25):
    """Confidence cone half-angle map, clipped at ``cap`` degrees."""
    img = np.asarray(cone_deg, dtype=np.float64).reshape(height, width)
    img = np.minimum(img, cap)
    fig, ax = plt.subplots(figsize=(5.6, 5 * height / width))
    im = ax.imshow(img, interpolation="nearest", cmap="viridis",
                   vmin=0.0, vmax=cap)
    ax.set_axis_off()
    fig.colorbar(im, ax=ax, shrink=0.8, label="cone half angle (deg)")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
