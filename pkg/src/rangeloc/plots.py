"""Static report figures: distance matrices, recall-vs-rotation grids, loss
curves. All distance-matrix style plots mark successful retrievals in red."""

import csv

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def plot_distance_matrix(matrix, out_path, per_query=None, title="feature distance"):
    matrix = np.asarray(matrix)
    fig, ax = plt.subplots(figsize=(6.4, 5.2))
    im = ax.imshow(matrix, aspect="auto", cmap="viridis", interpolation="nearest")
    fig.colorbar(im, ax=ax, label="descriptor distance")
    if per_query:
        xs = [r["top1_id"] for r in per_query]
        ys = [r["query"] for r in per_query]
        ok = [r["success"] for r in per_query]
        ax.scatter([x for x, s in zip(xs, ok) if s], [y for y, s in zip(ys, ok) if s],
                   s=6, c="red", label="successful retrieval")
        ax.scatter([x for x, s in zip(xs, ok) if not s],
                   [y for y, s in zip(ys, ok) if not s],
                   s=6, c="white", label="failed retrieval")
        ax.legend(loc="upper right", fontsize=7)
    ax.set_xlabel("database range projections")
    ax.set_ylabel("image queries")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(out_path, dpi=130)
    plt.close(fig)


def plot_loss_curves(csv_path, out_path):
    with open(csv_path) as f:
        reader = csv.DictReader(f)
        rows = list(reader)
    if not rows:
        raise ValueError("empty loss log")
    steps = [int(r["step"]) for r in rows]
    fig, ax = plt.subplots(figsize=(7.2, 4.4))
    for key in ("recon", "gan_g", "gan_d", "mutual", "classifier", "view", "domain"):
        vals = [float(r[key]) for r in rows]
        if any(v != 0.0 for v in vals):
            ax.plot(steps, vals, label=key, linewidth=1.1)
    ax.plot(steps, [float(r["total"]) for r in rows], label="total",
            color="black", linewidth=1.6)
    ax.set_xlabel("step")
    ax.set_ylabel("loss")
    ax.set_yscale("symlog", linthresh=1e-3)
    ax.legend(fontsize=8, ncol=4)
    ax.set_title("training losses")
    fig.tight_layout()
    fig.savefig(out_path, dpi=130)
    plt.close(fig)


def plot_recall_by_rotation(angles, recalls, out_path, baseline=None):
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ax.plot(angles, 100 * np.asarray(recalls), "o-", label="rotated queries")
    if baseline is not None:
        ax.axhline(100 * baseline, color="gray", linestyle="--",
                   label="unrotated queries")
    ax.set_xlabel("query yaw rotation (degrees)")
    ax.set_ylabel("recall at top 1% (%)")
    ax.set_ylim(0, 105)
    ax.legend(fontsize=8)
    ax.set_title("viewpoint robustness")
    fig.tight_layout()
    fig.savefig(out_path, dpi=130)
    plt.close(fig)
