"""Seeded k-means over place descriptors (Lloyd's algorithm with k-means++
initialization)."""

import numpy as np

MAX_ITERS = 100
CENTER_TOL = 1e-6


def _kmeanspp_init(points, k, rng):
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[rng.integers(n)]
    d2 = ((points - centers[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total <= 0:
            centers[i:] = points[rng.integers(n, size=k - i)]
            break
        probs = d2 / total
        centers[i] = points[rng.choice(n, p=probs)]
        d2 = np.minimum(d2, ((points - centers[i]) ** 2).sum(axis=1))
    return centers


def cluster_descriptors(descriptors, k: int = 10, seed: int = 0):
    """Returns (labels, centers, inertia); deterministic given the seed.

    Iterates Lloyd updates up to MAX_ITERS or until every center moves less
    than CENTER_TOL. Empty clusters are re-seeded at the farthest point.
    """
    points = np.asarray(descriptors, dtype=np.float64)
    if points.ndim != 2:
        raise ValueError("descriptors must be (count, dim)")
    n = points.shape[0]
    if n < k:
        raise ValueError(f"need at least {k} descriptors, got {n}")
    rng = np.random.Generator(np.random.PCG64(seed))
    centers = _kmeanspp_init(points, k, rng)

    labels = np.zeros(n, dtype=np.int64)
    for _ in range(MAX_ITERS):
        d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        labels = d2.argmin(axis=1)
        new_centers = centers.copy()
        for j in range(k):
            members = points[labels == j]
            if members.shape[0] > 0:
                new_centers[j] = members.mean(axis=0)
            else:
                new_centers[j] = points[d2.min(axis=1).argmax()]
        shift = np.linalg.norm(new_centers - centers, axis=1).max()
        centers = new_centers
        if shift < CENTER_TOL:
            break
    d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    labels = d2.argmin(axis=1)
    inertia = float(d2[np.arange(n), labels].sum())
    return labels, centers, inertia


def save_cluster_csv(path, labels):
    with open(path, "w") as f:
        f.write("id,label\n")
        for i, lab in enumerate(labels):
            f.write(f"{i},{int(lab)}\n")
