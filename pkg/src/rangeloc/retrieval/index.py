"""Exhaustive-search descriptor index and top-k queries."""

from dataclasses import dataclass

import numpy as np

from ..descriptor.descio import load_descriptors, save_descriptors
from ..geometry.types import Trajectory

UNIT_TOL = 1e-5


@dataclass(frozen=True)
class RetrievalIndex:
    descriptors: np.ndarray  # (count, dim), unit-norm or zero rows
    positions: np.ndarray    # (count, 3)
    ids: np.ndarray          # stable integer ids
    trajectory: Trajectory

    def __len__(self):
        return self.descriptors.shape[0]


@dataclass
class RetrievalResult:
    ids: np.ndarray        # ranked ids, ascending distance
    distances: np.ndarray  # ascending
    success: bool = False


def build_index(descriptors, trajectory: Trajectory) -> RetrievalIndex:
    """Immutable exhaustive index over unit-norm descriptors with poses."""
    desc = np.asarray(descriptors, dtype=np.float64)
    if desc.ndim != 2:
        raise ValueError("descriptors must be (count, dim)")
    if desc.shape[0] != len(trajectory):
        raise ValueError(
            f"count mismatch: {desc.shape[0]} descriptors vs {len(trajectory)} poses"
        )
    norms = np.linalg.norm(desc, axis=1)
    bad = ~((norms == 0) | (np.abs(norms - 1) <= UNIT_TOL))
    if np.any(bad):
        raise ValueError(f"non-normalized descriptor at row {int(np.flatnonzero(bad)[0])}")
    desc = desc.copy()
    desc.setflags(write=False)
    positions = trajectory.positions()
    positions.setflags(write=False)
    ids = np.arange(desc.shape[0])
    ids.setflags(write=False)
    return RetrievalIndex(desc, positions, ids, trajectory)


def load_index(path) -> RetrievalIndex:
    desc, traj = load_descriptors(path)
    return build_index(desc, traj)


def save_index(path, index: RetrievalIndex):
    save_descriptors(path, index.descriptors, index.trajectory)


def query_top_k(index: RetrievalIndex, descriptor, k: int,
                gt_position=None, success_dist: float = 10.0) -> RetrievalResult:
    """k nearest database entries by Euclidean distance, ties to lower id."""
    if not 1 <= k <= len(index):
        raise ValueError(f"k must lie in [1, {len(index)}]")
    q = np.asarray(descriptor, dtype=np.float64).reshape(-1)
    dists = np.sqrt(((index.descriptors - q) ** 2).sum(axis=1))
    order = np.lexsort((index.ids, dists))[:k]
    result = RetrievalResult(index.ids[order].copy(), dists[order].copy())
    if gt_position is not None:
        gaps = np.linalg.norm(index.positions[order] - np.asarray(gt_position), axis=1)
        result.success = bool(np.any(gaps <= success_dist))
    return result
