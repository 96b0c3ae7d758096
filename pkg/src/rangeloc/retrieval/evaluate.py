"""Recall evaluation, the query/database distance matrix, and absolute pose
error."""

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from ..geometry.types import Trajectory
from .index import RetrievalIndex, query_top_k

DM_MAGIC = b"I3DDM1"


@dataclass
class EvalReport:
    recall_top1pct: float
    recall_top1: float
    ape_mean: float = float("nan")
    ape_std: float = float("nan")
    per_query: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)

    def to_json(self, path):
        payload = {
            "recall_top1pct": self.recall_top1pct,
            "recall_top1": self.recall_top1,
            "ape_mean": self.ape_mean,
            "ape_std": self.ape_std,
            "per_query": self.per_query,
        }
        payload.update(self.extras)
        with open(path, "w") as f:
            json.dump(payload, f, indent=2, sort_keys=True, allow_nan=True)
            f.write("\n")


def top_percent_candidates(count: int, top_percent: float) -> int:
    """ceil(count * pct / 100) with a floor of one candidate."""
    return max(1, int(np.ceil(count * top_percent / 100.0)))


def evaluate_recall(index: RetrievalIndex, query_descriptors, query_positions,
                    top_percent: float = 1.0, success_dist: float = 10.0):
    """Fraction of queries whose top-percent retrievals contain a database
    entry within success_dist of the query's true position.

    Returns (EvalReport, distance_matrix) where the matrix holds the full
    query x database Euclidean descriptor distances.
    """
    queries = np.asarray(query_descriptors, dtype=np.float64)
    positions = np.asarray(query_positions, dtype=np.float64)
    if queries.ndim != 2 or queries.shape[0] == 0:
        raise ValueError("empty query set")
    if len(index) == 0:
        raise ValueError("empty index")
    k = top_percent_candidates(len(index), top_percent)

    successes = 0
    top1 = 0
    per_query = []
    matrix = np.zeros((queries.shape[0], len(index)), dtype=np.float32)
    for i, (q, p) in enumerate(zip(queries, positions)):
        dists = np.sqrt(((index.descriptors - q) ** 2).sum(axis=1))
        matrix[i] = dists
        res = query_top_k(index, q, k, gt_position=p, success_dist=success_dist)
        gaps = np.linalg.norm(index.positions[res.ids] - p, axis=1)
        successes += int(res.success)
        top1 += int(gaps[0] <= success_dist)
        per_query.append({
            "query": i,
            "top1_id": int(res.ids[0]),
            "top1_desc_dist": float(res.distances[0]),
            "top1_pose_gap": float(gaps[0]),
            "success": bool(res.success),
        })
    report = EvalReport(
        recall_top1pct=successes / queries.shape[0],
        recall_top1=top1 / queries.shape[0],
        per_query=per_query,
        extras={"candidates": k, "success_dist": success_dist},
    )
    return report, matrix


def save_distance_matrix(path, matrix):
    m = np.asarray(matrix, dtype="<f4")
    with open(path, "wb") as f:
        f.write(DM_MAGIC)
        f.write(struct.pack("<II", m.shape[0], m.shape[1]))
        f.write(np.ascontiguousarray(m).tobytes())


def load_distance_matrix(path):
    with open(path, "rb") as f:
        magic = f.read(6)
        if magic != DM_MAGIC:
            raise ValueError(f"bad distance matrix magic {magic!r}")
        rows, cols = struct.unpack("<II", f.read(8))
        data = np.frombuffer(f.read(rows * cols * 4), dtype="<f4")
    return data.reshape(rows, cols).astype(np.float64)


def compute_ape(estimate: Trajectory, reference: Trajectory):
    """Per-pose Euclidean position error after exact timestamp association;
    returns (mean, population std)."""
    if len(estimate) != len(reference):
        raise ValueError("trajectory length mismatch")
    ts_e = estimate.timestamps()
    ts_r = reference.timestamps()
    if not np.array_equal(ts_e, ts_r):
        raise ValueError("timestamp mismatch")
    err = np.sqrt(((estimate.positions() - reference.positions()) ** 2).sum(axis=1))
    return float(np.mean(err)), float(np.std(err))
