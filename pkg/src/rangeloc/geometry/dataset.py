"""Paired image/range dataset generation and directory persistence."""

import json
import os
from dataclasses import dataclass

import numpy as np

from .conditions import apply_condition
from .fileio import (load_png, load_range_image, load_trajectory_tum,
                     save_png, save_point_cloud, save_range_image,
                     save_trajectory_tum)
from .projection import project_points_to_range, render_equirect
from .types import ConditionSpec, PointCloudMap, Trajectory


@dataclass
class PairedSample:
    image: np.ndarray      # (H, W, 3) in [0, 1]
    range_image: np.ndarray  # (H, W) in [0, 1]
    pose: object
    pose_index: int
    condition_label: int


class PairedDataset:
    """Pose-aligned (equirect image, range projection) pairs per condition.

    Samples are ordered by (pose index, condition index); the range image of
    a pose is identical across all of its conditions.
    """

    def __init__(self, samples, conditions, h, w, r_max):
        self.samples = samples
        self.conditions = conditions
        self.h = h
        self.w = w
        self.r_max = r_max

    def __len__(self):
        return len(self.samples)

    def __getitem__(self, i):
        return self.samples[i]

    def poses(self):
        return [s.pose for s in self.samples]

    def positions(self):
        return np.array([s.pose.position for s in self.samples])

    def labels(self):
        return np.array([s.condition_label for s in self.samples])

    def pose_indices(self):
        return np.array([s.pose_index for s in self.samples])


def generate_paired_dataset(cloud: PointCloudMap, trajectory: Trajectory,
                            conditions, h: int = 64, w: int = 64,
                            r_max: float = 30.0) -> PairedDataset:
    """One sample per pose x condition; the image is the condition-transformed
    render, the range projection is condition-free."""
    if len(trajectory) == 0:
        raise ValueError("empty trajectory")
    if len(conditions) == 0:
        raise ValueError("empty condition list")

    samples = []
    for pi, pose in enumerate(trajectory.poses):
        rng_img = project_points_to_range(cloud, pose, h, w, r_max)
        base = render_equirect(cloud, pose, h, w, r_max)
        for cond in conditions:
            img = apply_condition(base, cond)
            samples.append(PairedSample(img, rng_img.copy(), pose, pi, cond.label))
    return PairedDataset(samples, list(conditions), h, w, r_max)


def save_dataset(out_dir, cloud: PointCloudMap, trajectory: Trajectory,
                 dataset: PairedDataset):
    os.makedirs(out_dir, exist_ok=True)
    img_dir = os.path.join(out_dir, "images")
    rng_dir = os.path.join(out_dir, "ranges")
    os.makedirs(img_dir, exist_ok=True)
    os.makedirs(rng_dir, exist_ok=True)

    save_point_cloud(os.path.join(out_dir, "map.i3dpc"), cloud)
    save_trajectory_tum(os.path.join(out_dir, "poses.tum"), trajectory)

    rows = ["index,pose_index,condition_label,image,range"]
    written_ranges = set()
    for i, s in enumerate(dataset.samples):
        img_name = f"images/{s.pose_index:05d}_c{s.condition_label}.png"
        rng_name = f"ranges/{s.pose_index:05d}.i3drg"
        save_png(os.path.join(out_dir, img_name), s.image)
        if s.pose_index not in written_ranges:
            save_range_image(os.path.join(out_dir, rng_name), s.range_image)
            written_ranges.add(s.pose_index)
        rows.append(f"{i},{s.pose_index},{s.condition_label},{img_name},{rng_name}")
    with open(os.path.join(out_dir, "samples.csv"), "w") as f:
        f.write("\n".join(rows) + "\n")

    meta = {
        "h": dataset.h,
        "w": dataset.w,
        "r_max": dataset.r_max,
        "conditions": [vars(c) for c in dataset.conditions],
    }
    with open(os.path.join(out_dir, "dataset.json"), "w") as f:
        json.dump(meta, f, indent=2, sort_keys=True)
        f.write("\n")


def load_dataset(out_dir) -> PairedDataset:
    with open(os.path.join(out_dir, "dataset.json")) as f:
        meta = json.load(f)
    conditions = [ConditionSpec(**c) for c in meta["conditions"]]
    trajectory = load_trajectory_tum(os.path.join(out_dir, "poses.tum"))

    samples = []
    with open(os.path.join(out_dir, "samples.csv")) as f:
        header = f.readline()
        if not header.startswith("index,"):
            raise ValueError("bad samples.csv header")
        for line in f:
            idx, pose_index, label, img_name, rng_name = line.strip().split(",")
            pose_index, label = int(pose_index), int(label)
            img = load_png(os.path.join(out_dir, img_name))
            rng_img = load_range_image(os.path.join(out_dir, rng_name))
            samples.append(
                PairedSample(img, rng_img, trajectory[pose_index], pose_index, label)
            )
    return PairedDataset(samples, conditions, meta["h"], meta["w"], meta["r_max"])
