"""Drifting-odometry simulation and retrieval-fix fusion."""

from dataclasses import dataclass

import numpy as np

from ..geometry.types import Pose, Trajectory
from ..rotations import quat_from_yaw, quat_mul


def simulate_odometry(gt: Trajectory, drift_rate: float, noise_sigma: float,
                      seed: int = 0) -> Trajectory:
    """Integrate ground-truth relative motions scaled by (1 + drift_rate) with
    a seeded per-step heading random walk (std noise_sigma radians per step).

    Zero drift and zero noise return the input trajectory exactly.
    """
    if drift_rate < 0:
        raise ValueError("drift_rate must be >= 0")
    if drift_rate == 0 and noise_sigma == 0:
        return Trajectory([Pose(p.position.copy(), p.orientation.copy(), p.timestamp)
                           for p in gt.poses], max_step=np.inf)

    rng = np.random.Generator(np.random.PCG64(seed))
    pos = gt.positions()
    steps = np.diff(pos, axis=0)
    heading = 0.0
    out = [Pose(pos[0].copy(), gt.poses[0].orientation.copy(), gt.poses[0].timestamp)]
    cur = pos[0].copy()
    for i, step in enumerate(steps):
        heading += rng.normal(0.0, noise_sigma) if noise_sigma > 0 else 0.0
        c, s = np.cos(heading), np.sin(heading)
        rotated = np.array([
            c * step[0] - s * step[1],
            s * step[0] + c * step[1],
            step[2],
        ])
        cur = cur + (1.0 + drift_rate) * rotated
        src = gt.poses[i + 1]
        q = quat_mul(quat_from_yaw(heading), src.orientation)
        out.append(Pose(cur.copy(), q / np.linalg.norm(q), src.timestamp))
    return Trajectory(out, max_step=np.inf)


@dataclass
class LocalizationFix:
    timestamp: float
    position: np.ndarray
    success: bool = True


def fuse_localization(odometry: Trajectory, fixes) -> Trajectory:
    """Snap the odometry to each successful fix and interpolate the correction
    linearly in time between fixes.

    The correction is zero before the first successful fix and held constant
    after the last one; with no successful fixes the output equals the input.
    """
    ts = odometry.timestamps()
    fixes = sorted(fixes, key=lambda f: f.timestamp)
    for a, b in zip(fixes, fixes[1:]):
        if b.timestamp <= a.timestamp:
            raise ValueError("fixes must have strictly increasing timestamps")
    good = [f for f in fixes if f.success]
    if not good:
        return Trajectory([Pose(p.position.copy(), p.orientation.copy(), p.timestamp)
                           for p in odometry.poses], max_step=np.inf)

    t_index = {t: i for i, t in enumerate(ts)}
    knot_t, knot_c = [], []
    for f in good:
        if f.timestamp not in t_index:
            raise ValueError(f"fix timestamp {f.timestamp} not on the odometry timeline")
        i = t_index[f.timestamp]
        knot_t.append(f.timestamp)
        knot_c.append(np.asarray(f.position, dtype=np.float64)
                      - odometry.poses[i].position)

    knot_t = np.array(knot_t)
    knot_c = np.array(knot_c)
    out = []
    for i, p in enumerate(odometry.poses):
        t = ts[i]
        if t < knot_t[0]:
            corr = np.zeros(3)
        elif t >= knot_t[-1]:
            corr = knot_c[-1]
        else:
            j = int(np.searchsorted(knot_t, t, side="right")) - 1
            span = knot_t[j + 1] - knot_t[j]
            w = (t - knot_t[j]) / span
            corr = (1 - w) * knot_c[j] + w * knot_c[j + 1]
        out.append(Pose(p.position + corr, p.orientation.copy(), p.timestamp))
    return Trajectory(out, max_step=np.inf)
