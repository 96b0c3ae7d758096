"""Procedural synthetic worlds: ground plane, box/cylinder primitives, and a
loop trajectory through guaranteed free space. Fully deterministic per seed."""

import numpy as np

from ..rotations import quat_from_yaw
from .types import PointCloudMap, Pose, Trajectory

POSE_HEIGHT = 1.6
MAX_PRIM_HEIGHT = 8.0
CORRIDOR_CLEARANCE = 3.0


def synthesize_world(seed: int, extent: float, n_primitives: int,
                     n_poses: int = 200, ground_pitch: float = 0.5,
                     surface_pitch: float = 0.4, max_step: float = 2.0):
    """Build a deterministic world and a loop trajectory inside it.

    The world is a ground plane plus axis-aligned boxes and cylinders sampled
    into shaded-able points (positions, albedo, normals). Primitives that
    would intersect the trajectory corridor are skipped, so the loop always
    runs through free space.
    """
    if extent <= 0:
        raise ValueError("extent must be positive")
    if n_primitives < 0:
        raise ValueError("n_primitives must be >= 0")
    if extent < 16.0:
        raise ValueError("infeasible trajectory: extent too small for a free-space loop")

    rng = np.random.Generator(np.random.PCG64(seed))
    half = extent / 2.0

    # loop trajectory: ellipse at fixed height, yaw tangent to the path;
    # densified if needed so consecutive poses respect max_step
    a, b = 0.32 * extent, 0.24 * extent
    # angle-uniform sampling: the longest chord is ~ a * 2pi / n
    n_poses = max(n_poses, int(np.ceil(2 * np.pi * a / (0.9 * max_step))))
    ts = np.arange(n_poses) / n_poses * 2 * np.pi
    px = a * np.cos(ts)
    py = b * np.sin(ts)
    dx, dy = -a * np.sin(ts), b * np.cos(ts)
    yaw = np.arctan2(dy, dx)
    poses = [
        Pose(np.array([px[i], py[i], POSE_HEIGHT]), quat_from_yaw(yaw[i]), timestamp=0.1 * i)
        for i in range(n_poses)
    ]
    trajectory = Trajectory(poses, max_step=max_step)

    chunks_pts, chunks_alb, chunks_nrm = [], [], []

    gx = np.arange(-half + ground_pitch / 2, half, ground_pitch)
    gxx, gyy = np.meshgrid(gx, gx, indexing="ij")
    gpts = np.stack([gxx.ravel(), gyy.ravel(), np.zeros(gxx.size)], axis=1)
    galb = 0.35 + 0.2 * np.sin(0.21 * gpts[:, 0]) * np.cos(0.17 * gpts[:, 1])
    galb = np.clip(galb + rng.normal(0, 0.02, size=galb.shape), 0.02, 0.98)
    chunks_pts.append(gpts)
    chunks_alb.append(galb)
    chunks_nrm.append(np.tile([0.0, 0.0, 1.0], (gpts.shape[0], 1)))

    placed = 0
    attempts = 0
    while placed < n_primitives and attempts < 50 * max(n_primitives, 1):
        attempts += 1
        cx = rng.uniform(-half + 5.0, half - 5.0)
        cy = rng.uniform(-half + 5.0, half - 5.0)
        kind = rng.integers(0, 2)
        size = rng.uniform(0.8, 3.5)
        height = rng.uniform(2.0, MAX_PRIM_HEIGHT)
        base_albedo = rng.uniform(0.08, 0.92)
        # corridor test against the ellipse (scaled-radius approximation)
        rad = np.hypot(cx / a, cy / b)
        ring_dist = abs(rad - 1.0) * min(a, b)
        if ring_dist < size + CORRIDOR_CLEARANCE:
            continue
        if kind == 0:
            pts, nrm = _sample_box(cx, cy, size, rng.uniform(0.8, 3.5), height, surface_pitch)
        else:
            pts, nrm = _sample_cylinder(cx, cy, min(size, 2.5), height, surface_pitch)
        keep = (np.abs(pts[:, 0]) <= half) & (np.abs(pts[:, 1]) <= half)
        pts, nrm = pts[keep], nrm[keep]
        if pts.shape[0] == 0:
            continue
        alb = np.clip(base_albedo + rng.normal(0, 0.015, size=pts.shape[0]), 0.02, 0.98)
        chunks_pts.append(pts)
        chunks_alb.append(alb)
        chunks_nrm.append(nrm)
        placed += 1

    points = np.concatenate(chunks_pts, axis=0)
    albedo = np.concatenate(chunks_alb, axis=0)
    normals = np.concatenate(chunks_nrm, axis=0)
    extent_box = np.array([[-half, -half, -1e-6], [half, half, MAX_PRIM_HEIGHT + 1e-6]])
    cloud = PointCloudMap(points, albedo, extent_box, normals=normals)
    return cloud, trajectory


def _face_grid(u0, u1, v0, v1, pitch):
    us = np.arange(u0 + pitch / 2, u1, pitch)
    vs = np.arange(v0 + pitch / 2, v1, pitch)
    if us.size == 0:
        us = np.array([(u0 + u1) / 2])
    if vs.size == 0:
        vs = np.array([(v0 + v1) / 2])
    uu, vv = np.meshgrid(us, vs, indexing="ij")
    return uu.ravel(), vv.ravel()


def _sample_box(cx, cy, hx, hy, height, pitch):
    pts, nrm = [], []
    # four side walls
    for sign in (-1.0, 1.0):
        u, v = _face_grid(-hy, hy, 0.0, height, pitch)
        p = np.stack([np.full_like(u, cx + sign * hx), cy + u, v], axis=1)
        pts.append(p)
        nrm.append(np.tile([sign, 0.0, 0.0], (p.shape[0], 1)))
        u, v = _face_grid(-hx, hx, 0.0, height, pitch)
        p = np.stack([cx + u, np.full_like(u, cy + sign * hy), v], axis=1)
        pts.append(p)
        nrm.append(np.tile([0.0, sign, 0.0], (p.shape[0], 1)))
    # top
    u, v = _face_grid(-hx, hx, -hy, hy, pitch)
    p = np.stack([cx + u, cy + v, np.full_like(u, height)], axis=1)
    pts.append(p)
    nrm.append(np.tile([0.0, 0.0, 1.0], (p.shape[0], 1)))
    return np.concatenate(pts), np.concatenate(nrm)


def _sample_cylinder(cx, cy, radius, height, pitch):
    n_around = max(8, int(np.ceil(2 * np.pi * radius / pitch)))
    angles = np.arange(n_around) / n_around * 2 * np.pi
    zs = np.arange(pitch / 2, height, pitch)
    if zs.size == 0:
        zs = np.array([height / 2])
    aa, zz = np.meshgrid(angles, zs, indexing="ij")
    lateral = np.stack(
        [cx + radius * np.cos(aa.ravel()), cy + radius * np.sin(aa.ravel()), zz.ravel()], axis=1
    )
    lat_nrm = np.stack(
        [np.cos(aa.ravel()), np.sin(aa.ravel()), np.zeros(aa.size)], axis=1
    )
    u, v = _face_grid(-radius, radius, -radius, radius, pitch)
    disk = u * u + v * v <= radius * radius
    top = np.stack([cx + u[disk], cy + v[disk], np.full(disk.sum(), height)], axis=1)
    top_nrm = np.tile([0.0, 0.0, 1.0], (top.shape[0], 1))
    return np.concatenate([lateral, top]), np.concatenate([lat_nrm, top_nrm])
