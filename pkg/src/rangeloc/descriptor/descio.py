"""Descriptor file: magic "I3DDS1", u32 dim, u64 count, count x dim float32,
then count poses as TUM text lines."""

import struct

import numpy as np

from ..geometry.types import Pose, Trajectory
from ..rotations import quat_normalize

DESC_MAGIC = b"I3DDS1"


def save_descriptors(path, descriptors, trajectory: Trajectory):
    arr = np.asarray(descriptors, dtype="<f4")
    if arr.ndim != 2:
        raise ValueError("descriptors must be (count, dim)")
    if arr.shape[0] != len(trajectory):
        raise ValueError("descriptor/pose count mismatch")
    with open(path, "wb") as f:
        f.write(DESC_MAGIC)
        f.write(struct.pack("<IQ", arr.shape[1], arr.shape[0]))
        f.write(np.ascontiguousarray(arr).tobytes())
        lines = []
        for p in trajectory.poses:
            w, x, y, z = p.orientation
            tx, ty, tz = p.position
            lines.append(
                f"{p.timestamp:.9g} {tx:.9g} {ty:.9g} {tz:.9g} {x:.9g} {y:.9g} {z:.9g} {w:.9g}"
            )
        f.write(("\n".join(lines) + "\n").encode("ascii"))


def load_descriptors(path):
    with open(path, "rb") as f:
        magic = f.read(6)
        if magic != DESC_MAGIC:
            raise ValueError(f"bad descriptor magic {magic!r}")
        dim, count = struct.unpack("<IQ", f.read(12))
        arr = np.frombuffer(f.read(4 * dim * count), dtype="<f4").reshape(count, dim)
        poses = []
        for line in f.read().decode("ascii").strip().splitlines():
            vals = [float(v) for v in line.split()]
            t, tx, ty, tz, qx, qy, qz, qw = vals
            poses.append(Pose(np.array([tx, ty, tz]), quat_normalize([qw, qx, qy, qz]),
                              timestamp=t))
    if len(poses) != count:
        raise ValueError("pose/descriptor count mismatch in file")
    return arr.astype(np.float64), Trajectory(poses, max_step=np.inf)
