"""On-disk formats: point clouds, range images, PNG panoramas, TUM trajectories.

Binary layouts (all little-endian):
  point cloud  "I3DPC1" | u64 count | count x (x, y, z, albedo) float32
  range image  "I3DRG1" | u32 H | u32 W | H*W float32 row-major
"""

import struct

import numpy as np
from PIL import Image

from ..rotations import quat_normalize
from .types import PointCloudMap, Pose, Trajectory

PC_MAGIC = b"I3DPC1"
RG_MAGIC = b"I3DRG1"


def save_point_cloud(path, cloud: PointCloudMap):
    data = np.empty((len(cloud), 4), dtype="<f4")
    data[:, :3] = cloud.points
    data[:, 3] = cloud.albedo
    with open(path, "wb") as f:
        f.write(PC_MAGIC)
        f.write(struct.pack("<Q", len(cloud)))
        f.write(data.tobytes())


def load_point_cloud(path):
    with open(path, "rb") as f:
        magic = f.read(6)
        if magic != PC_MAGIC:
            raise ValueError(f"bad point cloud magic {magic!r}")
        (count,) = struct.unpack("<Q", f.read(8))
        data = np.frombuffer(f.read(count * 16), dtype="<f4").reshape(count, 4)
    points = data[:, :3].astype(np.float64)
    albedo = np.clip(data[:, 3].astype(np.float64), 0.0, 1.0)
    lo = points.min(axis=0) - 1e-6
    hi = points.max(axis=0) + 1e-6
    return PointCloudMap(points, albedo, np.array([lo, hi]))


def save_range_image(path, img):
    img = np.asarray(img, dtype="<f4")
    if img.ndim != 2:
        raise ValueError("range image must be 2-D")
    h, w = img.shape
    with open(path, "wb") as f:
        f.write(RG_MAGIC)
        f.write(struct.pack("<II", h, w))
        f.write(img.tobytes())


def load_range_image(path):
    with open(path, "rb") as f:
        magic = f.read(6)
        if magic != RG_MAGIC:
            raise ValueError(f"bad range image magic {magic!r}")
        h, w = struct.unpack("<II", f.read(8))
        data = np.frombuffer(f.read(h * w * 4), dtype="<f4")
    return data.reshape(h, w).astype(np.float64)


def save_png(path, img):
    """Save a float [0,1] (H, W, 3) image as 8-bit RGB PNG."""
    arr = np.clip(np.asarray(img), 0.0, 1.0)
    quantized = np.round(arr * 255.0).astype(np.uint8)
    Image.fromarray(quantized, mode="RGB").save(path, format="PNG")


def load_png(path):
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float64)
    return arr / 255.0


def save_trajectory_tum(path, trajectory: Trajectory):
    """One line per pose: "timestamp tx ty tz qx qy qz qw"."""
    lines = []
    for p in trajectory.poses:
        w, x, y, z = p.orientation
        tx, ty, tz = p.position
        lines.append(
            f"{p.timestamp:.9g} {tx:.9g} {ty:.9g} {tz:.9g} {x:.9g} {y:.9g} {z:.9g} {w:.9g}"
        )
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def load_trajectory_tum(path, max_step: float = np.inf):
    poses = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            vals = [float(v) for v in line.split()]
            if len(vals) != 8:
                raise ValueError(f"bad TUM line: {line!r}")
            t, tx, ty, tz, qx, qy, qz, qw = vals
            q = quat_normalize([qw, qx, qy, qz])
            poses.append(Pose(np.array([tx, ty, tz]), q, timestamp=t))
    return Trajectory(poses, max_step=max_step)
