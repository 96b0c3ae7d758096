"""Core geometric types: poses, trajectories, point-cloud maps, condition specs.

Image conventions used throughout the package:

* Equirectangular images are float arrays of shape (H, W, 3) with values in
  [0, 1]. Row r covers polar angle theta in [r*pi/H, (r+1)*pi/H) measured
  from +z; column c covers azimuth phi in [c*2pi/W, (c+1)*2pi/W) measured
  from +x toward +y. The standard pipeline uses H = W = 64.
* Range images are float arrays of shape (H, W) holding min(range, r_max)/r_max
  with sentinel 1.0 where no point projects.
"""

from dataclasses import dataclass, field

import numpy as np

from ..rotations import quat_normalize, quat_to_matrix


@dataclass
class Pose:
    """A timestamped rigid pose: position (meters) + unit quaternion (w,x,y,z)."""

    position: np.ndarray
    orientation: np.ndarray
    timestamp: float = 0.0

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=np.float64)
        self.orientation = np.asarray(self.orientation, dtype=np.float64)
        if self.position.shape != (3,):
            raise ValueError("position must be a 3-vector")
        if self.orientation.shape != (4,):
            raise ValueError("orientation must be a quaternion (w,x,y,z)")
        n = np.linalg.norm(self.orientation)
        if abs(n - 1.0) > 1e-9:
            raise ValueError(f"quaternion norm {n} deviates from 1 by more than 1e-9")

    def rotation_matrix(self):
        return quat_to_matrix(self.orientation)

    def world_to_local(self, points):
        """Express world-frame points in this pose's local frame."""
        r = self.rotation_matrix()
        return (np.asarray(points, dtype=np.float64) - self.position) @ r


@dataclass
class Trajectory:
    """Ordered pose sequence with strictly increasing timestamps."""

    poses: list
    max_step: float = 2.0

    def __post_init__(self):
        if len(self.poses) == 0:
            raise ValueError("empty trajectory")
        ts = self.timestamps()
        if np.any(np.diff(ts) <= 0):
            raise ValueError("timestamps must strictly increase")
        pos = self.positions()
        steps = np.linalg.norm(np.diff(pos, axis=0), axis=1)
        if steps.size and steps.max() > self.max_step + 1e-9:
            raise ValueError(
                f"consecutive positions differ by {steps.max():.3f} m > max step {self.max_step} m"
            )

    def __len__(self):
        return len(self.poses)

    def __getitem__(self, i):
        return self.poses[i]

    def positions(self):
        return np.array([p.position for p in self.poses])

    def timestamps(self):
        return np.array([p.timestamp for p in self.poses])


@dataclass
class PointCloudMap:
    """Point cloud with per-point albedo in [0, 1] and an axis-aligned extent.

    `normals` is an optional in-memory attribute used only by the renderer;
    it is not part of the serialized point-cloud format.
    """

    points: np.ndarray
    albedo: np.ndarray
    extent: np.ndarray  # (2, 3): min corner, max corner
    normals: np.ndarray = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        self.albedo = np.asarray(self.albedo, dtype=np.float64)
        self.extent = np.asarray(self.extent, dtype=np.float64)
        if self.points.ndim != 2 or self.points.shape[1] != 3:
            raise ValueError("points must be (N, 3)")
        if self.points.shape[0] == 0:
            raise ValueError("empty map")
        if self.albedo.shape != (self.points.shape[0],):
            raise ValueError("albedo must be one scalar per point")
        if np.any(self.albedo < 0) or np.any(self.albedo > 1):
            raise ValueError("albedo values must lie in [0, 1]")
        if self.extent.shape != (2, 3):
            raise ValueError("extent must be (2, 3) min/max corners")
        lo, hi = self.extent
        eps = 1e-9
        if np.any(self.points < lo - eps) or np.any(self.points > hi + eps):
            raise ValueError("points outside extent")

    def __len__(self):
        return self.points.shape[0]


@dataclass
class ConditionSpec:
    """Appearance-condition parameters applied to rendered images.

    The identity spec (brightness=1, hue_shift=0, noise_sigma=0, fog_density=0)
    leaves images unchanged.
    """

    label: int = 0
    brightness: float = 1.0
    hue_shift: float = 0.0  # degrees
    noise_sigma: float = 0.0
    fog_density: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.label < 0:
            raise ValueError("label must be non-negative")
        if self.brightness < 0:
            raise ValueError("brightness must be >= 0")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.fog_density < 0:
            raise ValueError("fog_density must be >= 0")

    def is_identity(self):
        return (
            self.brightness == 1.0
            and self.hue_shift == 0.0
            and self.noise_sigma == 0.0
            and self.fog_density == 0.0
        )


def check_equirect(img):
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"equirect image must be (H, W, 3), got {img.shape}")
    if img.min() < -1e-9 or img.max() > 1 + 1e-9:
        raise ValueError("equirect values must lie in [0, 1]")
    return img


def check_range_image(img):
    img = np.asarray(img)
    if img.ndim == 3 and img.shape[2] == 1:
        img = img[:, :, 0]
    if img.ndim != 2:
        raise ValueError(f"range image must be (H, W), got {img.shape}")
    if img.min() < -1e-9 or img.max() > 1 + 1e-9:
        raise ValueError("range values must lie in [0, 1]")
    return img
