"""Spherical projection of point clouds and equirectangular image operations."""

import numpy as np

from .types import Pose, PointCloudMap

# Pixel convention: a point with polar angle theta maps to row
# floor(theta*H/pi) clamped to [0, H-1]; azimuth phi maps to column
# floor(phi*W/2pi) mod W. Grid-aligned yaw rotations are then exact
# column permutations.


def spherical_bins(local_points, h, w):
    """Row/column bin and range for each local-frame point."""
    pts = np.asarray(local_points, dtype=np.float64)
    r = np.linalg.norm(pts, axis=1)
    safe_r = np.where(r > 0, r, 1.0)
    theta = np.arccos(np.clip(pts[:, 2] / safe_r, -1.0, 1.0))
    phi = np.arctan2(pts[:, 1], pts[:, 0]) % (2 * np.pi)
    rows = np.minimum((theta * h / np.pi).astype(np.int64), h - 1)
    cols = (phi * w / (2 * np.pi)).astype(np.int64) % w
    return rows, cols, r


def project_points_to_range(cloud: PointCloudMap, pose: Pose, h: int, w: int, r_max: float):
    """Project map points within r_max of the pose into a normalized range image.

    Each pixel holds the minimum of range/r_max over the points falling in its
    angular bin, expressed in the pose's local frame; pixels with no points
    hold the sentinel 1.0.
    """
    if h <= 0 or w <= 0:
        raise ValueError("H and W must be positive")
    if r_max <= 0:
        raise ValueError("r_max must be positive")
    if len(cloud) == 0:
        raise ValueError("empty map")
    if not np.all(np.isfinite(cloud.points)):
        raise ValueError("non-finite point coordinates")

    local = pose.world_to_local(cloud.points)
    rows, cols, r = spherical_bins(local, h, w)
    keep = (r > 1e-12) & (r <= r_max)

    grid = np.full(h * w, 1.0, dtype=np.float64)
    np.minimum.at(grid, rows[keep] * w + cols[keep], r[keep] / r_max)
    return grid.reshape(h, w)


def splat_values(cloud: PointCloudMap, pose: Pose, h: int, w: int, r_max: float, values):
    """Splat per-point `values` using the same binning/occlusion rule as
    project_points_to_range: each pixel takes the value of its closest point.

    Returns (image, hit_mask). `values` may be (N,) or (N, C).
    """
    if len(cloud) == 0:
        raise ValueError("empty map")
    values = np.asarray(values, dtype=np.float64)
    squeeze = values.ndim == 1
    if squeeze:
        values = values[:, None]

    local = pose.world_to_local(cloud.points)
    rows, cols, r = spherical_bins(local, h, w)
    keep = (r > 1e-12) & (r <= r_max)
    bins = rows[keep] * w + cols[keep]
    vals = values[keep]
    rr = r[keep]

    # closest point wins each bin: stable sort by (bin, range), keep first
    order = np.lexsort((rr, bins))
    bins, vals = bins[order], vals[order]
    first = np.ones(len(bins), dtype=bool)
    first[1:] = bins[1:] != bins[:-1]

    img = np.zeros((h * w, values.shape[1]))
    mask = np.zeros(h * w, dtype=bool)
    img[bins[first]] = vals[first]
    mask[bins[first]] = True
    img = img.reshape(h, w, -1)
    if squeeze:
        img = img[:, :, 0]
    return img, mask.reshape(h, w)


def yaw_shift_equirect(img, angle_deg: float):
    """Rotate an equirectangular (or range) image about the vertical axis.

    Angles that are integer multiples of 360/W produce an exact circular
    column shift; other angles resample columns linearly with wraparound.
    """
    img = np.asarray(img)
    if not np.isfinite(angle_deg):
        raise ValueError("angle must be finite")
    w = img.shape[1]
    shift = (angle_deg % 360.0) / 360.0 * w
    k = int(np.floor(shift + 0.5))
    if abs(shift - k) < 1e-9:
        return np.roll(img, k % w, axis=1)
    k0 = int(np.floor(shift))
    frac = shift - k0
    a = np.roll(img, k0 % w, axis=1)
    b = np.roll(img, (k0 + 1) % w, axis=1)
    return (1.0 - frac) * a + frac * b


def render_equirect(cloud: PointCloudMap, pose: Pose, h: int, w: int, r_max: float,
                    light_dir=(0.35, 0.25, 0.9), ambient: float = 0.35):
    """Render an RGB panorama by splatting shaded per-point colors.

    Uses the same binning and closest-point rule as the range projection, so
    image and range are geometrically aligned by construction. Requires the
    map to carry per-point normals (as produced by synthesize_world); missing
    pixels get a deterministic sky gradient.
    """
    if cloud.normals is None:
        raise ValueError("render_equirect needs per-point normals")
    light = np.asarray(light_dir, dtype=np.float64)
    light = light / np.linalg.norm(light)
    lambert = np.clip(cloud.normals @ light, 0.0, None)
    shade = ambient + (1.0 - ambient) * lambert
    colors = albedo_palette(cloud.albedo) * shade[:, None]

    img, mask = splat_values(cloud, pose, h, w, r_max, colors)
    sky = sky_gradient(h, w)
    img[~mask] = sky[~mask]
    return np.clip(img, 0.0, 1.0)


def albedo_palette(albedo):
    """Deterministic smooth mapping from scalar albedo to RGB."""
    a = np.asarray(albedo, dtype=np.float64)
    r = 0.5 + 0.45 * np.cos(2 * np.pi * (1.0 * a + 0.00))
    g = 0.5 + 0.45 * np.cos(2 * np.pi * (0.7 * a + 0.25))
    b = 0.5 + 0.45 * np.cos(2 * np.pi * (0.4 * a + 0.55))
    return np.clip(np.stack([r, g, b], axis=-1) * (0.35 + 0.65 * a[..., None]), 0.0, 1.0)


def sky_gradient(h, w):
    """Sky color by row: light zenith fading to a pale horizon band."""
    rows = (np.arange(h) + 0.5) / h
    t = np.clip(rows / 0.55, 0.0, 1.0)
    zenith = np.array([0.45, 0.62, 0.85])
    horizon = np.array([0.88, 0.90, 0.92])
    col = zenith[None, :] * (1 - t[:, None]) + horizon[None, :] * t[:, None]
    return np.repeat(col[:, None, :], w, axis=1)
