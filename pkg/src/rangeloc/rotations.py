"""Rotation conversions shared across the package.

Quaternions are (w, x, y, z), unit norm. Euler angles follow the ZYZ
convention R = Z(alpha) Y(beta) Z(gamma) with alpha, gamma in [0, 2pi)
and beta in [0, pi].
"""

import numpy as np


def quat_normalize(q):
    q = np.asarray(q, dtype=np.float64)
    n = np.linalg.norm(q)
    if n == 0:
        raise ValueError("zero quaternion")
    return q / n


def quat_mul(a, b):
    """Hamilton product a*b; composes rotations (a after b)."""
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ])


def quat_conj(q):
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_to_matrix(q):
    w, x, y, z = quat_normalize(q)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def quat_from_yaw(yaw):
    """Rotation about +z by `yaw` radians."""
    return np.array([np.cos(yaw / 2), 0.0, 0.0, np.sin(yaw / 2)])


def quat_from_zyz(alpha, beta, gamma):
    qa = np.array([np.cos(alpha / 2), 0.0, 0.0, np.sin(alpha / 2)])
    qb = np.array([np.cos(beta / 2), 0.0, np.sin(beta / 2), 0.0])
    qg = np.array([np.cos(gamma / 2), 0.0, 0.0, np.sin(gamma / 2)])
    return quat_mul(qa, quat_mul(qb, qg))


def zyz_from_quat(q):
    """ZYZ Euler angles of a unit quaternion, beta in [0, pi]."""
    m = quat_to_matrix(q)
    return zyz_from_matrix(m)


def zyz_from_matrix(m):
    beta = np.arccos(np.clip(m[2, 2], -1.0, 1.0))
    if np.sin(beta) > 1e-12:
        alpha = np.arctan2(m[1, 2], m[0, 2])
        gamma = np.arctan2(m[2, 1], -m[2, 0])
    else:
        # gimbal-degenerate: fold the whole z-rotation into alpha
        if m[2, 2] > 0:
            alpha = np.arctan2(m[1, 0], m[0, 0])
        else:
            alpha = np.arctan2(-m[1, 0], m[0, 0])
        gamma = 0.0
    return alpha % (2 * np.pi), beta, gamma % (2 * np.pi)


def matrix_from_zyz(alpha, beta, gamma):
    ca, sa = np.cos(alpha), np.sin(alpha)
    cb, sb = np.cos(beta), np.sin(beta)
    cg, sg = np.cos(gamma), np.sin(gamma)
    rz_a = np.array([[ca, -sa, 0], [sa, ca, 0], [0, 0, 1.0]])
    ry_b = np.array([[cb, 0, sb], [0, 1.0, 0], [-sb, 0, cb]])
    rz_g = np.array([[cg, -sg, 0], [sg, cg, 0], [0, 0, 1.0]])
    return rz_a @ ry_b @ rz_g
