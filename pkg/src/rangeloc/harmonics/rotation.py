"""ZYZ Euler rotations used by the spherical transforms."""

from dataclasses import dataclass

import numpy as np

from ..rotations import quat_from_zyz, quat_mul, quat_conj, zyz_from_quat


@dataclass
class RotationZYZ:
    """R = Z(alpha) Y(beta) Z(gamma), alpha/gamma in [0, 2pi), beta in [0, pi]."""

    alpha: float
    beta: float
    gamma: float

    def __post_init__(self):
        two_pi = 2 * np.pi
        self.alpha = float(self.alpha) % two_pi
        self.gamma = float(self.gamma) % two_pi
        self.beta = float(self.beta)
        if not (-1e-12 <= self.beta <= np.pi + 1e-12):
            raise ValueError("beta must lie in [0, pi]")
        self.beta = min(max(self.beta, 0.0), np.pi)

    @classmethod
    def identity(cls):
        return cls(0.0, 0.0, 0.0)

    @classmethod
    def from_quaternion(cls, q):
        return cls(*zyz_from_quat(q))

    def to_quaternion(self):
        return quat_from_zyz(self.alpha, self.beta, self.gamma)

    def compose(self, other: "RotationZYZ") -> "RotationZYZ":
        """self applied after other (matrix product self @ other)."""
        return RotationZYZ.from_quaternion(
            quat_mul(self.to_quaternion(), other.to_quaternion())
        )

    def inverse(self) -> "RotationZYZ":
        return RotationZYZ.from_quaternion(quat_conj(self.to_quaternion()))
