"""Rigid transforms and 6D poses.

Quaternions are stored scalar-last ``(x, y, z, w)`` and canonicalised to
``w >= 0`` so equal rotations compare equal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation

_TOL = 1e-9


def _canonical(quat):
    quat = np.asarray(quat, dtype=float)
    return -quat if quat[3] < 0 else quat


@dataclass(frozen=True, eq=False)
class Pose6D:
    position: np.ndarray
    orientation: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=float).reshape(3)
        quat = np.asarray(self.orientation, dtype=float).reshape(4)
        if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(quat))):
            raise ValueError("pose must be finite")
        if abs(np.linalg.norm(quat) - 1.0) > _TOL:
            raise ValueError(f"orientation quaternion not unit norm: |q|={np.linalg.norm(quat)!r}")
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "orientation", _canonical(quat))

    @classmethod
    def identity(cls) -> "Pose6D":
        return cls(np.zeros(3), np.array([0.0, 0.0, 0.0, 1.0]))

    @classmethod
    def from_matrix(cls, T) -> "Pose6D":
        T = np.asarray(T, dtype=float)
        quat = Rotation.from_matrix(T[:3, :3]).as_quat()
        return cls(T[:3, 3].copy(), quat / np.linalg.norm(quat))

    @classmethod
    def from_xyz_rpy(cls, xyz, rpy) -> "Pose6D":
        return cls(np.asarray(xyz, dtype=float), euler_to_quat(rpy))

    @property
    def rotation(self) -> np.ndarray:
        return Rotation.from_quat(self.orientation).as_matrix()

    def matrix(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = self.rotation
        T[:3, 3] = self.position
        return T

    def as_vector(self) -> np.ndarray:
        """Position followed by quaternion, length 7."""
        return np.concatenate([self.position, self.orientation])

    def as_xyz_rpy(self) -> np.ndarray:
        return np.concatenate([self.position, quat_to_euler(self.orientation)])

    def isclose(self, other: "Pose6D", atol: float = _TOL) -> bool:
        same_pos = np.allclose(self.position, other.position, atol=atol, rtol=0.0)
        dot = abs(float(np.dot(self.orientation, other.orientation)))
        return same_pos and (1.0 - dot) <= atol


@dataclass(frozen=True, eq=False)
class FrameTransform:
    """Rigid transform ``p_parent = R p_child + t``."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        t = np.asarray(self.translation, dtype=float).reshape(3)
        if not (np.all(np.isfinite(R)) and np.all(np.isfinite(t))):
            raise ValueError("transform must be finite")
        if np.max(np.abs(R.T @ R - np.eye(3))) > _TOL:
            raise ValueError("rotation is not orthonormal")
        if abs(np.linalg.det(R) - 1.0) > _TOL:
            raise ValueError("rotation determinant is not +1")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "FrameTransform":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, T) -> "FrameTransform":
        T = np.asarray(T, dtype=float)
        return cls(T[:3, :3].copy(), T[:3, 3].copy())

    @classmethod
    def from_pose(cls, pose: Pose6D) -> "FrameTransform":
        return cls(pose.rotation, pose.position)

    @classmethod
    def from_xyz_rpy(cls, xyz, rpy) -> "FrameTransform":
        return cls(Rotation.from_euler("xyz", rpy).as_matrix(), xyz)

    def matrix(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = self.rotation
        T[:3, 3] = self.translation
        return T

    def inverse(self) -> "FrameTransform":
        Rt = self.rotation.T
        return FrameTransform(Rt, -Rt @ self.translation)

    def compose(self, other: "FrameTransform") -> "FrameTransform":
        """``self ∘ other``: apply ``other`` first."""
        return FrameTransform(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    __matmul__ = compose

    def apply_points(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        return pts @ self.rotation.T + self.translation


def transform_pose(t: FrameTransform, p: Pose6D) -> Pose6D:
    """Express pose ``p`` (given in the child frame of ``t``) in the parent frame."""
    R = t.rotation @ p.rotation
    quat = Rotation.from_matrix(R).as_quat()
    return Pose6D(t.rotation @ p.position + t.translation, quat / np.linalg.norm(quat))


def euler_to_quat(rpy) -> np.ndarray:
    """Roll-pitch-yaw (extrinsic x, y, z) to a unit quaternion."""
    quat = Rotation.from_euler("xyz", np.asarray(rpy, dtype=float)).as_quat()
    return _canonical(quat / np.linalg.norm(quat))


def quat_to_euler(quat) -> np.ndarray:
    return Rotation.from_quat(np.asarray(quat, dtype=float)).as_euler("xyz")


def rpy_matrix(rpy) -> np.ndarray:
    return Rotation.from_euler("xyz", np.asarray(rpy, dtype=float)).as_matrix()
