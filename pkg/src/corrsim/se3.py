"""Pose and rotation arithmetic for the 15-dimensional action space.

Rotations are 3x3 orthonormal matrices; the 6-D encoding is the first two
columns of the matrix, decoded by Gram-Schmidt.  Deltas are world-frame:
the delta rotation is left-composed and the delta translation is added.
The simulator is planar, so helpers embed/project (x, y, yaw) poses, but
every action remains a full SE3 quantity with z = 0 and roll = pitch = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateRotation

_EPS = 1e-12


@dataclass
class Rotation:
    """3x3 orthonormal matrix with determinant +1."""

    matrix: np.ndarray

    @staticmethod
    def identity() -> "Rotation":
        return Rotation(np.eye(3))

    @staticmethod
    def yaw(angle: float) -> "Rotation":
        c, s = math.cos(angle), math.sin(angle)
        return Rotation(np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]))

    def is_valid(self, tol: float = 1e-9) -> bool:
        m = self.matrix
        return (
            np.abs(m.T @ m - np.eye(3)).max() < tol
            and abs(np.linalg.det(m) - 1.0) < tol
        )


@dataclass
class Pose:
    """Rigid transform: rotation plus translation in meters."""

    rotation: Rotation
    translation: np.ndarray

    @staticmethod
    def identity() -> "Pose":
        return Pose(Rotation.identity(), np.zeros(3))

    def copy(self) -> "Pose":
        return Pose(Rotation(self.rotation.matrix.copy()), self.translation.copy())


@dataclass
class Rot6D:
    """First two columns of a rotation matrix, possibly unnormalized."""

    values: np.ndarray  # shape (6,)

    @staticmethod
    def identity() -> "Rot6D":
        return Rot6D(np.array([1.0, 0.0, 0.0, 0.0, 1.0, 0.0]))


@dataclass
class Wrench:
    """Force (N) and torque (N*m)."""

    force: np.ndarray = field(default_factory=lambda: np.zeros(3))
    torque: np.ndarray = field(default_factory=lambda: np.zeros(3))

    @staticmethod
    def zero() -> "Wrench":
        return Wrench(np.zeros(3), np.zeros(3))

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.force, self.torque])

    @staticmethod
    def from_array(a) -> "Wrench":
        a = np.asarray(a, dtype=float)
        return Wrench(a[:3].copy(), a[3:6].copy())


@dataclass
class DeltaPose9:
    """9-dim delta action: 6-D rotation plus translation."""

    rot6d: Rot6D
    translation: np.ndarray

    @staticmethod
    def zero() -> "DeltaPose9":
        return DeltaPose9(Rot6D.identity(), np.zeros(3))


def rot6d_encode(r: Rotation) -> Rot6D:
    """Concatenate the first two columns of the rotation matrix."""
    m = r.matrix
    return Rot6D(np.concatenate([m[:, 0], m[:, 1]]))


def rot6d_decode(v: Rot6D) -> Rotation:
    """Gram-Schmidt the two 3-vectors into an orthonormal frame."""
    a1 = np.asarray(v.values[:3], dtype=float)
    a2 = np.asarray(v.values[3:6], dtype=float)
    n1 = np.linalg.norm(a1)
    if n1 < _EPS:
        raise DegenerateRotation("first 6-D rotation vector has near-zero norm")
    b1 = a1 / n1
    a2p = a2 - (a2 @ b1) * b1
    n2 = np.linalg.norm(a2p)
    if n2 < _EPS:
        raise DegenerateRotation("6-D rotation vectors are nearly collinear")
    b2 = a2p / n2
    b3 = np.cross(b1, b2)
    return Rotation(np.column_stack([b1, b2, b3]))


def pose_compose(base: Pose, delta: DeltaPose9) -> Pose:
    """Apply a world-frame delta: left-composed rotation, added translation."""
    dr = rot6d_decode(delta.rot6d)
    return Pose(
        Rotation(dr.matrix @ base.rotation.matrix),
        base.translation + delta.translation,
    )


def pose_delta(from_pose: Pose, to_pose: Pose) -> DeltaPose9:
    """World-frame delta such that pose_compose(from_pose, delta) == to_pose."""
    dr = to_pose.rotation.matrix @ from_pose.rotation.matrix.T
    return DeltaPose9(
        rot6d_encode(Rotation(dr)),
        to_pose.translation - from_pose.translation,
    )


def wrap_angle(theta: float) -> float:
    """Normalize an angle into (-pi, pi]."""
    w = math.fmod(theta + math.pi, 2.0 * math.pi)
    if w <= 0.0:
        w += 2.0 * math.pi
    return w - math.pi


def planar_embed(x: float, y: float, yaw: float) -> Pose:
    """Lift planar coordinates into SE3 (z = 0, roll = pitch = 0)."""
    return Pose(Rotation.yaw(yaw), np.array([x, y, 0.0]))


def planar_project(p: Pose) -> tuple[float, float, float]:
    """Project a planar pose back to (x, y, yaw) with yaw in (-pi, pi]."""
    m = p.rotation.matrix
    yaw = math.atan2(m[1, 0], m[0, 0])
    return float(p.translation[0]), float(p.translation[1]), wrap_angle(yaw)


def random_rotation(rng: np.random.Generator) -> Rotation:
    """Uniform random rotation via a random axis and angle."""
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    angle = rng.uniform(-math.pi, math.pi)
    k = np.array(
        [
            [0.0, -axis[2], axis[1]],
            [axis[2], 0.0, -axis[0]],
            [-axis[1], axis[0], 0.0],
        ]
    )
    m = np.eye(3) + math.sin(angle) * k + (1.0 - math.cos(angle)) * (k @ k)
    return Rotation(m)
