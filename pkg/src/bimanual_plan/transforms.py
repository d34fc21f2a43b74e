"""Rigid transforms and quaternion helpers.

Quaternions are stored scalar-first ``(w, x, y, z)`` and canonicalized to
``w >= 0``.  Rotation algebra is delegated to :mod:`scipy.spatial.transform`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation

IDENTITY_QUAT = (1.0, 0.0, 0.0, 0.0)


def canonical_quat(q) -> np.ndarray:
    """Return ``q`` normalized with a non-negative scalar part."""
    q = np.asarray(q, dtype=float)
    q = q / np.linalg.norm(q, axis=-1, keepdims=True)
    sign = np.where(q[..., :1] < 0.0, -1.0, 1.0)
    return q * sign


def _to_scipy(q) -> Rotation:
    q = np.asarray(q, dtype=float)
    return Rotation.from_quat(q[..., [1, 2, 3, 0]])


def _from_scipy(r: Rotation) -> np.ndarray:
    q = r.as_quat()
    return canonical_quat(q[..., [3, 0, 1, 2]])


def quat_multiply(a, b) -> np.ndarray:
    return _from_scipy(_to_scipy(a) * _to_scipy(b))


def quat_angle(a, b) -> float:
    """Geodesic angle in radians between two orientations."""
    rel = (_to_scipy(a).inv() * _to_scipy(b)).as_quat()
    return 2.0 * float(np.arctan2(np.linalg.norm(rel[:3]), abs(rel[3])))


def slerp(q0, q1, alpha: float) -> np.ndarray:
    """Shortest-arc spherical interpolation between two unit quaternions."""
    if alpha == 0.0:
        return canonical_quat(q0)
    q0 = canonical_quat(q0)
    q1 = canonical_quat(q1)
    dot = float(np.dot(q0, q1))
    if dot < 0.0:
        q1 = -q1
        dot = -dot
    if dot > 0.9999995:
        return canonical_quat(q0 + alpha * (q1 - q0))
    theta = np.arccos(dot)
    s = np.sin(theta)
    out = (np.sin((1.0 - alpha) * theta) / s) * q0 + (np.sin(alpha * theta) / s) * q1
    return canonical_quat(out)


@dataclass(frozen=True)
class RigidTransform:
    """A rotation followed by a translation, both expressed in meters/unit quaternions."""

    rotation: tuple = IDENTITY_QUAT
    translation: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        q = canonical_quat(self.rotation)
        object.__setattr__(self, "rotation", tuple(float(v) for v in q))
        object.__setattr__(self, "translation", tuple(float(v) for v in self.translation))

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls()

    @classmethod
    def from_pose(cls, position, orientation) -> "RigidTransform":
        return cls(tuple(orientation), tuple(position))

    @classmethod
    def from_tuple7(cls, values) -> "RigidTransform":
        tx, ty, tz, qw, qx, qy, qz = (float(v) for v in values)
        return cls((qw, qx, qy, qz), (tx, ty, tz))

    def as_tuple7(self) -> tuple:
        return self.translation + self.rotation

    @property
    def t(self) -> np.ndarray:
        return np.array(self.translation)

    @property
    def q(self) -> np.ndarray:
        return np.array(self.rotation)

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """``self ∘ other``: apply ``other`` first, then ``self``."""
        r = _to_scipy(self.rotation)
        t = self.t + r.apply(other.t)
        q = _from_scipy(r * _to_scipy(other.rotation))
        return RigidTransform(tuple(q), tuple(t))

    __matmul__ = compose

    def inverse(self) -> "RigidTransform":
        r_inv = _to_scipy(self.rotation).inv()
        return RigidTransform(tuple(_from_scipy(r_inv)), tuple(-r_inv.apply(self.t)))

    def apply(self, points) -> np.ndarray:
        return _to_scipy(self.rotation).apply(np.asarray(points, dtype=float)) + self.t

    def distance_to(self, other: "RigidTransform") -> tuple[float, float]:
        """Translation distance (m) and rotation angle (rad) to ``other``."""
        return (
            float(np.linalg.norm(self.t - other.t)),
            quat_angle(self.rotation, other.rotation),
        )

    def almost_equal(self, other: "RigidTransform", tol: float = 1e-9) -> bool:
        dt, da = self.distance_to(other)
        return dt <= tol and da <= tol

    def interpolate(self, other: "RigidTransform", alpha: float) -> "RigidTransform":
        if alpha >= 1.0:
            return other
        t = self.t + alpha * (other.t - self.t)
        return RigidTransform(tuple(slerp(self.rotation, other.rotation, alpha)), tuple(t))


def relative_transform(pose_a: RigidTransform, pose_b: RigidTransform) -> RigidTransform:
    """Pose of ``a`` expressed in the frame of ``b``: ``pose_a = pose_b ∘ result``."""
    return pose_b.inverse().compose(pose_a)
