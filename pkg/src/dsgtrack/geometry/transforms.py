"""Rigid transforms on SE(3) backed by unit quaternions (w, x, y, z)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def quat_normalize(q):
    q = np.asarray(q, dtype=float)
    n = np.linalg.norm(q)
    if not np.isfinite(n) or n == 0.0:
        raise ValueError("quaternion must be finite and non-zero")
    # dividing by a norm that is 1 up to rounding still flips low bits; skip it
    # so that already-unit quaternions (e.g. read back from a file) stay exact
    if abs(n - 1.0) > 4 * np.finfo(float).eps:
        q = q / n
    # canonical hemisphere keeps serialized output stable
    if q[0] < 0.0:
        q = -q
    return q


def quat_multiply(a, b):
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ])


def quat_conjugate(q):
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_to_matrix(q):
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def matrix_to_quat(R):
    """Convert a rotation matrix to a unit quaternion (Shepperd's method)."""
    R = np.asarray(R, dtype=float)
    tr = R[0, 0] + R[1, 1] + R[2, 2]
    if tr > 0.0:
        s = 2.0 * np.sqrt(tr + 1.0)
        q = [0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s]
    elif R[0, 0] > R[1, 1] and R[0, 0] > R[2, 2]:
        s = 2.0 * np.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2])
        q = [(R[2, 1] - R[1, 2]) / s, 0.25 * s, (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s]
    elif R[1, 1] > R[2, 2]:
        s = 2.0 * np.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2])
        q = [(R[0, 2] - R[2, 0]) / s, (R[0, 1] + R[1, 0]) / s, 0.25 * s, (R[1, 2] + R[2, 1]) / s]
    else:
        s = 2.0 * np.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1])
        q = [(R[1, 0] - R[0, 1]) / s, (R[0, 2] + R[2, 0]) / s, (R[1, 2] + R[2, 1]) / s, 0.25 * s]
    return quat_normalize(q)


def skew(v):
    return np.array([[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]])


def rotvec_to_quat(rotvec):
    rotvec = np.asarray(rotvec, dtype=float)
    angle = np.linalg.norm(rotvec)
    if angle < 1e-12:
        # second-order expansion, exact to double precision at this scale
        return quat_normalize([1.0, 0.5 * rotvec[0], 0.5 * rotvec[1], 0.5 * rotvec[2]])
    axis = rotvec / angle
    s = np.sin(0.5 * angle)
    return quat_normalize([np.cos(0.5 * angle), *(s * axis)])


def quat_to_rotvec(q):
    q = quat_normalize(q)
    v = q[1:]
    s = np.linalg.norm(v)
    if s < 1e-15:
        return 2.0 * v
    angle = 2.0 * np.arctan2(s, q[0])
    return v / s * angle


def quat_slerp(q0, q1, tau):
    q0 = quat_normalize(q0)
    q1 = np.asarray(q1, dtype=float)
    if np.dot(q0, q1) < 0.0:
        q1 = -q1
    rel = quat_multiply(quat_conjugate(q0), q1)
    return quat_normalize(quat_multiply(q0, rotvec_to_quat(tau * quat_to_rotvec(rel))))


def rotation_angle(R1, R2):
    """Geodesic distance in radians between two rotation matrices."""
    rel = np.asarray(R1).T @ np.asarray(R2)
    cos_theta = np.clip(0.5 * (np.trace(rel) - 1.0), -1.0, 1.0)
    # arccos is ill-conditioned near 0; fall back to the skew part there
    if cos_theta > 0.999:
        w = np.array([rel[2, 1] - rel[1, 2], rel[0, 2] - rel[2, 0], rel[1, 0] - rel[0, 1]])
        return float(np.arcsin(np.clip(0.5 * np.linalg.norm(w), 0.0, 1.0)))
    return float(np.arccos(cos_theta))


@dataclass(frozen=True)
class RigidPose:
    """Element of SE(3): ``x -> R x + t`` with R stored as a unit quaternion.

    The quaternion is renormalized on construction, so every composition chain
    stays on the manifold.
    """

    quat: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        q = quat_normalize(self.quat)
        t = np.array(self.translation, dtype=float).reshape(3)
        if not np.all(np.isfinite(t)):
            raise ValueError("translation must be finite")
        q.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "quat", q)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> RigidPose:
        return cls()

    @classmethod
    def from_matrix(cls, R, t=(0.0, 0.0, 0.0)) -> RigidPose:
        return cls(matrix_to_quat(R), t)

    @classmethod
    def from_homogeneous(cls, T) -> RigidPose:
        T = np.asarray(T, dtype=float)
        return cls.from_matrix(T[:3, :3], T[:3, 3])

    @classmethod
    def from_rotvec(cls, rotvec, t=(0.0, 0.0, 0.0)) -> RigidPose:
        return cls(rotvec_to_quat(rotvec), t)

    @property
    def rotation(self) -> np.ndarray:
        return quat_to_matrix(self.quat)

    def as_homogeneous(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = self.rotation
        T[:3, 3] = self.translation
        return T

    def compose(self, other: RigidPose) -> RigidPose:
        """``self * other``: apply ``other`` first, then ``self``."""
        q = quat_multiply(self.quat, other.quat)
        t = self.rotation @ other.translation + self.translation
        return RigidPose(q, t)

    __matmul__ = compose

    def inverse(self) -> RigidPose:
        qi = quat_conjugate(self.quat)
        return RigidPose(qi, -(quat_to_matrix(qi) @ self.translation))

    def apply(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        return points @ self.rotation.T + self.translation

    def with_translation(self, t) -> RigidPose:
        return RigidPose(self.quat, t)

    def to_dict(self) -> dict:
        return {"rotation": [float(v) for v in self.quat],
                "translation": [float(v) for v in self.translation]}

    @classmethod
    def from_dict(cls, d) -> RigidPose:
        return cls(d["rotation"], d["translation"])

    def __eq__(self, other):
        if not isinstance(other, RigidPose):
            return NotImplemented
        return bool(np.array_equal(self.quat, other.quat)
                    and np.array_equal(self.translation, other.translation))

    def __hash__(self):
        return hash((self.quat.tobytes(), self.translation.tobytes()))

    def __repr__(self):
        q = np.array2string(self.quat, precision=6)
        t = np.array2string(self.translation, precision=6)
        return f"RigidPose(quat={q}, t={t})"


def pose_error(a: RigidPose, b: RigidPose) -> tuple[float, float]:
    """Translation distance (m) and geodesic rotation angle (rad) between two poses."""
    return (float(np.linalg.norm(a.translation - b.translation)),
            rotation_angle(a.rotation, b.rotation))


def incremental_update(current: RigidPose, previous: RigidPose, new: RigidPose) -> RigidPose:
    """Undo ``previous`` and apply ``new`` on top of ``current`` (world-frame left composition)."""
    return new.compose(previous.inverse()).compose(current)


def look_at(position, target, up=(0.0, 0.0, 1.0)) -> RigidPose:
    """Camera-to-world pose for an optical-frame camera (x right, y down, z forward)."""
    position = np.asarray(position, dtype=float)
    z = np.asarray(target, dtype=float) - position
    z = z / np.linalg.norm(z)
    x = np.cross(z, np.asarray(up, dtype=float))
    if np.linalg.norm(x) < 1e-9:
        x = np.cross(z, [1.0, 0.0, 0.0])
    x = x / np.linalg.norm(x)
    y = np.cross(z, x)
    return RigidPose.from_matrix(np.column_stack([x, y, z]), position)
