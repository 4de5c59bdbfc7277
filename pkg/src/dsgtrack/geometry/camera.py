"""Pinhole camera model (no distortion) and projection."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import NonPositiveDepth
from .transforms import RigidPose


@dataclass(frozen=True)
class Intrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if not (0 < self.cx < self.width and 0 < self.cy < self.height):
            raise ValueError("principal point must lie strictly inside the image")

    @property
    def K(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    def in_bounds(self, uv) -> np.ndarray:
        uv = np.atleast_2d(uv)
        return ((uv[:, 0] >= 0) & (uv[:, 0] < self.width)
                & (uv[:, 1] >= 0) & (uv[:, 1] < self.height))

    def to_dict(self) -> dict:
        return {"fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy,
                "width": self.width, "height": self.height}

    @classmethod
    def from_dict(cls, d) -> Intrinsics:
        return cls(float(d["fx"]), float(d["fy"]), float(d["cx"]), float(d["cy"]),
                   int(d["width"]), int(d["height"]))


@dataclass(frozen=True)
class CameraModel:
    """Intrinsics plus the camera-to-world pose for one frame."""

    intrinsics: Intrinsics
    pose: RigidPose = field(default_factory=RigidPose.identity)

    def world_to_camera(self, points_world) -> np.ndarray:
        return self.pose.inverse().apply(points_world)

    def project_many(self, points_world, check_depth=True):
        """Project an (N, 3) array; returns (uv, depth)."""
        pc = self.world_to_camera(np.atleast_2d(points_world))
        z = pc[:, 2]
        if check_depth and np.any(z <= 0.0):
            raise NonPositiveDepth("point at or behind the camera plane")
        with np.errstate(divide="ignore", invalid="ignore"):
            u = self.intrinsics.fx * pc[:, 0] / z + self.intrinsics.cx
            v = self.intrinsics.fy * pc[:, 1] / z + self.intrinsics.cy
        return np.column_stack([u, v]), z


def project(camera: CameraModel, point_world) -> np.ndarray:
    """Pixel coordinates of a single world point."""
    uv, _ = camera.project_many(np.asarray(point_world, dtype=float).reshape(1, 3))
    return uv[0]


def project_camera_frame(intrinsics: Intrinsics, points_cam) -> np.ndarray:
    pc = np.atleast_2d(points_cam)
    return np.column_stack([intrinsics.fx * pc[:, 0] / pc[:, 2] + intrinsics.cx,
                            intrinsics.fy * pc[:, 1] / pc[:, 2] + intrinsics.cy])
