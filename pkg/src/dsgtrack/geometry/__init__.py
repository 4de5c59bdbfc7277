"""SE(3) math, pinhole projection, RANSAC PnP and pose error metrics."""

from .camera import CameraModel, Intrinsics, project
from .metrics import (MetricsReport, add_error, add_s_error, align_by_timestamp,
                      model_diameter, trajectory_metrics)
from .pnp import Correspondence, PnPResult, RansacConfig, solve_pnp_ransac, world_rotation
from .transforms import RigidPose, incremental_update, pose_error, rotation_angle

__all__ = [
    "CameraModel", "Correspondence", "Intrinsics", "MetricsReport", "PnPResult",
    "RansacConfig", "RigidPose", "add_error", "add_s_error", "align_by_timestamp",
    "incremental_update", "model_diameter", "pose_error", "project", "rotation_angle",
    "solve_pnp_ransac", "trajectory_metrics", "world_rotation",
]
