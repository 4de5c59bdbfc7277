"""Pose and trajectory error metrics: ADD, ADD-S, RMSE, Acc(5cm, 5deg), end-pose error."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.spatial import cKDTree

from ..errors import EmptyModel, EmptyTrajectory, LengthMismatch
from ..trajectory import TrajectoryRecord
from .transforms import RigidPose, rotation_angle

ACC_TRANSLATION_M = 0.05
ACC_ROTATION_DEG = 5.0
ADD_DIAMETER_FRACTION = 0.1


def _model(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(pts) == 0:
        raise EmptyModel("model point set is empty")
    return pts


def add_error(est: RigidPose, gt: RigidPose, model_points) -> float:
    """Mean distance between corresponding model points under both poses (meters)."""
    pts = _model(model_points)
    return float(np.mean(np.linalg.norm(est.apply(pts) - gt.apply(pts), axis=1)))


def add_s_error(est: RigidPose, gt: RigidPose, model_points) -> float:
    """Mean distance from each estimated model point to the closest ground-truth model point."""
    pts = _model(model_points)
    e, g = est.apply(pts), gt.apply(pts)
    _, nn = cKDTree(g).query(e)
    # same norm evaluation as add_error, so ADD-S <= ADD holds bit-exactly
    d = np.minimum(np.linalg.norm(e - g[nn], axis=1), np.linalg.norm(e - g, axis=1))
    return float(np.mean(d))


def model_diameter(model_points) -> float:
    """Largest pairwise distance in the model (meters)."""
    pts = _model(model_points)
    if len(pts) > 2000:
        from scipy.spatial import ConvexHull
        pts = pts[ConvexHull(pts).vertices]
    diff = pts[:, None, :] - pts[None, :, :]
    return float(np.sqrt(np.max(np.sum(diff ** 2, axis=-1))))


@dataclass
class MetricsReport:
    frames: int
    translation_rmse_cm: float
    rotation_rmse_deg: float
    add_pct: float
    add_s_pct: float
    acc_5cm_5deg_pct: float
    end_translation_cm: float
    end_rotation_deg: float
    rotation_metric: str = "geodesic angle"

    def to_dict(self) -> dict:
        return asdict(self)


def frame_errors(est: list[RigidPose], gt: list[RigidPose], model_points):
    """Per-frame translation error (m), rotation error (rad), ADD (m) and ADD-S (m)."""
    if len(est) != len(gt):
        raise LengthMismatch(f"{len(est)} estimated vs {len(gt)} ground-truth poses")
    if len(est) == 0:
        raise EmptyTrajectory("no poses to compare")
    pts = _model(model_points)
    t_err = np.array([np.linalg.norm(e.translation - g.translation) for e, g in zip(est, gt)])
    r_err = np.array([rotation_angle(e.rotation, g.rotation) for e, g in zip(est, gt)])
    add = np.array([add_error(e, g, pts) for e, g in zip(est, gt)])
    add_s = np.array([add_s_error(e, g, pts) for e, g in zip(est, gt)])
    return t_err, r_err, add, add_s


def summarize(t_err, r_err, add, add_s, diameter: float) -> MetricsReport:
    thr = ADD_DIAMETER_FRACTION * diameter
    r_deg = np.degrees(r_err)
    return MetricsReport(
        frames=len(t_err),
        translation_rmse_cm=float(100.0 * np.sqrt(np.mean(t_err ** 2))),
        rotation_rmse_deg=float(np.sqrt(np.mean(r_deg ** 2))),
        add_pct=float(100.0 * np.mean(add < thr)),
        add_s_pct=float(100.0 * np.mean(add_s < thr)),
        acc_5cm_5deg_pct=float(100.0 * np.mean((t_err < ACC_TRANSLATION_M) & (r_deg < ACC_ROTATION_DEG))),
        end_translation_cm=float(100.0 * t_err[-1]),
        end_rotation_deg=float(r_deg[-1]),
    )


def trajectory_metrics(est: TrajectoryRecord, gt: TrajectoryRecord, model_points,
                       diameter: float) -> MetricsReport:
    """Metrics over two time-aligned trajectories of the same object."""
    errs = frame_errors(est.poses, gt.poses, model_points)
    return summarize(*errs, diameter)


def align_by_timestamp(est: TrajectoryRecord, gt: TrajectoryRecord, max_gap_ns: int):
    """Pair every estimated sample with the nearest ground-truth sample within ``max_gap_ns``.

    Returns two equal-length pose lists; estimated samples without a partner are dropped.
    """
    if len(gt) == 0 or len(est) == 0:
        return [], []
    gts = np.asarray(gt.timestamps_ns, dtype=np.int64)
    order = np.argsort(gts, kind="stable")
    gts_sorted = gts[order]
    est_out, gt_out = [], []
    for ts, pose in zip(est.timestamps_ns, est.poses):
        i = int(np.searchsorted(gts_sorted, ts))
        cands = [j for j in (i - 1, i) if 0 <= j < len(gts_sorted)]
        j = min(cands, key=lambda c: (abs(int(gts_sorted[c]) - ts), c))
        if abs(int(gts_sorted[j]) - ts) <= max_gap_ns:
            est_out.append(pose)
            gt_out.append(gt.poses[order[j]])
    return est_out, gt_out
