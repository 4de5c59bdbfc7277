"""Perspective-n-point: P3P minimal solver inside RANSAC, Gauss-Newton refinement."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..errors import NoConsensus, TooFewPoints
from .camera import Intrinsics
from .transforms import RigidPose, matrix_to_quat, quat_multiply, quat_to_matrix, rotvec_to_quat, skew

MIN_SAMPLE = 4
DEGENERACY_TOL = 1e-8


@dataclass(frozen=True)
class Correspondence:
    point3d: np.ndarray  # object frame, meters
    point2d: np.ndarray  # pixels
    visible: bool = True
    track_id: Optional[str] = None


@dataclass(frozen=True)
class RansacConfig:
    threshold_px: float = 4.0
    confidence: float = 0.999
    max_iterations: int = 500
    min_inlier_ratio: float = 0.3
    seed: int = 0
    refine_iterations: int = 20
    refine_step_tol: float = 1e-10

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class PnPResult:
    pose_obj_to_cam: RigidPose
    inlier_indices: np.ndarray
    reprojection_rmse: float
    iterations: int = 0


def _bearings(intrinsics: Intrinsics, uv: np.ndarray) -> np.ndarray:
    x = (uv[:, 0] - intrinsics.cx) / intrinsics.fx
    y = (uv[:, 1] - intrinsics.cy) / intrinsics.fy
    f = np.column_stack([x, y, np.ones(len(uv))])
    return f / np.linalg.norm(f, axis=1, keepdims=True)


def _kabsch(src: np.ndarray, dst: np.ndarray):
    """R, t minimizing |R src + t - dst|."""
    cs, cd = src.mean(axis=0), dst.mean(axis=0)
    H = (src - cs).T @ (dst - cd)
    U, _, Vt = np.linalg.svd(H)
    D = np.diag([1.0, 1.0, np.sign(np.linalg.det(Vt.T @ U.T))])
    R = Vt.T @ D @ U.T
    return R, cd - R @ cs


def is_degenerate(points3d: np.ndarray, tol: float = DEGENERACY_TOL) -> bool:
    """True when the centered points span at most a line."""
    if len(points3d) < 3:
        return True
    s = np.linalg.svd(points3d - points3d.mean(axis=0), compute_uv=False)
    return s[0] == 0.0 or s[1] / s[0] < tol


def p3p(points3d: np.ndarray, bearings: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    """Grunert's P3P solution. Returns up to four (R, t) with x_cam = R X + t."""
    p1, p2, p3 = points3d
    a2 = float(np.sum((p2 - p3) ** 2))
    b2 = float(np.sum((p1 - p3) ** 2))
    c2 = float(np.sum((p1 - p2) ** 2))
    if min(a2, b2, c2) < 1e-18:
        return []
    cos_a = float(bearings[1] @ bearings[2])
    cos_b = float(bearings[0] @ bearings[2])
    cos_g = float(bearings[0] @ bearings[1])

    amc = (a2 - c2) / b2
    apc = (a2 + c2) / b2
    bmc = (b2 - c2) / b2
    bma = (b2 - a2) / b2
    A4 = (amc - 1) ** 2 - 4 * c2 / b2 * cos_a ** 2
    A3 = 4 * (amc * (1 - amc) * cos_b - (1 - apc) * cos_a * cos_g
              + 2 * c2 / b2 * cos_a ** 2 * cos_b)
    A2 = 2 * (amc ** 2 - 1 + 2 * amc ** 2 * cos_b ** 2 + 2 * bmc * cos_a ** 2
              - 4 * apc * cos_a * cos_b * cos_g + 2 * bma * cos_g ** 2)
    A1 = 4 * (-amc * (1 + amc) * cos_b + 2 * a2 / b2 * cos_g ** 2 * cos_b
              - (1 - apc) * cos_a * cos_g)
    A0 = (1 + amc) ** 2 - 4 * a2 / b2 * cos_g ** 2
    coeffs = np.array([A4, A3, A2, A1, A0])
    if not np.all(np.isfinite(coeffs)) or np.allclose(coeffs, 0.0):
        return []
    roots = np.roots(coeffs)
    poly = np.polynomial.Polynomial(coeffs[::-1])
    dpoly = poly.deriv()
    starts = []
    for r in roots:
        # near-double roots come back as a complex pair; try both sides of it
        if abs(r.imag) > 1e-3 * max(1.0, abs(r.real)):
            continue
        starts.append((r.real, True))
        if r.imag > 0:
            starts += [(r.real - r.imag, False), (r.real + r.imag, False)]
    solutions, found = [], []
    for v, polish in starts:
        for _ in range(3 if polish else 0):
            d = dpoly(v)
            if d == 0.0:
                break
            v -= poly(v) / d
        if v <= 0.0:
            continue
        denom = 2 * (cos_g - v * cos_a)
        if abs(denom) < 1e-14:
            continue
        u = ((-1 + amc) * v * v - 2 * amc * cos_b * v + 1 + amc) / denom
        if u <= 0.0:
            continue
        s1_sq = b2 / (1 + v * v - 2 * v * cos_b)
        if s1_sq <= 0.0:
            continue
        s1 = math.sqrt(s1_sq)
        depths = _polish_depths(np.array([s1, u * s1, v * s1]), a2, b2, c2, cos_a, cos_b, cos_g)
        if depths is None or any(np.allclose(depths, d, rtol=1e-9, atol=0) for d in found):
            continue
        found.append(depths)
        R, t = _kabsch(points3d, depths[:, None] * bearings)
        solutions.append((R, t))
    return solutions


def _polish_depths(s, a2, b2, c2, cos_a, cos_b, cos_g, iterations=5):
    """Newton on the three law-of-cosines equations; None if it does not settle on a valid root."""
    scale = max(a2, b2, c2)
    for _ in range(iterations):
        s1, s2, s3 = s
        f = np.array([s1 * s1 + s2 * s2 - 2 * s1 * s2 * cos_g - c2,
                      s1 * s1 + s3 * s3 - 2 * s1 * s3 * cos_b - b2,
                      s2 * s2 + s3 * s3 - 2 * s2 * s3 * cos_a - a2])
        J = 2 * np.array([[s1 - s2 * cos_g, s2 - s1 * cos_g, 0.0],
                          [s1 - s3 * cos_b, 0.0, s3 - s1 * cos_b],
                          [0.0, s2 - s3 * cos_a, s3 - s2 * cos_a]])
        try:
            step = np.linalg.solve(J, f)
        except np.linalg.LinAlgError:
            break
        s = s - step
        if np.max(np.abs(step)) < 1e-15 * np.max(np.abs(s)):
            break
    s1, s2, s3 = s
    f = np.array([s1 * s1 + s2 * s2 - 2 * s1 * s2 * cos_g - c2,
                  s1 * s1 + s3 * s3 - 2 * s1 * s3 * cos_b - b2,
                  s2 * s2 + s3 * s3 - 2 * s2 * s3 * cos_a - a2])
    if np.any(s <= 0) or np.max(np.abs(f)) > 1e-6 * scale:
        return None
    return s


def reprojection_errors(R, t, points3d, points2d, intrinsics: Intrinsics) -> np.ndarray:
    """Per-point pixel error; +inf for points at or behind the camera."""
    pc = points3d @ R.T + t
    z = pc[:, 2]
    err = np.full(len(points3d), np.inf)
    ok = z > 1e-9
    u = intrinsics.fx * pc[ok, 0] / z[ok] + intrinsics.cx
    v = intrinsics.fy * pc[ok, 1] / z[ok] + intrinsics.cy
    err[ok] = np.hypot(u - points2d[ok, 0], v - points2d[ok, 1])
    return err


def refine_pose(R, t, points3d, points2d, intrinsics: Intrinsics,
                max_iterations: int = 20, step_tol: float = 1e-10):
    """Gauss-Newton on total squared reprojection error (left-multiplied rotation update)."""
    fx, fy = intrinsics.fx, intrinsics.fy
    q = matrix_to_quat(R)
    t = np.array(t, dtype=float)

    def residuals(q, t):
        pc = points3d @ quat_to_matrix(q).T + t
        proj = np.column_stack([fx * pc[:, 0] / pc[:, 2] + intrinsics.cx,
                                fy * pc[:, 1] / pc[:, 2] + intrinsics.cy])
        return pc, (proj - points2d).ravel()

    pc, r = residuals(q, t)
    cost = float(r @ r)
    for _ in range(max_iterations):
        if np.any(pc[:, 2] <= 0):
            break
        x, y, z = pc[:, 0], pc[:, 1], pc[:, 2]
        n = len(pc)
        dproj = np.zeros((n, 2, 3))
        dproj[:, 0, 0] = fx / z
        dproj[:, 0, 2] = -fx * x / z ** 2
        dproj[:, 1, 1] = fy / z
        dproj[:, 1, 2] = -fy * y / z ** 2
        rot = pc - t  # R X
        # d(pc)/d(omega) = -[R X]_x for R <- exp(omega) R
        dpc_dw = -np.stack([skew(p) for p in rot])
        J = np.concatenate([dproj @ dpc_dw, dproj], axis=2).reshape(2 * n, 6)
        try:
            delta = -np.linalg.solve(J.T @ J, J.T @ r)
        except np.linalg.LinAlgError:
            break
        step = 1.0
        improved = False
        for _ in range(10):
            q_new = quat_multiply(rotvec_to_quat(step * delta[:3]), q)
            t_new = t + step * delta[3:]
            pc_new, r_new = residuals(q_new, t_new)
            cost_new = float(r_new @ r_new)
            if np.all(pc_new[:, 2] > 0) and cost_new <= cost:
                improved = True
                break
            step *= 0.5
        if not improved:
            break
        q, t, pc, r, cost = q_new, t_new, pc_new, r_new, cost_new
        if np.linalg.norm(step * delta) < step_tol:
            break
    return quat_to_matrix(q), t


def _adaptive_iterations(inlier_ratio: float, confidence: float, cap: int) -> int:
    if inlier_ratio >= 1.0:
        return 0
    if inlier_ratio <= 0.0:
        return cap
    denom = math.log(1.0 - inlier_ratio ** MIN_SAMPLE)
    if denom == 0.0:
        return cap
    return min(cap, int(math.ceil(math.log(1.0 - confidence) / denom)))


def solve_pnp_ransac_arrays(points3d, points2d, intrinsics: Intrinsics,
                            config: RansacConfig = RansacConfig()) -> PnPResult:
    """RANSAC PnP over aligned (N, 3) / (N, 2) arrays of visible correspondences."""
    X = np.asarray(points3d, dtype=float).reshape(-1, 3)
    uv = np.asarray(points2d, dtype=float).reshape(-1, 2)
    n = len(X)
    if n < MIN_SAMPLE:
        raise TooFewPoints(f"{n} visible correspondences, need {MIN_SAMPLE}")
    if is_degenerate(X):
        raise NoConsensus("correspondences are collinear")
    f = _bearings(intrinsics, uv)
    rng = np.random.default_rng(config.seed)
    thr = config.threshold_px

    best_count, best_score, best_model = 0, np.inf, None
    needed = config.max_iterations
    it = 0
    while it < min(needed, config.max_iterations) or (best_model is None and it < config.max_iterations):
        it += 1
        sample = rng.choice(n, MIN_SAMPLE, replace=False)
        tri = sample[:3]
        if is_degenerate(X[tri], 1e-6):
            continue
        hyps = p3p(X[tri], f[tri])
        if not hyps:
            continue
        # fourth point picks among the P3P branches
        fourth = sample[3:]
        errs4 = [reprojection_errors(R, t, X[fourth], uv[fourth], intrinsics)[0] for R, t in hyps]
        R, t = hyps[int(np.argmin(errs4))]
        err = reprojection_errors(R, t, X, uv, intrinsics)
        inl = err < thr
        count = int(inl.sum())
        score = float(np.sum(np.minimum(err, thr) ** 2))
        if count > best_count or (count == best_count and score < best_score):
            best_count, best_score, best_model = count, score, (R, t)
            needed = _adaptive_iterations(count / n, config.confidence, config.max_iterations)

    min_count = max(MIN_SAMPLE, int(math.ceil(config.min_inlier_ratio * n)))
    if best_model is None or best_count < min_count:
        raise NoConsensus(f"best consensus {best_count}/{n} below {min_count}")

    R, t = best_model
    inliers = np.flatnonzero(reprojection_errors(R, t, X, uv, intrinsics) < thr)
    for _ in range(3):
        R, t = refine_pose(R, t, X[inliers], uv[inliers], intrinsics,
                           config.refine_iterations, config.refine_step_tol)
        new_inliers = np.flatnonzero(reprojection_errors(R, t, X, uv, intrinsics) < thr)
        if len(new_inliers) < min_count:
            break
        if np.array_equal(new_inliers, inliers):
            break
        inliers = new_inliers
    err = reprojection_errors(R, t, X[inliers], uv[inliers], intrinsics)
    rmse = float(np.sqrt(np.mean(err ** 2)))
    if len(inliers) < min_count or not np.isfinite(rmse) or rmse > thr:
        raise NoConsensus("refinement left too few inliers")
    return PnPResult(RigidPose.from_matrix(R, t), inliers, rmse, it)


def solve_pnp_ransac(correspondences: Sequence[Correspondence], intrinsics: Intrinsics,
                     config: RansacConfig = RansacConfig()) -> PnPResult:
    """Robust object-to-camera pose from 2D-3D correspondences.

    Only visible correspondences take part; ``inlier_indices`` index into that
    visible subset in input order.
    """
    vis = [c for c in correspondences if c.visible]
    if len(vis) < MIN_SAMPLE:
        raise TooFewPoints(f"{len(vis)} visible correspondences, need {MIN_SAMPLE}")
    X = np.array([c.point3d for c in vis], dtype=float)
    uv = np.array([c.point2d for c in vis], dtype=float)
    return solve_pnp_ransac_arrays(X, uv, intrinsics, config)


def world_rotation(pnp: PnPResult, camera_pose: RigidPose) -> np.ndarray:
    """Object orientation in the world: camera-to-world rotation times object-to-camera rotation."""
    return camera_pose.rotation @ pnp.pose_obj_to_cam.rotation
