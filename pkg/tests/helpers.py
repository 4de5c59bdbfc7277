"""Small builders shared by the test modules."""

import copy

import numpy as np

from dsgtrack.geometry.camera import CameraModel, Intrinsics
from dsgtrack.geometry.transforms import RigidPose
from dsgtrack.observation import HandState, Observation
from dsgtrack.scene_graph import load_scene

INTR = Intrinsics(500.0, 500.0, 320.0, 240.0, 640, 480)
DT_NS = 31_250_000  # 1/32 s, so per-pair speeds are exact binary fractions


def point_scene(centroids, drawers=()):
    """Scene whose nodes are tiny point clouds centred exactly on the given centroids."""
    offsets = np.array([[0.01, 0, 0], [-0.01, 0, 0], [0, 0.01, 0], [0, -0.01, 0], [0, 0, 0.01], [0, 0, -0.01]])
    nodes = []
    for i, c in enumerate(centroids):
        d = {"id": i, "kind": "object", "label": f"n{i}", "points": (offsets + np.asarray(c, float)).tolist()}
        if i in drawers:
            d.update(kind="drawer", content_box={"min": (np.asarray(c) - 0.2).tolist(),
                                                 "max": (np.asarray(c) + 0.2).tolist()},
                     front_normal=[-1.0, 0.0, 0.0])
        nodes.append(d)
    return {"version": 0, "nodes": nodes}


def graph_of(scene):
    return load_scene(copy.deepcopy(scene))


def scripted_stream(right, left=None, n=None, dt_ns=DT_NS):
    """Observations from per-frame (position or None, p_o) lists for each hand."""
    n = n or len(right)
    cam = CameraModel(INTR, RigidPose.identity())
    out = []
    for k in range(n):
        hands = {}
        for name, seq in (("right", right), ("left", left)):
            if seq is None:
                continue
            pos, p_o = seq[k]
            hands[name] = HandState(None if pos is None else np.asarray(pos, float), p_o if pos is not None else 0.0)
        out.append(Observation(k, k * dt_ns, cam, hands, ()))
    return out


def pnp_trial(seed, n=20, outlier_frac=0.3, pixel_sigma=1.0):
    """Object points in a 30 cm cube seen from 0.6-1.0 m with uniform-outlier corruption."""
    rng = np.random.default_rng(seed)
    X = rng.uniform(-0.15, 0.15, (n, 3))
    pose = RigidPose.from_rotvec(rng.normal(size=3) * 0.8, [rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1),
                                                             rng.uniform(0.6, 1.0)])
    Xc = pose.apply(X)
    uv = (INTR.K @ Xc.T).T
    uv = uv[:, :2] / uv[:, 2:]
    uv = uv + rng.normal(0, pixel_sigma, uv.shape)
    n_out = int(round(outlier_frac * n))
    out = rng.choice(n, n_out, replace=False)
    uv[out] = rng.uniform([0, 0], [INTR.width, INTR.height], (n_out, 2))
    return X, uv, pose, out


def random_trajectory_pair(seed, n_frames=30, n_points=60):
    """Ground-truth trajectory, a perturbed estimate of it, and a model point set."""
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(n_points, 3)) * rng.uniform(0.03, 0.12, 3)
    gt, est = [], []
    for _ in range(n_frames):
        g = RigidPose.from_rotvec(rng.normal(size=3), rng.normal(size=3))
        d = RigidPose.from_rotvec(rng.normal(size=3) * rng.choice([0.01, 0.05, 0.3]),
                                  rng.normal(size=3) * rng.choice([0.005, 0.03, 0.2]))
        gt.append(g)
        est.append(d @ g)
    return est, gt, pts


def single_point_graph(coords, drawers=None):
    """Graph of one-point nodes, so each centroid is exactly the given coordinate."""
    nodes = []
    drawers = drawers or {}
    for i, c in enumerate(coords):
        d = {"id": i, "kind": "object", "label": f"n{i}", "points": [list(map(float, c))]}
        if i in drawers:
            lo, hi = drawers[i]
            d.update(kind="drawer", content_box={"min": list(lo), "max": list(hi)}, front_normal=[-1.0, 0, 0])
        nodes.append(d)
    return load_scene({"version": 0, "nodes": nodes})


def linear_nearest(centroids, ids, q, exclude=()):
    """Oracle: exhaustive scan, canonical distance, lowest id on exact ties."""
    best = None
    for i, c in zip(ids, centroids):
        if i in exclude:
            continue
        d = float(np.sqrt(np.sum((np.asarray(c, float) - np.asarray(q, float)) ** 2)))
        if best is None or (d, i) < best:
            best = (d, i)
    return best[1], best[0]


def rebuilt_edges(graph):
    """Oracle: every derived edge recomputed from scratch by exhaustive scans."""
    ids = sorted(graph.nodes)
    cents = [graph.nodes[i].centroid for i in ids]
    close = {}
    if len(ids) > 1:
        for i in ids:
            close[i] = linear_nearest(cents, ids, graph.nodes[i].centroid, exclude=(i,))[0]
    contains = {}
    for i in ids:
        n = graph.nodes[i]
        if n.is_drawer:
            continue
        best = None
        for j in ids:
            d = graph.nodes[j]
            if not d.is_drawer:
                continue
            lo, hi = d.content_box[0] - d.origin, d.content_box[1] - d.origin
            p = d.pose.rotation.T @ (n.centroid - d.pose.translation)
            if np.all(p >= lo) and np.all(p <= hi):
                key = (float(np.sqrt(np.sum((d.centroid - n.centroid) ** 2))), j)
                best = key if best is None or key < best else best
        if best is not None:
            contains[i] = best[1]
    return close, contains
