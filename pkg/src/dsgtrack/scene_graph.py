"""Transformable scene graph: object and drawer nodes, typed edges, centroid k-d tree.

Scene file (JSON)::

    {
      "version": 0,
      "nodes": [
        {"id": 0, "kind": "object", "label": "mug",
         "points": [[x, y, z], ...],          # world frame at scan time, meters
         "keypoints": [0, 5, 9, ...],         # optional: indices into points
         "pose": {"rotation": [w, x, y, z], "translation": [x, y, z]},  # optional
         "parent": null},                     # reserved for room/building levels
        {"id": 7, "kind": "drawer", "label": "drawer", "points": [...],
         "content_box": {"min": [...], "max": [...]},   # world frame at scan time
         "front_normal": [nx, ny, nz],                   # unit, world frame at scan time
         "part_of": 6}
      ]
    }

Each node's object frame is centred on the mean of its scanned points with
world-aligned axes; ``pose`` maps that frame to the world and defaults to the
pure translation onto the scanned centroid.
"""

from __future__ import annotations

import copy
import json
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, NamedTuple, Optional

import numpy as np
from scipy.spatial import cKDTree

from .errors import (DanglingReference, EmptyGraph, NoMatch, NotADrawer, SchemaError,
                     UnknownNode)
from .geometry.transforms import RigidPose, rotation_angle

OBJECT = "object"
DRAWER = "drawer"
NODE_KINDS = (OBJECT, DRAWER)

CLOSE_TO = "close_to"
PART_OF = "part_of"
CONTAINS = "contains"


class Edge(NamedTuple):
    source: int
    target: int
    kind: str


def _distance(a, b) -> float:
    # canonical distance used by every nearest-neighbour decision
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    return float(np.sqrt(np.sum(d * d)))


@dataclass
class Node:
    id: int
    kind: str
    label: str
    points: np.ndarray
    pose: RigidPose = None
    content_box: Optional[tuple[np.ndarray, np.ndarray]] = None
    front_normal: Optional[np.ndarray] = None
    part_of: Optional[int] = None
    parent: Optional[int] = None
    keypoints: Optional[np.ndarray] = None
    origin: np.ndarray = field(init=False)
    local_points: np.ndarray = field(init=False)
    centroid: np.ndarray = field(init=False)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 3)
        self.origin = self.points.mean(axis=0)
        self.local_points = self.points - self.origin
        if self.pose is None:
            self.pose = RigidPose(translation=self.origin)
        self._local_mean = self.local_points.mean(axis=0)
        self.update_centroid()

    def update_centroid(self):
        self.centroid = self.pose.apply(self._local_mean)

    @property
    def is_drawer(self) -> bool:
        return self.kind == DRAWER

    @property
    def local_box(self):
        lo, hi = self.content_box
        return lo - self.origin, hi - self.origin

    @property
    def world_normal(self) -> np.ndarray:
        n = np.asarray(self.front_normal, dtype=float)
        return self.pose.rotation @ (n / np.linalg.norm(n))

    @property
    def keypoint_local(self) -> np.ndarray:
        if self.keypoints is None:
            return self.local_points
        return self.local_points[self.keypoints]

    def box_contains(self, point) -> bool:
        """Centroid-in-box test in the drawer's own frame (inclusive bounds)."""
        lo, hi = self.local_box
        p = self.pose.inverse().apply(np.asarray(point, dtype=float))
        return bool(np.all(p >= lo) and np.all(p <= hi))

    def world_points(self) -> np.ndarray:
        return self.pose.apply(self.local_points)

    def to_dict(self) -> dict:
        d = {"id": self.id, "kind": self.kind, "label": self.label,
             "points": self.points.tolist(), "pose": self.pose.to_dict()}
        if self.keypoints is not None:
            d["keypoints"] = [int(i) for i in self.keypoints]
        if self.content_box is not None:
            d["content_box"] = {"min": self.content_box[0].tolist(), "max": self.content_box[1].tolist()}
        if self.front_normal is not None:
            d["front_normal"] = self.front_normal.tolist()
        if self.part_of is not None:
            d["part_of"] = self.part_of
        if self.parent is not None:
            d["parent"] = self.parent
        return d


def _vec(value, what, shape=(3,)) -> np.ndarray:
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"{what}: not numeric") from exc
    if arr.shape != shape and not (len(shape) == 2 and arr.ndim == 2 and arr.shape[1] == 3):
        raise SchemaError(f"{what}: expected shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise SchemaError(f"{what}: non-finite coordinates")
    return arr


def node_from_dict(d: dict) -> Node:
    try:
        node_id = int(d["id"])
        kind = d["kind"]
        label = str(d["label"])
        raw_points = d["points"]
    except KeyError as exc:
        raise SchemaError(f"node missing field {exc}") from exc
    if kind not in NODE_KINDS:
        raise SchemaError(f"node {node_id}: unknown kind {kind!r}")
    points = _vec(raw_points, f"node {node_id} points", (-1, 3))
    if points.ndim != 2 or len(points) == 0:
        raise SchemaError(f"node {node_id}: needs a non-empty (N, 3) point list")
    pose = None
    if d.get("pose") is not None:
        try:
            pose = RigidPose.from_dict(d["pose"])
        except (KeyError, ValueError) as exc:
            raise SchemaError(f"node {node_id}: bad pose ({exc})") from exc
    box = normal = None
    if kind == DRAWER:
        if "content_box" not in d or "front_normal" not in d:
            raise SchemaError(f"drawer {node_id}: content_box and front_normal are required")
        lo = _vec(d["content_box"].get("min"), f"drawer {node_id} content_box.min")
        hi = _vec(d["content_box"].get("max"), f"drawer {node_id} content_box.max")
        if np.any(lo > hi):
            raise SchemaError(f"drawer {node_id}: content_box min exceeds max")
        box = (lo, hi)
        normal = _vec(d["front_normal"], f"drawer {node_id} front_normal")
        if np.linalg.norm(normal) == 0:
            raise SchemaError(f"drawer {node_id}: zero front_normal")
    elif "content_box" in d or "front_normal" in d:
        raise SchemaError(f"object {node_id}: content_box/front_normal are drawer-only")
    keypoints = None
    if d.get("keypoints") is not None:
        keypoints = np.asarray(d["keypoints"], dtype=int)
        if keypoints.ndim != 1 or np.any(keypoints < 0) or np.any(keypoints >= len(points)):
            raise SchemaError(f"node {node_id}: keypoint index out of range")
    return Node(node_id, kind, label, points, pose, box, normal,
                d.get("part_of"), d.get("parent"), keypoints)


class SceneGraph:
    """Indexed node list, typed edges and a k-d tree over current centroids.

    ``close_to`` is directed (each node points at its nearest neighbour), every
    object has at most one ``contains`` parent drawer, ``part_of`` links drawers
    to their parent object. Ties are broken by lowest node id everywhere.
    """

    def __init__(self, nodes: Iterable[Node] = (), version: int = 0, carry_contents: bool = True):
        self.nodes: dict[int, Node] = {}
        for node in sorted(nodes, key=lambda n: n.id):
            if node.id in self.nodes:
                raise SchemaError(f"duplicate node id {node.id}")
            self.nodes[node.id] = node
        for node in self.nodes.values():
            if node.part_of is not None:
                target = self.nodes.get(node.part_of)
                if target is None:
                    raise DanglingReference(f"node {node.id} part_of unknown id {node.part_of}")
                if not node.is_drawer:
                    raise SchemaError(f"part_of is drawer-only (node {node.id})")
        self.version = version
        self.carry_contents = carry_contents
        self._lock = threading.RLock()
        self.close_to: dict[int, int] = {}
        self.contains: dict[int, int] = {}  # object id -> drawer id
        self._rebuild_index()
        self.close_to = self.compute_close_to()
        self.contains = self.compute_contains()

    # -- index -------------------------------------------------------------
    def _rebuild_index(self):
        self._ids = np.array(sorted(self.nodes), dtype=int)
        if len(self._ids):
            self._centroids = np.array([self.nodes[i].centroid for i in self._ids])
            self._tree = cKDTree(self._centroids)
        else:
            self._centroids = np.zeros((0, 3))
            self._tree = None

    def nearest_node(self, position, predicate: Optional[Callable[[Node], bool]] = None,
                     exclude: Iterable[int] = ()) -> tuple[int, float]:
        """Node with minimal centroid distance among those passing ``predicate``."""
        if not self.nodes:
            raise EmptyGraph("graph has no nodes")
        position = np.asarray(position, dtype=float)
        exclude = set(exclude)

        def ok(i):
            nid = int(self._ids[i])
            return nid not in exclude and (predicate is None or predicate(self.nodes[nid]))

        n = len(self._ids)
        k = min(n, len(exclude) + 2)
        while True:
            dists, idx = self._tree.query(position, k=k)
            dists, idx = np.atleast_1d(dists), np.atleast_1d(idx)
            valid = [d for d, i in zip(dists, idx) if i < n and ok(i)]
            if valid and (k == n or dists[-1] > valid[0]):
                break
            if k == n:
                raise NoMatch("no node passes the filter")
            k = min(n, 2 * k)
        # gather everything within rounding of the best tree distance, decide exactly
        radius = valid[0] * (1 + 1e-9) + 1e-12
        cands = [i for i in self._tree.query_ball_point(position, radius) if ok(i)]
        best = min((_distance(self._centroids[i], position), int(self._ids[i])) for i in cands)
        return best[1], best[0]

    # -- edge rules (pure functions of the current poses) ------------------
    def _nearest_other(self, node_id: int) -> Optional[int]:
        if len(self.nodes) < 2:
            return None
        return self.nearest_node(self.nodes[node_id].centroid, exclude=(node_id,))[0]

    def compute_close_to(self, ids: Optional[Iterable[int]] = None) -> dict[int, int]:
        ids = self.nodes if ids is None else ids
        out = {}
        for nid in ids:
            nn = self._nearest_other(nid)
            if nn is not None:
                out[nid] = nn
        return out

    def _containing_drawer(self, node: Node) -> Optional[int]:
        best = None
        for d in self.nodes.values():
            if d.is_drawer and d.box_contains(node.centroid):
                key = (_distance(d.centroid, node.centroid), d.id)
                if best is None or key < best:
                    best = key
        return None if best is None else best[1]

    def compute_contains(self, ids: Optional[Iterable[int]] = None) -> dict[int, int]:
        ids = self.nodes if ids is None else ids
        out = {}
        for nid in ids:
            node = self.nodes[nid]
            if node.kind != OBJECT:
                continue
            drawer = self._containing_drawer(node)
            if drawer is not None:
                out[nid] = drawer
        return out

    # -- queries ------------------------------------------------------------
    def edges(self, kind: Optional[str] = None) -> list[Edge]:
        out = []
        if kind in (None, CLOSE_TO):
            out += [Edge(s, t, CLOSE_TO) for s, t in self.close_to.items()]
        if kind in (None, PART_OF):
            out += [Edge(n.id, n.part_of, PART_OF) for n in self.nodes.values() if n.part_of is not None]
        if kind in (None, CONTAINS):
            out += [Edge(d, o, CONTAINS) for o, d in self.contains.items()]
        return sorted(out)

    def node(self, node_id: int) -> Node:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise UnknownNode(f"unknown node id {node_id}") from None

    def drawer_contents(self, drawer_id: int) -> list[int]:
        if not self.node(drawer_id).is_drawer:
            raise NotADrawer(f"node {drawer_id} is not a drawer")
        return sorted(o for o, d in self.contains.items() if d == drawer_id)

    def neighbors(self, node_id: int) -> list[int]:
        """Undirected close_to neighbourhood."""
        self.node(node_id)
        out = {t for s, t in self.close_to.items() if s == node_id}
        out |= {s for s, t in self.close_to.items() if t == node_id}
        return sorted(out)

    # -- mutation -----------------------------------------------------------
    def apply_pose_update(self, node_id: int, new_pose: RigidPose) -> int:
        """Move one node and repair close_to / contains edges around it; returns the new version.

        A drawer carries the objects it contains along with it.
        """
        with self._lock:
            node = self.node(node_id)
            moved = {node_id}
            if node.is_drawer and self.carry_contents:
                delta = new_pose.compose(node.pose.inverse())
                for obj in self.drawer_contents(node_id):
                    o = self.nodes[obj]
                    o.pose = delta.compose(o.pose)
                    o.update_centroid()
                    moved.add(obj)
            node.pose = new_pose
            node.update_centroid()
            old_close = dict(self.close_to)
            self._rebuild_index()

            # former partners in either direction, plus anything the moved nodes now undercut
            affected = set(moved)
            affected |= {old_close[m] for m in moved if m in old_close}
            affected |= {s for s, t in old_close.items() if t in moved}
            moved_c = np.array([self.nodes[m].centroid for m in sorted(moved)])
            for s, t in old_close.items():
                if s in affected:
                    continue
                c = self.nodes[s].centroid
                current = _distance(c, self.nodes[t].centroid)
                if any(_distance(c, mc) <= current for mc in moved_c):
                    affected.add(s)
            self.close_to.update(self.compute_close_to(sorted(affected)))
            if len(self.nodes) < 2:
                self.close_to.clear()

            if any(self.nodes[m].is_drawer for m in moved):
                self.contains = self.compute_contains()
            else:
                for m in moved:
                    self.contains.pop(m, None)
                self.contains.update(self.compute_contains(sorted(moved)))
            self.version += 1
            return self.version

    def rebuild_edges(self) -> None:
        """Recompute every derived edge from the current poses."""
        with self._lock:
            self._rebuild_index()
            self.close_to = self.compute_close_to()
            self.contains = self.compute_contains()

    # -- persistence ----------------------------------------------------------
    def to_dict(self) -> dict:
        return {"version": self.version, "nodes": [n.to_dict() for n in self.nodes.values()]}

    def snapshot(self) -> SceneGraph:
        """Independent copy for concurrent readers."""
        with self._lock:
            other = copy.copy(self)
            other.nodes = {i: copy.copy(n) for i, n in self.nodes.items()}
            other.close_to = dict(self.close_to)
            other.contains = dict(self.contains)
            other._lock = threading.RLock()
            return other

    def poses(self) -> dict[int, RigidPose]:
        return {i: n.pose for i, n in self.nodes.items()}


def scene_from_dict(data: dict) -> SceneGraph:
    if not isinstance(data, dict) or not isinstance(data.get("nodes"), list):
        raise SchemaError("scene document needs a 'nodes' list")
    nodes = [node_from_dict(d) for d in data["nodes"]]
    return SceneGraph(nodes, version=int(data.get("version", 0)))


def load_scene(path_or_dict) -> SceneGraph:
    if isinstance(path_or_dict, dict):
        return scene_from_dict(path_or_dict)
    try:
        data = json.loads(Path(path_or_dict).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path_or_dict}: invalid JSON ({exc})") from exc
    return scene_from_dict(data)


def save_scene(graph: SceneGraph, path) -> None:
    Path(path).write_text(json.dumps(graph.to_dict()))


def graph_diff(a: SceneGraph, b: SceneGraph, atol: float = 0.0) -> dict:
    """Edges added/removed and nodes whose pose changed going from ``a`` to ``b``."""
    ea, eb = set(a.edges()), set(b.edges())
    moved = []
    for nid in sorted(set(a.nodes) & set(b.nodes)):
        pa, pb = a.nodes[nid].pose, b.nodes[nid].pose
        dt = float(np.linalg.norm(pa.translation - pb.translation))
        dr = rotation_angle(pa.rotation, pb.rotation)
        if dt > atol or dr > atol:
            moved.append({"id": nid, "translation_m": dt, "rotation_deg": float(np.degrees(dr))})
    return {
        "added": [list(e) for e in sorted(eb - ea)],
        "removed": [list(e) for e in sorted(ea - eb)],
        "moved": moved,
        "nodes_added": sorted(set(b.nodes) - set(a.nodes)),
        "nodes_removed": sorted(set(a.nodes) - set(b.nodes)),
    }
