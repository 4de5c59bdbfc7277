"""Synthetic egocentric recordings with exact ground truth.

A scenario scripts pick-and-place (and drawer) actions on a scene; ``generate``
renders the observation stream a perception front end would produce (camera
pose, hand positions and interaction probabilities, 2D keypoint tracks) along
with ground-truth object trajectories.

Scenario file (JSON)::

    {"scene": "scene.json",            # path relative to this file, or an inline scene document
     "frame_rate": 30, "duration": 12.0, "seed": 0,
     "intrinsics": {"fx": 600, "fy": 600, "cx": 704, "cy": 704, "width": 1408, "height": 1408},
     "camera_path": {"mode": "follow", "offset": [-0.55, -0.15, 0.45]},
     "noise": {"pixel_sigma": 1.0, "hand_sigma": 0.005, "p_o_flip_rate": 0.0,
               "track_dropout_rate": 0.0},
     "actions": [
        {"object_id": 2, "hand": "right", "grasp_offset": [0.0, 0.03, 0.05],
         "pick_time": 1.0, "place_time": 4.0,
         "place_pose": {"rotation": [w, x, y, z], "translation": [x, y, z]},
         "regrasp": [{"time": 2.5, "offset": [0.0, -0.02, 0.05]}]},
        {"object_id": 7, "hand": "left", "grasp_offset": [0, 0, 0.04],
         "pick_time": 5.0, "place_time": 7.0, "opening": 0.3}]}

``camera_path`` may also be ``{"mode": "keyframes", "keyframes": [{"time": t,
"position": [...], "look_at": [...]}, ...]}``. Times are seconds from the first
frame and are snapped to the frame grid. ``hand_sigma`` is the RMS of the 3D
hand position error (per-axis standard deviation ``hand_sigma / sqrt(3)``).
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import InvisibleAction, ScenarioError, SchemaError
from .geometry.camera import CameraModel, Intrinsics
from .geometry.transforms import RigidPose, look_at, quat_slerp
from .observation import HANDS, HandState, Observation, TrackUpdate, track_id
from .scene_graph import SceneGraph, load_scene
from .trajectory import TrajectoryRecord

UP = np.array([0.0, 0.0, 1.0])
DEFAULT_INTRINSICS = Intrinsics(600.0, 600.0, 704.0, 704.0, 1408, 1408)
DEFAULT_OFFSET = (-0.55, -0.15, 0.45)

LIFT_FRACTION = 0.25   # share of the motion spent lifting, and again lowering
REACH_TIME = 0.6       # s, hand approach before a pick and retreat after a release
REACH_HEIGHT = 0.25    # m, hover height of the hand above grasp/release points
TRACK_MARGIN = 30      # frames of keypoint tracks emitted around each action


def smoothstep(x):
    x = np.clip(x, 0.0, 1.0)
    return x * x * (3.0 - 2.0 * x)


def ease_out(x):
    # starts at full speed: a grasp turns into motion abruptly
    x = np.clip(x, 0.0, 1.0)
    return 1.0 - (1.0 - x) ** 2


@dataclass(frozen=True)
class NoiseSpec:
    pixel_sigma: float = 0.0
    hand_sigma: float = 0.0
    p_o_flip_rate: float = 0.0
    track_dropout_rate: float = 0.0

    def __post_init__(self):
        if min(self.pixel_sigma, self.hand_sigma, self.p_o_flip_rate, self.track_dropout_rate) < 0:
            raise ScenarioError("noise parameters must be non-negative")
        if self.p_o_flip_rate > 1 or self.track_dropout_rate > 1:
            raise ScenarioError("noise rates must be at most 1")


@dataclass(frozen=True)
class Regrasp:
    time: float
    offset: tuple


@dataclass(frozen=True)
class Action:
    object_id: int
    hand: str
    grasp_offset: tuple
    pick_time: float
    place_time: float
    place_pose: Optional[RigidPose] = None
    opening: Optional[float] = None     # drawers: signed travel along the front normal
    regrasp: tuple = ()
    lift: float = 0.08
    settle: float = 0.5                 # s held still at the place pose before release
    dwell: float = 0.2                  # s between contact and the object starting to move

    def to_dict(self) -> dict:
        d = {"object_id": self.object_id, "hand": self.hand,
             "grasp_offset": [float(v) for v in self.grasp_offset],
             "pick_time": self.pick_time, "place_time": self.place_time,
             "lift": self.lift, "settle": self.settle, "dwell": self.dwell}
        if self.place_pose is not None:
            d["place_pose"] = self.place_pose.to_dict()
        if self.opening is not None:
            d["opening"] = self.opening
        if self.regrasp:
            d["regrasp"] = [{"time": r.time, "offset": [float(v) for v in r.offset]} for r in self.regrasp]
        return d


@dataclass
class Scenario:
    scene: dict
    actions: list
    frame_rate: float = 30.0
    duration: Optional[float] = None
    seed: int = 0
    intrinsics: Intrinsics = DEFAULT_INTRINSICS
    camera_path: dict = field(default_factory=lambda: {"mode": "follow", "offset": list(DEFAULT_OFFSET)})
    noise: NoiseSpec = NoiseSpec()

    def to_dict(self) -> dict:
        return {"scene": self.scene, "frame_rate": self.frame_rate, "duration": self.duration,
                "seed": self.seed, "intrinsics": self.intrinsics.to_dict(),
                "camera_path": self.camera_path, "noise": vars(self.noise).copy(),
                "actions": [a.to_dict() for a in self.actions]}


def _action_from_dict(d: dict) -> Action:
    regrasp = tuple(Regrasp(float(r["time"]), tuple(float(v) for v in r["offset"]))
                    for r in d.get("regrasp") or ())
    place = d.get("place_pose")
    return Action(
        object_id=int(d["object_id"]), hand=str(d["hand"]),
        grasp_offset=tuple(float(v) for v in d["grasp_offset"]),
        pick_time=float(d["pick_time"]), place_time=float(d["place_time"]),
        place_pose=None if place is None else RigidPose.from_dict(place),
        opening=None if d.get("opening") is None else float(d["opening"]),
        regrasp=regrasp, lift=float(d.get("lift", 0.08)), settle=float(d.get("settle", 0.5)),
        dwell=float(d.get("dwell", 0.2)))


def scenario_from_dict(d: dict, base_dir=None) -> Scenario:
    try:
        scene = d["scene"]
        if isinstance(scene, str):
            path = Path(scene)
            if base_dir is not None and not path.is_absolute():
                path = Path(base_dir) / path
            scene = json.loads(path.read_text())
        intr = d.get("intrinsics")
        return Scenario(
            scene=scene,
            actions=[_action_from_dict(a) for a in d.get("actions") or ()],
            frame_rate=float(d.get("frame_rate", 30.0)),
            duration=None if d.get("duration") is None else float(d["duration"]),
            seed=int(d.get("seed", 0)),
            intrinsics=DEFAULT_INTRINSICS if intr is None else Intrinsics.from_dict(intr),
            camera_path=d.get("camera_path") or {"mode": "follow", "offset": list(DEFAULT_OFFSET)},
            noise=NoiseSpec(**(d.get("noise") or {})),
        )
    except (KeyError, TypeError, ValueError, OSError, json.JSONDecodeError) as exc:
        raise ScenarioError(f"bad scenario: {exc!r}") from exc


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: invalid JSON ({exc})") from exc
    return scenario_from_dict(data, path.parent)


def save_scenario(scenario: Scenario, path) -> None:
    Path(path).write_text(json.dumps(scenario.to_dict(), indent=1))


# -- motion ------------------------------------------------------------------

@dataclass
class _Segment:
    """One scripted rigid motion of a node between two poses."""
    node_id: int
    t_a: float
    t_b: float
    start: RigidPose
    end: RigidPose
    lift: float = 0.0
    carrier: Optional["_Segment"] = None   # drawer segment dragging this node along
    drawer: bool = False

    def pose(self, t: float) -> RigidPose:
        if self.carrier is not None:
            c = self.carrier
            return c.pose(t).compose(c.start.inverse()).compose(self.start)
        u = (t - self.t_a) / (self.t_b - self.t_a)
        if u <= 0:
            return self.start
        if u >= 1:
            return self.end
        t0, t1 = self.start.translation, self.end.translation
        if self.drawer:
            w = float(ease_out(u))
            return RigidPose(self.start.quat, t0 + w * (t1 - t0))
        lf = LIFT_FRACTION
        if u < lf:
            w = float(ease_out(u / lf))
            return RigidPose(self.start.quat, t0 + w * self.lift * UP)
        if u < 1 - lf:
            w = float(smoothstep((u - lf) / (1 - 2 * lf)))
            q = quat_slerp(self.start.quat, self.end.quat, w)
            return RigidPose(q, t0 + w * (t1 - t0) + self.lift * UP)
        w = float(smoothstep((u - 1 + lf) / lf))
        return RigidPose(self.end.quat, t1 + (1 - w) * self.lift * UP)


class _Timeline:
    def __init__(self, graph: SceneGraph):
        self.initial = {i: n.pose for i, n in graph.nodes.items()}
        self.segments: dict[int, list[_Segment]] = {i: [] for i in graph.nodes}

    def add(self, seg: _Segment):
        self.segments[seg.node_id].append(seg)

    def pose(self, node_id: int, t: float) -> RigidPose:
        pose = self.initial[node_id]
        for seg in self.segments[node_id]:
            if t < seg.t_a:
                break
            pose = seg.pose(t) if t <= seg.t_b else seg.end
        return pose


@dataclass
class SimResult:
    scenario: Scenario
    observations: list
    ground_truth: list          # TrajectoryRecord per action (status "gt")
    final_poses: dict           # node id -> RigidPose at the last frame
    action_frames: list         # (pick frame, release frame) per action

    def final_records(self, frame: int, timestamp_ns: int) -> list[TrajectoryRecord]:
        out = []
        for nid in sorted(self.final_poses):
            rec = TrajectoryRecord(nid, "ground_truth", -1, None)
            rec.append(frame, timestamp_ns, self.final_poses[nid], "final")
            out.append(rec)
        return out

    def gt_records(self) -> list[TrajectoryRecord]:
        """Ground-truth trajectories followed by one ``final`` line per node."""
        last = self.observations[-1]
        return list(self.ground_truth) + self.final_records(last.frame_index, last.timestamp_ns)


class _Plan:
    """Validated, time-resolved form of a scenario."""

    def __init__(self, scenario: Scenario):
        self.sc = scenario
        self.graph = load_scene(copy.deepcopy(scenario.scene))
        self.fps = float(scenario.frame_rate)
        if self.fps <= 0:
            raise ScenarioError("frame_rate must be positive")
        self.actions = [self._snap(a) for a in scenario.actions]
        self._validate()
        self.timeline = _Timeline(self.graph)
        self._build_segments()
        end = max([a.place_time for a in self.actions], default=0.0) + 1.0
        duration = scenario.duration if scenario.duration is not None else end
        self.n_frames = int(round(duration * self.fps)) + 1

    def _snap(self, a: Action) -> Action:
        snap = lambda t: round(t * self.fps) / self.fps
        return replace(a, pick_time=snap(a.pick_time), place_time=snap(a.place_time),
                       regrasp=tuple(Regrasp(snap(r.time), r.offset) for r in a.regrasp))

    def frame(self, t: float) -> int:
        return int(round(t * self.fps))

    def time(self, k: int) -> float:
        return k / self.fps

    def _validate(self):
        g = self.graph
        for i, a in enumerate(self.actions):
            if a.object_id not in g.nodes:
                raise ScenarioError(f"action {i}: unknown object {a.object_id}")
            if a.hand not in HANDS:
                raise ScenarioError(f"action {i}: unknown hand {a.hand!r}")
            if min(a.settle, a.dwell, a.lift) < 0:
                raise ScenarioError(f"action {i}: negative settle, dwell or lift")
            if not a.pick_time + a.dwell < a.place_time - a.settle:
                raise ScenarioError(f"action {i}: no time left to move between grasp dwell and settle")
            if a.pick_time < 0:
                raise ScenarioError(f"action {i}: negative pick_time")
            node = g.nodes[a.object_id]
            if node.is_drawer:
                if a.opening is None:
                    raise ScenarioError(f"action {i}: drawer actions need 'opening'")
            elif a.place_pose is None:
                raise ScenarioError(f"action {i}: object actions need 'place_pose'")
            for r in a.regrasp:
                if not a.pick_time < r.time < a.place_time:
                    raise ScenarioError(f"action {i}: regrasp outside the action")
        for i, a in enumerate(self.actions):
            for j, b in enumerate(self.actions[:i]):
                overlap = a.pick_time <= b.place_time and b.pick_time <= a.place_time
                if not overlap:
                    continue
                if a.hand == b.hand:
                    raise ScenarioError(f"actions {j} and {i} overlap on the {a.hand} hand")
                if a.object_id == b.object_id and not _same_motion(a, b):
                    raise ScenarioError(f"actions {j} and {i} move object {a.object_id} differently")

    def _build_segments(self):
        """Resolve start poses (and drawer contents) in pick order."""
        g = self.graph.snapshot()
        order = sorted(range(len(self.actions)), key=lambda i: (self.actions[i].pick_time, i))
        pending: list[_Segment] = []
        done: dict[int, _Segment] = {}
        self.segment_of: dict[int, _Segment] = {}
        for i in order:
            a = self.actions[i]
            # commit everything released before this pick
            pending.sort(key=lambda s: s.t_b)
            while pending and pending[0].t_b < a.pick_time:
                seg = pending.pop(0)
                g.apply_pose_update(seg.node_id, seg.end)
            twin = next((done[j] for j in done if _same_motion(self.actions[j], a)
                         and self.actions[j].object_id == a.object_id), None)
            if twin is not None:
                self.segment_of[i] = twin
                done[i] = twin
                continue
            node = g.nodes[a.object_id]
            start = node.pose
            t_a, t_b = a.pick_time + a.dwell, a.place_time - a.settle
            if node.is_drawer:
                end = RigidPose(start.quat, start.translation + a.opening * node.world_normal)
                seg = _Segment(node.id, t_a, t_b, start, end, drawer=True)
                for obj in g.drawer_contents(node.id):
                    o = g.nodes[obj]
                    rider = _Segment(obj, t_a, t_b, o.pose,
                                     end.compose(start.inverse()).compose(o.pose), carrier=seg)
                    self.timeline.add(rider)
                    pending.append(rider)
            else:
                seg = _Segment(node.id, t_a, t_b, start, a.place_pose, lift=a.lift)
            self.timeline.add(seg)
            pending.append(seg)
            self.segment_of[i] = seg
            done[i] = seg
        for segs in self.timeline.segments.values():
            segs.sort(key=lambda s: s.t_a)

    # -- per-time queries ---------------------------------------------------
    def object_pose(self, node_id: int, t: float) -> RigidPose:
        return self.timeline.pose(node_id, t)

    def grasp_offset(self, a: Action, t: float) -> np.ndarray:
        g = np.asarray(a.grasp_offset, dtype=float)
        for r in sorted(a.regrasp, key=lambda r: r.time):
            if t >= r.time:
                g = np.asarray(r.offset, dtype=float)
        return g

    def grasp_point(self, i: int, t: float) -> np.ndarray:
        a = self.actions[i]
        return self.object_pose(a.object_id, t).apply(self.grasp_offset(a, t))

    def hand_position(self, hand: str, t: float) -> Optional[np.ndarray]:
        idx = sorted((i for i, a in enumerate(self.actions) if a.hand == hand),
                     key=lambda i: self.actions[i].pick_time)
        if not idx:
            return None
        hover = REACH_HEIGHT * UP
        prev = None
        for i in idx:
            a = self.actions[i]
            if t < a.pick_time:
                q = self.grasp_point(i, a.pick_time)
                if prev is None:
                    w = smoothstep((t - (a.pick_time - REACH_TIME)) / REACH_TIME)
                    return q + (1 - w) * hover
                return _transit(prev, self.grasp_point(prev, self.actions[prev].place_time),
                                self.actions[prev].place_time, q, a.pick_time, t)
            if t <= a.place_time:
                return self.grasp_point(i, t)
            prev = i
        p = self.grasp_point(prev, self.actions[prev].place_time)
        w = smoothstep((t - self.actions[prev].place_time) / REACH_TIME)
        return p + w * hover

    def interacting(self, hand: str, t: float) -> bool:
        return any(a.hand == hand and a.pick_time <= t <= a.place_time for a in self.actions)

    def focus(self, t: float) -> np.ndarray:
        active = [a for a in self.actions if a.pick_time <= t <= a.place_time]
        if active:
            return np.mean([self.object_pose(a.object_id, t).apply(np.zeros(3)) for a in active], axis=0)
        if not self.actions:
            return np.mean([n.centroid for n in self.graph.nodes.values()], axis=0)
        before = [a for a in self.actions if a.place_time < t]
        after = [a for a in self.actions if a.pick_time > t]
        if not before:
            a = min(after, key=lambda a: a.pick_time)
            return self.object_pose(a.object_id, a.pick_time).translation
        a0 = max(before, key=lambda a: a.place_time)
        p0 = self.object_pose(a0.object_id, a0.place_time).translation
        if not after:
            return p0
        a1 = min(after, key=lambda a: a.pick_time)
        p1 = self.object_pose(a1.object_id, a1.pick_time).translation
        w = smoothstep((t - a0.place_time) / (a1.pick_time - a0.place_time))
        return p0 + w * (p1 - p0)

    def camera_pose(self, t: float) -> RigidPose:
        path = self.sc.camera_path
        mode = path.get("mode", "follow")
        if mode == "follow":
            target = self.focus(t)
            offset = np.asarray(path.get("offset", DEFAULT_OFFSET), dtype=float)
            sway = 0.02 * np.array([np.sin(1.3 * t), np.sin(0.9 * t + 1.0), 0.5 * np.sin(1.7 * t)])
            return look_at(target + offset + sway, target)
        if mode == "keyframes":
            keys = sorted(path["keyframes"], key=lambda k: k["time"])
            times = [float(k["time"]) for k in keys]
            j = int(np.searchsorted(times, t, side="right"))
            if j == 0 or j == len(keys):
                k = keys[0] if j == 0 else keys[-1]
                return look_at(k["position"], k["look_at"])
            k0, k1 = keys[j - 1], keys[j]
            w = smoothstep((t - times[j - 1]) / (times[j] - times[j - 1]))
            pos = (1 - w) * np.asarray(k0["position"], float) + w * np.asarray(k1["position"], float)
            tgt = (1 - w) * np.asarray(k0["look_at"], float) + w * np.asarray(k1["look_at"], float)
            return look_at(pos, tgt)
        raise ScenarioError(f"unknown camera_path mode {mode!r}")


def _same_motion(a: Action, b: Action) -> bool:
    return (a.object_id == b.object_id and a.pick_time == b.pick_time and a.place_time == b.place_time
            and a.place_pose == b.place_pose and a.opening == b.opening and a.settle == b.settle
            and a.lift == b.lift and a.dwell == b.dwell)


def _transit(prev_i, p, t_release, q, t_pick, t):
    """Hand path from a release point to the next grasp point: retreat, travel, approach."""
    hover = REACH_HEIGHT * UP
    gap = t_pick - t_release
    if gap < 2 * REACH_TIME:
        w = smoothstep((t - t_release) / gap)
        return p + w * (q - p) + 4 * w * (1 - w) * hover
    if t <= t_release + REACH_TIME:
        return p + smoothstep((t - t_release) / REACH_TIME) * hover
    if t >= t_pick - REACH_TIME:
        return q + (1 - smoothstep((t - t_pick + REACH_TIME) / REACH_TIME)) * hover
    w = smoothstep((t - t_release - REACH_TIME) / (gap - 2 * REACH_TIME))
    return p + hover + w * (q - p)


def generate(scenario: Scenario, min_visible: int = 6) -> SimResult:
    """Render a scenario into an observation stream plus ground truth."""
    plan = _Plan(scenario)
    intr = scenario.intrinsics
    noise = scenario.noise
    rng = np.random.default_rng(scenario.seed)
    nodes = plan.graph.nodes
    keypoints = {i: (n.keypoint_local,
                     n.keypoints if n.keypoints is not None else np.arange(len(n.local_points)))
                 for i, n in nodes.items()}
    frames = [(plan.frame(a.pick_time), plan.frame(a.place_time)) for a in plan.actions]
    hand_std = noise.hand_sigma / np.sqrt(3.0)

    observations = []
    for k in range(plan.n_frames):
        t = plan.time(k)
        ts = int(round(k * 1e9 / plan.fps))
        camera = CameraModel(intr, plan.camera_pose(t))
        hands = {}
        for h in HANDS:
            jitter = rng.normal(0.0, 1.0, 3) * hand_std
            flip = rng.random() < noise.p_o_flip_rate
            pos = plan.hand_position(h, t)
            if pos is None:
                continue
            p_o = 1.0 if plan.interacting(h, t) else 0.0
            if flip:
                p_o = 1.0 - p_o
            hands[h] = HandState(pos + jitter, p_o)
        updates = []
        in_play = sorted({a.object_id for a, (kp, kr) in zip(plan.actions, frames)
                          if kp - TRACK_MARGIN <= k <= kr + TRACK_MARGIN})
        for a, (kp, kr) in zip(plan.actions, frames):
            if kp <= k <= kr:
                pts = plan.object_pose(a.object_id, t).apply(keypoints[a.object_id][0])
                uv, z = camera.project_many(pts, check_depth=False)
                n_vis = int(np.sum((z > 0) & intr.in_bounds(uv)))
                if n_vis < min_visible:
                    raise InvisibleAction(f"object {a.object_id} has {n_vis} keypoints in view at frame {k}")
        for obj in in_play:
            local, ids = keypoints[obj]
            uv, z = camera.project_many(plan.object_pose(obj, t).apply(local), check_depth=False)
            drop = rng.random(len(ids)) < noise.track_dropout_rate
            uv = uv + rng.normal(0.0, 1.0, uv.shape) * noise.pixel_sigma
            vis = (z > 0) & intr.in_bounds(uv) & ~drop
            for j, kp_idx in enumerate(ids):
                tid = track_id(obj, int(kp_idx))
                updates.append(TrackUpdate(tid, uv[j].copy(), True) if vis[j] else TrackUpdate(tid, None, False))
        observations.append(Observation(k, ts, camera, hands, tuple(updates)))

    ground_truth = []
    last = plan.n_frames - 1
    for i, (a, (kp, kr)) in enumerate(zip(plan.actions, frames)):
        rec = TrajectoryRecord(a.object_id, "ground_truth", i, a.hand)
        for k in range(max(0, kp - TRACK_MARGIN), min(last, kr + TRACK_MARGIN) + 1):
            rec.append(k, observations[k].timestamp_ns, plan.object_pose(a.object_id, plan.time(k)), "gt")
        ground_truth.append(rec)
    t_end = plan.time(last)
    final = {i: plan.object_pose(i, t_end) for i in sorted(nodes)}
    return SimResult(scenario, observations, ground_truth, final, frames)


def final_graph(scenario: Scenario, result: SimResult) -> SceneGraph:
    """Scene graph rebuilt from scratch at the ground-truth final poses."""
    g = load_scene(copy.deepcopy(scenario.scene))
    for i, pose in result.final_poses.items():
        g.nodes[i].pose = pose
        g.nodes[i].update_centroid()
    g.rebuild_edges()
    return g


def make_ablation_pair(scenario: Scenario, shift=(0.0, 0.05, 0.0), action: int = 0,
                       at: Optional[float] = None) -> tuple[Scenario, Scenario]:
    """The scenario with a mid-action regrasp (grasp point shifted by ``shift``, object frame) and without."""
    if not 0 <= action < len(scenario.actions):
        raise ScenarioError(f"no action {action}")
    a = scenario.actions[action]
    plain = replace(a, regrasp=())
    when = at if at is not None else 0.5 * (a.pick_time + a.dwell + a.place_time - a.settle)
    moved = tuple(float(g + s) for g, s in zip(a.grasp_offset, shift))
    shifted = replace(a, regrasp=(Regrasp(when, moved),))
    base = [*scenario.actions]
    base[action] = plain
    other = [*scenario.actions]
    other[action] = shifted
    return replace(scenario, actions=other), replace(scenario, actions=base)


# -- random scenes and scenarios ---------------------------------------------

def box_points(rng, size, n: int) -> np.ndarray:
    """Points on the surface of an axis-aligned box centred at the origin."""
    size = np.asarray(size, dtype=float)
    face = rng.integers(0, 6, n)
    pts = (rng.random((n, 3)) - 0.5) * size
    axis = face % 3
    sign = np.where(face < 3, -0.5, 0.5)
    pts[np.arange(n), axis] = sign * size[axis]
    return pts


def random_scene(rng, n_objects: int = 6, spacing: float = 0.4, area: float = 1.6) -> dict:
    """Tabletop-style scene of box-shaped objects at least ``spacing`` apart."""
    centres = []
    while len(centres) < n_objects:
        c = np.append(rng.uniform(-area / 2, area / 2, 2), 0.0)
        if all(np.linalg.norm(c - o) >= spacing for o in centres):
            centres.append(c)
    nodes = []
    for i, c in enumerate(centres):
        size = rng.uniform(0.08, 0.22, 3)
        c = c + np.array([0.0, 0.0, 0.75 + size[2] / 2])
        pts = box_points(rng, size, 300) + c
        n_kp = int(rng.integers(20, 101))
        kp = np.sort(rng.choice(len(pts), n_kp, replace=False))
        nodes.append({"id": i, "kind": "object", "label": f"box{i}", "points": pts.tolist(),
                      "keypoints": kp.tolist()})
    return {"version": 0, "nodes": nodes}


def _free_spot(rng, occupied, spacing, area, z):
    for _ in range(1000):
        c = np.append(rng.uniform(-area / 2, area / 2, 2), z)
        if all(np.linalg.norm(c[:2] - o[:2]) >= spacing for o in occupied):
            return c
    raise ScenarioError("no free placement spot")


def random_rotation(rng, max_yaw=np.pi / 2, max_tilt=np.radians(20)) -> RigidPose:
    yaw = rng.uniform(-max_yaw, max_yaw)
    axis = np.append(rng.normal(size=2), 0.0)
    tilt = rng.uniform(0, max_tilt) * axis / np.linalg.norm(axis)
    return RigidPose.from_rotvec([0.0, 0.0, yaw]).compose(RigidPose.from_rotvec(tilt))


def random_scenario(seed: int, n_interactions: Optional[int] = None, duration: Optional[float] = None,
                    noise: NoiseSpec = NoiseSpec(), n_objects: int = 6) -> Scenario:
    """Sequential pick-and-place actions alternating (at random) between the hands."""
    rng = np.random.default_rng(seed)
    scene = random_scene(rng, n_objects)
    graph = load_scene(copy.deepcopy(scene))
    n = int(n_interactions if n_interactions is not None else rng.integers(1, 6))
    duration = float(duration if duration is not None else rng.uniform(10.0, 20.0))
    slot = (duration - 1.0) / n
    if slot < 2.0:
        raise ScenarioError("too many interactions for the duration")
    poses = {i: nd.pose for i, nd in graph.nodes.items()}
    sizes = {i: np.ptp(nd.local_points, axis=0) for i, nd in graph.nodes.items()}
    actions = []
    for j in range(n):
        obj = int(rng.integers(0, n_objects))
        hand = HANDS[int(rng.integers(0, 2))]
        t0 = 0.6 + j * slot
        length = min(slot - 0.6, rng.uniform(2.0, 4.0))
        length = max(length, 1.4)
        # grasp on the upper half so the hand recedes from the centroid while lifting
        g = np.array([rng.uniform(-0.03, 0.03), rng.uniform(-0.03, 0.03), min(sizes[obj][2] / 2, 0.06)])
        others = [p.translation for i, p in poses.items() if i != obj]
        spot = _free_spot(rng, others, 0.4, 1.6, poses[obj].translation[2])
        place = RigidPose(random_rotation(rng).quat, spot)
        actions.append(Action(obj, hand, tuple(g), round(t0, 4), round(t0 + length, 4), place))
        poses[obj] = place
    return Scenario(scene, actions, 30.0, duration, seed, noise=noise)


def drawer_scene(seed: int = 0) -> dict:
    """A cabinet with one drawer (front facing -x) and a mug on the table in front of it."""
    rng = np.random.default_rng(seed)
    cabinet = box_points(rng, (0.5, 0.6, 0.8), 400) + [1.2, 0.0, 0.4]
    front = box_points(rng, (0.02, 0.4, 0.15), 200) + [0.94, 0.0, 0.575]
    mug = box_points(rng, (0.08, 0.08, 0.1), 200) + [0.35, 0.45, 0.8]
    nodes = [
        {"id": 0, "kind": "object", "label": "cabinet", "points": cabinet.tolist(),
         "keypoints": list(range(0, 400, 8))},
        {"id": 1, "kind": "drawer", "label": "drawer", "points": front.tolist(),
         "keypoints": list(range(0, 200, 5)), "part_of": 0,
         "content_box": {"min": [0.96, -0.18, 0.45], "max": [1.38, 0.18, 0.64]},
         "front_normal": [-1.0, 0.0, 0.0]},
        {"id": 2, "kind": "object", "label": "mug", "points": mug.tolist(),
         "keypoints": list(range(0, 200, 5))},
    ]
    return {"version": 0, "nodes": nodes}


def drawer_scenario(noise: NoiseSpec = NoiseSpec(), seed: int = 0, store_object: bool = True,
                    opening: float = 0.3) -> Scenario:
    """Open the drawer, optionally drop the mug in, then push the drawer shut."""
    scene = drawer_scene(seed)
    pull = Action(1, "left", (0.0, 0.0, 0.04), 0.6, 3.0, opening=opening)
    actions = [pull]
    t = 3.6
    if store_object:
        inside = np.array([0.87 - opening + 0.3, 0.0, 0.55])
        place = RigidPose.from_rotvec([0.0, 0.0, 0.4], inside)
        actions.append(Action(2, "right", (0.0, 0.0, 0.05), t, t + 3.0, place))
        t += 3.6
    actions.append(Action(1, "left", (0.0, 0.0, 0.04), t, t + 2.4, opening=-opening))
    return Scenario(scene, actions, 30.0, t + 3.4, seed, noise=noise)
