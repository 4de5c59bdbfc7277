"""Per-interaction 6DoF object tracking and online scene-graph updates.

Orientation comes from RANSAC PnP on tracked keypoints lifted through the
camera pose; translation from the hand position plus a grasp offset fixed in
the object frame at contact time ("hand anchor"), or directly from the PnP
pose when the anchor is disabled.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .errors import (AlreadyEnded, NoConsensus, ObjectNotVisible, TooFewPoints, TrackingLost,
                     UnknownNode, UnknownObject)
from .geometry.pnp import (Correspondence, PnPResult, RansacConfig, solve_pnp_ransac_arrays,
                           world_rotation)
from .geometry.transforms import RigidPose, incremental_update
from .interaction import END, START, DetectorConfig, InteractionDetector, IntervalEvent
from .observation import HANDS, Observation, track_id
from .scene_graph import SceneGraph
from .trajectory import TrajectoryRecord

log = logging.getLogger(__name__)

ACTIVE = "active"
LOST = "lost"
ENDED = "ended"


@dataclass(frozen=True)
class TrackerConfig:
    ransac: RansacConfig = RansacConfig()
    min_visible_points: int = 6
    hand_anchor: bool = True
    drawer_axis_constraint: bool = True
    detector: DetectorConfig = DetectorConfig()

    def __post_init__(self):
        if self.min_visible_points < 4:
            raise ValueError("min_visible_points must be at least 4")


@dataclass
class InteractionTrack:
    hand: str
    object_id: int
    start_frame: int
    is_drawer: bool
    keypoints: np.ndarray          # object frame
    track_ids: list[str]
    uv: np.ndarray
    visible: np.ndarray
    delta_obj: np.ndarray          # grasp-to-origin offset, object frame
    start_pose: RigidPose
    axis: Optional[np.ndarray] = None
    index: int = 0
    state: str = ACTIVE
    last_pose: RigidPose = None
    last_rmse: float = 0.0
    opening: float = 0.0
    pose_history: list[tuple[int, RigidPose]] = field(default_factory=list)
    record: TrajectoryRecord = None

    def __post_init__(self):
        self.delta_obj.setflags(write=False)
        self._slot = {tid: i for i, tid in enumerate(self.track_ids)}

    @property
    def correspondences(self) -> list[Correspondence]:
        return [Correspondence(p, uv, bool(v), tid)
                for p, uv, v, tid in zip(self.keypoints, self.uv, self.visible, self.track_ids)]

    def ingest(self, observation: Observation) -> None:
        """Take this frame's 2D keypoint positions; keypoints not reported are invisible."""
        self.visible[:] = False
        for upd in observation.track_updates:
            i = self._slot.get(upd.track_id)
            if i is None or not upd.visible or upd.point2d is None:
                continue
            self.uv[i] = upd.point2d
            self.visible[i] = True


def begin_track(graph: SceneGraph, event: IntervalEvent, observation: Observation,
                config: TrackerConfig = TrackerConfig(), index: int = 0) -> InteractionTrack:
    """Initialise keypoints by projecting the object into the start frame and anchor the hand."""
    if event.kind != START:
        raise ValueError("begin_track needs a start event")
    try:
        node = graph.node(event.object_id)
    except UnknownNode as exc:
        raise UnknownObject(str(exc)) from None
    kp = node.keypoint_local
    ids = [track_id(node.id, int(i)) for i in
           (node.keypoints if node.keypoints is not None else range(len(kp)))]
    uv, z = observation.camera.project_many(node.pose.apply(kp), check_depth=False)
    visible = (z > 0) & observation.camera.intrinsics.in_bounds(uv)
    if int(visible.sum()) < config.min_visible_points:
        raise ObjectNotVisible(f"object {node.id}: {int(visible.sum())} keypoints in view")
    hand_pos = observation.hand(event.hand).position
    if hand_pos is None:
        hand_pos = event.hand_position
    if hand_pos is None:
        raise ObjectNotVisible(f"no {event.hand} hand position at frame {observation.frame_index}")
    pose0 = node.pose
    # object frame origin is the scanned centroid
    delta_obj = pose0.rotation.T @ (pose0.translation - hand_pos)
    axis = node.world_normal if node.is_drawer else None
    track = InteractionTrack(event.hand, node.id, observation.frame_index, node.is_drawer,
                             kp.copy(), ids, uv, visible, np.array(delta_obj), pose0, axis, index)
    track.last_pose = pose0
    track.pose_history.append((observation.frame_index, pose0))
    track.record = TrajectoryRecord(node.id, "estimate", index, event.hand)
    track.record.append(observation.frame_index, observation.timestamp_ns, pose0, "tracked")
    return track


def _solve(track: InteractionTrack, observation: Observation, config: TrackerConfig) -> PnPResult:
    n_vis = int(track.visible.sum())
    if n_vis < config.min_visible_points:
        raise TrackingLost(f"{n_vis} visible keypoints")
    try:
        return solve_pnp_ransac_arrays(track.keypoints[track.visible], track.uv[track.visible],
                                       observation.camera.intrinsics, config.ransac)
    except (NoConsensus, TooFewPoints) as exc:
        raise TrackingLost(str(exc)) from exc


def _hand(track: InteractionTrack, observation: Observation) -> np.ndarray:
    r = observation.hand(track.hand).position
    if r is None:
        raise TrackingLost(f"{track.hand} hand not observed")
    return r


def _mark_lost(track: InteractionTrack, observation: Observation, exc: TrackingLost):
    track.state = LOST
    track.record.append(observation.frame_index, observation.timestamp_ns, track.last_pose, "lost")


def _accept(track: InteractionTrack, observation: Observation, pose: RigidPose) -> RigidPose:
    track.state = ACTIVE
    track.last_pose = pose
    track.pose_history.append((observation.frame_index, pose))
    track.record.append(observation.frame_index, observation.timestamp_ns, pose, "tracked")
    return pose


def step_track(track: InteractionTrack, observation: Observation,
               config: TrackerConfig = TrackerConfig()) -> RigidPose:
    """Object pose at this frame; raises TrackingLost (and freezes the pose) on failure."""
    if track.state == ENDED:
        raise AlreadyEnded(f"track on object {track.object_id} has ended")
    if track.is_drawer and config.drawer_axis_constraint:
        return track_drawer(track, observation, config)
    track.ingest(observation)
    try:
        pnp = _solve(track, observation, config)
        R = world_rotation(pnp, observation.camera.pose)
        if config.hand_anchor:
            t = _hand(track, observation) + R @ track.delta_obj
        else:
            t = observation.camera.pose.compose(pnp.pose_obj_to_cam).translation
    except TrackingLost as exc:
        _mark_lost(track, observation, exc)
        raise
    track.last_rmse = pnp.reprojection_rmse
    return _accept(track, observation, RigidPose.from_matrix(R, t))


def track_drawer(track: InteractionTrack, observation: Observation,
                 config: TrackerConfig = TrackerConfig()) -> RigidPose:
    """Drawer pose with rotation held and translation projected onto the front-normal axis."""
    if track.state == ENDED:
        raise AlreadyEnded(f"track on object {track.object_id} has ended")
    track.ingest(observation)
    R0 = track.start_pose.rotation
    t0 = track.start_pose.translation
    try:
        if config.hand_anchor:
            t = _hand(track, observation) + R0 @ track.delta_obj
            track.last_rmse = 0.0
        else:
            pnp = _solve(track, observation, config)
            t = observation.camera.pose.compose(pnp.pose_obj_to_cam).translation
            track.last_rmse = pnp.reprojection_rmse
    except TrackingLost as exc:
        _mark_lost(track, observation, exc)
        raise
    s = float(track.axis @ (t - t0))
    track.opening = s
    return _accept(track, observation, RigidPose(track.start_pose.quat, t0 + s * track.axis))


def end_track(track: InteractionTrack, graph: SceneGraph, event: Optional[IntervalEvent] = None,
              pose: Optional[RigidPose] = None) -> int:
    """Write the final (or given) pose into the graph and close the track."""
    if track.state == ENDED:
        raise AlreadyEnded(f"track on object {track.object_id} already ended")
    final = track.last_pose if pose is None else pose
    revision = graph.apply_pose_update(track.object_id, final)
    track.state = ENDED
    return revision


@dataclass
class SessionResult:
    graph: SceneGraph
    records: list[TrajectoryRecord]
    events: list[IntervalEvent]
    log: list[dict]
    frames: int = 0


class Session:
    """Frame-by-frame driver: detector decisions, per-hand tracks, graph updates."""

    def __init__(self, graph: SceneGraph, config: TrackerConfig = TrackerConfig()):
        self.graph = graph
        self.config = config
        self.detector = InteractionDetector(graph, config.detector)
        self.tracks: dict[str, InteractionTrack] = {}
        self.records: list[TrajectoryRecord] = []
        self.events: list[IntervalEvent] = []
        self.log: list[dict] = []
        self.frames = 0
        self._next_index = 0

    def _note(self, frame, kind, **kw):
        entry = {"frame": frame, "kind": kind, **kw}
        self.log.append(entry)
        log.info("frame %s: %s %s", frame, kind, kw)

    def push(self, observation: Observation) -> list[IntervalEvent]:
        self.frames += 1
        events = self.detector.push(observation)
        if self.detector.window() is not None:
            self._process(self.detector.last_decided, events)
        return events

    def finish(self) -> SessionResult:
        events = self.detector.finish()
        self.events.extend(events)
        for e in events:
            track = self.tracks.pop(e.hand, None)
            if track is not None:
                end_track(track, self.graph, e)
        return SessionResult(self.graph, self.records, self.events, self.log, self.frames)

    def _process(self, cur: Observation, events: list[IntervalEvent]):
        self.events.extend(events)
        frame = cur.frame_index
        # 1. advance every open track on this frame
        stepped: dict[str, tuple[RigidPose, RigidPose]] = {}
        for hand in HANDS:
            track = self.tracks.get(hand)
            if track is None:
                continue
            previous = track.last_pose
            try:
                pose = step_track(track, cur, self.config)
            except TrackingLost as exc:
                self._note(frame, "track_lost", hand=hand, object_id=track.object_id, reason=str(exc))
                continue
            stepped[hand] = (previous, pose)
        # 2. one incremental graph update per object, best reprojection wins (left on ties)
        by_object: dict[int, list[str]] = {}
        for hand in stepped:
            by_object.setdefault(self.tracks[hand].object_id, []).append(hand)
        for obj, hands in by_object.items():
            hand = min(hands, key=lambda h: (self.tracks[h].last_rmse, HANDS.index(h)))
            previous, pose = stepped[hand]
            node = self.graph.node(obj)
            self.graph.apply_pose_update(obj, incremental_update(node.pose, previous, pose))
        # 3. interaction ends
        ending = [e for e in events if e.kind == END and e.hand in self.tracks]
        for e in ending:
            track = self.tracks[e.hand]
            rivals = [self.tracks[o.hand] for o in ending
                      if o.hand != e.hand and self.tracks[o.hand].object_id == track.object_id]
            best = min([track, *rivals], key=lambda t: (t.last_rmse, HANDS.index(t.hand)))
            end_track(track, self.graph, e, best.last_pose)
            if track.is_drawer:
                self._note(frame, "drawer_opening", object_id=track.object_id, opening=track.opening)
        for e in ending:
            del self.tracks[e.hand]
        # 4. interaction starts
        for e in events:
            if e.kind != START:
                continue
            try:
                track = begin_track(self.graph, e, cur, self.config, self._next_index)
            except (ObjectNotVisible, UnknownObject) as exc:
                self._note(frame, "begin_failed", hand=e.hand, object_id=e.object_id, reason=str(exc))
                continue
            self._next_index += 1
            self.tracks[e.hand] = track
            self.records.append(track.record)


def run_session(graph: SceneGraph, observations: Iterable[Observation],
                config: TrackerConfig = TrackerConfig()) -> SessionResult:
    """Process a whole stream in delayed-online fashion; mutates and returns ``graph``."""
    session = Session(graph, config)
    for obs in observations:
        session.push(obs)
    return session.finish()
