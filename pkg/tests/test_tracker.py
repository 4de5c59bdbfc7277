import copy
from dataclasses import replace

import numpy as np
import pytest

from dsgtrack.errors import AlreadyEnded, ObjectNotVisible, TrackingLost, UnknownObject
from dsgtrack.geometry.camera import CameraModel
from dsgtrack.geometry.transforms import RigidPose, look_at, pose_error
from dsgtrack.interaction import END, START, IntervalEvent
from dsgtrack.observation import HandState, Observation, TrackUpdate, track_id
from dsgtrack.scene_graph import load_scene
from dsgtrack.sim import (Action, NoiseSpec, Scenario, drawer_scenario, final_graph, generate,
                          random_scenario, random_scene)
from dsgtrack.tracker import (ENDED, LOST, Session, TrackerConfig, begin_track, end_track,
                              run_session, step_track, track_drawer)
from helpers import INTR


def cube_scene():
    g = np.linspace(-0.05, 0.05, 3)
    pts = np.array([[x, y, z] for x in g for y in g for z in g]) + [1.0, 0.0, 0.0]
    drawer = pts + [1.0, 1.0, 0.0]
    return {"version": 0, "nodes": [
        {"id": 0, "kind": "object", "label": "cube", "points": pts.tolist()},
        {"id": 1, "kind": "drawer", "label": "drawer", "points": drawer.tolist(),
         "content_box": {"min": [1.9, 0.9, -0.2], "max": [2.3, 1.1, 0.2]}, "front_normal": [-1.0, 0.0, 0.0]},
    ]}


def view(graph, obj_pose_by_id, hand_pos, hand="right", frame=0, cam_target=(1.0, 0.0, 0.0)):
    """Noiseless observation of the given node poses from a camera 0.8 m back."""
    cam = CameraModel(INTR, look_at(np.asarray(cam_target) + [-0.8, 0.1, 0.3], cam_target))
    updates = []
    for nid, pose in obj_pose_by_id.items():
        node = graph.nodes[nid]
        uv, _ = cam.project_many(pose.apply(node.keypoint_local))
        updates += [TrackUpdate(track_id(nid, j), uv[j]) for j in range(len(uv))]
    hands = {hand: HandState(None if hand_pos is None else np.asarray(hand_pos, float), 1.0)}
    return Observation(frame, frame * 33_000_000, cam, hands, tuple(updates))


def start(hand="right", obj=0, frame=0):
    return IntervalEvent(START, hand, frame, frame * 33_000_000, obj)


def test_grasp_offset_in_object_frame():
    g = load_scene(cube_scene())
    pose0 = RigidPose.from_rotvec([0, 0, np.pi / 2], [1.0, 0.0, 0.0])
    g.apply_pose_update(0, pose0)
    tr = begin_track(g, start(), view(g, {0: pose0}, [1.0, 0.1, 0.0]))
    assert np.allclose(tr.delta_obj, [-0.1, 0.0, 0.0])
    with pytest.raises(ValueError):
        tr.delta_obj[0] = 1.0
    # translation is hand plus the offset rotated by the current orientation
    pose1 = RigidPose.from_rotvec([0, 0, np.pi], [1.0, 0.0, 0.1])
    hand1 = pose1.translation - pose1.rotation @ tr.delta_obj
    est = step_track(tr, view(g, {0: pose1}, hand1, frame=1))
    t_err, r_err = pose_error(est, pose1)
    assert t_err < 1e-9 and r_err < 1e-9


def test_anchor_off_uses_pnp_translation_with_same_rotation():
    g = load_scene(cube_scene())
    pose1 = RigidPose.from_rotvec([0.1, -0.2, 0.3], [1.02, 0.01, 0.05])
    on_off = []
    for anchor in (True, False):
        cfg = TrackerConfig(hand_anchor=anchor)
        tr = begin_track(g, start(), view(g, {0: g.nodes[0].pose}, [1.0, 0.0, 0.06]), cfg)
        # hand kept still: anchoring will be wrong, PnP will not
        on_off.append(step_track(tr, view(g, {0: pose1}, [1.0, 0.0, 0.06], frame=1), cfg))
    assert pose_error(on_off[0], on_off[1])[1] < 1e-12
    assert pose_error(on_off[1], pose1)[0] < 1e-9
    assert pose_error(on_off[0], pose1)[0] > 0.01


def test_drawer_projection_onto_front_normal():
    g = load_scene(cube_scene())
    d0 = g.nodes[1].pose
    hand0 = d0.translation + [-0.05, 0.0, 0.0]
    tr = begin_track(g, start(obj=1), view(g, {1: d0}, hand0, cam_target=d0.translation))
    est = track_drawer(tr, view(g, {1: d0}, hand0 + [-0.2, 0.0, 0.0], frame=1, cam_target=d0.translation))
    assert tr.opening == pytest.approx(0.2)
    assert np.allclose(est.translation, d0.translation + [-0.2, 0, 0]) and est.quat.tolist() == d0.quat.tolist()
    est = track_drawer(tr, view(g, {1: d0}, hand0 + [0.0, 0.2, 0.1], frame=2, cam_target=d0.translation))
    assert tr.opening == pytest.approx(0.0)
    assert np.allclose(est.translation, d0.translation)


def test_lost_track_freezes_pose():
    g = load_scene(cube_scene())
    tr = begin_track(g, start(), view(g, {0: g.nodes[0].pose}, [1.0, 0.0, 0.06]))
    blind = replace(view(g, {}, [1.0, 0.0, 0.2], frame=1), track_updates=())
    with pytest.raises(TrackingLost):
        step_track(tr, blind)
    assert tr.state == LOST and tr.last_pose == g.nodes[0].pose
    assert tr.record.status == ["tracked", "lost"]
    # the hand vanishing also loses the anchored track
    with pytest.raises(TrackingLost):
        step_track(tr, view(g, {0: g.nodes[0].pose}, None, frame=2))
    # and recovery resumes tracking
    step_track(tr, view(g, {0: g.nodes[0].pose}, [1.0, 0.0, 0.06], frame=3))
    assert tr.record.status[-1] == "tracked" and tr.state != LOST


def test_begin_track_failures():
    g = load_scene(cube_scene())
    far = replace(view(g, {0: g.nodes[0].pose}, [1.0, 0.0, 0.06]), camera=CameraModel(INTR, look_at([1.0, 0.0, 2.0], [1.0, 0.0, 3.0])))
    with pytest.raises(ObjectNotVisible):
        begin_track(g, start(), far)
    with pytest.raises(UnknownObject):
        begin_track(g, start(obj=7), view(g, {0: g.nodes[0].pose}, [1.0, 0.0, 0.06]))
    with pytest.raises(ObjectNotVisible):
        begin_track(g, start(), view(g, {0: g.nodes[0].pose}, None))


def test_end_track_writes_graph_once():
    g = load_scene(cube_scene())
    tr = begin_track(g, start(), view(g, {0: g.nodes[0].pose}, [1.0, 0.0, 0.06]))
    moved = RigidPose(translation=[1.0, 0.0, 0.3])
    v = g.version
    assert end_track(tr, g, pose=moved) == v + 1
    assert tr.state == ENDED and g.nodes[0].pose == moved
    with pytest.raises(AlreadyEnded):
        end_track(tr, g)
    with pytest.raises(AlreadyEnded):
        step_track(tr, view(g, {0: moved}, [1.0, 0.0, 0.36], frame=1))


def test_empty_stream():
    g = load_scene(cube_scene())
    before = copy.deepcopy(g.edges())
    res = run_session(g, [])
    assert res.records == [] and res.events == [] and res.frames == 0 and g.edges() == before


def _errors(result, sim):
    gt = {(r.object_id, f): p for r in sim.ground_truth for f, p in zip(r.frames, r.poses)}
    worst = (0.0, 0.0)
    for rec in result.records:
        for f, p in zip(rec.frames, rec.poses):
            t, r = pose_error(p, gt[(rec.object_id, f)])
            worst = (max(worst[0], t), max(worst[1], r))
    return worst


def two_hand_scenario(same_object=False):
    rng = np.random.default_rng(3)
    scene = random_scene(rng, n_objects=3)
    g = load_scene(copy.deepcopy(scene))
    p0, p1 = g.nodes[0].pose, g.nodes[1].pose
    place0 = RigidPose.from_rotvec([0, 0, 0.5], p0.translation + [0.1, -0.1, 0.0])
    place1 = RigidPose.from_rotvec([0, 0, -0.4], p1.translation + [-0.1, 0.1, 0.0])
    left = Action(0, "left", (0.0, 0.02, 0.04), 0.6, 3.6, place0)
    right = (Action(0, "right", (0.0, -0.02, 0.04), 0.6, 3.6, place0) if same_object
             else Action(1, "right", (0.01, 0.0, 0.04), 1.2, 4.2, place1))
    return Scenario(scene, [left, right], duration=6.0,
                    camera_path={"mode": "keyframes", "keyframes": [
                        {"time": 0, "position": [-1.2, -0.3, 1.6], "look_at": [0.0, 0.0, 0.8]}]})


@pytest.mark.parametrize("same_object", [False, True])
def test_two_hands_noiseless(same_object):
    sc = two_hand_scenario(same_object)
    sim = generate(sc)
    g = load_scene(copy.deepcopy(sc.scene))
    res = run_session(g, sim.observations)
    assert sorted((e.hand, e.kind) for e in res.events) == sorted(
        [("left", START), ("left", END), ("right", START), ("right", END)])
    t, r = _errors(res, sim)
    assert t < 1e-6 and np.degrees(r) < 1e-6
    ref = final_graph(sc, sim)
    assert set(g.edges()) == set(ref.edges())
    assert all(pose_error(g.nodes[i].pose, ref.nodes[i].pose)[0] < 1e-6 for i in g.nodes)


def test_graph_untouched_while_track_is_lost():
    sc = random_scenario(5, n_interactions=1, duration=8.0)
    sim = generate(sc)
    g = load_scene(copy.deepcopy(sc.scene))
    kp, kr = sim.action_frames[0]
    obj = sc.actions[0].object_id
    blind_from = (kp + kr) // 2
    obs = [replace(o, track_updates=()) if blind_from <= o.frame_index <= kr else o for o in sim.observations]
    session = Session(g)
    frozen = None
    for o in obs:
        session.push(o)
        d = session.detector.last_decided
        if d is not None and blind_from <= d.frame_index < kr - 10:
            if frozen is None:
                frozen = g.nodes[obj].pose
            assert g.nodes[obj].pose == frozen
    res = session.finish()
    assert any(e["kind"] == "track_lost" for e in res.log)
    assert "lost" in res.records[0].status


def test_session_is_deterministic():
    sc = random_scenario(2, noise=NoiseSpec(pixel_sigma=1.0, hand_sigma=0.005))
    obs = generate(sc).observations
    outs = []
    for _ in range(2):
        res = run_session(load_scene(copy.deepcopy(sc.scene)), obs)
        outs.append([line for r in res.records for line in r.lines()])
    assert outs[0] == outs[1]


def test_drawer_session_recovers_opening_and_contents():
    sc = drawer_scenario()
    sim = generate(sc)
    g = load_scene(copy.deepcopy(sc.scene))
    res = run_session(g, sim.observations)
    openings = [e["opening"] for e in res.log if e["kind"] == "drawer_opening"]
    assert openings == [pytest.approx(0.3, abs=1e-9), pytest.approx(-0.3, abs=1e-9)]
    assert g.drawer_contents(1) == [2]


def test_config_validation():
    with pytest.raises(ValueError):
        TrackerConfig(min_visible_points=3)
