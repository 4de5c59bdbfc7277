import json

import numpy as np
import pytest

from dsgtrack.errors import OutOfOrder, SchemaError
from dsgtrack.observation import HandState, Observation, iter_stream, read_stream, write_stream
from dsgtrack.sim import NoiseSpec, drawer_scenario, generate
from helpers import scripted_stream


def test_stream_round_trip(tmp_path):
    obs = generate(drawer_scenario(NoiseSpec(pixel_sigma=1.0, hand_sigma=0.003))).observations[:40]
    write_stream(tmp_path / "s.jsonl", obs)
    back = read_stream(tmp_path / "s.jsonl")
    assert [o.to_dict() for o in back] == [o.to_dict() for o in obs]


def test_absent_hand_has_no_interaction_evidence():
    d = scripted_stream([((0, 0, 0), 0.9)])[0].to_dict()
    d["hands"]["right"] = {"position": None, "p_o": 0.9}
    obs = Observation.from_dict(d)
    assert obs.hand("right").p_o == 0.0 and obs.hand("right").position is None
    assert obs.hand("left") == HandState()


def test_missing_uv_is_invisible():
    d = scripted_stream([((0, 0, 0), 0.9)])[0].to_dict()
    d["tracks"] = [{"id": "1:0", "uv": None, "visible": True}, {"id": "1:1", "uv": [3, 4]}]
    obs = Observation.from_dict(d)
    assert [u.visible for u in obs.track_updates] == [False, True]


def _lines(obs):
    return [json.dumps(o.to_dict()) for o in obs]


@pytest.mark.parametrize("swap", ["frame", "timestamp_ns"])
def test_out_of_order_rejected(tmp_path, swap):
    obs = scripted_stream([((0, 0, 0), 0.0)] * 3)
    rows = [o.to_dict() for o in obs]
    rows[2][swap] = rows[1][swap]
    (tmp_path / "s.jsonl").write_text("\n".join(json.dumps(r) for r in rows))
    with pytest.raises(OutOfOrder):
        read_stream(tmp_path / "s.jsonl")


@pytest.mark.parametrize("mutate", [
    lambda d: d.pop("camera"),
    lambda d: d["hands"].update(middle={"position": None, "p_o": 0}),
    lambda d: d["hands"]["right"].update(p_o=1.5),
    lambda d: d["hands"]["right"].update(position=[0, 0, float("nan")]),
    lambda d: d["camera"]["intrinsics"].update(fx=-1),
    lambda d: d["camera"]["pose"].update(rotation=[0, 0, 0, 0]),
    lambda d: d.update(frame="x"),
])
def test_schema_errors(tmp_path, mutate):
    d = scripted_stream([((0, 0, 0), 0.5)])[0].to_dict()
    mutate(d)
    (tmp_path / "s.jsonl").write_text(json.dumps(d) + "\n")
    with pytest.raises(SchemaError):
        read_stream(tmp_path / "s.jsonl")


def test_invalid_json_line_reports_position(tmp_path):
    (tmp_path / "s.jsonl").write_text("\n".join(_lines(scripted_stream([((0, 0, 0), 0)] * 2))) + "\n{oops\n")
    with pytest.raises(SchemaError, match=":3:"):
        read_stream(tmp_path / "s.jsonl")


def test_iter_stream_is_lazy(tmp_path):
    rows = _lines(scripted_stream([((0, 0, 0), 0)] * 3))
    (tmp_path / "s.jsonl").write_text(rows[0] + "\n" + rows[0] + "\n")
    it = iter_stream(tmp_path / "s.jsonl")
    assert next(it).frame_index == 0
    with pytest.raises(OutOfOrder):
        next(it)
