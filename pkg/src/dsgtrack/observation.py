"""Per-frame egocentric observations and the line-delimited stream format.

One JSON object per line, strictly increasing ``frame`` and ``timestamp_ns``::

    {"frame": 0, "timestamp_ns": 0,
     "camera": {"intrinsics": {"fx": .., "fy": .., "cx": .., "cy": .., "width": .., "height": ..},
                "pose": {"rotation": [w, x, y, z], "translation": [x, y, z]}},
     "hands": {"left":  {"position": [x, y, z], "p_o": 0.93},
               "right": {"position": null, "p_o": 0.0}},
     "tracks": [{"id": "3:17", "uv": [u, v], "visible": true}, ...]}

Camera pose is camera-to-world (optical frame: x right, y down, z forward);
hand positions are world-frame meters; ``p_o`` is the hand-object interaction
probability in [0, 1]. Track ids read ``"<object id>:<keypoint index>"``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Optional

import numpy as np

from .errors import OutOfOrder, SchemaError
from .geometry.camera import CameraModel, Intrinsics
from .geometry.transforms import RigidPose

HANDS = ("left", "right")


@dataclass(frozen=True)
class HandState:
    position: Optional[np.ndarray] = None
    p_o: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.p_o <= 1.0:
            raise SchemaError(f"p_o={self.p_o} outside [0, 1]")
        if self.position is not None:
            pos = np.asarray(self.position, dtype=float).reshape(3)
            if not np.all(np.isfinite(pos)):
                raise SchemaError("hand position must be finite")
            object.__setattr__(self, "position", pos)


@dataclass(frozen=True)
class TrackUpdate:
    track_id: str
    point2d: Optional[np.ndarray]
    visible: bool = True


def track_id(object_id: int, keypoint: int) -> str:
    return f"{object_id}:{keypoint}"


@dataclass(frozen=True)
class Observation:
    frame_index: int
    timestamp_ns: int
    camera: CameraModel
    hands: dict = field(default_factory=dict)
    track_updates: tuple = ()

    def hand(self, which: str) -> HandState:
        return self.hands.get(which) or HandState()

    def to_dict(self) -> dict:
        hands = {}
        for h in HANDS:
            st = self.hand(h)
            hands[h] = {"position": None if st.position is None else [float(v) for v in st.position],
                        "p_o": float(st.p_o)}
        return {
            "frame": int(self.frame_index),
            "timestamp_ns": int(self.timestamp_ns),
            "camera": {"intrinsics": self.camera.intrinsics.to_dict(),
                       "pose": self.camera.pose.to_dict()},
            "hands": hands,
            "tracks": [{"id": u.track_id,
                        "uv": None if u.point2d is None else [float(v) for v in u.point2d],
                        "visible": bool(u.visible)} for u in self.track_updates],
        }

    @classmethod
    def from_dict(cls, d: dict) -> Observation:
        try:
            cam = d["camera"]
            camera = CameraModel(Intrinsics.from_dict(cam["intrinsics"]), RigidPose.from_dict(cam["pose"]))
            hands = {}
            for h, st in (d.get("hands") or {}).items():
                if h not in HANDS:
                    raise SchemaError(f"unknown hand {h!r}")
                if st is None:
                    continue
                pos = st.get("position")
                p_o = float(st.get("p_o", 0.0))
                # an absent hand carries no interaction evidence
                hands[h] = HandState(None if pos is None else np.asarray(pos, dtype=float),
                                     p_o if pos is not None else 0.0)
            updates = []
            for t in d.get("tracks") or ():
                uv = t.get("uv")
                vis = bool(t.get("visible", uv is not None)) and uv is not None
                updates.append(TrackUpdate(str(t["id"]), None if uv is None else np.asarray(uv, dtype=float), vis))
            return cls(int(d["frame"]), int(d["timestamp_ns"]), camera, hands, tuple(updates))
        except SchemaError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"bad observation record: {exc!r}") from exc


def write_stream(path, observations: Iterable[Observation]) -> None:
    with open(path, "w") as fh:
        for obs in observations:
            fh.write(json.dumps(obs.to_dict()) + "\n")


def iter_stream(path) -> Iterator[Observation]:
    """Parse a stream file lazily, checking frame and timestamp order."""
    last = None
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            if not raw.strip():
                continue
            try:
                obs = Observation.from_dict(json.loads(raw))
            except json.JSONDecodeError as exc:
                raise SchemaError(f"{path}:{lineno}: invalid JSON") from exc
            except SchemaError as exc:
                raise SchemaError(f"{path}:{lineno}: {exc}") from exc
            if last is not None and (obs.frame_index <= last.frame_index
                                     or obs.timestamp_ns <= last.timestamp_ns):
                raise OutOfOrder(f"{path}:{lineno}: frame {obs.frame_index} out of order")
            last = obs
            yield obs


def read_stream(path) -> list[Observation]:
    return list(iter_stream(Path(path)))
