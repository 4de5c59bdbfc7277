"""Timestamped object pose sequences and their line-delimited file format.

One JSON object per line::

    {"frame": 12, "timestamp_ns": 400000000, "object_id": 3, "track": 0,
     "hand": "left", "rotation": [w, x, y, z], "translation": [x, y, z],
     "status": "tracked"}

``status`` is one of ``tracked``, ``lost`` (pose frozen at last good estimate),
``gt`` (ground truth sample) or ``final`` (ground-truth pose at session end).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .errors import SchemaError
from .geometry.transforms import RigidPose

STATUSES = ("tracked", "lost", "gt", "final")


@dataclass
class TrajectoryRecord:
    object_id: int
    source: str = "estimate"  # or "ground_truth"
    track: int = 0
    hand: Optional[str] = None
    frames: list[int] = field(default_factory=list)
    timestamps_ns: list[int] = field(default_factory=list)
    poses: list[RigidPose] = field(default_factory=list)
    status: list[str] = field(default_factory=list)

    def append(self, frame: int, timestamp_ns: int, pose: RigidPose, status: str = "tracked"):
        if self.frames and frame <= self.frames[-1]:
            raise ValueError("trajectory frames must strictly increase")
        self.frames.append(int(frame))
        self.timestamps_ns.append(int(timestamp_ns))
        self.poses.append(pose)
        self.status.append(status)

    def __len__(self):
        return len(self.poses)

    @property
    def translations(self) -> np.ndarray:
        return np.array([p.translation for p in self.poses]).reshape(-1, 3)

    def lines(self) -> Iterable[dict]:
        for f, ts, p, s in zip(self.frames, self.timestamps_ns, self.poses, self.status):
            yield {"frame": f, "timestamp_ns": ts, "object_id": self.object_id,
                   "track": self.track, "hand": self.hand,
                   "rotation": [float(v) for v in p.quat],
                   "translation": [float(v) for v in p.translation], "status": s}


def write_trajectories(path, records: Iterable[TrajectoryRecord]) -> None:
    with open(path, "w") as fh:
        for rec in records:
            for line in rec.lines():
                fh.write(json.dumps(line) + "\n")


def read_trajectories(path, source: str = "estimate") -> list[TrajectoryRecord]:
    """Group lines by (object_id, track) in order of first appearance."""
    records: dict[tuple[int, int], TrajectoryRecord] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        if not raw.strip():
            continue
        try:
            d = json.loads(raw)
            key = (int(d["object_id"]), int(d.get("track", 0)))
            status = d.get("status", "tracked")
            if status not in STATUSES:
                raise SchemaError(f"unknown status {status!r}")
            pose = RigidPose(d["rotation"], d["translation"])
            rec = records.get(key)
            if rec is None:
                rec = records[key] = TrajectoryRecord(key[0], source, key[1], d.get("hand"))
            rec.append(int(d["frame"]), int(d["timestamp_ns"]), pose, status)
        except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
            raise SchemaError(f"{path}:{lineno}: {exc}") from exc
    return list(records.values())
