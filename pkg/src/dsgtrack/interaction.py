"""Streaming detection of hand-object interaction intervals.

A decision for frame k is made once frames k+1..k+|H| (the look-ahead) are
available, against up to |B| earlier frames (the buffer).
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InsufficientSamples, OutOfOrder
from .observation import HANDS, Observation
from .scene_graph import SceneGraph

START = "start"
END = "end"


@dataclass(frozen=True)
class DetectorConfig:
    tau_o: float = 0.5
    tau_d: float = 0.10
    theta_reg: int = 4
    theta_high: int = 6
    delta_diff: float = 0.025
    buffer_len: int = 8
    lookahead_len: int = 8

    def __post_init__(self):
        if not (self.theta_reg <= self.theta_high <= self.lookahead_len):
            raise ValueError("need theta_reg <= theta_high <= lookahead_len")
        if min(self.tau_o, self.tau_d, self.theta_reg, self.delta_diff,
               self.buffer_len, self.lookahead_len) <= 0:
            raise ValueError("all detector thresholds must be positive")


@dataclass(frozen=True)
class IntervalEvent:
    kind: str
    hand: str
    frame_index: int
    timestamp_ns: int
    object_id: Optional[int] = None
    hand_position: Optional[np.ndarray] = None
    reason: str = "rule"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "hand": self.hand, "frame": self.frame_index,
                "timestamp_ns": self.timestamp_ns, "object_id": self.object_id,
                "hand_position": None if self.hand_position is None
                else [float(v) for v in self.hand_position],
                "reason": self.reason}


@dataclass
class Window:
    buffer: list[Observation]
    current: Observation
    lookahead: list[Observation]


def is_positive(observation: Observation, hand: str, tau_o: float) -> bool:
    st = observation.hand(hand)
    return st.position is not None and st.p_o > tau_o


def count_positives(frames, hand: str, tau_o: float) -> int:
    return sum(is_positive(o, hand, tau_o) for o in frames)


def _mean_speed(frames, hand: str) -> float:
    speeds = []
    for a, b in zip(frames, frames[1:]):
        pa, pb = a.hand(hand).position, b.hand(hand).position
        if pa is None or pb is None:
            continue
        dt = (b.timestamp_ns - a.timestamp_ns) * 1e-9
        speeds.append(float(np.linalg.norm(pb - pa)) / dt)
    if not speeds:
        raise InsufficientSamples(f"no consecutive {hand} hand positions")
    return math.fsum(speeds) / len(speeds)


def hand_velocities(window: Window, hand: str) -> tuple[float, float]:
    """Mean hand speed (m/s) over the buffer and over the look-ahead."""
    return _mean_speed(window.buffer, hand), _mean_speed(window.lookahead, hand)


def required_positives(window: Window, hand: str, config: DetectorConfig) -> int:
    """Look-ahead positives needed to continue (or start): theta_high on a velocity jump."""
    try:
        v_prior, v_post = hand_velocities(window, hand)
    except InsufficientSamples:
        return config.theta_reg
    if abs(v_prior - v_post) > config.delta_diff:
        return config.theta_high
    return config.theta_reg


def detect_start(window: Window, graph: SceneGraph, config: DetectorConfig,
                 hand: str) -> Optional[int]:
    """Object id if the current frame is a point of contact for ``hand``."""
    cur = window.current
    if not is_positive(cur, hand, config.tau_o):
        return None
    pos = cur.hand(hand).position
    obj, dist = graph.nearest_node(pos)
    if not dist < config.tau_d:
        return None
    if count_positives(window.lookahead, hand, config.tau_o) < required_positives(window, hand, config):
        return None
    centroid = graph.nodes[obj].centroid
    for o in window.lookahead:
        p = o.hand(hand).position
        if p is not None and np.linalg.norm(p - centroid) < dist:
            return None
    return obj


def detect_end(window: Window, config: DetectorConfig, hand: str) -> bool:
    """True when the look-ahead no longer supports an ongoing interaction."""
    return count_positives(window.lookahead, hand, config.tau_o) < required_positives(window, hand, config)


class InteractionDetector:
    """Sliding-window start/end detector, one state machine per hand."""

    def __init__(self, graph: SceneGraph, config: DetectorConfig = DetectorConfig()):
        self.graph = graph
        self.config = config
        self._frames: deque[Observation] = deque(maxlen=config.buffer_len + config.lookahead_len + 1)
        self.active: dict[str, Optional[int]] = {h: None for h in HANDS}
        self._last: Optional[Observation] = None
        self.last_decided: Optional[Observation] = None

    def window(self) -> Optional[Window]:
        frames = list(self._frames)
        H = self.config.lookahead_len
        if len(frames) < H + 1:
            return None
        c = len(frames) - 1 - H
        return Window(frames[:c], frames[c], frames[c + 1:])

    def push(self, observation: Observation) -> list[IntervalEvent]:
        """Add the newest frame; returns events decided for the frame |H| back."""
        last = self._last
        if last is not None and (observation.frame_index <= last.frame_index
                                 or observation.timestamp_ns <= last.timestamp_ns):
            raise OutOfOrder(f"frame {observation.frame_index} after {last.frame_index}")
        self._last = observation
        self._frames.append(observation)
        win = self.window()
        if win is None:
            return []
        self.last_decided = win.current
        return self.decide(win)

    def decide(self, win: Window) -> list[IntervalEvent]:
        events = []
        cur = win.current
        for hand in HANDS:
            pos = cur.hand(hand).position
            obj = self.active[hand]
            if obj is None:
                found = detect_start(win, self.graph, self.config, hand)
                if found is not None:
                    self.active[hand] = found
                    events.append(IntervalEvent(START, hand, cur.frame_index, cur.timestamp_ns, found, pos))
            elif detect_end(win, self.config, hand):
                self.active[hand] = None
                events.append(IntervalEvent(END, hand, cur.frame_index, cur.timestamp_ns, obj, pos))
        return events

    def finish(self) -> list[IntervalEvent]:
        """Close interactions still open when the stream ends, at the last decided frame."""
        events = []
        cur = self.last_decided
        for hand in HANDS:
            obj = self.active[hand]
            if obj is None or cur is None:
                continue
            self.active[hand] = None
            events.append(IntervalEvent(END, hand, cur.frame_index, cur.timestamp_ns, obj,
                                        cur.hand(hand).position, reason="stream_end"))
        return events
