"""Tracker configuration files: a flat JSON object of named constants.

Every key is optional; defaults are the detector and tracker defaults::

    {"tau_o": 0.5, "tau_d": 0.10, "theta_reg": 4, "theta_high": 6, "delta_diff": 0.025,
     "buffer_len": 8, "lookahead_len": 8,
     "min_visible_points": 6, "hand_anchor": true, "drawer_axis_constraint": true,
     "ransac_threshold_px": 4.0, "ransac_confidence": 0.999, "ransac_max_iterations": 500,
     "ransac_min_inlier_ratio": 0.3, "ransac_seed": 0, "ransac_refine_iterations": 20,
     "ransac_refine_step_tol": 1e-10}
"""

from __future__ import annotations

import json
from dataclasses import fields, replace
from pathlib import Path

from .errors import SchemaError
from .geometry.pnp import RansacConfig
from .interaction import DetectorConfig
from .tracker import TrackerConfig

_DETECTOR = {f.name for f in fields(DetectorConfig)}
_RANSAC = {"ransac_" + f.name: f.name for f in fields(RansacConfig)}
_TRACKER = {"min_visible_points", "hand_anchor", "drawer_axis_constraint"}


def config_keys() -> list[str]:
    return sorted(_DETECTOR | set(_RANSAC) | _TRACKER)


def config_from_dict(d: dict, base: TrackerConfig = TrackerConfig()) -> TrackerConfig:
    if not isinstance(d, dict):
        raise SchemaError("config must be a JSON object")
    unknown = set(d) - set(config_keys())
    if unknown:
        raise SchemaError(f"unknown config keys: {sorted(unknown)}")
    try:
        det = replace(base.detector, **{k: v for k, v in d.items() if k in _DETECTOR})
        ran = replace(base.ransac, **{_RANSAC[k]: v for k, v in d.items() if k in _RANSAC})
        return replace(base, detector=det, ransac=ran, **{k: v for k, v in d.items() if k in _TRACKER})
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"bad config: {exc}") from exc


def config_to_dict(config: TrackerConfig) -> dict:
    d = {k: getattr(config.detector, k) for k in sorted(_DETECTOR)}
    d.update({k: getattr(config.ransac, v) for k, v in _RANSAC.items()})
    d.update({k: getattr(config, k) for k in sorted(_TRACKER)})
    return d


def load_config(path) -> TrackerConfig:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON ({exc})") from exc
    return config_from_dict(data)
