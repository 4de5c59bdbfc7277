"""Per-object trajectory evaluation against ground truth."""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .errors import LengthMismatch, UnknownObject
from .geometry.metrics import MetricsReport, frame_errors, model_diameter, summarize
from .geometry.metrics import align_by_timestamp
from .scene_graph import SceneGraph
from .trajectory import TrajectoryRecord

COLUMNS = [("translation_rmse_cm", "RMSE cm"), ("rotation_rmse_deg", "RMSE deg"), ("add_pct", "ADD%"),
           ("add_s_pct", "ADD-S%"), ("acc_5cm_5deg_pct", "Acc%"), ("end_translation_cm", "T_end cm"),
           ("end_rotation_deg", "R_end deg")]


def merge_by_object(records, statuses=("tracked", "lost", "gt")) -> dict[int, TrajectoryRecord]:
    """One time-ordered record per object; duplicate frames keep their first sample."""
    samples: dict[int, dict[int, tuple]] = {}
    for rec in records:
        per = samples.setdefault(rec.object_id, {})
        for f, ts, pose, st in zip(rec.frames, rec.timestamps_ns, rec.poses, rec.status):
            if st in statuses:
                per.setdefault(f, (ts, pose, st))
    out = {}
    for obj, per in samples.items():
        if not per:
            continue
        merged = TrajectoryRecord(obj, records[0].source if records else "estimate", 0)
        for f in sorted(per):
            ts, pose, st = per[f]
            merged.append(f, ts, pose, st)
        out[obj] = merged
    return out


def frame_period_ns(records) -> int:
    """Smallest positive timestamp step seen in any record (one frame)."""
    steps = [np.diff(np.asarray(r.timestamps_ns, dtype=np.int64)) for r in records if len(r) > 1]
    steps = np.concatenate(steps) if steps else np.array([], dtype=np.int64)
    steps = steps[steps > 0]
    if len(steps) == 0:
        return 0
    return int(steps.min())


@dataclass
class EvalTable:
    rows: dict          # object id -> MetricsReport
    mean: MetricsReport

    def to_dict(self) -> dict:
        return {"objects": {str(k): v.to_dict() for k, v in sorted(self.rows.items())},
                "mean": self.mean.to_dict()}

    def format(self) -> str:
        head = f"{'object':>8} {'frames':>7} " + " ".join(f"{h:>10}" for _, h in COLUMNS)
        lines = [head, "-" * len(head)]

        def row(name, rep):
            vals = " ".join(f"{getattr(rep, k):10.3f}" for k, _ in COLUMNS)
            return f"{name:>8} {rep.frames:7d} {vals}"

        lines += [row(str(k), v) for k, v in sorted(self.rows.items())]
        lines += ["-" * len(head), row("mean", self.mean)]
        return "\n".join(lines)


def mean_report(reports) -> MetricsReport:
    reports = list(reports)
    numeric = [f.name for f in fields(MetricsReport) if f.name not in ("frames", "rotation_metric")]
    vals = {k: float(np.mean([getattr(r, k) for r in reports])) for k in numeric}
    return MetricsReport(frames=int(sum(r.frames for r in reports)), **vals)


def evaluate(estimates, ground_truth, graph: SceneGraph, max_gap_ns=None) -> EvalTable:
    """Align each estimated object trajectory to ground truth (nearest timestamp) and score it."""
    est = merge_by_object(estimates, ("tracked", "lost"))
    gt = merge_by_object(ground_truth, ("gt", "tracked", "lost"))
    if max_gap_ns is None:
        max_gap_ns = frame_period_ns(list(gt.values()))
    rows = {}
    for obj, rec in sorted(est.items()):
        if obj not in graph.nodes:
            raise UnknownObject(f"object {obj} is not in the scene")
        if obj not in gt:
            raise LengthMismatch(f"no ground truth for object {obj}")
        e, g = align_by_timestamp(rec, gt[obj], max_gap_ns)
        if not e:
            raise LengthMismatch(f"object {obj}: no ground-truth sample within one frame of any estimate")
        model = graph.nodes[obj].local_points
        rows[obj] = summarize(*frame_errors(e, g, model), model_diameter(model))
    if not rows:
        raise LengthMismatch("no estimated trajectories to evaluate")
    return EvalTable(rows, mean_report(rows.values()))
