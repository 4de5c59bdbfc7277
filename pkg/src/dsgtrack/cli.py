"""Command-line interface: ``dsgtrack simulate | track | eval | graph``.

Exit codes: 0 success, 1 input error (bad or missing files, schema, unknown ids),
2 runtime failure. Inputs are fully validated before any output file is written.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import load_config
from .errors import InputError
from .evaluation import evaluate
from .observation import read_stream, write_stream
from .scene_graph import graph_diff, load_scene, save_scene
from .sim import generate, load_scenario
from .tracker import TrackerConfig, run_session
from .trajectory import read_trajectories, write_trajectories

log = logging.getLogger("dsgtrack")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _write_jsonl(path: Path, rows) -> None:
    with open(path, "w") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")


def cmd_simulate(args) -> int:
    scenario = load_scenario(args.scenario)
    if args.seed is not None:
        scenario.seed = args.seed
    result = generate(scenario)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_stream(out / "stream.jsonl", result.observations)
    write_trajectories(out / "ground_truth.jsonl", result.gt_records())
    print(f"{len(result.observations)} frames, {len(scenario.actions)} actions -> "
          f"{out / 'stream.jsonl'}, {out / 'ground_truth.jsonl'}")
    return 0


def cmd_track(args) -> int:
    graph = load_scene(args.scene)
    config = load_config(args.config) if args.config else TrackerConfig()
    if args.no_hand_anchor:
        config = replace(config, hand_anchor=False)
    if args.no_drawer_axis:
        config = replace(config, drawer_axis_constraint=False)
    observations = read_stream(args.stream)
    t0 = time.perf_counter()
    result = run_session(graph, observations, config)
    elapsed = time.perf_counter() - t0
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_trajectories(out / "trajectories.jsonl", result.records)
    _write_jsonl(out / "events.jsonl", (e.to_dict() for e in result.events))
    _write_jsonl(out / "log.jsonl", result.log)
    save_scene(result.graph, out / "snapshot.json")
    fps = len(observations) / elapsed if elapsed > 0 else float("inf")
    print(f"{len(observations)} frames, {len(result.records)} tracks, "
          f"{sum(e.kind == 'start' for e in result.events)} interactions, {fps:.1f} frames/s")
    return 0


def cmd_eval(args) -> int:
    graph = load_scene(args.scene)
    est = read_trajectories(args.estimate, "estimate")
    gt = read_trajectories(args.ground_truth, "ground_truth")
    gap = None if args.max_gap_ms is None else int(round(args.max_gap_ms * 1e6))
    table = evaluate(est, gt, graph, gap)
    doc = json.dumps(table.to_dict(), indent=1)
    if args.json == "-":
        print(doc)
        return 0
    print(table.format())
    if args.json:
        Path(args.json).write_text(doc + "\n")
    return 0


def _edges_of(graph, node_id):
    return [list(e) for e in graph.edges() if node_id in (e.source, e.target)]


def cmd_graph(args) -> int:
    if args.query == "diff":
        a, b = load_scene(args.snapshot), load_scene(args.other)
        print(json.dumps(graph_diff(a, b, args.atol)))
        return 0
    graph = load_scene(args.snapshot)
    if args.query == "nearest":
        pred = None if args.kind is None else (lambda n: n.kind == args.kind)
        node_id, dist = graph.nearest_node(np.array([args.x, args.y, args.z]), pred)
        n = graph.node(node_id)
        print(json.dumps({"id": node_id, "label": n.label, "distance": dist,
                          "centroid": [float(v) for v in n.centroid]}))
    elif args.query == "contents":
        ids = graph.drawer_contents(args.node)
        print(json.dumps({"drawer": args.node, "contents": [
            {"id": i, "label": graph.node(i).label} for i in ids]}))
    elif args.query == "neighbors":
        graph.node(args.node)
        print(json.dumps({"id": args.node, "neighbors": graph.neighbors(args.node),
                          "edges": _edges_of(graph, args.node)}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="dsgtrack", description="Scene-graph object tracking from egocentric observations.")
    p.add_argument("-v", "--verbose", action="store_true", help="log per-frame tracker decisions")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="render a scenario into a stream and ground truth")
    s.add_argument("scenario")
    s.add_argument("out_dir")
    s.add_argument("--seed", type=int, help="override the scenario seed")
    s.set_defaults(func=cmd_simulate)

    t = sub.add_parser("track", help="run the tracker over an observation stream")
    t.add_argument("scene")
    t.add_argument("stream")
    t.add_argument("out_dir")
    t.add_argument("--config", help="JSON file of named constants")
    t.add_argument("--no-hand-anchor", action="store_true", help="take translation from PnP alone")
    t.add_argument("--no-drawer-axis", action="store_true", help="track drawers as free objects")
    t.set_defaults(func=cmd_track)

    e = sub.add_parser("eval", help="score estimated trajectories against ground truth")
    e.add_argument("estimate")
    e.add_argument("ground_truth")
    e.add_argument("scene")
    e.add_argument("--json", metavar="PATH", help="also write the table as JSON ('-' for stdout only)")
    e.add_argument("--max-gap-ms", type=float, help="alignment tolerance (default: one frame)")
    e.set_defaults(func=cmd_eval)

    g = sub.add_parser("graph", help="query a scene snapshot")
    gq = g.add_subparsers(dest="query", required=True, parser_class=_Parser)
    n = gq.add_parser("nearest", help="node whose centroid is closest to a point")
    n.add_argument("snapshot")
    for axis in "xyz":
        n.add_argument(axis, type=float)
    n.add_argument("--kind", choices=("object", "drawer"))
    c = gq.add_parser("contents", help="objects stored in a drawer")
    c.add_argument("snapshot")
    c.add_argument("node", type=int)
    nb = gq.add_parser("neighbors", help="nodes sharing an edge with a node")
    nb.add_argument("snapshot")
    nb.add_argument("node", type=int)
    d = gq.add_parser("diff", help="edge and pose changes between two snapshots")
    d.add_argument("snapshot")
    d.add_argument("other")
    d.add_argument("--atol", type=float, default=0.0, help="ignore pose changes up to this size")
    g.set_defaults(func=cmd_graph)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (InputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # anything else is a runtime failure
        print(f"runtime error: {exc!r}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
