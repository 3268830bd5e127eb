"""Command-line driver: ``regrasp precompute | reorient | export | inspect``.

Exit codes: 0 success, 2 config or input error, 3 infeasible query,
4 store error. ``REGRASP_STORE`` overrides the store path of the config.
"""

import argparse
import os
import sys
import time
from pathlib import Path

import numpy as np
import yaml

from . import export as ex
from . import regraspgraph as rg
from . import store as st
from . import transforms as tf
from .config import ConfigError, load_workspace
from .geometry import load_mesh
from .geometry.hull import DegenerateHullError
from .geometry.io import MeshFormatError, write_facets_ply, write_samples_ply
from .geometry.mesh import InvalidMeshError
from .graspplan import run_grasp_pipeline
from .pipeline import PipelineError, ik_options, precompute

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_STORE = 0, 1, 2, 3, 4

_INPUT_ERRORS = (ConfigError, MeshFormatError, InvalidMeshError, DegenerateHullError, rg.InvalidQueryError)

EXPORT_KINDS = ("csv", "graph", "grasps", "placements", "facets", "samples")


class UsageError(Exception):
    pass


def _overrides(pairs):
    out = {}
    for item in pairs or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, value = item.split("=", 1)
        out[key.strip()] = yaml.safe_load(value)
    return out


def _config(args):
    if not args.config:
        raise ConfigError("--config is required")
    return load_workspace(args.config, _overrides(args.set))


def _store_path(args, cfg=None):
    path = getattr(args, "store", None) or os.environ.get("REGRASP_STORE")
    if path is None and cfg is not None:
        path = cfg.store
    if path is None:
        raise ConfigError("no store path (use --store, REGRASP_STORE or the config's 'store' key)")
    return Path(path)


def _say(args, label, value):
    if not (args.quiet_timings and value.endswith(" s")):
        print(f"{label:<22} {value}")


def _robot(cfg, name):
    for r in cfg.robots:
        if r.name == name:
            return r
    if name is None and cfg.robots:
        return cfg.robots[0]
    raise ConfigError(f"robot {name!r} not in the config ({[r.name for r in cfg.robots]})")


def parse_pose(text, placements, table_height=0.0):
    """``PLACEMENT:X,Y:YAW_DEG`` on the table, or 12 numbers (rotation rows, translation)."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"pose {text!r}: expected PLACEMENT:X,Y:YAW")
        try:
            k = int(parts[0])
            x, y = (float(v) for v in parts[1].split(","))
            yaw = np.deg2rad(float(parts[2]))
        except ValueError:
            raise ConfigError(f"pose {text!r}: cannot parse numbers") from None
        if not 0 <= k < len(placements):
            raise ConfigError(f"pose {text!r}: placement {k} out of range (0..{len(placements) - 1})")
        return tf.translate(x, y, table_height) @ tf.rotz(yaw) @ placements[k]
    try:
        values = [float(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise ConfigError(f"pose {text!r}: cannot parse numbers") from None
    if len(values) != 12:
        raise ConfigError(f"pose {text!r}: need 12 numbers or PLACEMENT:X,Y:YAW")
    return tf.make(np.reshape(values[:9], (3, 3)), values[9:])


# ----------------------------------------------------------------- commands


def cmd_precompute(args):
    cfg = _config(args)
    path = _store_path(args, cfg)
    t0 = time.perf_counter()
    result = precompute(cfg, store_path=path, threads=args.threads)
    for label, value in result.summary_rows(args.quiet_timings):
        _say(args, label, value)
    _say(args, "t-store", f"{result.timings.get('store', 0.0):.3f} s")
    _say(args, "t-total", f"{time.perf_counter() - t0:.3f} s")
    with st.open_store(path) as store:
        report = st.audit(store)
        for table, n in report.counts.items():
            print(f"rows {table:<22} {n}")
    print(f"store {path}")
    return EXIT_OK


def cmd_reorient(args):
    cfg = _config(args)
    path = _store_path(args, cfg)
    robot = _robot(cfg, args.robot)
    mesh = load_mesh(cfg.mesh, scale=cfg.mesh_scale)
    with st.open_store(path) as store:
        oid = st.object_id(store, cfg.object_name)
        _ids, rotmats = st.load_placements(store, oid)
        init = parse_pose(args.init, rotmats, cfg.table_height)
        goal = parse_pose(args.goal, rotmats, cfg.table_height)
        t0 = time.perf_counter()
        graph = rg.build_graph(store, cfg.object_name, robot.name, cfg.weights)
        t_build = time.perf_counter() - t0
    query = rg.ReorientQuery(graph.object_id, graph.robot_id, init, goal)
    t0 = time.perf_counter()
    seq = rg.reorient(
        graph, query, robot, cfg.gripper, cfg.retraction, mesh.vertices, cfg.table_height, **ik_options(cfg)
    )
    t_query = time.perf_counter() - t0
    print(f"{'nodes':<22} {graph.number_of_nodes()}")
    _say(args, "t-build", f"{t_build:.3f} s")
    _say(args, "gs", f"{t_query:.3f} s")
    print(f"{'steps':<22} {len(seq.steps)}")
    print(f"{'regrasp_count':<22} {seq.regrasp_count}")
    if args.out:
        ex.write_sequence(args.out, seq, init, goal)
        print(f"sequence {args.out}")
    return EXIT_OK


def cmd_export(args):
    if args.kind not in EXPORT_KINDS:
        raise UsageError(f"unknown export kind {args.kind!r} (choose from {', '.join(EXPORT_KINDS)})")
    cfg = _config(args) if args.config else None
    out = Path(args.out)
    if args.kind == "csv":
        with st.open_store(_store_path(args, cfg)) as store:
            paths = st.export_csv(store, out)
        print(f"{len(paths)} tables -> {out}")
        return EXIT_OK
    if cfg is None:
        raise ConfigError(f"export {args.kind} needs --config")
    if args.kind in ("facets", "samples"):
        mesh = load_mesh(cfg.mesh, scale=cfg.mesh_scale)
        res = run_grasp_pipeline(mesh, cfg.gripper, cfg.grasp, cfg.seed)
        if args.kind == "facets":
            write_facets_ply(out, mesh, res.facets)
            print(f"{len(res.facets)} facets -> {out}")
        else:
            write_samples_ply(out, res.samples)
            print(f"{len(res.samples)} samples -> {out}")
        return EXIT_OK
    with st.open_store(_store_path(args, cfg)) as store:
        oid = st.object_id(store, cfg.object_name)
        if args.kind == "graph":
            robot = _robot(cfg, args.robot)
            graph = rg.build_graph(store, cfg.object_name, robot.name, cfg.weights)
            n, m = ex.write_graph(out, graph)
            print(f"{n} nodes, {m} edges -> {out}")
        elif args.kind == "placements":
            mesh = load_mesh(cfg.mesh, scale=cfg.mesh_scale)
            _ids, rotmats = st.load_placements(store, oid)
            ex.write_placements_obj(out, mesh, rotmats)
            print(f"{len(rotmats)} placements -> {out}")
        else:
            mesh = load_mesh(cfg.mesh, scale=cfg.mesh_scale)
            if args.placement is None:
                rows, pose = st.load_freeairgrips(store, oid), np.eye(4)
            else:
                pids, rotmats = st.load_placements(store, oid)
                if not 0 <= args.placement < len(pids):
                    raise ConfigError(f"placement {args.placement} out of range")
                rows = st.load_freetabletopgrips(store, oid)
                keep = rows.placement_ids == pids[args.placement]
                rows = _subset(rows, keep)
                pose = rotmats[args.placement]
            names = [f"grasp_{i}" for i in rows.ids.tolist()]
            n = ex.write_hands_obj(out, cfg.gripper, rows.poses, rows.jaw_widths, names, mesh, pose)
            print(f"{n} hand glyphs -> {out}")
    return EXIT_OK


def _subset(rows, keep):
    return st.GripRows(
        ids=rows.ids[keep],
        grasp_ids=rows.grasp_ids[keep],
        placement_ids=rows.placement_ids[keep],
        contact_points=rows.contact_points[keep],
        contact_normals=rows.contact_normals[keep],
        poses=rows.poses[keep],
        jaw_widths=rows.jaw_widths[keep],
    )


def cmd_inspect(args):
    cfg = _config(args) if args.config else None
    path = _store_path(args, cfg)
    with st.open_store(path) as store:
        report = st.audit(store)
        print(f"store {path}")
        for name in st.object_names(store):
            print(f"object {name}")
        for name in st.robot_names(store):
            print(f"robot {name}")
        for table, n in report.counts.items():
            print(f"rows {table:<22} {n}")
        for p in report.problems:
            print(f"problem {p}")
        print("audit ok" if report.ok else f"audit failed ({len(report.problems)} problems)")
    return EXIT_OK if report.ok else EXIT_STORE


# ----------------------------------------------------------------- entry point


def build_parser():
    parser = argparse.ArgumentParser(prog="regrasp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", "-c", required=config_required, help="workspace YAML file")
        p.add_argument("--store", help="store file (overrides REGRASP_STORE and the config)")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key (dotted)")
        p.add_argument("--quiet-timings", action="store_true", help="omit wall-clock lines")
        p.add_argument("--threads", type=int, default=1, help="worker threads for IK")

    p = sub.add_parser("precompute", help="run the full precomputation into a store")
    common(p)
    p.set_defaults(func=cmd_precompute)

    p = sub.add_parser("reorient", help="plan a reorientation between two table poses")
    common(p)
    p.add_argument("--robot", help="robot name (default: first robot of the config)")
    p.add_argument("--init", required=True, help="PLACEMENT:X,Y:YAW_DEG or 12 numbers")
    p.add_argument("--goal", required=True, help="PLACEMENT:X,Y:YAW_DEG or 12 numbers")
    p.add_argument("--out", help="write the sequence as JSON")
    p.set_defaults(func=cmd_reorient)

    p = sub.add_parser("export", help="write CSV tables, GraphML, OBJ or PLY files")
    common(p, config_required=False)
    p.add_argument("kind", help=", ".join(EXPORT_KINDS))
    p.add_argument("--out", "-o", required=True)
    p.add_argument("--robot")
    p.add_argument("--placement", type=int, help="grasps: only this placement's grips (index)")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("inspect", help="row counts and integrity audit")
    common(p, config_required=False)
    p.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except rg.InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except st.StoreError as exc:
        print(f"store error: {exc}", file=sys.stderr)
        return EXIT_STORE
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG if isinstance(exc.cause, _INPUT_ERRORS + (OSError,)) else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
