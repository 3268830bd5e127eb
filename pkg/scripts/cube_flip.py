"""Precompute the cube-flip workspace and plan the flip.

    python3 scripts/cube_flip.py [--store cube_flip.db] [--out flip.json] [--robot arm6]

The cube starts resting upright and must end upside down at the same spot.
With the wide-finger hand no single grasp is usable at both poses, so the
plan needs at least one intermediate placement.
"""

import argparse
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from regrasp import regraspgraph as rg
from regrasp import store as st
from regrasp import transforms as tf
from regrasp.config import load_workspace
from regrasp.geometry import load_mesh
from regrasp.export import write_sequence
from regrasp.pipeline import ik_options, precompute

CONFIG = Path(__file__).resolve().parent.parent / "configs" / "cube_flip.yaml"


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--config", default=str(CONFIG))
    parser.add_argument("--store", default="cube_flip.db")
    parser.add_argument("--robot", default="arm6")
    parser.add_argument("--out", help="write the sequence as JSON")
    parser.add_argument("--reuse", action="store_true", help="skip the precompute if the store exists")
    args = parser.parse_args(argv)

    cfg = load_workspace(args.config)
    robots = [r for r in cfg.robots if r.name == args.robot]
    if not robots:
        parser.error(f"robot {args.robot!r} is not in {args.config}")
    cfg = replace(cfg, robots=robots)
    robot = robots[0]

    if not (args.reuse and Path(args.store).exists()):
        Path(args.store).unlink(missing_ok=True)
        result = precompute(cfg, store_path=args.store)
        for label, value in result.summary_rows():
            print(f"{label:<22} {value}")

    half = 0.03  # the bundled cube spans +-0.03 m
    init = tf.translate(0.45, 0.0, cfg.table_height + half)
    goal = tf.translate(0.45, 0.0, cfg.table_height + half) @ tf.rotx(np.pi)

    mesh = load_mesh(cfg.mesh, scale=cfg.mesh_scale)
    t0 = time.perf_counter()
    with st.open_store(args.store) as store:
        graph = rg.build_graph(store, cfg.object_name, robot.name, cfg.weights)
    query = rg.ReorientQuery(graph.object_id, graph.robot_id, init, goal)
    seq = rg.reorient(
        graph, query, robot, cfg.gripper, cfg.retraction, mesh.vertices, cfg.table_height, **ik_options(cfg)
    )
    dt = time.perf_counter() - t0
    print(f"{'nodes':<22} {graph.number_of_nodes()}")
    print(f"{'edges':<22} {graph.number_of_edges()}")
    print(f"{'query':<22} {dt:.3f} s")
    print(f"{'regrasp_count':<22} {seq.regrasp_count}")
    for k, step in enumerate(seq.steps):
        p, q = step.pick_pose[:3, 3], step.place_pose[:3, 3]
        print(f"step {k}: grasp {step.grasp_id}, from ({p[0]:.3f}, {p[1]:.3f}) to ({q[0]:.3f}, {q[1]:.3f})")
    if args.out:
        write_sequence(args.out, seq, init, goal)
        print(f"sequence {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
