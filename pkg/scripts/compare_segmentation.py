"""Facet and grasp counts for over-segmentation versus conventional segmentation.

    python3 scripts/compare_segmentation.py [--tau 5 10 15 20] [--meshes cylinder lbracket]
"""

import argparse
import time

import numpy as np

from regrasp.config import bundled, load_gripper
from regrasp.geometry import load_mesh
from regrasp.graspplan import GraspParams, run_grasp_pipeline


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--tau", type=float, nargs="+", default=[5.0, 10.0, 15.0, 20.0], help="degrees")
    parser.add_argument("--meshes", nargs="+", default=["cube", "cylinder", "lbracket", "stick"])
    parser.add_argument("--gripper", default="gripper_default.yaml")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    gripper = load_gripper(bundled(args.gripper))
    print(f"{'mesh':<10} {'tau':>5} {'seg':<13} {'facets':>7} {'pairs':>6} {'grasps':>7} {'time':>7}")
    for name in args.meshes:
        mesh = load_mesh(bundled(f"{name}.obj"))
        for tau in args.tau:
            for seg in ("over", "conventional"):
                params = GraspParams(tau=float(np.deg2rad(tau)), segmentation=seg)
                t0 = time.perf_counter()
                res = run_grasp_pipeline(mesh, gripper, params, args.seed)
                dt = time.perf_counter() - t0
                print(
                    f"{name:<10} {tau:>5g} {seg:<13} {len(res.facets):>7} {len(res.pairs):>6} "
                    f"{len(res.grasps):>7} {dt:>6.2f}s"
                )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
