"""Precomputation driver: free grasps -> placements -> tabletop grips -> IK -> store."""

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import store as st
from .geometry import load_mesh
from .graspplan import plan_free_grasps
from .kinematics import feasibility_batch
from .placement import (
    placement_grips,
    stable_placements,
    table_grid,
    tabletop_discretize,
    uniform_angles,
)


class PipelineError(RuntimeError):
    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage {stage!r} failed: {cause}")


@dataclass(eq=False)
class PrecomputeResult:
    mesh: object
    grasps: list
    placements: list
    placement_grips: dict  # placement id -> PlacementGrip list
    instances: list
    grips: list
    angles: list
    ik: dict  # robot name -> IkFeasibility list
    timings: dict = field(default_factory=dict)
    ids: st.IdMap = None

    def summary_rows(self, quiet_timings=False):
        """``(label, value)`` rows: triangles, free grasps, placements, grips, IK."""
        fpg = ",".join(str(len(self.placement_grips[p.id])) for p in self.placements)
        rows = [
            ("#-tri", str(len(self.mesh.triangles))),
            ("#-fg", str(len(self.grasps))),
            ("t-fg", f"{self.timings.get('free grasps', 0.0):.3f} s"),
            ("#-fp", str(len(self.placements))),
            ("#-fpg", fpg or "-"),
            ("t-fp", f"{self.timings.get('placements', 0.0):.3f} s"),
            ("#-tp", str(len(self.instances))),
            ("#-tpg", str(len(self.grips))),
        ]
        for name, feas in self.ik.items():
            ok = sum(f.all_feasible for f in feas)
            rows.append((f"t-tpgik[{name}]", f"{self.timings.get('ik ' + name, 0.0):.3f} s"))
            rows.append((f"#-feasible[{name}]", str(ok)))
        if quiet_timings:
            rows = [r for r in rows if not r[1].endswith(" s")]
        return rows


def _timed(timings, stage, fn, *args, **kwargs):
    t0 = time.perf_counter()
    try:
        out = fn(*args, **kwargs)
    except (st.StoreError, PipelineError):
        raise
    except Exception as exc:
        raise PipelineError(stage, exc) from exc
    timings[stage] = time.perf_counter() - t0
    return out


def parallel_feasibility(robot, poses, retraction, threads=1, block=4096, **ik_kwargs):
    """IK feasibility in independent blocks; the result does not depend on ``threads``."""
    n = len(poses)
    blocks = [(s, min(n, s + block)) for s in range(0, n, block)]

    def run(bounds):
        a, b = bounds
        return feasibility_batch(robot, poses[a:b], retraction, grip_ids=range(a, b), **ik_kwargs)

    if threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, blocks))
    else:
        parts = [run(b) for b in blocks]
    return [f for part in parts for f in part]


def ik_options(cfg):
    return {"seeds": cfg.ik_seeds, "rng_seed": cfg.seed}


def precompute(cfg, store_path=None, threads=1):
    """Run every stage for a validated :class:`~regrasp.config.WorkspaceConfig`.

    When ``store_path`` (or ``cfg.store``) is given the result is saved in one
    transaction at the end; a failing stage leaves the store untouched.
    """
    timings = {}
    mesh = _timed(timings, "mesh", load_mesh, cfg.mesh, scale=cfg.mesh_scale)
    grasps = _timed(timings, "free grasps", plan_free_grasps, mesh, cfg.gripper, cfg.grasp, cfg.seed)

    def _placements():
        placements = stable_placements(mesh, cfg.stability_threshold)
        by_pid, first = {}, 0
        for p in placements:
            by_pid[p.id] = placement_grips(p, grasps, cfg.gripper, first_id=first)
            first += len(by_pid[p.id])
        return placements, by_pid

    placements, by_pid = _timed(timings, "placements", _placements)
    grid = table_grid(cfg.table_center, cfg.table_size, cfg.grid_counts)
    angles = uniform_angles(cfg.angle_count)
    instances, grips = _timed(
        timings, "tabletop", tabletop_discretize, placements, by_pid, grasps, grid, angles, cfg.table_height
    )
    poses = np.array([g.hand_pose for g in grips]).reshape(-1, 4, 4)
    ik = {}
    for k, robot in enumerate(cfg.robots):
        feas = _timed(
            timings,
            "ik " + robot.name,
            parallel_feasibility,
            robot,
            poses,
            cfg.retraction,
            threads,
            **ik_options(cfg),
        )
        ik[robot.name] = [
            type(f)(k, g.id, f.feasibility, f.feasibility_handx, f.feasibility_handxworldz)
            for f, g in zip(feas, grips)
        ]
    result = PrecomputeResult(
        mesh=mesh,
        grasps=grasps,
        placements=placements,
        placement_grips=by_pid,
        instances=instances,
        grips=grips,
        angles=angles,
        ik=ik,
        timings=timings,
    )
    path = store_path or cfg.store
    if path is not None:
        result.ids = save_result(path, cfg, result)
    return result


def save_result(path, cfg, result):
    t0 = time.perf_counter()
    with st.init_store(path) as store:
        ids = st.save_pipeline(
            store,
            cfg.object_name,
            result.grasps,
            result.placements,
            [g for p in result.placements for g in result.placement_grips[p.id]],
            result.instances,
            result.grips,
            result.angles,
            robots=[r.name for r in cfg.robots],
            ik=[f for feas in result.ik.values() for f in feas],
            retraction=cfg.retraction,
        )
    result.timings["store"] = time.perf_counter() - t0
    return ids
