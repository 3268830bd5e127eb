"""Serial revolute arms: forward kinematics, batched damped least-squares IK,
and grasp feasibility with hand/world retraction."""

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

from . import transforms as tf

DAMPING = 1e-3
MAX_ITERATIONS = 200
N_SEEDS = 8
TOL_POS = 1e-3
TOL_ROT = 1e-2


class JointLimitError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Joint:
    axis: np.ndarray
    origin: np.ndarray  # 4x4, relative to the previous joint frame
    limits: tuple
    name: str = ""


@dataclass(frozen=True, eq=False)
class RobotModel:
    name: str
    joints: tuple
    base_pose: np.ndarray = field(default_factory=lambda: np.eye(4))
    tool_transform: np.ndarray = field(default_factory=lambda: np.eye(4))

    def __post_init__(self):
        for j in self.joints:
            if not j.limits[0] <= j.limits[1]:
                raise ValueError(f"joint {j.name!r} has reversed limits")

    @property
    def dof(self):
        return len(self.joints)

    @property
    def lower(self):
        return np.array([j.limits[0] for j in self.joints])

    @property
    def upper(self):
        return np.array([j.limits[1] for j in self.joints])

    def home(self):
        return np.clip(np.zeros(self.dof), self.lower, self.upper)

    def reach(self):
        """Upper bound on the distance from the first joint to the hand origin."""
        total = 0.0
        for j in self.joints[1:]:
            total += np.linalg.norm(j.origin[:3, 3])
        return total + np.linalg.norm(self.tool_transform[:3, 3])


@dataclass(frozen=True)
class RetractionSpec:
    handx_distance: float = 0.05
    worldz_distance: float = 0.05

    def __post_init__(self):
        if self.handx_distance < 0 or self.worldz_distance < 0:
            raise ValueError("retraction distances must be non-negative")


@dataclass(frozen=True)
class IkFeasibility:
    robot_id: int
    tabletopgrip_id: int
    feasibility: bool
    feasibility_handx: bool
    feasibility_handxworldz: bool

    @property
    def all_feasible(self):
        return self.feasibility and self.feasibility_handx and self.feasibility_handxworldz


def fk(robot, q):
    """World pose of the hand for joint vector ``q``."""
    q = np.asarray(q, dtype=float)
    if q.shape != (robot.dof,):
        raise ValueError(f"expected {robot.dof} joint values, got shape {q.shape}")
    if np.any(q < robot.lower - 1e-12) or np.any(q > robot.upper + 1e-12):
        raise JointLimitError("joint vector outside limits")
    T = robot.base_pose.copy()
    for j, qi in zip(robot.joints, q):
        T = T @ j.origin @ tf.make(tf.axis_angle(j.axis, qi))
    return T @ robot.tool_transform


def _rot_batch(axis, angles):
    """Batched Rodrigues rotations about a fixed unit axis, ``(n, 3, 3)``."""
    k = axis / np.linalg.norm(axis)
    K = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    s = np.sin(angles)[:, None, None]
    c = np.cos(angles)[:, None, None]
    return np.eye(3) + s * K + (1.0 - c) * (K @ K)


def _fk_batch(robot, Q):
    """Hand poses plus joint axes/positions (world) for a batch of joint vectors."""
    n = len(Q)
    R = np.broadcast_to(robot.base_pose[:3, :3], (n, 3, 3))
    p = np.broadcast_to(robot.base_pose[:3, 3], (n, 3))
    axes = np.empty((n, robot.dof, 3))
    origins = np.empty((n, robot.dof, 3))
    for i, j in enumerate(robot.joints):
        p = p + R @ j.origin[:3, 3]
        R = R @ j.origin[:3, :3]
        axes[:, i] = R @ (j.axis / np.linalg.norm(j.axis))
        origins[:, i] = p
        R = np.matmul(R, _rot_batch(j.axis, Q[:, i]))
    p = p + R @ robot.tool_transform[:3, 3]
    R = R @ robot.tool_transform[:3, :3]
    return R, p, axes, origins


def _pose_error(R_t, p_t, R, p):
    dp = p_t - p
    R_err = np.matmul(R_t, np.swapaxes(R, 1, 2))
    dr = Rotation.from_matrix(R_err).as_rotvec()
    return dp, dr


def seed_schedule(robot, seeds=N_SEEDS, rng_seed=0):
    """Home configuration followed by ``seeds`` uniform draws within limits."""
    rng = np.random.default_rng(rng_seed)
    lo, hi = robot.lower, robot.upper
    draws = lo + (hi - lo) * rng.random((seeds, robot.dof))
    return np.vstack([robot.home()[None], draws])


@dataclass(frozen=True, eq=False)
class IkResult:
    success: np.ndarray  # (n,) bool
    q: np.ndarray  # (n, dof); rows of failed targets hold the best attempt
    pos_error: np.ndarray
    rot_error: np.ndarray


def ik_solve_batch(
    robot,
    targets,
    seeds=N_SEEDS,
    tol_pos=TOL_POS,
    tol_rot=TOL_ROT,
    damping=DAMPING,
    max_iterations=MAX_ITERATIONS,
    rng_seed=0,
    chunk=2048,
):
    """Solve IK for a stack of ``(n, 4, 4)`` world targets.

    Every target is attempted from the same seed list (home + ``seeds``
    random draws); the first seed, in schedule order, that converges wins.
    Iterates are clipped to the joint limits after every step, and an attempt
    whose error has not dropped by 1% in 25 iterations is abandoned.
    """
    targets = np.asarray(targets, dtype=float).reshape(-1, 4, 4)
    n = len(targets)
    schedule = seed_schedule(robot, seeds, rng_seed)
    out_q = np.zeros((n, robot.dof))
    out_ok = np.zeros(n, dtype=bool)
    out_ep = np.full(n, np.inf)
    out_er = np.full(n, np.inf)
    for start in range(0, n, chunk):
        sl = slice(start, min(n, start + chunk))
        ok, q, ep, er = _solve_chunk(
            robot, targets[sl], schedule, tol_pos, tol_rot, damping, max_iterations
        )
        out_ok[sl], out_q[sl], out_ep[sl], out_er[sl] = ok, q, ep, er
    return IkResult(success=out_ok, q=out_q, pos_error=out_ep, rot_error=out_er)


def _solve_chunk(robot, targets, schedule, tol_pos, tol_rot, damping, max_iterations):
    n = len(targets)
    out_q = np.tile(schedule[0], (n, 1))
    out_ok = np.zeros(n, dtype=bool)
    out_ep = np.full(n, np.inf)
    out_er = np.full(n, np.inf)

    # targets beyond the arm's reach cannot converge; skip the iterations
    first = robot.base_pose @ robot.joints[0].origin
    reachable = np.linalg.norm(targets[:, :3, 3] - first[:3, 3], axis=1) <= robot.reach() + tol_pos
    # seeds are tried in schedule order, each only on targets still unsolved
    for seed in schedule:
        todo = np.flatnonzero(reachable & ~out_ok)
        if len(todo) == 0:
            break
        ok, q, ep, er = _descend(
            robot, targets[todo], seed, tol_pos, tol_rot, damping, max_iterations
        )
        better = ok | (ep + er < out_ep[todo] + out_er[todo])
        rows = todo[better]
        out_ok[rows], out_q[rows], out_ep[rows], out_er[rows] = ok[better], q[better], ep[better], er[better]
    return out_ok, out_q, out_ep, out_er


STALL_WINDOW = 25


def _descend(robot, targets, seed, tol_pos, tol_rot, damping, max_iterations):
    """Damped least-squares from one seed; gives up on attempts that stall."""
    m, dof = len(targets), robot.dof
    lo, hi = robot.lower, robot.upper
    R_t, p_t = targets[:, :3, :3], targets[:, :3, 3]
    Q = np.tile(seed, (m, 1))
    ep = np.full(m, np.inf)
    er = np.full(m, np.inf)
    ok = np.zeros(m, dtype=bool)
    best = np.full(m, np.inf)
    last_gain = np.zeros(m, dtype=int)
    active = np.ones(m, dtype=bool)
    lam2 = damping**2
    eye6 = np.eye(6)
    for it in range(max_iterations + 1):
        idx = np.flatnonzero(active)
        if len(idx) == 0:
            break
        R, p, axes, origins = _fk_batch(robot, Q[idx])
        dp, dr = _pose_error(R_t[idx], p_t[idx], R, p)
        ep[idx] = np.linalg.norm(dp, axis=1)
        er[idx] = np.linalg.norm(dr, axis=1)
        conv = (ep[idx] <= tol_pos) & (er[idx] <= tol_rot)
        ok[idx[conv]] = True
        err = ep[idx] + er[idx]
        gain = err < 0.99 * best[idx]
        best[idx[gain]] = err[gain]
        last_gain[idx[gain]] = it
        stalled = it - last_gain[idx] > STALL_WINDOW
        stop = conv | stalled
        active[idx[stop]] = False
        if it == max_iterations:
            break
        keep = ~stop
        idx, dp, dr, axes, origins, p = idx[keep], dp[keep], dr[keep], axes[keep], origins[keep], p[keep]
        if len(idx) == 0:
            break
        J = np.empty((len(idx), 6, dof))
        J[:, :3] = np.swapaxes(np.cross(axes, p[:, None, :] - origins), 1, 2)
        J[:, 3:] = np.swapaxes(axes, 1, 2)
        e = np.concatenate([dp, dr], axis=1)
        JJt = np.matmul(J, np.swapaxes(J, 1, 2)) + lam2 * eye6
        step = np.matmul(np.swapaxes(J, 1, 2), np.linalg.solve(JJt, e[..., None]))[..., 0]
        norm = np.linalg.norm(step, axis=1, keepdims=True)
        step = np.where(norm > 0.5, step * (0.5 / np.maximum(norm, 1e-300)), step)
        Q[idx] = np.clip(Q[idx] + step, lo, hi)
    return ok, Q, ep, er


def ik_solve(robot, target, seeds=N_SEEDS, tol_pos=TOL_POS, tol_rot=TOL_ROT, rng_seed=0):
    """Joint vector reaching ``target`` within tolerance, or ``None`` when infeasible."""
    res = ik_solve_batch(robot, target[None], seeds, tol_pos, tol_rot, rng_seed=rng_seed)
    return res.q[0] if res.success[0] else None


def retracted_targets(hand_pose, ret):
    """Grip pose, pose backed off along the hand approach axis, then lifted in world z."""
    hand_pose = np.asarray(hand_pose, dtype=float)
    approach = hand_pose[..., :3, 0]
    handx = hand_pose.copy()
    handx[..., :3, 3] = hand_pose[..., :3, 3] - ret.handx_distance * approach
    lifted = handx.copy()
    lifted[..., 2, 3] = handx[..., 2, 3] + ret.worldz_distance
    return hand_pose, handx, lifted


def feasibility_batch(robot, hand_poses, ret, robot_id=0, grip_ids=None, **ik_kwargs):
    """Three IK queries per grip pose, evaluated in one batch."""
    hand_poses = np.asarray(hand_poses, dtype=float).reshape(-1, 4, 4)
    n = len(hand_poses)
    if grip_ids is None:
        grip_ids = range(n)
    base, handx, lifted = retracted_targets(hand_poses, ret)
    res = ik_solve_batch(robot, np.concatenate([base, handx, lifted]), **ik_kwargs)
    ok = res.success.reshape(3, n)
    return [
        IkFeasibility(robot_id, int(gid), bool(ok[0, i]), bool(ok[1, i]), bool(ok[2, i]))
        for i, gid in enumerate(grip_ids)
    ]


def grip_feasibility(robot, grip, ret, robot_id=0, **ik_kwargs):
    return feasibility_batch(robot, grip.hand_pose[None], ret, robot_id, [grip.id], **ik_kwargs)[0]
