"""Stable tabletop placements, grasp transfer onto them, and table discretisation."""

from dataclasses import dataclass

import numpy as np

from . import transforms as tf
from .geometry.collide import box_corners
from .geometry.hull import convex_hull

DEFAULT_STABILITY_THRESHOLD = 0.15


@dataclass(frozen=True, eq=False)
class Placement:
    """A resting pose with com projection at the origin and canonical yaw."""

    id: int
    rotmat: np.ndarray
    support_polygon: np.ndarray  # (k, 2), counter-clockwise, table frame
    stability: float  # boundary distance of com projection / com height
    com_height: float
    margin: float


@dataclass(frozen=True, eq=False)
class PlacementGrip:
    """A free grasp re-expressed in a placement's frame (``freetabletopgrip``)."""

    id: int
    placement_id: int
    grasp_id: int
    hand_pose: np.ndarray
    jaw_width: float
    contact_points: np.ndarray  # (2, 3)
    contact_normals: np.ndarray  # (2, 3)


@dataclass(frozen=True, eq=False)
class TabletopPlacement:
    id: int
    placement_id: int
    position: np.ndarray  # (x, y) on the table, metres
    angle_id: int
    world_pose: np.ndarray


@dataclass(frozen=True, eq=False)
class TabletopGrip:
    id: int
    tabletopplacement_id: int
    freeairgrip_id: int
    hand_pose: np.ndarray
    jaw_width: float
    contact_points: np.ndarray
    contact_normals: np.ndarray


def convex_polygon(points):
    """Counter-clockwise hull of 2D points (monotone chain, collinear points dropped)."""
    pts = sorted(set(map(tuple, np.round(np.asarray(points, dtype=float), 12))))
    if len(pts) < 3:
        return np.array(pts)

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1])


def polygon_margin(polygon, point):
    """Signed distance from ``point`` to the boundary of a CCW convex polygon (>0 inside)."""
    a = polygon
    b = np.roll(polygon, -1, axis=0)
    edge = b - a
    length = np.linalg.norm(edge, axis=1)
    inward = np.stack([-edge[:, 1], edge[:, 0]], axis=1) / length[:, None]
    return float(((point - a) * inward).sum(axis=1).min())


def _principal_yaw(polygon):
    """Angle of the polygon's major inertia axis, or 0 when isotropic."""
    c = polygon.mean(axis=0)
    cov = np.zeros((2, 2))
    area = 0.0
    for i in range(len(polygon)):
        p, q = polygon[i] - c, polygon[(i + 1) % len(polygon)] - c
        w = 0.5 * (p[0] * q[1] - p[1] * q[0])
        # second moment of triangle (0, p, q)
        cov += w / 6.0 * (np.outer(p, p) + np.outer(q, q) + 0.5 * (np.outer(p, q) + np.outer(q, p)))
        area += w
    vals, vecs = np.linalg.eigh(cov / area)
    if vals[1] - vals[0] <= 1e-6 * max(vals[1], 1e-300):
        return 0.0
    v = vecs[:, 1]
    if v[0] < -1e-12 or (abs(v[0]) <= 1e-12 and v[1] < 0):
        v = -v
    return float(np.arctan2(v[1], v[0]))


def stable_placements(mesh, stability_threshold=DEFAULT_STABILITY_THRESHOLD):
    """One placement per hull face that supports the com, filtered by stability.

    Coplanar hull triangles (normals within 1e-4 rad) form a single face.
    """
    hull = convex_hull(mesh.vertices)
    placements = []
    for normal, _offset, tri_ids in hull.planar_faces():
        R = tf.align_vectors(normal, [0.0, 0.0, -1.0])
        verts = mesh.vertices @ R.T
        com = R @ mesh.com
        face_ids = np.unique(hull.triangles[tri_ids])
        z0 = float(verts[:, 2].min())
        polygon = convex_polygon(verts[face_ids, :2])
        if len(polygon) < 3:
            continue
        margin = polygon_margin(polygon, com[:2])
        height = float(com[2] - z0)
        if margin <= 0 or height <= 0:
            continue
        stability = margin / height
        if stability <= stability_threshold:
            continue
        yaw = _principal_yaw(polygon - com[:2])
        Rz = tf.rotz(-yaw)[:3, :3]
        rot = Rz @ R
        com_c = rot @ mesh.com
        T = tf.make(rot, [-com_c[0], -com_c[1], -z0])
        support = (polygon - com[:2]) @ Rz[:2, :2].T
        placements.append(
            Placement(
                id=len(placements),
                rotmat=T,
                support_polygon=support,
                stability=stability,
                com_height=height,
                margin=margin,
            )
        )
    return placements


def hand_below_table(gripper, hand_pose, jaw_width, table_z=0.0, tol=1e-9):
    """True when any hand box reaches into the half-space ``z < table_z``."""
    for box_pose, half in gripper.hand_boxes(hand_pose, jaw_width):
        if box_corners(box_pose, half)[:, 2].min() < table_z - tol:
            return True
    return False


def placement_grips(placement, free_grasps, gripper, table_z=0.0, first_id=0):
    """Free grasps moved into the placement frame, minus those hitting the table."""
    out = []
    T = placement.rotmat
    for g in free_grasps:
        pose = T @ g.hand_pose
        if hand_below_table(gripper, pose, g.jaw_width, table_z):
            continue
        pts = tf.apply(T, [g.pair.p0, g.pair.p1])
        nrm = tf.rotate_vectors(T, [g.pair.n0, g.pair.n1])
        out.append(
            PlacementGrip(
                id=first_id + len(out),
                placement_id=placement.id,
                grasp_id=g.id,
                hand_pose=pose,
                jaw_width=g.jaw_width,
                contact_points=pts,
                contact_normals=nrm,
            )
        )
    return out


def table_grid(center=(0.45, 0.0), size=(0.6, 0.9), counts=(7, 13)):
    """Cell centres of a rectangular lattice over the table, x-major order."""
    cx, cy = center
    lx, ly = size
    nx, ny = counts
    xs = cx - lx / 2 + (np.arange(nx) + 0.5) * lx / nx
    ys = cy - ly / 2 + (np.arange(ny) + 0.5) * ly / ny
    return [np.array([x, y]) for x in xs for y in ys]


def uniform_angles(count=8):
    return [2.0 * np.pi * k / count for k in range(count)]


def tabletop_pose(placement, position, angle, table_height=0.0):
    return tf.translate(position[0], position[1], table_height) @ tf.rotz(angle) @ placement.rotmat


def tabletop_discretize(placements, grips, free_grasps, grid, angles, table_height=0.0):
    """Instantiate every placement at every grid position and yaw.

    ``grips`` maps placement id -> its :class:`PlacementGrip` list. Yaw and
    horizontal translation keep table clearance, so grips are re-posed but not
    re-checked. World grip poses are ``world_pose @ free_grasp.hand_pose``.
    """
    if not grid or not angles:
        raise ValueError("grid and angles must be non-empty")
    by_id = {g.id: g for g in free_grasps}
    instances, out = [], []
    for p in placements:
        fgs = [by_id[pg.grasp_id] for pg in grips.get(p.id, ())]
        hands = np.array([g.hand_pose for g in fgs]).reshape(-1, 4, 4)
        points = np.array([[g.pair.p0, g.pair.p1] for g in fgs]).reshape(-1, 2, 3)
        normals = np.array([[g.pair.n0, g.pair.n1] for g in fgs]).reshape(-1, 2, 3)
        for pos in grid:
            for angle_id, angle in enumerate(angles):
                world = tabletop_pose(p, pos, angle, table_height)
                inst = TabletopPlacement(
                    id=len(instances),
                    placement_id=p.id,
                    position=np.asarray(pos, dtype=float),
                    angle_id=angle_id,
                    world_pose=world,
                )
                instances.append(inst)
                R, t = world[:3, :3], world[:3, 3]
                H = world @ hands
                P = points @ R.T + t
                N = normals @ R.T
                for k, fg in enumerate(fgs):
                    out.append(
                        TabletopGrip(
                            id=len(out),
                            tabletopplacement_id=inst.id,
                            freeairgrip_id=fg.id,
                            hand_pose=H[k],
                            jaw_width=fg.jaw_width,
                            contact_points=P[k],
                            contact_normals=N[k],
                        )
                    )
    return instances, out


def world_grip(grip_id, instance_id, free_grasp, world_pose):
    return TabletopGrip(
        id=grip_id,
        tabletopplacement_id=instance_id,
        freeairgrip_id=free_grasp.id,
        hand_pose=world_pose @ free_grasp.hand_pose,
        jaw_width=free_grasp.jaw_width,
        contact_points=tf.apply(world_pose, [free_grasp.pair.p0, free_grasp.pair.p1]),
        contact_normals=tf.rotate_vectors(world_pose, [free_grasp.pair.n0, free_grasp.pair.n1]),
    )
