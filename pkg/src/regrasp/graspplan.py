"""Antipodal parallel-jaw grasp synthesis on segmented meshes.

Pipeline: segment -> sample the whole surface once -> per-facet distance and
near-neighbour filters -> ray-cast contact pairs between antiparallel facets
-> gravity-lever filter -> swept-cylinder check -> full-hand check at sampled
rotations about the contact axis.

Contact normals are the mesh's outward face normals; the closing axis points
from ``p0`` to ``p1`` (i.e. along ``-n0``).
"""

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial import cKDTree

from . import transforms as tf
from .geometry import collide
from .geometry.sampling import MAX_SAMPLES, sample_surface
from .geometry.segmentation import (
    DEFAULT_TAU,
    boundary_distance,
    oversegment,
    segment_conventional,
)


@dataclass(frozen=True)
class GripperModel:
    """Parallel-jaw hand. Hand frame: x = approach, z = jaw-closing axis.

    The hand origin is the midpoint between the finger pads. Fingers are
    boxes whose inner faces sit at ``z = +-jaw_width / 2`` and whose tips
    reach ``pad_half_extents[0]`` past the origin along x; the palm box's
    front face is at ``x = -palm_offset``.
    """

    max_jaw_width: float = 0.08
    min_jaw_width: float = 0.0
    pad_half_extents: tuple = (0.005, 0.005)
    pad_sweep_cylinder_radius: float = 0.0071
    finger_box: tuple = (0.02, 0.008, 0.004)
    palm_box: tuple = (0.02, 0.025, 0.055)
    palm_offset: float = 0.03
    friction_half_angle: float = float(np.deg2rad(17.0))
    jaw_clearance: float = 0.002
    name: str = "parallel-jaw"

    def __post_init__(self):
        if not self.min_jaw_width < self.max_jaw_width:
            raise ValueError("min_jaw_width must be smaller than max_jaw_width")
        if self.pad_sweep_cylinder_radius < self.pad_radius - 1e-12:
            raise ValueError(
                "pad_sweep_cylinder_radius must cover the pad footprint "
                f"(>= {self.pad_radius:.6g})"
            )

    @property
    def pad_radius(self):
        """Circumscribed radius of the rectangular pad footprint."""
        return float(np.hypot(*self.pad_half_extents))

    def local_boxes(self, jaw_width):
        """``[(center, half_extents), ...]`` in the hand frame: palm, finger0, finger1."""
        fx, fy, fz = self.finger_box
        px, py, pz = self.palm_box
        tip = self.pad_half_extents[0]
        palm = (np.array([-self.palm_offset - px, 0.0, 0.0]), np.array([px, py, pz]))
        f0 = (np.array([tip - fx, 0.0, -(jaw_width / 2 + fz)]), np.array([fx, fy, fz]))
        f1 = (np.array([tip - fx, 0.0, jaw_width / 2 + fz]), np.array([fx, fy, fz]))
        return [palm, f0, f1]

    def hand_boxes(self, hand_pose, jaw_width):
        """World-frame ``[(box_pose, half_extents), ...]`` for a hand pose."""
        out = []
        for center, half in self.local_boxes(jaw_width):
            out.append((hand_pose @ tf.translate(center), half))
        return out

    def hand_reach(self):
        """Radius of a sphere about the hand origin containing every box at max opening."""
        r = 0.0
        for center, half in self.local_boxes(self.max_jaw_width):
            r = max(r, float(np.linalg.norm(np.abs(center) + half)))
        return r


@dataclass(frozen=True)
class GraspParams:
    tau: float = float(DEFAULT_TAU)
    segmentation: str = "over"  # or "conventional"
    density: float = None  # samples per m^2; None derives it from surface area
    max_samples: int = MAX_SAMPLES
    merge_radius: float = 0.008
    d_min: float = None  # None -> pad circumscribed radius
    d_max: float = None  # None -> palm offset
    antipodal_tolerance: float = float(np.deg2rad(10.0))
    rotation_samples: int = 8
    max_lever: float = None  # None -> 0.6 * bounding-sphere radius
    exclusion_factor: float = 1.5

    def resolved(self, mesh, gripper):
        """Copy with every ``None`` default replaced by its mesh/gripper-derived value."""
        density = self.density
        if density is None:
            target = min(self.max_samples, 4.0 * mesh.total_area / self.merge_radius**2)
            density = target / mesh.total_area
        return replace(
            self,
            density=float(density),
            d_min=gripper.pad_radius if self.d_min is None else self.d_min,
            d_max=gripper.palm_offset if self.d_max is None else self.d_max,
            max_lever=0.6 * mesh.bounding_radius() if self.max_lever is None else self.max_lever,
        )


@dataclass(frozen=True, eq=False)
class ContactPair:
    p0: np.ndarray
    p1: np.ndarray
    n0: np.ndarray
    n1: np.ndarray
    facet0: int
    facet1: int
    width: float
    center: np.ndarray

    @property
    def axis(self):
        return (self.p1 - self.p0) / self.width


@dataclass(frozen=True, eq=False)
class GraspConfig:
    id: int
    pair: ContactPair
    hand_pose: np.ndarray
    jaw_width: float
    rotation_index: int
    pair_id: int = -1


@dataclass(eq=False)
class GraspPlanResult:
    params: GraspParams
    facets: list
    samples: list
    filtered: dict
    pairs: list = field(default_factory=list)
    stable_pairs: list = field(default_factory=list)
    level1_pairs: list = field(default_factory=list)
    grasps: list = field(default_factory=list)


def filter_samples(mesh, facet, samples, d_min, d_max, merge_radius):
    """Distance-to-boundary band filter followed by greedy fixed-radius merging."""
    if not 0 < d_min < d_max:
        raise ValueError("require 0 < d_min < d_max")
    if not samples:
        return []
    pos = np.array([s.position for s in samples])
    dist = boundary_distance(mesh, facet, pos)
    band = np.flatnonzero((dist >= d_min) & (dist <= d_max))
    if len(band) == 0:
        return []
    kept_pos = pos[band]
    neighbours = cKDTree(kept_pos).query_ball_point(kept_pos, r=merge_radius)
    removed = np.zeros(len(band), dtype=bool)
    kept = []
    for i in range(len(band)):
        if removed[i]:
            continue
        kept.append(samples[band[i]])
        removed[neighbours[i]] = True
    return kept


def find_contact_pairs(mesh, facets, filtered, gripper, antipodal_tolerance, d_min):
    """Project filtered samples through the object onto antiparallel facets.

    ``filtered`` maps facet index -> list of samples kept on that facet.
    A pair is emitted when the first surface hit along ``-n0`` lies on the
    partner facet at least ``d_min`` inside its boundary, the gap fits the
    jaw, both normals are antipodal within tolerance and inside the friction
    cone about the closing axis. Geometric duplicates (including the mirrored
    B->A pair) are dropped, keeping the first in (facet, sample) order.
    """
    cos_anti = np.cos(antipodal_tolerance)
    cos_fric = np.cos(gripper.friction_half_angle)
    normals = np.array([f.normal for f in facets]) if facets else np.zeros((0, 3))
    corners = mesh.corners()
    ray_cache = {}
    pairs = []
    seen = _PairIndex()
    for a in sorted(filtered):
        if not filtered[a]:
            continue
        partners = np.flatnonzero(normals @ normals[a] <= -cos_anti + 1e-12)
        if len(partners) == 0:
            continue
        for s in filtered[a]:
            key = id(s)
            if key not in ray_cache:
                ray_cache[key] = collide.first_hit(s.position, -s.normal, corners, exclude=s.triangle_id)
            t, tri = ray_cache[key]
            if tri < 0 or not gripper.min_jaw_width <= t <= gripper.max_jaw_width:
                continue
            n0 = s.normal
            n1 = mesh.face_normals[tri]
            if -(n0 @ n1) < cos_anti - 1e-12:
                continue
            axis = -n0
            if abs(n0 @ axis) < cos_fric or abs(n1 @ axis) < cos_fric:
                continue
            p1 = s.position - t * n0
            for b in partners:
                if tri not in facets[b].triangle_ids:
                    continue
                if boundary_distance(mesh, facets[b], p1[None])[0] < d_min:
                    continue
                pair = ContactPair(
                    p0=s.position.copy(),
                    p1=p1,
                    n0=n0.copy(),
                    n1=n1.copy(),
                    facet0=int(a),
                    facet1=int(b),
                    width=float(t),
                    center=(s.position + p1) / 2.0,
                )
                if not seen.contains(pair.p0, pair.p1):
                    pairs.append(pair)
                    seen.add(pair.p0, pair.p1)
                break
    return pairs


class _PairIndex:
    """Grid hash of (p0, p1) endpoints for order-insensitive duplicate lookup."""

    def __init__(self, tol=1e-6):
        self.tol = tol
        self.cells = {}

    def _cell(self, p):
        return tuple(np.floor(p / self.tol).astype(np.int64))

    def add(self, p0, p1):
        self.cells.setdefault(self._cell(p0), []).append((p0, p1))

    def _match(self, a, b):
        cx, cy, cz = self._cell(a)
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                for dz in (-1, 0, 1):
                    for q0, q1 in self.cells.get((cx + dx, cy + dy, cz + dz), ()):
                        if np.abs(q0 - a).max() <= self.tol and np.abs(q1 - b).max() <= self.tol:
                            return True
        return False

    def contains(self, p0, p1):
        return self._match(p0, p1) or self._match(p1, p0)


def gravity_filter(pairs, com, max_lever):
    """Keep pairs whose contact center lies within ``max_lever`` of the com."""
    if max_lever <= 0:
        raise ValueError("max_lever must be positive")
    return [p for p in pairs if np.linalg.norm(com - p.center) <= max_lever]


def sweep_segments(pair, gripper):
    """Axis segments of the two pad-sweep cylinders (contact -> fully open)."""
    z = pair.axis
    half_open = gripper.max_jaw_width / 2.0
    return [
        (pair.p0, pair.center - z * half_open),
        (pair.p1, pair.center + z * half_open),
    ]


def _bounding_spheres(mesh):
    corners = mesh.corners()
    centers = corners.mean(axis=1)
    radii = np.linalg.norm(corners - centers[:, None], axis=2).max(axis=1)
    return corners, centers, radii


def collision_level1(pair, gripper, mesh, exclusion_radius=None, _cache=None):
    """True when both pad-sweep cylinders are clear of the mesh.

    Each cylinder is bounded by a capsule of radius
    ``pad_sweep_cylinder_radius`` around its axis segment, so the test is
    conservative and independent of the hand's rotation about the axis.
    Triangles within ``exclusion_radius`` of either contact are ignored
    since the pads touch the surface there.
    """
    if exclusion_radius is None:
        exclusion_radius = 1.5 * gripper.pad_radius
    corners, centers, radii = _cache or _bounding_spheres(mesh)
    r = gripper.pad_sweep_cylinder_radius
    for p, q in sweep_segments(pair, gripper):
        near = (
            _point_segment_distance(centers, p, q) - radii <= r
        )
        idx = np.flatnonzero(near)
        if len(idx) == 0:
            continue
        sub = corners[idx]
        d0 = collide.point_triangle_distance(np.broadcast_to(pair.p0, (len(idx), 3)), sub)
        d1 = collide.point_triangle_distance(np.broadcast_to(pair.p1, (len(idx), 3)), sub)
        keep = (d0 > exclusion_radius) & (d1 > exclusion_radius)
        if not keep.any():
            continue
        if np.any(collide.segment_triangle_distance(p, q, sub[keep]) <= r):
            return False
    return True


def _point_segment_distance(points, p, q):
    d = q - p
    dd = d @ d
    if dd <= 0:
        return np.linalg.norm(points - p, axis=1)
    t = np.clip((points - p) @ d / dd, 0.0, 1.0)
    return np.linalg.norm(points - (p + t[:, None] * d), axis=1)


def hand_pose_for(pair, rotation_index, rotation_samples):
    """Hand frame for rotation ``k`` about the contact axis, origin at the pair center."""
    z = pair.axis
    u = tf.perpendicular(z)
    w = np.cross(z, u)
    theta = 2.0 * np.pi * rotation_index / rotation_samples
    x = np.cos(theta) * u + np.sin(theta) * w
    y = np.cross(z, x)
    return tf.make(np.column_stack([x, y, z]), pair.center)


def jaw_width_for(pair, gripper):
    return min(pair.width + gripper.jaw_clearance, gripper.max_jaw_width)


def hand_collides(gripper, hand_pose, jaw_width, corners):
    for box_pose, half in gripper.hand_boxes(hand_pose, jaw_width):
        if np.any(collide.triangles_overlap_box(corners, box_pose, half)):
            return True
    return False


def collision_level2(pair, rotation_samples, gripper, mesh, _cache=None):
    """Full hand (palm + fingers) test at each sampled rotation about the contact axis."""
    if rotation_samples < 1:
        raise ValueError("rotation_samples must be >= 1")
    corners, centers, radii = _cache or _bounding_spheres(mesh)
    near = np.linalg.norm(centers - pair.center, axis=1) - radii <= gripper.hand_reach()
    sub = corners[near]
    jaw = jaw_width_for(pair, gripper)
    out = []
    for k in range(rotation_samples):
        pose = hand_pose_for(pair, k, rotation_samples)
        if not hand_collides(gripper, pose, jaw, sub):
            out.append(GraspConfig(id=-1, pair=pair, hand_pose=pose, jaw_width=jaw, rotation_index=k))
    return out


def segment(mesh, params):
    grower = oversegment if params.segmentation == "over" else segment_conventional
    return grower(mesh, params.tau)


def run_grasp_pipeline(mesh, gripper, params=None, rng_seed=0):
    """Every stage of free-grasp planning, with intermediates kept for inspection."""
    params = (params or GraspParams()).resolved(mesh, gripper)
    facets = segment(mesh, params)
    samples = sample_surface(
        mesh, params.density, rng_seed, facets=facets, max_samples=params.max_samples
    )
    by_facet = {}
    for s in samples:
        for fid in s.facet_ids:
            by_facet.setdefault(fid, []).append(s)
    filtered = {
        fid: filter_samples(mesh, facets[fid], by_facet[fid], params.d_min, params.d_max, params.merge_radius)
        for fid in sorted(by_facet)
    }
    result = GraspPlanResult(params=params, facets=facets, samples=samples, filtered=filtered)
    result.pairs = find_contact_pairs(
        mesh, facets, filtered, gripper, params.antipodal_tolerance, params.d_min
    )
    result.stable_pairs = gravity_filter(result.pairs, mesh.com, params.max_lever)
    cache = _bounding_spheres(mesh)
    excl = params.exclusion_factor * gripper.pad_radius
    result.level1_pairs = [
        p for p in result.stable_pairs if collision_level1(p, gripper, mesh, excl, _cache=cache)
    ]
    grasps = []
    for pair_id, pair in enumerate(result.level1_pairs):
        for g in collision_level2(pair, params.rotation_samples, gripper, mesh, _cache=cache):
            grasps.append(replace(g, id=len(grasps), pair_id=pair_id))
    result.grasps = grasps
    return result


def plan_free_grasps(mesh, gripper, params=None, rng_seed=0):
    """Collision-free, force-closed, gravity-resistant grasps in the object frame."""
    return run_grasp_pipeline(mesh, gripper, params, rng_seed).grasps
