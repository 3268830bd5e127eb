from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as hst

from oracles import angle_between, brute_force_pairs, hand_hits_mesh, pairs
from regrasp import transforms as tf
from regrasp.geometry import TriangleMesh, oversegment, shapes
from regrasp.geometry.sampling import SamplePoint
from regrasp.graspplan import (
    ContactPair,
    GraspParams,
    GripperModel,
    collision_level1,
    collision_level2,
    filter_samples,
    find_contact_pairs,
    gravity_filter,
    hand_pose_for,
    plan_free_grasps,
    run_grasp_pipeline,
    sweep_segments,
)

CUBE_PARAMS = GraspParams(density=200.0, merge_radius=0.05, d_min=0.05, d_max=0.5)


def _sample(p, normal=(0.0, 0.0, 1.0), tri=0):
    return SamplePoint(np.asarray(p, dtype=float), np.asarray(normal, dtype=float), tri, frozenset())


def _top_facet(cube):
    return next(f for f in oversegment(cube) if f.normal[2] > 0.9)


def _pair(p0, p1):
    p0, p1 = np.asarray(p0, dtype=float), np.asarray(p1, dtype=float)
    w = float(np.linalg.norm(p1 - p0))
    n = (p1 - p0) / w
    return ContactPair(p0, p1, -n, n, 0, 1, w, (p0 + p1) / 2)


def _merge(*meshes):
    verts, tris, off = [], [], 0
    for m in meshes:
        verts.append(m.vertices)
        tris.append(m.triangles + off)
        off += len(m.vertices)
    return TriangleMesh.from_arrays(np.vstack(verts), np.vstack(tris))


# ----------------------------------------------------------------- filter_samples


def test_filter_distance_band(unit_cube):
    f = _top_facet(unit_cube)
    samples = [_sample([0.5 - d, 0.0, 0.5]) for d in (0.001, 0.01, 0.2)]
    kept = filter_samples(unit_cube, f, samples, 0.005, 0.1, 1e-4)
    assert kept == [samples[1]]


def test_filter_merge_keeps_earlier(unit_cube):
    f = _top_facet(unit_cube)
    samples = [_sample([0.45, 0.0, 0.5]), _sample([0.45, 0.004, 0.5])]
    assert filter_samples(unit_cube, f, samples, 0.005, 0.1, 0.005) == [samples[0]]


def test_filter_requires_ordered_band(unit_cube):
    with pytest.raises(ValueError):
        filter_samples(unit_cube, _top_facet(unit_cube), [], 0.1, 0.05, 0.01)


@given(hst.integers(0, 2**32 - 1))
def test_filter_merge_pairwise_oracle(seed):
    rng = np.random.default_rng(seed)
    cube = shapes.box((1.0, 1.0, 1.0))
    f = _top_facet(cube)
    pts = np.column_stack([rng.uniform(-0.5, 0.5, (200, 2)), np.full(200, 0.5)])
    samples = [_sample(p) for p in pts]
    r = 0.08
    kept = filter_samples(cube, f, samples, 1e-9, 1.0, r)
    kp = np.array([s.position for s in kept])
    for a, b in pairs(range(len(kp))):
        assert np.linalg.norm(kp[a] - kp[b]) > r
    ids = {id(s) for s in kept}
    for s in samples:
        if id(s) not in ids:
            assert np.linalg.norm(kp - s.position, axis=1).min() <= r


# ----------------------------------------------------------------- contact pairs


def test_unit_cube_wide_jaw_pairs(unit_cube):
    g = GripperModel(max_jaw_width=1.2)
    res = run_grasp_pipeline(unit_cube, g, CUBE_PARAMS, 0)
    assert res.pairs
    axes = {frozenset((p.facet0, p.facet1)) for p in res.pairs}
    assert len(axes) == 3
    assert all(p.width == pytest.approx(1.0) for p in res.pairs)


def test_unit_cube_narrow_jaw_no_pairs(unit_cube):
    res = run_grasp_pipeline(unit_cube, GripperModel(max_jaw_width=0.8), CUBE_PARAMS, 0)
    assert res.pairs == [] and res.grasps == []


def test_bracket_pairs_match_brute_force(bracket_mesh, gripper):
    res = run_grasp_pipeline(bracket_mesh, gripper, GraspParams(), 0)
    ref = brute_force_pairs(
        bracket_mesh, res.facets, res.filtered, gripper, res.params.antipodal_tolerance, res.params.d_min
    )
    assert len(res.pairs) == len(ref) > 0
    for p, (q0, q1) in zip(res.pairs, ref):
        assert np.allclose(p.p0, q0, atol=1e-9) and np.allclose(p.p1, q1, atol=1e-9)


@settings(max_examples=8)
@given(hst.floats(0.03, 0.07), hst.floats(0.0, 0.03))
def test_pairs_monotone_in_jaw_width(bracket_mesh, small, extra):
    res = run_grasp_pipeline(bracket_mesh, GripperModel(max_jaw_width=small), GraspParams(), 0)
    tol, d_min = res.params.antipodal_tolerance, res.params.d_min
    p_small = res.pairs
    big = GripperModel(max_jaw_width=small + extra)
    p_big = find_contact_pairs(bracket_mesh, res.facets, res.filtered, big, tol, d_min)
    big_keys = {(tuple(p.p0.round(9)), tuple(p.p1.round(9))) for p in p_big}
    big_keys |= {(b, a) for a, b in big_keys}
    for p in p_small:
        assert (tuple(p.p0.round(9)), tuple(p.p1.round(9))) in big_keys


# ----------------------------------------------------------------- gravity


def test_gravity_examples():
    com = np.zeros(3)
    at_com = _pair([-0.01, 0, 0], [0.01, 0, 0])
    far = _pair([0.04, -0.01, 0.03], [0.04, 0.01, 0.03])  # center 0.05 from com
    assert gravity_filter([at_com], com, 1e-6) == [at_com]
    assert gravity_filter([far], com, 0.04) == []
    with pytest.raises(ValueError):
        gravity_filter([far], com, 0.0)


@given(hst.integers(0, 2**32 - 1), hst.floats(0.01, 0.2))
def test_gravity_oracle(seed, lever):
    rng = np.random.default_rng(seed)
    com = rng.normal(size=3) * 0.05
    ps = [_pair(c - [0, 0, 0.01], c + [0, 0, 0.01]) for c in rng.normal(size=(40, 3)) * 0.1]
    kept = gravity_filter(ps, com, lever)
    assert [id(p) for p in kept] == [id(p) for p in ps if np.sqrt(((p.center - com) ** 2).sum()) <= lever]


# ----------------------------------------------------------------- level 1


def test_level1_cube_face_pair_is_free(cube_mesh, gripper):
    pair = _pair([-0.03, 0.0, 0.0], [0.03, 0.0, 0.0])
    assert collision_level1(pair, gripper, cube_mesh)


def _tab_with_obstacle(gap):
    # thin tab grasped across z; a block sits beside the lower sweep at lateral distance ``gap``
    tab = shapes.box((0.04, 0.04, 0.02))
    block = shapes.box((0.04, 0.04, 0.01), center=(gap + 0.02, 0.0, -0.03))
    return _merge(tab, block)


def test_level1_slot_narrower_than_radius(gripper):
    pair = _pair([0.0, 0.0, -0.01], [0.0, 0.0, 0.01])
    assert not collision_level1(pair, gripper, _tab_with_obstacle(0.004))
    assert collision_level1(pair, gripper, _tab_with_obstacle(0.012))


def _dense_points(mesh, tri_ids, n, rng):
    corners = mesh.corners()[tri_ids]
    area = np.linalg.norm(np.cross(corners[:, 1] - corners[:, 0], corners[:, 2] - corners[:, 0]), axis=1)
    pick = rng.choice(len(tri_ids), size=n, p=area / area.sum())
    u = rng.random((n, 2))
    flip = u.sum(axis=1) > 1
    u[flip] = 1 - u[flip]
    c = corners[pick]
    return c[:, 0] + u[:, :1] * (c[:, 1] - c[:, 0]) + u[:, 1:] * (c[:, 2] - c[:, 0])


def test_level1_agrees_with_point_sampling(bracket_mesh, gripper):
    from regrasp.geometry.collide import point_triangle_distance

    res = run_grasp_pipeline(bracket_mesh, gripper, GraspParams(), 0)
    excl = res.params.exclusion_factor * gripper.pad_radius
    r = gripper.pad_sweep_cylinder_radius
    rng = np.random.default_rng(0)
    corners = bracket_mesh.corners()
    checked = {True: 0, False: 0}
    for pair in res.stable_pairs[:60]:
        got = collision_level1(pair, gripper, bracket_mesh, excl)
        n = len(corners)
        d0 = point_triangle_distance(np.broadcast_to(pair.p0, (n, 3)), corners)
        d1 = point_triangle_distance(np.broadcast_to(pair.p1, (n, 3)), corners)
        live = np.flatnonzero((d0 > excl) & (d1 > excl))
        pts = _dense_points(bracket_mesh, live, 10_000, rng)
        hit = False
        for p, q in sweep_segments(pair, gripper):
            d = q - p
            t = np.clip((pts - p) @ d / (d @ d), 0, 1)
            dist = np.linalg.norm(pts - (p + t[:, None] * d), axis=1)
            hit |= bool(np.any(dist <= r))
        if hit:
            assert not got
        checked[got] += 1
    assert checked[True] > 0


# ----------------------------------------------------------------- level 2


def test_level2_thin_plate_all_rotations_free(gripper):
    plate = shapes.box((0.04, 0.04, 0.004))
    pair = _pair([0.0, 0.0, -0.002], [0.0, 0.0, 0.002])
    out = collision_level2(pair, 8, gripper, plate)
    assert [g.rotation_index for g in out] == list(range(8))
    for g in out:
        assert np.allclose(g.hand_pose[:3, 2], pair.axis, atol=1e-6)
        assert g.jaw_width == pytest.approx(0.004 + gripper.jaw_clearance)


def test_level2_matches_exact_oracle_near_wall(bracket_mesh, gripper):
    res = run_grasp_pipeline(bracket_mesh, gripper, GraspParams(), 0)
    corners = bracket_mesh.corners()
    partial = 0
    for pair in res.level1_pairs:
        got = {g.rotation_index for g in collision_level2(pair, 8, gripper, bracket_mesh)}
        jaw = min(pair.width + gripper.jaw_clearance, gripper.max_jaw_width)
        ref = {
            k for k in range(8) if not hand_hits_mesh(gripper, hand_pose_for(pair, k, 8), jaw, corners)
        }
        assert got == ref
        partial += 0 < len(got) < 8
    assert partial > 0


def test_level2_rejects_bad_count(cube_mesh, gripper):
    with pytest.raises(ValueError):
        collision_level2(_pair([-0.03, 0, 0], [0.03, 0, 0]), 0, gripper, cube_mesh)


# ----------------------------------------------------------------- full pipeline


def test_cube_wide_gripper_three_axes(cube_mesh, wide_gripper):
    grasps = plan_free_grasps(cube_mesh, wide_gripper, GraspParams(), 0)
    assert grasps
    axes = {tuple(np.round(np.abs(g.hand_pose[:3, 2]), 6)) for g in grasps}
    assert axes == {(1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0)}
    corners = cube_mesh.corners()
    for g in grasps:
        p = g.pair
        assert angle_between(p.n0, -p.n1) <= np.deg2rad(10.0) + 1e-9
        assert angle_between(-p.n0, p.axis) <= wide_gripper.friction_half_angle + 1e-9
        assert angle_between(p.n1, p.axis) <= wide_gripper.friction_half_angle + 1e-9
        assert not hand_hits_mesh(wide_gripper, g.hand_pose, g.jaw_width, corners)


def test_too_small_jaw_gives_no_grasps(cube_mesh):
    assert plan_free_grasps(cube_mesh, GripperModel(max_jaw_width=0.05), GraspParams(), 0) == []


def test_deterministic(bracket_mesh, gripper):
    a = plan_free_grasps(bracket_mesh, gripper, GraspParams(), 3)
    b = plan_free_grasps(bracket_mesh, gripper, GraspParams(), 3)
    assert len(a) == len(b) > 0
    for x, y in zip(a, b):
        assert x.id == y.id and np.array_equal(x.hand_pose, y.hand_pose)


def test_param_resolution(cube_mesh, gripper):
    p = GraspParams().resolved(cube_mesh, gripper)
    assert p.d_min == pytest.approx(gripper.pad_radius)
    assert p.d_max == gripper.palm_offset
    assert p.max_lever == pytest.approx(0.6 * cube_mesh.bounding_radius())
    assert p.density * cube_mesh.total_area == pytest.approx(
        min(p.max_samples, 4 * cube_mesh.total_area / p.merge_radius**2)
    )
    fixed = replace(GraspParams(), density=400.0).resolved(cube_mesh, gripper)
    assert fixed.density == 400.0


def test_gripper_validation():
    with pytest.raises(ValueError):
        GripperModel(min_jaw_width=0.1, max_jaw_width=0.05)
    with pytest.raises(ValueError):
        GripperModel(pad_sweep_cylinder_radius=0.001)


def test_hand_frame_axes(gripper):
    pair = _pair([0.0, -0.02, 0.0], [0.0, 0.02, 0.0])
    for k in range(4):
        T = hand_pose_for(pair, k, 4)
        assert tf.is_rigid(T)
        assert np.allclose(T[:3, 2], [0, 1, 0])
        assert np.allclose(T[:3, 3], 0.0)
