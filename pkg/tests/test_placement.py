import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as hst

from regrasp import transforms as tf
from regrasp.geometry import DegenerateHullError, TriangleMesh, shapes
from regrasp.graspplan import GraspParams, plan_free_grasps
from regrasp.placement import (
    convex_polygon,
    hand_below_table,
    placement_grips,
    polygon_margin,
    stable_placements,
    table_grid,
    tabletop_discretize,
    tabletop_pose,
    uniform_angles,
)


def _inside_strict(polygon, p):
    n = len(polygon)
    for i in range(n):
        a, b = polygon[i], polygon[(i + 1) % n]
        if (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) <= 0:
            return False
    return True


def test_unit_cube_six_placements(unit_cube):
    ps = stable_placements(unit_cube)
    assert len(ps) == 6
    for p in ps:
        assert p.stability == pytest.approx(1.0)
        assert p.com_height == pytest.approx(0.5)
        v = tf.apply(p.rotmat, unit_cube.vertices)
        assert v[:, 2].min() == pytest.approx(0.0, abs=1e-12)
        assert np.allclose(tf.apply(p.rotmat, unit_cube.com[None])[0, :2], 0.0, atol=1e-12)


def test_tall_box_drops_end_placements():
    box = shapes.box((0.1, 0.1, 1.0))
    kept = stable_placements(box, 0.15)
    assert len(kept) == 4
    for p in kept:
        assert p.com_height == pytest.approx(0.05)
    everything = stable_placements(box, 0.05)
    ends = [p for p in everything if p.com_height == pytest.approx(0.5)]
    assert len(ends) == 2 and all(p.stability == pytest.approx(0.1) for p in ends)


@given(hst.integers(0, 2**32 - 1))
def test_com_strictly_inside_support(seed):
    mesh = shapes.random_convex(np.random.default_rng(seed))
    for p in stable_placements(mesh, 0.0):
        com = tf.apply(p.rotmat, mesh.com[None])[0]
        assert _inside_strict(p.support_polygon, com[:2])
        v = tf.apply(p.rotmat, mesh.vertices)
        # support polygon vertices rest on the table
        assert v[:, 2].min() == pytest.approx(0.0, abs=1e-9)
        assert p.stability > 0 and tf.is_rigid(p.rotmat)


def test_degenerate_hull():
    flat = TriangleMesh.from_arrays(
        np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]], dtype=float),
        np.array([[0, 1, 2], [1, 3, 2]]),
    )
    with pytest.raises(DegenerateHullError):
        stable_placements(flat)


def test_polygon_helpers():
    sq = convex_polygon(np.array([[0, 0], [1, 0], [1, 1], [0, 1], [0.5, 0.5], [0.5, 0]], dtype=float))
    assert len(sq) == 4
    assert polygon_margin(sq, np.array([0.5, 0.5])) == pytest.approx(0.5)
    assert polygon_margin(sq, np.array([0.9, 0.5])) == pytest.approx(0.1)
    assert polygon_margin(sq, np.array([2.0, 0.5])) < 0


def _lowest_corner(gripper, pose, jaw):
    signs = np.array([[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)], dtype=float)
    return min(float(tf.apply(bp, signs * half)[:, 2].min()) for bp, half in gripper.hand_boxes(pose, jaw))


def test_placement_grips_table_filter(cube_mesh, wide_gripper):
    grasps = plan_free_grasps(cube_mesh, wide_gripper, GraspParams(), 0)
    for p in stable_placements(cube_mesh):
        kept = placement_grips(p, grasps, wide_gripper)
        kept_ids = {g.grasp_id for g in kept}
        for g in grasps:
            pose = p.rotmat @ g.hand_pose
            assert (g.id in kept_ids) == (_lowest_corner(wide_gripper, pose, g.jaw_width) >= -1e-9)
            # a vertical closing axis puts one finger under the cube
            if abs(pose[2, 2]) > 0.99:
                assert g.id not in kept_ids
        assert kept and all(abs(k.hand_pose[2, 2]) < 1e-9 for k in kept)
        for k in kept:
            pair = grasps[k.grasp_id].pair
            assert np.allclose(k.contact_points, tf.apply(p.rotmat, [pair.p0, pair.p1]))


def test_hand_below_table_half_space(gripper):
    pose = tf.translate(0, 0, 0.0)
    assert hand_below_table(gripper, pose, 0.05)
    assert not hand_below_table(gripper, tf.translate(0, 0, 0.2), 0.05)


def test_discretize_counts_and_poses(cube_mesh, wide_gripper):
    grasps = plan_free_grasps(cube_mesh, wide_gripper, GraspParams(), 0)
    ps = stable_placements(cube_mesh)
    grips, nid = {}, 0
    for p in ps:
        grips[p.id] = placement_grips(p, grasps, wide_gripper, first_id=nid)
        nid += len(grips[p.id])
    grid = table_grid(counts=(2, 3))
    angles = uniform_angles(4)
    inst, tg = tabletop_discretize(ps, grips, grasps, grid, angles, table_height=0.7)
    assert len(inst) == len(ps) * 6 * 4
    assert len(tg) == 6 * 4 * sum(len(g) for g in grips.values())
    by_id = {g.id: g for g in grasps}
    for t in tg[:: max(1, len(tg) // 200)]:
        i = inst[t.tabletopplacement_id]
        p = ps[i.placement_id]
        # independent chain: yaw the placed grasp then translate
        x, y = i.position
        a = angles[i.angle_id]
        c, s = np.cos(a), np.sin(a)
        Rz = np.array([[c, -s, 0, 0], [s, c, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]])
        T = Rz @ p.rotmat
        T[:3, 3] += [x, y, 0.7]
        assert np.allclose(t.hand_pose, T @ by_id[t.freeairgrip_id].hand_pose, atol=1e-12)
        assert t.hand_pose[2, 3] > 0.7


def test_identity_instance(unit_cube):
    p = stable_placements(unit_cube)[0]
    assert np.allclose(tabletop_pose(p, (0.0, 0.0), 0.0), p.rotmat)
    with pytest.raises(ValueError):
        tabletop_discretize([p], {}, [], [], [0.0])


def test_grid_and_angles():
    g = table_grid((0.45, 0.0), (0.6, 0.9), (7, 13))
    assert len(g) == 91
    assert np.allclose(np.mean(g, axis=0), [0.45, 0.0])
    assert uniform_angles(8)[2] == pytest.approx(np.pi / 2)
