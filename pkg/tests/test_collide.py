import numpy as np
from hypothesis import given
from hypothesis import strategies as hst
from scipy.spatial.transform import Rotation

from oracles import ray_hit_scalar, triangle_box_overlap_clip
from regrasp import transforms as tf
from regrasp.geometry import collide


@given(hst.integers(0, 2**32 - 1))
def test_ray_matches_scalar_oracle(seed):
    rng = np.random.default_rng(seed)
    corners = rng.normal(size=(30, 3, 3))
    origin = rng.normal(size=3) * 2
    direction = rng.normal(size=3)
    direction /= np.linalg.norm(direction)
    t = collide.ray_triangles(origin, direction, corners)
    for k in range(30):
        ref = ray_hit_scalar(origin, direction, *corners[k])
        if np.isfinite(t[k]):
            assert np.isclose(t[k], ref, atol=1e-9)
        else:
            assert not np.isfinite(ref) or ref == t[k]


@given(hst.integers(0, 2**32 - 1))
def test_sat_matches_clipping_oracle(seed):
    rng = np.random.default_rng(seed)
    pose = tf.make(Rotation.random(random_state=seed).as_matrix(), rng.normal(size=3) * 0.2)
    half = rng.uniform(0.05, 0.3, size=3)
    corners = rng.normal(size=(60, 3, 3)) * 0.3 + pose[:3, 3]
    got = collide.triangles_overlap_box(corners, pose, half)
    for k in range(len(corners)):
        ref = triangle_box_overlap_clip(corners[k], pose, half)
        if got[k] != ref:
            # disagreement is only allowed for grazing contact
            shrunk = triangle_box_overlap_clip(corners[k], pose, half * (1 - 1e-6))
            grown = triangle_box_overlap_clip(corners[k], pose, half * (1 + 1e-6))
            assert shrunk != grown


def test_box_corners():
    c = collide.box_corners(tf.translate(1, 0, 0), [0.5, 1, 2])
    assert np.allclose(c.min(axis=0), [0.5, -1, -2]) and np.allclose(c.max(axis=0), [1.5, 1, 2])


def test_first_hit_exclusion():
    corners = np.array([[[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 0, 1], [1, 0, 1], [0, 1, 1]]], dtype=float)
    t, k = collide.first_hit(np.array([0.2, 0.2, -1.0]), np.array([0, 0, 1.0]), corners)
    assert k == 0 and np.isclose(t, 1.0)
    t, k = collide.first_hit(np.array([0.2, 0.2, -1.0]), np.array([0, 0, 1.0]), corners, exclude=0)
    assert k == 1 and np.isclose(t, 2.0)
    assert collide.first_hit(np.array([5.0, 5, -1]), np.array([0, 0, 1.0]), corners) == (np.inf, -1)


@given(hst.integers(0, 2**32 - 1))
def test_point_triangle_distance_vs_dense_sampling(seed):
    rng = np.random.default_rng(seed)
    tri = rng.normal(size=(1, 3, 3))
    p = rng.normal(size=(1, 3)) * 2
    d = collide.point_triangle_distance(p, tri)[0]
    u = rng.random((20000, 2))
    flip = u.sum(axis=1) > 1
    u[flip] = 1 - u[flip]
    a, b, c = tri[0]
    pts = a + u[:, :1] * (b - a) + u[:, 1:] * (c - a)
    dense = np.linalg.norm(pts - p, axis=1).min()
    assert d <= dense + 1e-12
    assert dense - d < 0.05 * max(1.0, np.ptp(tri[0], axis=0).max())


@given(hst.integers(0, 2**32 - 1))
def test_segment_triangle_distance_vs_sampling(seed):
    rng = np.random.default_rng(seed)
    tri = rng.normal(size=(1, 3, 3))
    p, q = rng.normal(size=(2, 3)) * 2
    d = collide.segment_triangle_distance(p, q, tri)[0]
    s = np.linspace(0, 1, 400)[:, None]
    seg = p + s * (q - p)
    ref = collide.point_triangle_distance(seg, np.repeat(tri, len(seg), axis=0)).min()
    assert d <= ref + 1e-9
    assert ref - d <= np.linalg.norm(q - p) / 399 + 1e-9
