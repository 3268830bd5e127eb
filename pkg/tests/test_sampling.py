import numpy as np
import pytest
from scipy import stats

from regrasp.geometry import oversegment, sample_surface, shapes
from regrasp.geometry.sampling import barycentric, sample_count


def test_count_rounds_half_up(unit_cube):
    assert sample_count(unit_cube, 10.0) == 60
    assert sample_count(unit_cube, 0.25) == 2  # 1.5 rounds up
    assert sample_count(unit_cube, 1e-3) == 0
    assert sample_surface(unit_cube, 1e-3, 0) == []
    assert sample_count(unit_cube, 1e6, max_samples=100) == 100


def test_density_must_be_positive(unit_cube):
    with pytest.raises(ValueError):
        sample_surface(unit_cube, 0.0, 0)


def test_samples_lie_on_host_triangle(rng):
    mesh = shapes.bumpy_sphere(rng)
    corners = mesh.corners()
    for s in sample_surface(mesh, 5e4, 3):
        w = barycentric(s.position, corners[s.triangle_id])
        assert np.all(w >= -1e-9) and w.sum() == pytest.approx(1.0)
        assert np.allclose(s.normal, mesh.face_normals[s.triangle_id])


def test_area_weighted_chi_square():
    # a box with very different face areas
    mesh = shapes.box((1.0, 2.0, 4.0))
    samples = sample_surface(mesh, 2000.0 / mesh.total_area, 7)
    counts = np.bincount([s.triangle_id for s in samples], minlength=mesh.n_triangles)
    expected = mesh.face_areas / mesh.total_area * len(samples)
    _, p = stats.chisquare(counts, expected)
    assert p > 1e-3


def test_uniform_within_triangle():
    # sqrt map: the first barycentric weight of a uniform point has cdf 1-(1-u)^2
    mesh = shapes.box((1.0, 1.0, 1.0))
    samples = sample_surface(mesh, 3000.0 / 6.0, 11)
    corners = mesh.corners()
    w0 = np.array([barycentric(s.position, corners[s.triangle_id])[0] for s in samples])
    _, p = stats.kstest(w0, lambda u: 1.0 - (1.0 - np.clip(u, 0, 1)) ** 2)
    assert p > 1e-3


def test_seeded_and_facet_tags(unit_cube):
    facets = oversegment(unit_cube)
    a = sample_surface(unit_cube, 50.0, 42, facets=facets)
    b = sample_surface(unit_cube, 50.0, 42, facets=facets)
    assert [s.position.tolist() for s in a] == [s.position.tolist() for s in b]
    for s in a:
        assert len(s.facet_ids) == 1
        assert s.triangle_id in facets[next(iter(s.facet_ids))].triangle_ids
