import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stokes_dg_lab.mesh import DOMAIN_AREA, Mesh, build_domain, mesh_metrics, refine_uniform, relabel

SQ2 = np.sqrt(2.0)


def signed_areas(mesh):
    v = mesh.vertices[mesh.triangles]
    e1, e2 = v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]
    return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])


def test_unit_square_counts():
    m1 = build_domain("unit_square", 1)
    assert (m1.n_vertices, m1.n_triangles) == (4, 2)
    assert m1.areas().sum() == pytest.approx(1.0, rel=1e-12)
    m2 = build_domain("unit_square", 2)
    assert (m2.n_vertices, m2.n_triangles) == (9, 8)


def test_l_shape_counts():
    m = build_domain("l_shape", 1)
    assert m.n_triangles == 6
    assert m.areas().sum() == pytest.approx(0.75, rel=1e-12)
    assert mesh_metrics(m).h_max == pytest.approx(SQ2 / 2)
    # nothing inside the removed quadrant
    c = m.vertices[m.triangles].mean(axis=1)
    assert not np.any((c[:, 0] > 0.5) & (c[:, 1] > 0.5))


@pytest.mark.parametrize("bad", [0, -1, 2.5])
def test_build_rejects_bad_n(bad):
    with pytest.raises(ValueError):
        build_domain("unit_square", bad)


def test_build_rejects_unknown_domain():
    with pytest.raises(ValueError):
        build_domain("disk", 2)


@pytest.mark.parametrize("kind", ["unit_square", "l_shape"])
@pytest.mark.parametrize("n", [1, 2, 3, 5])
def test_mesh_invariants(kind, n):
    m = build_domain(kind, n)
    assert np.all(signed_areas(m) > 0)
    counts = m.edge_triangle_count
    assert set(np.unique(counts)) <= {1, 2}
    # boundary edges lie on the domain boundary
    mid = m.vertices[m.boundary_edges].mean(axis=1)
    on_outer = (np.isclose(mid, 0) | np.isclose(mid, 1)).any(axis=1)
    if kind == "l_shape":
        re = (np.isclose(mid[:, 0], 0.5) & (mid[:, 1] > 0.5)) | (np.isclose(mid[:, 1], 0.5) & (mid[:, 0] > 0.5))
        on_outer |= re
    assert on_outer.all()
    assert m.areas().sum() == pytest.approx(DOMAIN_AREA[kind], rel=1e-12)
    # Euler relation for a simply connected triangulated domain
    assert m.n_vertices - m.n_edges + m.n_triangles == 1


def test_refine_two_triangles():
    m = build_domain("unit_square", 1)
    r = refine_uniform(m)
    assert r.n_triangles == 8
    assert mesh_metrics(m).h_max == pytest.approx(SQ2)
    assert mesh_metrics(r).h_max == pytest.approx(SQ2 / 2)
    assert r.areas().sum() == pytest.approx(1.0, rel=1e-12)
    assert r.domain_kind == m.domain_kind
    assert np.array_equal(r.parent, np.repeat(np.arange(2), 4))


@pytest.mark.parametrize("kind", ["unit_square", "l_shape"])
def test_refinement_preserves_metrics(kind):
    m = build_domain(kind, 2)
    r = refine_uniform(m)
    a, b = mesh_metrics(m), mesh_metrics(r)
    assert b.h_max == pytest.approx(a.h_max / 2)
    assert b.shape_regularity == pytest.approx(a.shape_regularity, rel=1e-12)
    assert b.quasi_uniformity == pytest.approx(a.quasi_uniformity, rel=1e-12)
    assert r.areas().sum() == pytest.approx(DOMAIN_AREA[kind], rel=1e-12)
    # children of each parent tile the parent
    assert np.allclose(np.bincount(r.parent, r.areas()), m.areas())
    # red refinement of the structured mesh is again the structured mesh (up to labels)
    assert r.n_vertices == build_domain(kind, 4).n_vertices


def test_metrics_unit_square():
    met = mesh_metrics(build_domain("unit_square", 2))
    assert met.h_max == pytest.approx(SQ2 / 2)
    assert met.quasi_uniformity == 1.0
    assert 0 < met.h_min <= met.h_max


def test_shape_regularity_independent_of_n():
    # right isosceles triangle with legs a: diameter a*sqrt2, inradius a(2 - sqrt2)/2
    expected = SQ2 / ((2 - SQ2) / 2)
    for n in (1, 2, 4, 7):
        assert mesh_metrics(build_domain("unit_square", n)).shape_regularity == pytest.approx(expected, rel=1e-12)


def test_mesh_rejects_degenerate_triangle():
    with pytest.raises(ValueError):
        Mesh(np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]), np.array([[0, 1, 2]]), "unit_square")


def test_mesh_is_immutable():
    m = build_domain("unit_square", 2)
    with pytest.raises(ValueError):
        m.vertices[0, 0] = 5.0


def test_dump_roundtrip(tmp_path):
    m = build_domain("l_shape", 2)
    path = tmp_path / "mesh.json"
    m.dump(path)
    data = json.loads(path.read_text())
    assert data["domain_kind"] == "l_shape"
    assert np.allclose(data["vertices"], m.vertices)
    assert np.array_equal(data["triangles"], m.triangles)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 6), st.sampled_from(["unit_square", "l_shape"]), st.integers(0, 2**31))
def test_relabel_preserves_geometry(n, kind, seed):
    m = build_domain(kind, n)
    perm = np.random.default_rng(seed).permutation(m.n_vertices)
    r = relabel(m, perm)
    assert r.areas().sum() == pytest.approx(m.areas().sum(), rel=1e-12)
    assert np.sort(r.areas()) == pytest.approx(np.sort(m.areas()))
    assert r.n_edges == m.n_edges
    assert len(r.boundary_edges) == len(m.boundary_edges)
