"""Mesh construction and refinement invariants."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spikelab import geometry
from spikelab.errors import InvalidDomain
from spikelab.geometry import (DomainSpec, bisect_marked, build_mesh,
                               mesh_quality, refine_near)


def test_domain_constructors():
    d = geometry.unit_disk()
    assert d.diameter == 2.0
    assert d.area == pytest.approx(math.pi)
    assert np.allclose(d.centroid, 0.0)

    r = geometry.rectangle(2.0, 1.0)
    assert r.diameter == pytest.approx(math.hypot(2, 1))
    assert r.area == 2.0
    assert np.allclose(r.centroid, [1.0, 0.5])

    e = geometry.ellipse(2.0, 1.0)
    assert e.diameter == 4.0
    assert e.area == pytest.approx(2 * math.pi)

    p = geometry.polygon([(0, 0), (1, 0), (1, 1), (0, 1)])
    assert p.area == pytest.approx(1.0)
    assert np.allclose(p.centroid, [0.5, 0.5])


def test_invalid_domains():
    with pytest.raises(InvalidDomain):
        DomainSpec("rectangle", width=-1.0, height=1.0)
    with pytest.raises(InvalidDomain):
        DomainSpec("ellipse", semi_axis_a=0.0, semi_axis_b=1.0)
    with pytest.raises(InvalidDomain):
        DomainSpec("hexagon")


def test_contains():
    d = geometry.unit_disk()
    assert d.contains([0.5, 0.0])
    assert not d.contains([1.5, 0.0])
    sq = geometry.unit_square()
    res = sq.contains(np.array([[0.5, 0.5], [2.0, 0.5]]))
    assert res.tolist() == [True, False]


@pytest.mark.parametrize("name,spec", [
    ("disk", geometry.unit_disk()),
    ("square", geometry.unit_square()),
    ("ellipse", geometry.ellipse(2.0, 1.0)),
    ("polygon", geometry.polygon([(0, 0), (1, 0), (0.5, 1)])),
])
def test_build_mesh_invariants(name, spec):
    h = 0.1
    mesh = build_mesh(spec, h)
    mesh.validate()
    assert (mesh.signed_areas() > 0).all()
    # mesh area approximates the domain area (curved domains are inscribed)
    assert abs(mesh.signed_areas().sum() - spec.area) <= 0.05 * spec.area
    q = mesh_quality(mesh)
    assert q.min_angle_deg >= 10.0
    assert q.h_max <= 2.0 * h + 1e-12
    # boundary vertices lie on (or, for curved domains, near) the boundary
    bv = mesh.vertices[mesh.boundary_vertex]
    assert not spec.contains(bv, tol=1e-9).any()


def test_bisect_marked_conforming():
    mesh = build_mesh(geometry.unit_square(), 0.25)
    marked = np.arange(mesh.n_triangles)[::3]
    fine = bisect_marked(mesh, marked)
    fine.validate()
    assert fine.n_vertices > mesh.n_vertices
    assert fine.signed_areas().sum() == pytest.approx(
        mesh.signed_areas().sum())


def test_refine_near_grades_locally():
    mesh = build_mesh(geometry.unit_disk(), 0.2)
    center = np.array([0.3, 0.1])
    fine = refine_near(mesh, center, radius=0.1, levels=3)
    fine.validate()
    d = np.linalg.norm(fine.tri_coords().mean(axis=1) - center, axis=1)
    near = fine.circumdiameters()[d < 0.05]
    far = fine.circumdiameters()[d > 0.6]
    assert near.max() < far.min()


def test_mesh_json_roundtrip():
    mesh = build_mesh(geometry.unit_square(), 0.3)
    clone = type(mesh).from_json(mesh.to_json(), domain=mesh.domain)
    assert np.array_equal(clone.vertices, mesh.vertices)
    assert np.array_equal(clone.triangles, mesh.triangles)
    assert np.array_equal(clone.boundary_vertex, mesh.boundary_vertex)


@given(w=st.floats(0.3, 3.0), h=st.floats(0.3, 3.0))
@settings(max_examples=10, deadline=None)
def test_rectangle_mesh_area_exact(w, h):
    spec = geometry.rectangle(w, h)
    mesh = build_mesh(spec, 0.4 * min(w, h))
    assert mesh.signed_areas().sum() == pytest.approx(w * h, rel=1e-9)
