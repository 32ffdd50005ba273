"""BVH construction invariants and traversal equivalence with linear scan."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

import difftrace as dt
from difftrace.bvh import aabb_of, build, intersect
from difftrace.kernels import get_backend
from difftrace.mathcore import Vec3
from difftrace.renderer import Ray, compile_geometry
from difftrace.scene import SceneError
from difftrace.bench import benchmark_mesh

from conftest import random_triangles


def test_aabb_of_triangle():
    tri = dt.Triangle(Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0))
    box = aabb_of(tri)
    assert (box.vmin.x, box.vmin.y, box.vmin.z) == (0.0, 0.0, 0.0)
    assert (box.vmax.x, box.vmax.y, box.vmax.z) == (1.0, 1.0, 0.0)


def test_aabb_of_sphere():
    box = aabb_of(dt.Sphere(center=Vec3(1, 2, 3), radius=2.0))
    assert (box.vmin.x, box.vmin.y, box.vmin.z) == (-1.0, 0.0, 1.0)
    assert (box.vmax.x, box.vmax.y, box.vmax.z) == (3.0, 4.0, 5.0)


def test_flat_aabb_is_legal():
    tri = dt.Triangle(Vec3(0, 0, 1), Vec3(1, 0, 1), Vec3(0, 1, 1))
    box = aabb_of(tri)
    assert box.vmin.z == box.vmax.z == 1.0


def test_single_primitive_is_leaf_root():
    tree = build([dt.Triangle(Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0))])
    nodes = tree.nodes()
    assert len(nodes) == 1
    assert nodes[0].is_leaf and nodes[0].count == 1


def test_empty_list_errors():
    with pytest.raises(SceneError):
        build([])


def test_spaced_spheres_root_spans_all():
    spheres = [dt.Sphere(center=Vec3(3.0 * i, 0.0, 0.0), radius=0.5)
               for i in range(8)]
    tree = build(spheres)
    nodes = tree.nodes()
    assert len(nodes) > 1  # split at least once
    root = nodes[0]
    assert root.aabb.vmin.x <= -0.5 + 1e-6
    assert root.aabb.vmax.x >= 21.5 - 1e-6


def test_every_primitive_in_exactly_one_leaf():
    mesh = benchmark_mesh()
    assert len(mesh) == 137
    tree = build(mesh)
    seen = []
    for leaf in tree.leaf_primitives():
        assert 1 <= len(leaf) <= 4
        seen.extend(leaf)
    assert sorted(seen) == list(range(137))


def test_parent_aabb_contains_children():
    rng = np.random.default_rng(8)
    tree = build(random_triangles(rng, 40))
    nodes = tree.nodes()
    for n in nodes:
        if n.is_leaf:
            continue
        for ci in (n.left, n.right):
            c = nodes[ci]
            for axis in "xyz":
                assert getattr(n.aabb.vmin, axis) <= \
                    getattr(c.aabb.vmin, axis) + 1e-6
                assert getattr(n.aabb.vmax, axis) >= \
                    getattr(c.aabb.vmax, axis) - 1e-6


def test_build_is_deterministic():
    rng = np.random.default_rng(13)
    tris = random_triangles(rng, 25)
    a, b = build(tris), build(tris)
    assert np.array_equal(a.prim_index, b.prim_index)
    assert np.array_equal(a.nmin, b.nmin)
    assert np.array_equal(a.left, b.left)


def _random_rays(rng, n):
    o = rng.uniform(-4, 4, (n, 3))
    o[:, 2] = -6.0
    d = rng.uniform(-0.5, 0.5, (n, 3))
    d[:, 2] = 1.0
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    return o, d


def test_bvh_equals_linear_scan():
    rng = np.random.default_rng(17)
    be = get_backend()
    for _ in range(6):
        objects = random_triangles(rng, int(rng.integers(5, 30)))
        if rng.random() < 0.5:
            objects.append(dt.Sphere(center=Vec3(*rng.uniform(-1, 1, 3)),
                                     radius=float(rng.uniform(0.3, 1.2))))
        tree = build(objects)
        tables = compile_geometry(objects)
        o, d = _random_rays(rng, 200)
        args = tuple(np.ascontiguousarray(c, dtype=np.float32)
                     for c in (o[:, 0], o[:, 1], o[:, 2],
                               d[:, 0], d[:, 1], d[:, 2]))
        lin = be.linear_hits(*args, tables.tri, tables.sph)
        bv = be.bvh_hits(*args, tree.arrays(), tables.tri, tables.sph)
        assert np.array_equal(lin[0], bv[0])  # same winning primitive
        hit = lin[0] >= 0
        assert np.max(np.abs(lin[1][hit] - bv[1][hit])) <= 1e-6


def test_ray_missing_root_does_zero_primitive_tests():
    mesh = benchmark_mesh()
    tree = build(mesh)
    tables = compile_geometry(mesh)
    be = get_backend()
    away = tuple(np.array([v], dtype=np.float32)
                 for v in (0.0, 0.0, -6.0, 0.0, 0.0, -1.0))
    ids, _, _, _, ntests = be.bvh_hits(*away, tree.arrays(), tables.tri,
                                       tables.sph)
    assert ids[0] == -1
    assert ntests == 0


def test_single_primitive_scene_matches_direct_intersection():
    tri = dt.Triangle(Vec3(-1, -1, 0), Vec3(1, -1, 0), Vec3(0, 1, 0))
    tree = build([tri])
    ray = Ray(origin=Vec3(0.0, 0.0, -3.0), direction=Vec3(0.0, 0.0, 1.0))
    hit = intersect(ray, tree)
    direct = dt.intersect_triangle(ray, tri)
    assert hit is not None and direct is not None
    assert_allclose(hit.t, direct[0], rtol=1e-6)
    assert hit.obj is tri


def test_bvh_fewer_primitive_tests_than_linear():
    mesh = benchmark_mesh()
    tree = build(mesh)
    tables = compile_geometry(mesh)
    be = get_backend()
    rng = np.random.default_rng(3)
    o, d = _random_rays(rng, 500)
    args = tuple(np.ascontiguousarray(c, dtype=np.float32)
                 for c in (o[:, 0], o[:, 1], o[:, 2],
                           d[:, 0], d[:, 1], d[:, 2]))
    lin = be.linear_hits(*args, tables.tri, tables.sph)
    bv = be.bvh_hits(*args, tree.arrays(), tables.tri, tables.sph)
    assert bv[4] < lin[4]
