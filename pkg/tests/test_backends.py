"""Compiled and pure-python hit-finding must agree on every query."""

import numpy as np
import pytest

import difftrace as dt
from difftrace.bvh import build
from difftrace.kernels import HAVE_COMPILED, get_backend
from difftrace.renderer import compile_geometry
from difftrace.scene import Scene

from conftest import make_camera, make_light, random_triangles

needs_compiled = pytest.mark.skipif(not HAVE_COMPILED,
                                    reason="compiled extension not built")


def _ray_args(rng, n, dtype):
    o = rng.uniform(-4, 4, (n, 3))
    o[:, 2] = -6.0
    d = rng.uniform(-0.5, 0.5, (n, 3))
    d[:, 2] = 1.0
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    return tuple(np.ascontiguousarray(c, dtype=dtype)
                 for c in (o[:, 0], o[:, 1], o[:, 2],
                           d[:, 0], d[:, 1], d[:, 2]))


@needs_compiled
@pytest.mark.parametrize("dtype", [np.float32, np.float64])
def test_linear_hits_agree_across_backends(dtype):
    rng = np.random.default_rng(100)
    objects = random_triangles(rng, 15)
    objects.append(dt.Sphere(center=dt.Vec3(0.2, -0.3, 0.8), radius=0.9))
    tables_f = compile_geometry(objects)
    tri = tables_f.tri.astype(dtype)
    sph = tables_f.sph.astype(dtype)
    args = _ray_args(rng, 400, dtype)
    py = get_backend("python").linear_hits(*args, tri, sph)
    cy = get_backend("compiled").linear_hits(*args, tri, sph)
    assert np.array_equal(py[0], cy[0])
    hit = py[0] >= 0
    np.testing.assert_allclose(py[1][hit], cy[1][hit], rtol=1e-5)
    assert py[4] == cy[4]


@needs_compiled
def test_bvh_hits_agree_across_backends():
    rng = np.random.default_rng(200)
    objects = random_triangles(rng, 30)
    tree = build(objects)
    tables = compile_geometry(objects)
    args = _ray_args(rng, 400, np.float32)
    py = get_backend("python").bvh_hits(*args, tree.arrays(), tables.tri,
                                        tables.sph)
    cy = get_backend("compiled").bvh_hits(*args, tree.arrays(), tables.tri,
                                          tables.sph)
    assert np.array_equal(py[0], cy[0])
    hit = py[0] >= 0
    np.testing.assert_allclose(py[1][hit], cy[1][hit], rtol=1e-5)


@needs_compiled
def test_full_renders_agree_across_backends():
    rng = np.random.default_rng(300)
    cam = make_camera(width=24, height=24)
    objects = random_triangles(rng, 10)
    light = make_light()
    imgs = {}
    for name in ("python", "compiled"):
        imgs[name] = dt.render(cam, Scene(objects=objects), light, depth=2,
                               backend=get_backend(name)).pixels
    assert np.max(np.abs(imgs["python"] - imgs["compiled"])) <= 1e-5


def test_python_backend_always_available():
    be = get_backend("python")
    assert be.NAME == "python"
