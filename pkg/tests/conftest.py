"""Shared scene builders for the test suite."""

import pytest

import difftrace as dt
from difftrace.scene import Scene, SceneFile


@pytest.fixture(autouse=True)
def _float32_default():
    # Tests run at the default 32-bit width unless they opt out themselves.
    from difftrace import precision
    precision.set_dtype("float32")
    yield
    precision.set_dtype("float32")


def make_camera(width=8, height=8, lookfrom=(0.0, 0.0, -5.0), vfov=60.0,
                focus=1.0, lookat=(0.0, 0.0, 0.0)):
    return dt.Camera(lookfrom=dt.Vec3(*lookfrom), lookat=dt.Vec3(*lookat),
                     vup=dt.Vec3(0.0, 1.0, 0.0), vfov=vfov, focus=focus,
                     width=width, height=height)


def make_light(intensity=400.0, position=(1.0, 4.0, -4.0),
               color=(1.0, 1.0, 1.0)):
    return dt.PointLight(color=dt.Vec3(*color), intensity=intensity,
                         position=dt.Vec3(*position))


def random_material(rng, reflective=True):
    return dt.Material(
        color_diffuse=dt.Vec3(*rng.uniform(0.2, 1.0, 3)),
        color_ambient=dt.Vec3(*rng.uniform(0.0, 0.2, 3)),
        color_specular=dt.Vec3(*rng.uniform(0.2, 1.0, 3)),
        specular_exponent=float(rng.uniform(5.0, 80.0)),
        reflection=float(rng.uniform(0.05, 0.4)) if reflective else 0.0)


def random_triangles(rng, n, spread=2.5, reflective=True):
    out = []
    while len(out) < n:
        base = rng.uniform(-spread, spread, 3)
        base[2] = rng.uniform(-0.5, 2.0)
        v = [dt.Vec3(*(base + rng.uniform(-1.2, 1.2, 3))) for _ in range(3)]
        try:
            out.append(dt.Triangle(v[0], v[1], v[2],
                                   material=random_material(rng, reflective)))
        except dt.scene.SceneError:
            continue
    return out


def make_bundle(objects, camera=None, light=None):
    return SceneFile(camera=camera or make_camera(),
                     scene=Scene(objects=list(objects)),
                     lights=[light or make_light()])


def render_pixels(camera, objects, light, depth=2):
    return dt.render(camera, Scene(objects=list(objects)), light,
                     depth=depth).pixels
