"""Intersections, shading terms, full-frame rendering and its invariants."""

import math

import numpy as np
from numpy.testing import assert_allclose

import difftrace as dt
from difftrace import bvh
from difftrace.mathcore import Vec3
from difftrace.renderer import (Hit, Ray, intersect_sphere,
                                intersect_triangle, light_at, nearest_hit,
                                raytrace, render, shade)
from difftrace.scene import RenderSettings, Scene

from conftest import (make_bundle, make_camera, make_light, random_triangles,
                      render_pixels)


def ray(o, d):
    return Ray(origin=Vec3(*o), direction=Vec3(*d))


def unit_triangle():
    return dt.Triangle(Vec3(0.0, 0.0, 0.0), Vec3(1.0, 0.0, 0.0),
                       Vec3(0.0, 1.0, 0.0))


# -- sphere -----------------------------------------------------------------


def test_sphere_head_on():
    s = dt.Sphere(center=Vec3(0.0, 0.0, 0.0), radius=1.0)
    t = intersect_sphere(ray((0, 0, -5), (0, 0, 1)), s)
    assert_allclose(t, 4.0, rtol=1e-6)


def test_sphere_perpendicular_miss():
    s = dt.Sphere(center=Vec3(0.0, 0.0, 0.0), radius=1.0)
    assert intersect_sphere(ray((0, 0, -5), (0, 1, 0)), s) is None


def test_sphere_tangent_double_root():
    s = dt.Sphere(center=Vec3(0.0, 0.0, 0.0), radius=1.0)
    t = intersect_sphere(ray((1, 0, -5), (0, 0, 1)), s)
    assert_allclose(t, 5.0, rtol=1e-6)


# -- triangle ----------------------------------------------------------------


def test_triangle_analytic_hit():
    got = intersect_triangle(ray((0.25, 0.25, -1), (0, 0, 1)),
                             unit_triangle())
    assert got is not None
    t, w1, w2, w3 = got
    assert_allclose([t, w1, w2, w3], [1.0, 0.5, 0.25, 0.25], rtol=1e-6)


def test_triangle_outside_miss():
    assert intersect_triangle(ray((2, 2, -1), (0, 0, 1)),
                              unit_triangle()) is None


def test_triangle_parallel_ray_miss():
    assert intersect_triangle(ray((0.2, 0.2, -1), (1, 0, 0)),
                              unit_triangle()) is None


def test_triangle_behind_origin_miss():
    assert intersect_triangle(ray((0.25, 0.25, 1), (0, 0, 1)),
                              unit_triangle()) is None


# -- lights -------------------------------------------------------------------


def test_point_light_normalization():
    light = dt.PointLight(color=Vec3(1.0, 0.5, 0.25),
                          intensity=4.0 * math.pi,
                          position=Vec3(0.0, 1.0, 0.0))
    ldir, irr = light_at(Vec3(0.0, 0.0, 0.0), light)
    assert_allclose([ldir.x, ldir.y, ldir.z], [0.0, 1.0, 0.0])
    assert_allclose([irr.x, irr.y, irr.z], [1.0, 0.5, 0.25], rtol=1e-6)


def test_point_light_inverse_square():
    light = dt.PointLight(color=Vec3(1.0, 1.0, 1.0), intensity=1000.0,
                          position=Vec3(0.0, 0.0, 0.0))
    _, irr1 = light_at(Vec3(1.0, 0.0, 0.0), light)
    _, irr2 = light_at(Vec3(2.0, 0.0, 0.0), light)
    assert_allclose(irr2.x / irr1.x, 0.25, rtol=1e-6)


def test_distant_light_position_independent():
    light = dt.DistantLight(color=Vec3(0.3, 0.6, 0.9), intensity=2.0,
                            direction=Vec3(0.0, 1.0, 0.0))
    d1, irr1 = light_at(Vec3(5.0, -2.0, 1.0), light)
    d2, irr2 = light_at(Vec3(-7.0, 4.0, 3.0), light)
    assert (irr1.x, irr1.y, irr1.z) == (irr2.x, irr2.y, irr2.z)
    assert (d1.x, d1.y, d1.z) == (d2.x, d2.y, d2.z)


# -- shading ------------------------------------------------------------------


def make_hit(material, normal=(0.0, 0.0, -1.0), point=(0.0, 0.0, 0.0)):
    tri = dt.Triangle(Vec3(-1, -1, 0), Vec3(1, -1, 0), Vec3(0, 1, 0),
                      material=material)
    return Hit(t=1.0, obj=tri, barycentric=(1 / 3, 1 / 3, 1 / 3),
               point=Vec3(*point), normal=Vec3(*normal))


def test_backfacing_light_is_black():
    mat = dt.Material(color_diffuse=Vec3(1, 1, 1),
                      color_specular=Vec3(1, 1, 1))
    hit = make_hit(mat)
    light = dt.PointLight(color=Vec3(1, 1, 1), intensity=100.0,
                          position=Vec3(0.0, 0.0, 10.0))  # behind the normal
    c = shade(hit, light, Vec3(0.0, 0.0, -5.0), [hit.obj], depth=0)
    assert (float(c.x), float(c.y), float(c.z)) == (0.0, 0.0, 0.0)


def test_full_frontal_diffuse_is_irradiance():
    mat = dt.Material(color_diffuse=Vec3(1, 1, 1),
                      color_specular=Vec3(0, 0, 0))
    hit = make_hit(mat)
    light = dt.PointLight(color=Vec3(1, 1, 1),
                          intensity=4.0 * math.pi,
                          position=Vec3(0.0, 0.0, -1.0))  # n.l = 1, d = 1
    c = shade(hit, light, Vec3(0.0, 0.0, -5.0), [hit.obj], depth=0)
    assert_allclose([float(c.x), float(c.y), float(c.z)], [1.0, 1.0, 1.0],
                    rtol=1e-6)


def test_green_material_under_red_light_has_zero_diffuse():
    # Channel-wise product: (0,1,0) x (1,0,0) = 0; only specular remains.
    mat = dt.Material(color_diffuse=Vec3(0, 1, 0),
                      color_specular=Vec3(0, 0, 0))
    hit = make_hit(mat)
    light = dt.PointLight(color=Vec3(1, 0, 0), intensity=100000.0,
                          position=Vec3(0.0, 0.0, -10.0))
    c = shade(hit, light, Vec3(0.0, 0.0, -30.0), [hit.obj], depth=0)
    assert (float(c.x), float(c.y), float(c.z)) == (0.0, 0.0, 0.0)
    # With the default white specular the same setup is non-black.
    mat2 = dt.Material(color_diffuse=Vec3(0, 1, 0))
    c2 = shade(make_hit(mat2), light, Vec3(0.0, 0.0, -30.0), [mat2], depth=0)
    assert float(c2.x) > 0.0


# -- raytrace / render --------------------------------------------------------


def test_empty_scene_is_black():
    px = render_pixels(make_camera(), [], make_light())
    assert np.all(px == 0.0)


def test_sphere_coverage_sanity():
    cam = make_camera(width=9, height=9)
    sph = dt.Sphere(center=Vec3(0.0, 0.0, 0.0), radius=1.0)
    px = render_pixels(cam, [sph], make_light(position=(0.0, 2.0, -5.0)))
    assert px[4, 4].sum() > 0.0
    assert px[0, 0].sum() == 0.0 and px[8, 8].sum() == 0.0


def test_raytrace_accepts_listing_argument_order():
    # Mirrors the usage: raytrace(origin, direction, scene, light, origin, 2)
    cam = make_camera(width=4, height=4)
    origins, dirs = dt.get_primary_rays(cam)
    scene = [dt.Sphere(center=Vec3(0.0, 0.0, 0.0), radius=1.0)]
    light = make_light()
    color = raytrace(origins, dirs, scene, light, origins, 2)
    assert np.asarray(color.x).shape == (16,)
    # A scalar eye point gives the identical result.
    eye = Vec3(cam.lookfrom.x, cam.lookfrom.y, cam.lookfrom.z)
    color2 = raytrace(origins, dirs, scene, light, eye, 2)
    assert np.array_equal(np.asarray(color.x), np.asarray(color2.x))


def test_render_single_pixel_empty_scene():
    cam = make_camera(width=1, height=1)
    img = dt.render(cam, [], make_light())
    assert img.pixels.shape == (1, 1, 3)
    assert np.all(img.pixels == 0.0)


def test_render_twice_bit_identical():
    rng = np.random.default_rng(9)
    cam = make_camera(width=16, height=16)
    tris = random_triangles(rng, 4)
    light = make_light()
    a = render_pixels(cam, tris, light)
    b = render_pixels(cam, tris, light)
    assert np.array_equal(a, b)


def test_rectangle_scene_projects_where_expected():
    bundle = dt.load_scene_json("scenes/camera_rectangle.json")
    cam = dt.Camera(lookfrom=Vec3(0.0, 0.0, -30.0), lookat=Vec3(0.0, 0.0, 0.0),
                    vup=Vec3(0.0, 1.0, 0.0), vfov=90.0, focus=1.0,
                    width=300, height=400)
    img = dt.render(cam, bundle.scene, bundle.lights[0], depth=2)
    px = img.pixels
    lit = (px.sum(axis=2) > 0)
    # Rectangle spans |x|<=20, |y|<=10 on the z=0 plane 30 units away:
    # inside the frustum horizontally, well inside vertically.
    assert lit.any()
    assert not lit[0, :].any() and not lit[-1, :].any()
    row_center = lit[200, :]
    assert row_center.any()
    assert 0.0 < lit.mean() < 0.9


def test_zero_lights_renders_exact_black():
    rng = np.random.default_rng(4)
    cam = make_camera(width=8, height=8)
    tris = random_triangles(rng, 3, reflective=False)  # ambient colors > 0
    img = dt.render(cam, Scene(objects=tris), [], depth=2)
    assert np.all(img.pixels == 0.0)


def test_ambient_light_setting_adds_flat_term():
    cam = make_camera(width=4, height=4)
    mat = dt.Material(color_diffuse=Vec3(0, 0, 0),
                      color_ambient=Vec3(0.2, 0.3, 0.4),
                      color_specular=Vec3(0, 0, 0))
    tri = dt.Triangle(Vec3(-5, -5, 0), Vec3(5, -5, 0), Vec3(0, 8, 0),
                      material=mat)
    settings = RenderSettings(ambient_light=Vec3(1.0, 1.0, 1.0))
    img = dt.render(cam, [tri], [], depth=0, settings=settings)
    assert_allclose(img.pixels[2, 2], [0.2, 0.3, 0.4], rtol=1e-6)


def test_depth_zero_equals_zero_reflection():
    rng = np.random.default_rng(12)
    cam = make_camera(width=12, height=12)
    reflective = random_triangles(rng, 5, reflective=True)
    light = make_light()
    with_depth0 = render_pixels(cam, reflective, light, depth=0)
    stripped = [dt.Triangle(t.v1, t.v2, t.v3,
                            material=dt.Material(
                                color_diffuse=t.material.color_diffuse,
                                color_ambient=t.material.color_ambient,
                                color_specular=t.material.color_specular,
                                specular_exponent=t.material.specular_exponent,
                                reflection=0.0))
                for t in reflective]
    no_reflection = render_pixels(cam, stripped, light, depth=2)
    assert np.array_equal(with_depth0, no_reflection)


def test_nearest_hit_matches_exhaustive_scan():
    rng = np.random.default_rng(21)
    for trial in range(5):
        objects = random_triangles(rng, rng.integers(3, 12))
        if trial % 2:
            objects.append(dt.Sphere(center=Vec3(*rng.uniform(-1, 1, 3)),
                                     radius=float(rng.uniform(0.2, 1.0))))
        for _ in range(40):
            o = rng.uniform(-4, 4, 3)
            o[2] = -6.0
            d = rng.uniform(-0.4, 0.4, 3)
            d[2] = 1.0
            d = d / np.linalg.norm(d)
            r = ray(o, d)
            got = nearest_hit(r, objects)
            best_t, best_obj = np.inf, None
            for obj in objects:
                if isinstance(obj, dt.Triangle):
                    res = intersect_triangle(r, obj)
                    t = res[0] if res else None
                else:
                    t = intersect_sphere(r, obj)
                if t is not None and t < best_t:
                    best_t, best_obj = float(t), obj
            if best_obj is None:
                assert got is None
            else:
                assert got is not None
                assert got.obj is best_obj
                assert abs(got.t - best_t) <= 1e-5 * max(1.0, best_t)


def test_linear_and_bvh_renders_agree():
    rng = np.random.default_rng(31)
    cam = make_camera(width=24, height=24)
    objects = random_triangles(rng, 12)
    objects.append(dt.Sphere(center=Vec3(0.5, 0.0, 1.0), radius=0.8,
                             material=dt.Material(
                                 color_diffuse=Vec3(0.9, 0.4, 0.2),
                                 reflection=0.3)))
    light = make_light()
    linear = render_pixels(cam, objects, light)
    tree = bvh.build(objects)
    with_bvh = dt.render(cam, tree, light, depth=2).pixels
    assert np.max(np.abs(linear - with_bvh)) <= 1e-5


def test_sphere_radius_gradient_positive_inside_silhouette():
    # Brightness just inside the silhouette grows with radius; checked
    # against the central-difference oracle.
    from difftrace.inverse import LossEvaluator
    from difftrace.params import pack_params
    from difftrace import finite_difference_gradient, GradConfig

    cam = make_camera(width=9, height=9, lookfrom=(0.0, 0.0, -4.0))
    sph = dt.Sphere(center=Vec3(0.0, 0.0, 0.0), radius=1.0)
    light = make_light(position=(0.0, 0.0, -6.0), intensity=200.0)
    bundle = make_bundle([sph], camera=cam, light=light)
    base = dt.render(cam, bundle.scene, light, depth=0)
    # Loss = -sum of off-center hit pixels: d(loss)/d(radius) < 0 means
    # d(brightness)/d(radius) > 0 there.
    weight = np.zeros((9, 9, 3))
    weight[4, 2] = 1.0  # inside the silhouette, off the shading peak
    target = dt.Image(9, 9, base.pixels + 1.0 * weight)
    ev = LossEvaluator(bundle, target, loss_kind="ssd", depth=0)
    pv = pack_params(bundle, ["objects[0].radius"])
    loss, g = ev.loss_and_grad(pv)
    fd = finite_difference_gradient(ev, pv, GradConfig(1e-3))
    assert g.values[0] < 0.0
    assert_allclose(g.values, fd.values, rtol=2e-2, atol=1e-3)


def test_multi_light_wrapper_sums_contributions():
    cam = make_camera(width=6, height=6)
    sph = dt.Sphere(center=Vec3(0.0, 0.0, 0.0), radius=1.0)
    l1 = make_light(position=(2.0, 2.0, -4.0), intensity=150.0)
    l2 = make_light(position=(-2.0, 1.0, -4.0), intensity=90.0)
    a = render_pixels(cam, [sph], l1)
    b = render_pixels(cam, [sph], l2)
    both = render_pixels(cam, [sph], [l1, l2])
    assert_allclose(both, a + b, atol=1e-5)


def test_background_color_is_configurable():
    cam = make_camera(width=2, height=2)
    settings = RenderSettings(background=Vec3(0.1, 0.2, 0.3))
    img = dt.render(cam, [], make_light(), depth=0, settings=settings)
    assert_allclose(img.pixels[0, 0], [0.1, 0.2, 0.3], rtol=1e-6)


def test_distant_light_direction_points_toward_light():
    # direction (0,1,0) must light an upward-facing floor from above.
    floor = dt.Triangle(Vec3(-10, 0, -10), Vec3(10, 0, -10), Vec3(0, 0, 20),
                        material=dt.Material(color_diffuse=Vec3(1, 1, 1),
                                             color_specular=Vec3(0, 0, 0)))
    cam = make_camera(width=5, height=5, lookfrom=(0.0, 3.0, -6.0),
                      lookat=(0.0, 0.0, 0.0))
    light = dt.DistantLight(color=Vec3(1, 1, 1), intensity=1.0,
                            direction=Vec3(0.0, 1.0, 0.0))
    px = dt.render(cam, [floor], light, depth=0).pixels
    assert px[2, 2].sum() > 0.5


def test_textured_triangle_renders_two_regions():
    img = np.zeros((1, 2, 3))
    img[0, 0] = [1.0, 0.0, 0.0]
    img[0, 1] = [0.0, 0.0, 1.0]
    tex = dt.Texture(image=img)
    mat = dt.Material(color_specular=Vec3(0, 0, 0), texture=tex)
    # UVs: left edge u=0 (red region), right edge u=1 (blue region).
    tri = dt.Triangle(Vec3(-4, -4, 0), Vec3(4, -4, 0), Vec3(0, 6, 0),
                      material=mat,
                      uv=((0.0, 0.0), (1.0, 0.0), (0.5, 1.0)))
    cam = make_camera(width=9, height=9, lookfrom=(0.0, 0.0, -4.0))
    light = make_light(position=(0.0, 0.0, -6.0), intensity=500.0)
    px = dt.render(cam, [tri], light, depth=0).pixels
    # Looking down +z with +y up, world +x appears on the image's left:
    # the u=0 (red) texture edge lands on the right half of the frame.
    left, right = px[4, 1], px[4, 7]
    assert left[2] > 0 and left[0] == 0.0
    assert right[0] > 0 and right[2] == 0.0


def test_smooth_normals_flag_changes_shading():
    # Vertex normals tilted off the face normal change the lit result only
    # when interpolation is enabled.
    vn = (Vec3(0.6, 0.0, -0.8), Vec3(-0.6, 0.0, -0.8), Vec3(0.0, 0.6, -0.8))
    tri = dt.Triangle(Vec3(-3, -3, 0), Vec3(3, -3, 0), Vec3(0, 4, 0),
                      material=dt.Material(color_specular=Vec3(0, 0, 0)),
                      vn=vn)
    cam = make_camera(width=7, height=7, lookfrom=(0.0, 0.0, -4.0))
    light = make_light(position=(3.0, 0.0, -5.0), intensity=300.0)
    flat = dt.render(cam, [tri], light, depth=0).pixels
    smooth = dt.render(cam, [tri], light, depth=0,
                       settings=RenderSettings(smooth_normals=True)).pixels
    assert flat[3, 3].sum() > 0
    assert not np.allclose(flat, smooth)
    # Interpolated normals vary across the face; flat ones do not.
    hit = smooth.sum(axis=2) > 0
    vals = smooth[hit][:, 0]
    assert np.std(vals / np.maximum(flat[hit][:, 0], 1e-9)) > 1e-3
