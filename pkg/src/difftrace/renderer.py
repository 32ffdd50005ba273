"""Forward rendering pipeline, written once over the generic scalar.

Hit-finding (which primitive a ray strikes first) runs on plain float values
through the kernel backends, since branching is never differentiated.  The
winning primitive's intersection and shading arithmetic is then re-evaluated
on the generic scalar type, so the identical code path produces plain images
and tape-recorded ones; gradients do not depend on which traversal (linear or
BVH) found the hit.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from types import SimpleNamespace

import numpy as np

from . import precision
from .autodiff import Var
from .bvh import Bvh
from .images import Image, from_channels
from .kernels import get_backend
from .mathcore import (Vec3, cross, dot, maximum, normalize, take, value_of)
from .mathcore import sqrt as msqrt
from .params import MAT_COLS, ParamVector, scene_rows
from .scene import (Camera, DistantLight, PointLight, RenderSettings, Scene,
                    SceneError, Triangle, primary_ray_directions,
                    texture_lookup)


@dataclass
class Ray:
    origin: Vec3
    direction: Vec3


@dataclass
class Hit:
    t: float
    obj: object
    barycentric: tuple | None
    point: Vec3
    normal: Vec3


# ---------------------------------------------------------------------------
# Single-primitive intersections (also the formulas the pipeline re-runs)


def moller_trumbore(o: Vec3, d: Vec3, v1: Vec3, v2: Vec3, v3: Vec3):
    """(t, u, v, det); validity is judged by the caller on plain values."""
    e1 = v2 - v1
    e2 = v3 - v1
    p = cross(d, e2)
    det = dot(e1, p)
    tv = o - v1
    inv = 1.0 / det
    u = dot(tv, p) * inv
    q = cross(tv, e1)
    v = dot(d, q) * inv
    t = dot(e2, q) * inv
    return t, u, v, det


def intersect_triangle(ray: Ray, tri: Triangle):
    """Smallest valid ray parameter and barycentric weights, or None."""
    e1 = tri.v2 - tri.v1
    e2 = tri.v3 - tri.v1
    p = cross(ray.direction, e2)
    det = dot(e1, p)
    if abs(value_of(det)) <= precision.DET_EPS:
        return None
    t, u, v, _ = moller_trumbore(ray.origin, ray.direction, tri.v1, tri.v2,
                                 tri.v3)
    uv, vv, tvv = value_of(u), value_of(v), value_of(t)
    if uv < 0.0 or vv < 0.0 or uv + vv > 1.0 or tvv <= precision.T_MIN:
        return None
    return t, 1.0 - u - v, u, v


def sphere_quadratic(o: Vec3, d: Vec3, center: Vec3, radius):
    """(b, discriminant) of the stable sphere quadratic."""
    oc = o - center
    b = dot(d, oc)
    c0 = dot(oc, oc) - radius * radius
    return b, b * b - c0


def intersect_sphere(ray: Ray, sphere):
    """Smallest root beyond the self-intersection epsilon, or None."""
    b, disc = sphere_quadratic(ray.origin, ray.direction, sphere.center,
                               sphere.radius)
    dv = value_of(disc)
    if dv < 0.0:
        return None
    sq = np.sqrt(dv)
    bv = value_of(b)
    t = -bv - sq
    if t <= precision.T_MIN:
        t = -bv + sq
    if t <= precision.T_MIN:
        return None
    return t


def light_at(point: Vec3, light, falloff_norm: float = 4.0 * np.pi):
    """(unit direction toward the light, RGB irradiance) at a surface point."""
    if hasattr(light, "position"):
        delta = light.position - point
        d2 = dot(delta, delta)
        ldir = normalize(delta)
        irr = light.color * (light.intensity / (falloff_norm * d2))
        return ldir, irr
    if hasattr(light, "direction"):
        ldir = normalize(light.direction)
        irr = light.color * light.intensity
        return ldir, irr
    raise SceneError(f"unsupported light type {type(light).__name__}")


# ---------------------------------------------------------------------------
# Geometry tables


@dataclass
class GeometryTables:
    tri: np.ndarray          # (Nt, 9) v1 v2 v3
    sph: np.ndarray          # (Ns, 4) center radius
    mat: np.ndarray          # (Nm, 11) per MAT_COLS layout
    tri_mat: np.ndarray      # (Nt,) material row per triangle
    sph_mat: np.ndarray      # (Ns,) material row per sphere
    triangles: list
    spheres: list
    materials: list
    tri_uv: np.ndarray       # (Nt, 6) texture UVs (zeros when absent)
    tri_vn: np.ndarray       # (Nt, 9) vertex normals (zeros when absent)
    tri_has_vn: np.ndarray   # (Nt,) bool
    tri_texture: list        # per-triangle Texture or None
    has_textures: bool = False


def compile_geometry(objects) -> GeometryTables:
    """Pack primitives into the flat tables the kernels and pipeline use."""
    scene_like = objects if hasattr(objects, "objects") else SimpleNamespace(
        objects=list(objects))
    triangles, spheres, materials, _, _, mat_row = scene_rows(scene_like)
    dt = precision.active_dtype()

    tri = np.zeros((len(triangles), 9), dtype=dt)
    tri_uv = np.zeros((len(triangles), 6), dtype=dt)
    tri_vn = np.zeros((len(triangles), 9), dtype=dt)
    tri_has_vn = np.zeros(len(triangles), dtype=bool)
    tri_texture: list = []
    for i, t in enumerate(triangles):
        tri[i] = [t.v1.x, t.v1.y, t.v1.z, t.v2.x, t.v2.y, t.v2.z,
                  t.v3.x, t.v3.y, t.v3.z]
        tex = t.material.texture
        uv = t.uv if t.uv is not None else (
            tex.uvs if tex is not None and tex.uvs is not None else None)
        if uv is not None:
            tri_uv[i] = [uv[0][0], uv[0][1], uv[1][0], uv[1][1],
                         uv[2][0], uv[2][1]]
        tri_texture.append(tex if (tex is not None and uv is not None) else None)
        if t.vn is not None:
            tri_vn[i] = [t.vn[0].x, t.vn[0].y, t.vn[0].z,
                         t.vn[1].x, t.vn[1].y, t.vn[1].z,
                         t.vn[2].x, t.vn[2].y, t.vn[2].z]
            tri_has_vn[i] = True

    sph = np.zeros((len(spheres), 4), dtype=dt)
    for i, s in enumerate(spheres):
        sph[i] = [s.center.x, s.center.y, s.center.z, s.radius]

    mat = np.zeros((max(len(materials), 1), 11), dtype=dt)
    for i, m in enumerate(materials):
        mat[i, 0:3] = [m.color_diffuse.x, m.color_diffuse.y, m.color_diffuse.z]
        mat[i, 3:6] = [m.color_ambient.x, m.color_ambient.y, m.color_ambient.z]
        mat[i, 6:9] = [m.color_specular.x, m.color_specular.y,
                       m.color_specular.z]
        mat[i, 9] = m.specular_exponent
        mat[i, 10] = m.reflection

    tri_mat = np.array([mat_row[id(t.material)] for t in triangles],
                       dtype=np.int32)
    sph_mat = np.array([mat_row[id(s.material)] for s in spheres],
                       dtype=np.int32)
    return GeometryTables(tri=tri, sph=sph, mat=mat, tri_mat=tri_mat,
                          sph_mat=sph_mat, triangles=triangles,
                          spheres=spheres, materials=materials,
                          tri_uv=tri_uv, tri_vn=tri_vn, tri_has_vn=tri_has_vn,
                          tri_texture=tri_texture,
                          has_textures=any(t is not None for t in tri_texture))


def hit_from_kernel(objects, tables: GeometryTables, ray: Ray, pid: int,
                    t: float, u: float, v: float) -> Hit:
    """Materialize a Hit record from a kernel result for one ray."""
    nt = tables.tri.shape[0]
    point = ray.origin + ray.direction * t
    if pid < nt:
        obj = tables.triangles[pid]
        n = normalize(cross(obj.v2 - obj.v1, obj.v3 - obj.v1))
        if value_of(dot(n, ray.direction)) > 0.0:
            n = -n
        return Hit(t=t, obj=obj, barycentric=(1.0 - u - v, u, v), point=point,
                   normal=n)
    obj = tables.spheres[pid - nt]
    n = normalize(point - obj.center)
    if value_of(dot(n, ray.direction)) > 0.0:
        n = -n
    return Hit(t=t, obj=obj, barycentric=None, point=point, normal=n)


# ---------------------------------------------------------------------------
# Trace context


class TraceStats:
    __slots__ = ("prim_tests", "rays")

    def __init__(self):
        self.prim_tests = 0
        self.rays = 0


@dataclass
class TraceContext:
    tables: GeometryTables
    cols: dict                 # generic columns: {"tri": {col: S}, ...}
    camera: object             # namespace with generic camera fields
    lights: list               # namespaces with generic light fields
    eye: Vec3
    settings: RenderSettings
    backend: object
    bvh_arrays: tuple | None = None
    threads: int = 1
    stats: TraceStats = field(default_factory=TraceStats)

    def find_hits(self, ov, dv):
        """Kernel dispatch on plain value arrays, optionally sharded."""
        args = (ov[0], ov[1], ov[2], dv[0], dv[1], dv[2])
        n = args[0].shape[0]
        self.stats.rays += n

        def run(sl):
            sub = tuple(a[sl] for a in args)
            if self.bvh_arrays is not None:
                return self.backend.bvh_hits(*sub, self.bvh_arrays,
                                             self.tables.tri, self.tables.sph)
            return self.backend.linear_hits(*sub, self.tables.tri,
                                            self.tables.sph)

        if self.threads > 1 and n >= 2048:
            bounds = np.linspace(0, n, self.threads + 1, dtype=int)
            slices = [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:])
                      if b > a]
            with ThreadPoolExecutor(max_workers=len(slices)) as pool:
                parts = list(pool.map(run, slices))
            ids = np.concatenate([p[0] for p in parts])
            self.stats.prim_tests += sum(int(p[4]) for p in parts)
            return ids
        ids, _, _, _, ntests = run(slice(0, n))
        self.stats.prim_tests += int(ntests)
        return ids


def _plain_columns(tables: GeometryTables) -> dict:
    return {
        "tri": {c: tables.tri[:, c] for c in range(9)},
        "sph": {c: tables.sph[:, c] for c in range(4)},
        "mat": {c: tables.mat[:, c] for c in range(11)},
    }


def _camera_view(camera: Camera):
    return SimpleNamespace(
        lookfrom=Vec3(camera.lookfrom.x, camera.lookfrom.y, camera.lookfrom.z),
        lookat=Vec3(camera.lookat.x, camera.lookat.y, camera.lookat.z),
        vup=Vec3(camera.vup.x, camera.vup.y, camera.vup.z),
        vfov=camera.vfov, focus=camera.focus,
        width=camera.width, height=camera.height)


def _light_view(light):
    if isinstance(light, PointLight):
        return SimpleNamespace(color=Vec3(light.color.x, light.color.y,
                                          light.color.z),
                               intensity=light.intensity,
                               position=Vec3(light.position.x,
                                             light.position.y,
                                             light.position.z))
    if isinstance(light, DistantLight):
        return SimpleNamespace(color=Vec3(light.color.x, light.color.y,
                                          light.color.z),
                               intensity=light.intensity,
                               direction=Vec3(light.direction.x,
                                              light.direction.y,
                                              light.direction.z))
    raise SceneError(f"unsupported light type {type(light).__name__}")


def _apply_param_vars(ctx: TraceContext, pv: ParamVector) -> None:
    """Swap selected column lanes and camera/light fields for tape Vars."""
    leaf = pv.values
    tape = leaf.tape
    groups: dict = {}
    for pos, entry in enumerate(pv.layout):
        fam = entry.slot[0]
        if fam in ("tri", "sph", "mat"):
            _, row, col = entry.slot
            groups.setdefault((fam, col), []).append((row, pos))
        elif fam == "cam":
            _, fname, comp = entry.slot
            v = leaf.take([pos])
            cam = ctx.camera
            if fname == "focus":
                cam.focus = v
            else:
                vec = getattr(cam, fname)
                setattr(vec, ("x", "y", "z")[comp], v)
        elif fam == "light":
            _, li, fname, comp = entry.slot
            lv = ctx.lights[li]
            v = leaf.take([pos])
            if fname == "intensity":
                lv.intensity = v
            else:
                vec = getattr(lv, fname)
                setattr(vec, ("x", "y", "z")[comp], v)
    for (fam, col), items in groups.items():
        rows = np.array([r for r, _ in items], dtype=np.intp)
        pos = np.array([p for _, p in items], dtype=np.intp)
        base = tape.constant(np.array(ctx.cols[fam][col], copy=True))
        ctx.cols[fam][col] = base.put(rows, leaf.take(pos))


def build_trace_context(camera: Camera, objects, lights,
                        settings: RenderSettings | None = None, *,
                        pv: ParamVector | None = None, backend=None,
                        threads: int = 1) -> TraceContext:
    """Assemble kernel tables plus generic views; pv wires in tape leaves."""
    bvh_arrays = None
    if isinstance(objects, Bvh):
        bvh_arrays = objects.arrays()
        objs = objects.objects
    else:
        objs = objects
    tables = compile_geometry(objs)
    light_list = lights if isinstance(lights, (list, tuple)) else [lights]
    ctx = TraceContext(tables=tables, cols=_plain_columns(tables),
                       camera=_camera_view(camera),
                       lights=[_light_view(l) for l in light_list],
                       eye=Vec3(camera.lookfrom.x, camera.lookfrom.y,
                                camera.lookfrom.z),
                       settings=settings or RenderSettings(),
                       backend=backend or get_backend(),
                       bvh_arrays=bvh_arrays, threads=threads)
    if pv is not None and isinstance(pv.values, Var):
        _apply_param_vars(ctx, pv)
        ctx.eye = ctx.camera.lookfrom
    return ctx


# ---------------------------------------------------------------------------
# Generic shading


def _gather_material(ctx: TraceContext, mat_rows: np.ndarray) -> dict:
    cols = ctx.cols["mat"]
    g = {name: take(cols[MAT_COLS[name]], mat_rows)
         for name in ("specular_exponent", "reflection")}
    for name in ("color_diffuse", "color_ambient", "color_specular"):
        base = MAT_COLS[name]
        g[name] = Vec3(take(cols[base], mat_rows),
                       take(cols[base + 1], mat_rows),
                       take(cols[base + 2], mat_rows))
    return g


def _scatter(x, idx, size, fill=0.0):
    if isinstance(x, Var):
        return x.tape.scatter(x, idx, size, fill)
    out = np.full(size, fill, dtype=precision.active_dtype())
    out[idx] = x
    return out


def _add_subset(base, sub: Vec3, idx, size) -> Vec3:
    return Vec3(base.x + _scatter(sub.x, idx, size),
                base.y + _scatter(sub.y, idx, size),
                base.z + _scatter(sub.z, idx, size))


def shade_common(ctx: TraceContext, o: Vec3, d: Vec3, point: Vec3,
                 normal: Vec3, diffuse: Vec3, mat: dict, depth: int) -> Vec3:
    """Ambient + per-light Lambert/Blinn-Phong + mirror reflection."""
    s = ctx.settings
    color = mat["color_ambient"] * s.ambient_light
    view = normalize(ctx.eye - point)
    for light in ctx.lights:
        ldir, irr = light_at(point, light, s.falloff_norm)
        ndl = maximum(dot(normal, ldir), 0.0)
        color = color + diffuse * irr * ndl
        half = normalize(ldir + view)
        ndh = maximum(dot(normal, half), 0.0)
        color = color + mat["color_specular"] * irr * (ndh ** mat["specular_exponent"])

    if depth > 0:
        refl_vals = np.asarray(value_of(mat["reflection"]))
        ridx = np.nonzero(refl_vals > 0.0)[0]
        if ridx.size:
            dsub = d.take(ridx)
            nsub = normal.take(ridx)
            rdir = dsub - nsub * (2.0 * dot(dsub, nsub))
            rorg = point.take(ridx) + nsub * precision.REFLECT_OFFSET
            rr, rg, rb = _trace(ctx, rorg, rdir, depth - 1)
            refl = take(mat["reflection"], ridx)
            sub = Vec3(refl * rr, refl * rg, refl * rb)
            n = len(refl_vals)
            color = _add_subset(color, sub, ridx, n)
    return color


def _shade_triangles(ctx: TraceContext, o: Vec3, d: Vec3, rows: np.ndarray,
                     depth: int) -> Vec3:
    tc = ctx.cols["tri"]
    v1 = Vec3(take(tc[0], rows), take(tc[1], rows), take(tc[2], rows))
    v2 = Vec3(take(tc[3], rows), take(tc[4], rows), take(tc[5], rows))
    v3 = Vec3(take(tc[6], rows), take(tc[7], rows), take(tc[8], rows))
    t, u, v, _ = moller_trumbore(o, d, v1, v2, v3)
    w1 = 1.0 - u - v
    point = o + d * t
    nflat = normalize(cross(v2 - v1, v3 - v1))
    # Orientation is a branch on values, never differentiated.
    flip = np.where(value_of(dot(nflat, d)) > 0.0, -1.0, 1.0).astype(
        precision.active_dtype())
    normal = nflat * flip

    if ctx.settings.smooth_normals and ctx.tables.tri_has_vn[rows].any():
        vn = ctx.tables.tri_vn
        n1 = Vec3(vn[rows, 0], vn[rows, 1], vn[rows, 2])
        n2 = Vec3(vn[rows, 3], vn[rows, 4], vn[rows, 5])
        n3 = Vec3(vn[rows, 6], vn[rows, 7], vn[rows, 8])
        nsm = normalize(n1 * w1 + n2 * u + n3 * v)
        m = ctx.tables.tri_has_vn[rows].astype(precision.active_dtype())
        sflip = np.where(value_of(dot(nsm, d)) > 0.0, -1.0, 1.0).astype(
            precision.active_dtype())
        normal = nsm * (m * sflip) + normal * (1.0 - m)

    mat_rows = ctx.tables.tri_mat[rows]
    mat = _gather_material(ctx, mat_rows)
    diffuse = mat["color_diffuse"]

    # Texture override: nearest-texel fetches enter the tape as constants.
    tex_rows = ([i for i, r in enumerate(rows) if ctx.tables.tri_texture[r]]
                if ctx.tables.has_textures else [])
    if tex_rows:
        uvt = ctx.tables.tri_uv[rows]
        w1v = np.asarray(value_of(w1))
        uvv = np.asarray(value_of(u))
        vvv = np.asarray(value_of(v))
        uu = w1v * uvt[:, 0] + uvv * uvt[:, 2] + vvv * uvt[:, 4]
        vv = w1v * uvt[:, 1] + uvv * uvt[:, 3] + vvv * uvt[:, 5]
        texmask = np.zeros(len(rows), dtype=precision.active_dtype())
        tr = np.zeros(len(rows), dtype=precision.active_dtype())
        tg = np.zeros_like(tr)
        tb = np.zeros_like(tr)
        for i in tex_rows:
            tex = ctx.tables.tri_texture[rows[i]]
            r_, g_, b_ = texture_lookup(tex.image, uu[i], vv[i])
            texmask[i] = 1.0
            tr[i], tg[i], tb[i] = r_, g_, b_
        keep = 1.0 - texmask
        diffuse = Vec3(diffuse.x * keep + tr, diffuse.y * keep + tg,
                       diffuse.z * keep + tb)

    return shade_common(ctx, o, d, point, normal, diffuse, mat, depth)


def _shade_spheres(ctx: TraceContext, o: Vec3, d: Vec3, rows: np.ndarray,
                   depth: int) -> Vec3:
    sc = ctx.cols["sph"]
    center = Vec3(take(sc[0], rows), take(sc[1], rows), take(sc[2], rows))
    radius = take(sc[3], rows)
    b, disc = sphere_quadratic(o, d, center, radius)
    # Kernel-confirmed hits have disc >= 0; the floor only guards tangent
    # grazes from an infinite sqrt partial.
    sq = msqrt(maximum(disc, 1e-12))
    t1 = -b - sq
    use_far = np.asarray(value_of(t1)) <= precision.T_MIN
    far_mask = use_far.astype(precision.active_dtype())
    t = t1 + far_mask * (2.0 * sq)
    point = o + d * t
    normal = (point - center) / radius
    flip = np.where(np.asarray(value_of(dot(normal, d))) > 0.0, -1.0,
                    1.0).astype(precision.active_dtype())
    normal = normal * flip

    mat_rows = ctx.tables.sph_mat[rows]
    mat = _gather_material(ctx, mat_rows)
    return shade_common(ctx, o, d, point, normal, mat["color_diffuse"], mat,
                        depth)


def _value_arrays(v: Vec3):
    dt = precision.active_dtype()
    return (np.ascontiguousarray(np.asarray(value_of(v.x), dtype=dt)),
            np.ascontiguousarray(np.asarray(value_of(v.y), dtype=dt)),
            np.ascontiguousarray(np.asarray(value_of(v.z), dtype=dt)))


def _trace(ctx: TraceContext, o: Vec3, d: Vec3, depth: int):
    """Nearest-hit shading for a ray batch; returns (r, g, b) lanes."""
    ov = _value_arrays(o)
    dv = _value_arrays(d)
    n = ov[0].shape[0]
    ids = ctx.find_hits(ov, dv)
    nt = ctx.tables.tri.shape[0]

    bg = ctx.settings.background
    dt = precision.active_dtype()
    channels = Vec3(np.full(n, value_of(bg.x), dtype=dt),
                    np.full(n, value_of(bg.y), dtype=dt),
                    np.full(n, value_of(bg.z), dtype=dt))

    tri_sel = np.nonzero((ids >= 0) & (ids < nt))[0]
    if tri_sel.size:
        color = _shade_triangles(ctx, o.take(tri_sel), d.take(tri_sel),
                                 ids[tri_sel].astype(np.intp), depth)
        channels = _add_subset(channels, color, tri_sel, n)
    sph_sel = np.nonzero(ids >= nt)[0]
    if sph_sel.size:
        color = _shade_spheres(ctx, o.take(sph_sel), d.take(sph_sel),
                               (ids[sph_sel] - nt).astype(np.intp), depth)
        channels = _add_subset(channels, color, sph_sel, n)
    return channels.x, channels.y, channels.z


# ---------------------------------------------------------------------------
# Public entry points


def raytrace(origins: Vec3, directions: Vec3, scene, light, eye: Vec3,
             depth: int, settings: RenderSettings | None = None,
             backend=None, threads: int = 1, ctx: TraceContext | None = None):
    """Color per ray: nearest hit shaded, misses get the background color.

    ``eye`` is the viewer position for specular terms; passing the primary
    ray origins (all equal) works, as does a single point.
    """
    if ctx is None:
        eye = _collapse_eye(eye)
        dummy_cam = _eye_camera(eye)
        ctx = build_trace_context(dummy_cam, scene, light, settings,
                                  backend=backend, threads=threads)
        ctx.eye = eye
    r, g, b = _trace(ctx, origins, directions, depth)
    return Vec3(r, g, b)


def _collapse_eye(eye: Vec3) -> Vec3:
    """One viewer point from either a scalar Vec3 or per-ray origin arrays."""
    def first(c):
        a = np.asarray(value_of(c))
        return float(a.reshape(-1)[0]) if a.ndim else float(a)

    return Vec3(first(eye.x), first(eye.y), first(eye.z))


def _eye_camera(eye: Vec3) -> Camera:
    # Placeholder camera when rays are supplied directly; only eye matters.
    return Camera(lookfrom=Vec3(eye.x, eye.y, eye.z),
                  lookat=Vec3(eye.x, eye.y, eye.z - 1.0),
                  vup=Vec3(0.0, 1.0, 0.0), vfov=90.0, focus=1.0, width=1,
                  height=1)


def render_channels(ctx: TraceContext, width: int, height: int, depth: int):
    cam = ctx.camera
    dirs = primary_ray_directions(cam.lookfrom, cam.lookat, cam.vup, cam.vfov,
                                  cam.focus, width, height)
    dt = precision.active_dtype()
    ones = np.ones(width * height, dtype=dt)
    origins = Vec3(cam.lookfrom.x * ones, cam.lookfrom.y * ones,
                   cam.lookfrom.z * ones)
    return _trace(ctx, origins, dirs, depth)


def render(camera: Camera, scene, light, depth: int = 2,
           settings: RenderSettings | None = None, backend=None,
           threads: int = 1, stats: TraceStats | None = None) -> Image:
    """Full-frame forward render to an Image with raw float pixels."""
    ctx = build_trace_context(camera, scene, light, settings, backend=backend,
                              threads=threads)
    if stats is not None:
        ctx.stats = stats
    r, g, b = render_channels(ctx, camera.width, camera.height, depth)
    return from_channels(value_of(r), value_of(g), value_of(b), camera.width,
                         camera.height)


def shade(hit: Hit, light, eye: Vec3, scene, depth: int,
          settings: RenderSettings | None = None) -> Vec3:
    """Single-hit shading (scalar path), including mirror recursion."""
    from .scene import sample_material_color

    s = settings or RenderSettings()
    mat = hit.obj.material
    if hit.barycentric is not None:
        diffuse = sample_material_color(mat, hit.barycentric)
    else:
        diffuse = mat.color_diffuse
    color = mat.color_ambient * s.ambient_light
    view = normalize(eye - hit.point)
    lights = light if isinstance(light, (list, tuple)) else [light]
    for li in lights:
        ldir, irr = light_at(hit.point, li, s.falloff_norm)
        ndl = maximum(dot(hit.normal, ldir), 0.0)
        color = color + diffuse * irr * ndl
        half = normalize(ldir + view)
        ndh = maximum(dot(hit.normal, half), 0.0)
        color = color + mat.color_specular * irr * (ndh ** mat.specular_exponent)
    if depth > 0 and value_of(mat.reflection) > 0.0:
        d = hit.point - eye
        # Reflect the actual incoming direction, not the eye vector.
        d = normalize(d)
        rdir = d - hit.normal * (2.0 * dot(d, hit.normal))
        rorg = hit.point + hit.normal * precision.REFLECT_OFFSET
        rcol = raytrace(Vec3(np.array([value_of(rorg.x)]),
                             np.array([value_of(rorg.y)]),
                             np.array([value_of(rorg.z)])),
                        Vec3(np.array([value_of(rdir.x)]),
                             np.array([value_of(rdir.y)]),
                             np.array([value_of(rdir.z)])),
                        scene, light, eye, depth - 1, settings=s)
        color = color + mat.reflection * Vec3(float(rcol.x[0]),
                                              float(rcol.y[0]),
                                              float(rcol.z[0]))
    return color


def nearest_hit(ray: Ray, scene, backend=None) -> Hit | None:
    """Nearest hit over a primitive list or BVH (single-ray query)."""
    from . import bvh as bvh_mod

    if isinstance(scene, Bvh):
        return bvh_mod.intersect(ray, scene, backend=backend)
    objects = scene.objects if hasattr(scene, "objects") else list(scene)
    tables = compile_geometry(objects)
    be = backend or get_backend()
    dt = precision.active_dtype()
    ids, t, u, v, _ = be.linear_hits(
        np.array([ray.origin.x], dtype=dt), np.array([ray.origin.y], dtype=dt),
        np.array([ray.origin.z], dtype=dt),
        np.array([ray.direction.x], dtype=dt),
        np.array([ray.direction.y], dtype=dt),
        np.array([ray.direction.z], dtype=dt),
        tables.tri, tables.sph)
    if ids[0] < 0:
        return None
    return hit_from_kernel(objects, tables, ray, int(ids[0]), float(t[0]),
                           float(u[0]), float(v[0]))
