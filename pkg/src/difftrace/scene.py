"""Scene description: camera, lights, materials, primitives and file IO.

Scene structures always hold plain floats; differentiable evaluation swaps
selected fields for tape Vars through a separate view (see renderer), so
constructor validation never interferes with optimizer-proposed values.
"""

from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import precision
from .mathcore import Vec3, cross, dot, normalize, value_of, vec3

log = logging.getLogger(__name__)

DEFAULT_SPECULAR_EXPONENT = 50.0


class SceneError(ValueError):
    """Invalid scene description (bad invariants, malformed files)."""


@dataclass
class Camera:
    """Pinhole camera; the image plane sits at distance ``focus`` along -w."""

    lookfrom: Vec3
    lookat: Vec3
    vup: Vec3
    vfov: float
    focus: float
    width: int
    height: int

    def __post_init__(self):
        if not (0.0 < self.vfov < 180.0):
            raise SceneError(f"vfov must be in (0, 180), got {self.vfov}")
        if self.focus <= 0.0:
            raise SceneError(f"focus must be positive, got {self.focus}")
        if self.width < 1 or self.height < 1:
            raise SceneError("width and height must be >= 1")
        d = self.lookfrom - self.lookat
        if value_of(dot(d, d)) <= 0.0:
            raise SceneError("lookfrom must differ from lookat")


@dataclass
class Texture:
    """Image texture with the per-vertex UV coordinates it is sampled by."""

    image: np.ndarray  # (h, w, 3) floats in [0, 1]
    uvs: tuple | None = None  # ((u1,v1), (u2,v2), (u3,v3))


@dataclass
class Material:
    color_diffuse: Vec3 = field(default_factory=lambda: Vec3(1.0, 1.0, 1.0))
    color_ambient: Vec3 = field(default_factory=lambda: Vec3(0.0, 0.0, 0.0))
    color_specular: Vec3 = field(default_factory=lambda: Vec3(1.0, 1.0, 1.0))
    specular_exponent: float = DEFAULT_SPECULAR_EXPONENT
    reflection: float = 0.0
    texture: Texture | None = None

    def __post_init__(self):
        for v in (self.color_diffuse, self.color_ambient, self.color_specular):
            if not all(math.isfinite(value_of(c)) for c in v):
                raise SceneError("material colors must be finite")
        if not (0.0 <= self.reflection <= 1.0):
            raise SceneError(f"reflection must be in [0, 1], got {self.reflection}")


@dataclass
class Triangle:
    v1: Vec3
    v2: Vec3
    v3: Vec3
    material: Material = field(default_factory=Material)
    uv: tuple | None = None  # per-vertex (u, v), from OBJ vt records
    vn: tuple | None = None  # per-vertex normals, from OBJ vn records

    def __post_init__(self):
        n = cross(self.v2 - self.v1, self.v3 - self.v1)
        if value_of(dot(n, n)) <= (2.0 * 1e-12) ** 2:
            raise SceneError("degenerate triangle (area below 1e-12)")


@dataclass
class Sphere:
    center: Vec3
    radius: float
    material: Material = field(default_factory=Material)

    def __post_init__(self):
        if self.radius <= 0.0:
            raise SceneError(f"sphere radius must be positive, got {self.radius}")


@dataclass
class PointLight:
    color: Vec3
    intensity: float
    position: Vec3

    def __post_init__(self):
        if not (math.isfinite(self.intensity) and self.intensity >= 0.0):
            raise SceneError("point light intensity must be finite and >= 0")


@dataclass
class DistantLight:
    """Directional light; ``direction`` points from the surface toward the light."""

    color: Vec3
    intensity: float
    direction: Vec3

    def __post_init__(self):
        if not (math.isfinite(self.intensity) and self.intensity >= 0.0):
            raise SceneError("distant light intensity must be finite and >= 0")
        self.direction = normalize(self.direction)


@dataclass
class RenderSettings:
    """Shading constants kept out of the algorithm code so they stay tunable."""

    background: Vec3 = field(default_factory=lambda: Vec3(0.0, 0.0, 0.0))
    # Flat illumination multiplying material ambient colors; off by default
    # so unlit scenes render exactly black.
    ambient_light: Vec3 = field(default_factory=lambda: Vec3(0.0, 0.0, 0.0))
    # Point-light irradiance = color * intensity / (falloff_norm * d^2).
    falloff_norm: float = 4.0 * math.pi
    smooth_normals: bool = False
    depth: int = 2


@dataclass
class Scene:
    """Primitive list plus the named materials it references."""

    objects: list = field(default_factory=list)
    materials: dict = field(default_factory=dict)

    def __iter__(self):
        return iter(self.objects)

    def __len__(self):
        return len(self.objects)


# ---------------------------------------------------------------------------
# Primary rays


def camera_basis(lookfrom: Vec3, lookat: Vec3, vup: Vec3):
    """Right-handed orthonormal basis (u right, v up, w backward)."""
    w = normalize(lookfrom - lookat)
    uc = cross(vup, w)
    if value_of(dot(uc, uc)) <= 1e-12:
        raise SceneError("vup is parallel to the view direction")
    u = normalize(uc)
    v = cross(w, u)
    return u, v, w


def pixel_grid(width: int, height: int):
    """Normalized pixel-center offsets, row-major, (0,0) at top-left."""
    dt = precision.active_dtype()
    xs = (2.0 * (np.arange(width, dtype=dt) + dt(0.5)) / dt(width)) - dt(1.0)
    ys = dt(1.0) - 2.0 * (np.arange(height, dtype=dt) + dt(0.5)) / dt(height)
    px = np.tile(xs, height)
    py = np.repeat(ys, width)
    return px, py


def primary_ray_directions(lookfrom, lookat, vup, vfov, focus, width, height):
    """Per-pixel unit directions; generic over the scalar type of the inputs."""
    u, v, w = camera_basis(lookfrom, lookat, vup)
    px, py = pixel_grid(width, height)
    half_h = focus * math.tan(math.radians(float(value_of(vfov))) / 2.0)
    half_w = half_h * (width / height)
    plane = u * (px * half_w) + v * (py * half_h) - w * focus
    return normalize(plane)


def get_primary_rays(cam: Camera):
    """(origins, directions) as Vec3s of per-pixel arrays, row-major."""
    dirs = primary_ray_directions(cam.lookfrom, cam.lookat, cam.vup,
                                  cam.vfov, cam.focus, cam.width, cam.height)
    n = cam.width * cam.height
    dt = precision.active_dtype()
    ones = np.ones(n, dtype=dt)
    origins = Vec3(cam.lookfrom.x * ones, cam.lookfrom.y * ones,
                   cam.lookfrom.z * ones)
    return origins, dirs


# ---------------------------------------------------------------------------
# Texture sampling


def sample_material_color(mat: Material, barycentric):
    """Diffuse color at a triangle point given barycentric weights (w1, w2, w3).

    Plain materials return ``color_diffuse`` unchanged; textured materials
    interpolate the texture's per-vertex UVs and do a nearest-texel lookup.
    """
    w1, w2, w3 = barycentric
    s = value_of(w1) + value_of(w2) + value_of(w3)
    if np.any(np.abs(s - 1.0) > 1e-5):
        raise ValueError("barycentric weights must sum to 1")
    if np.any(np.minimum(np.minimum(value_of(w1), value_of(w2)),
                         value_of(w3)) < -1e-6):
        raise ValueError("barycentric weights must be >= -1e-6")
    if mat.texture is None or mat.texture.uvs is None:
        return mat.color_diffuse
    (u1, v1), (u2, v2), (u3, v3) = mat.texture.uvs
    u = value_of(w1) * u1 + value_of(w2) * u2 + value_of(w3) * u3
    v = value_of(w1) * v1 + value_of(w2) * v2 + value_of(w3) * v3
    r, g, b = texture_lookup(mat.texture.image, u, v)
    return Vec3(r, g, b)


def texture_lookup(image: np.ndarray, u, v):
    """Nearest-texel fetch; v runs bottom-up per OBJ convention."""
    h, w = image.shape[0], image.shape[1]
    ix = np.clip(np.floor(np.asarray(u) * w).astype(np.intp), 0, w - 1)
    iy = np.clip(np.floor((1.0 - np.asarray(v)) * h).astype(np.intp), 0, h - 1)
    texel = image[iy, ix]
    return texel[..., 0], texel[..., 1], texel[..., 2]


# ---------------------------------------------------------------------------
# Wavefront OBJ


class TriangleList(list):
    """Loader result: triangles plus counts of dropped/ignored records."""

    def __init__(self, *args):
        super().__init__(*args)
        self.dropped_degenerate = 0
        self.ignored_directives = 0


def _parse_face_vertex(token: str, nv: int, nt: int, nn: int, lineno: int):
    parts = token.split("/")
    try:
        vi = int(parts[0])
        ti = int(parts[1]) if len(parts) > 1 and parts[1] else None
        ni = int(parts[2]) if len(parts) > 2 and parts[2] else None
    except ValueError:
        raise SceneError(f"line {lineno}: malformed face vertex {token!r}")
    vi = vi - 1 if vi > 0 else nv + vi
    if ti is not None:
        ti = ti - 1 if ti > 0 else nt + ti
    if ni is not None:
        ni = ni - 1 if ni > 0 else nn + ni
    if not (0 <= vi < nv):
        raise SceneError(f"line {lineno}: vertex index {parts[0]} out of range")
    return vi, ti, ni


def load_obj(path, material: Material | None = None) -> TriangleList:
    """Triangles from an ASCII wavefront OBJ (v/vt/vn/f subset).

    Polygonal faces are fan-triangulated around their first vertex; zero-area
    triangles are dropped and counted.  All faces share one material instance.
    """
    if not os.path.exists(path):
        raise SceneError(f"OBJ file not found: {path}")
    mat = material if material is not None else Material()
    verts: list = []
    uvs: list = []
    norms: list = []
    out = TriangleList()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            tokens = line.split()
            key = tokens[0]
            if key == "v":
                if len(tokens) < 4:
                    raise SceneError(f"line {lineno}: vertex needs 3 coordinates")
                verts.append(tuple(float(t) for t in tokens[1:4]))
            elif key == "vt":
                uvs.append((float(tokens[1]),
                            float(tokens[2]) if len(tokens) > 2 else 0.0))
            elif key == "vn":
                norms.append(tuple(float(t) for t in tokens[1:4]))
            elif key == "f":
                if len(tokens) < 4:
                    raise SceneError(f"line {lineno}: face needs >= 3 vertices")
                fv = [_parse_face_vertex(t, len(verts), len(uvs), len(norms),
                                         lineno) for t in tokens[1:]]
                for k in range(1, len(fv) - 1):
                    corner = (fv[0], fv[k], fv[k + 1])
                    tri_uv = None
                    if all(c[1] is not None for c in corner):
                        tri_uv = tuple(uvs[c[1]] for c in corner)
                    tri_vn = None
                    if all(c[2] is not None for c in corner):
                        tri_vn = tuple(vec3(norms[c[2]]) for c in corner)
                    try:
                        out.append(Triangle(vec3(verts[corner[0][0]]),
                                            vec3(verts[corner[1][0]]),
                                            vec3(verts[corner[2][0]]),
                                            material=mat, uv=tri_uv, vn=tri_vn))
                    except SceneError:
                        out.dropped_degenerate += 1
            elif key in ("mtllib", "usemtl"):
                out.ignored_directives += 1
            # o/g/s and other grouping directives carry no geometry; skip.
    if out.dropped_degenerate:
        log.warning("%s: dropped %d degenerate triangle(s)", path,
                    out.dropped_degenerate)
    if out.ignored_directives:
        log.warning("%s: ignored %d mtllib/usemtl directive(s)", path,
                    out.ignored_directives)
    return out


def save_obj(triangles, path) -> None:
    """Re-emit triangles (3 vertices per face, no sharing) for round-trips.

    repr() gives the shortest exact decimal, so reloading reproduces the
    vertex values bit for bit.
    """
    with open(path, "w", encoding="utf-8") as fh:
        for tri in triangles:
            for v in (tri.v1, tri.v2, tri.v3):
                fh.write(f"v {float(v.x)!r} {float(v.y)!r} {float(v.z)!r}\n")
        for i in range(len(triangles)):
            b = 3 * i
            fh.write(f"f {b + 1} {b + 2} {b + 3}\n")


def builtin_asset(name: str) -> str:
    """Path of a mesh bundled with the package (e.g. 'tree.obj')."""
    path = os.path.join(os.path.dirname(os.path.abspath(__file__)), "assets",
                        name)
    if not os.path.exists(path):
        raise SceneError(f"no builtin asset {name!r}")
    return path


# ---------------------------------------------------------------------------
# Scene JSON


@dataclass
class SceneFile:
    """One renderable configuration: camera + scene + lights + settings."""

    camera: Camera
    scene: Scene
    lights: list
    settings: RenderSettings = field(default_factory=RenderSettings)


def _vec(data, default=None) -> Vec3:
    if data is None:
        return default
    if isinstance(data, (int, float)):
        return Vec3(float(data), float(data), float(data))
    return vec3(data)


def _material_from_json(data: dict) -> Material:
    return Material(
        color_diffuse=_vec(data.get("color_diffuse"), Vec3(1.0, 1.0, 1.0)),
        color_ambient=_vec(data.get("color_ambient"), Vec3(0.0, 0.0, 0.0)),
        color_specular=_vec(data.get("color_specular"), Vec3(1.0, 1.0, 1.0)),
        specular_exponent=float(data.get("specular_exponent",
                                         DEFAULT_SPECULAR_EXPONENT)),
        reflection=float(data.get("reflection", 0.0)),
    )


def _light_from_json(data: dict):
    kind = data.get("type", "point")
    if kind == "point":
        return PointLight(color=_vec(data["color"]),
                          intensity=float(data["intensity"]),
                          position=_vec(data["position"]))
    if kind == "distant":
        return DistantLight(color=_vec(data["color"]),
                            intensity=float(data["intensity"]),
                            direction=_vec(data["direction"]))
    raise SceneError(f"unknown light type {kind!r}")


def load_scene_json(path) -> SceneFile:
    """Parse the scene document; OBJ paths resolve relative to the file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise SceneError(f"scene file not found: {path}")
    except json.JSONDecodeError as e:
        raise SceneError(f"invalid scene JSON: {e}")
    base = os.path.dirname(os.path.abspath(path))

    cam = data.get("camera")
    if cam is None:
        raise SceneError("scene file has no camera")
    camera = Camera(lookfrom=_vec(cam["lookfrom"]), lookat=_vec(cam["lookat"]),
                    vup=_vec(cam.get("vup", [0.0, 1.0, 0.0])),
                    vfov=float(cam["vfov"]), focus=float(cam.get("focus", 1.0)),
                    width=int(cam["width"]), height=int(cam["height"]))

    materials = {name: _material_from_json(m)
                 for name, m in data.get("materials", {}).items()}

    def resolve_material(name):
        if name is None:
            return Material()
        if name not in materials:
            raise SceneError(f"unknown material {name!r}")
        return materials[name]

    objects: list = []
    for mesh in data.get("meshes", []):
        obj_path = mesh["obj"]
        if obj_path.startswith("builtin:"):
            obj_path = builtin_asset(obj_path[len("builtin:"):])
        elif not os.path.isabs(obj_path):
            obj_path = os.path.join(base, obj_path)
        objects.extend(load_obj(obj_path, resolve_material(mesh.get("material"))))
    for prim in data.get("primitives", []):
        kind = prim.get("type")
        mat = resolve_material(prim.get("material"))
        if kind == "triangle":
            objects.append(Triangle(_vec(prim["v1"]), _vec(prim["v2"]),
                                    _vec(prim["v3"]), material=mat))
        elif kind == "sphere":
            objects.append(Sphere(center=_vec(prim["center"]),
                                  radius=float(prim["radius"]), material=mat))
        else:
            raise SceneError(f"unknown primitive type {kind!r}")

    lights = [_light_from_json(l) for l in data.get("lights", [])]

    settings = RenderSettings()
    s = data.get("settings", {})
    if "background" in s:
        settings.background = _vec(s["background"])
    if "ambient_light" in s:
        settings.ambient_light = _vec(s["ambient_light"])
    if "falloff_norm" in s:
        settings.falloff_norm = float(s["falloff_norm"])
    if "smooth_normals" in s:
        settings.smooth_normals = bool(s["smooth_normals"])
    if "depth" in s:
        settings.depth = int(s["depth"])

    return SceneFile(camera=camera, scene=Scene(objects=objects,
                                                materials=materials),
                     lights=lights, settings=settings)
