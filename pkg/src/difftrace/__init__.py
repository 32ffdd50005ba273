"""difftrace: a differentiable ray tracer with exact reverse-mode gradients.

Renders scenes of triangles and spheres through a pinhole camera, and
computes gradients of image-space losses with respect to camera, light,
material and geometry parameters for gradient-based inverse rendering.
"""

from .autodiff import (GradConfig, GradientNaNError, Tape, TapeMixError, Var,
                       finite_difference_gradient, gradient)
from .bvh import Aabb, Bvh, aabb_of, build
from .images import Image, read_ppm, write_png, write_ppm
from .inverse import (AdamState, OptimConfig, OptimResult, adam_step,
                      mse_loss, optimize, project, sgd_step, ssd_loss)
from .mathcore import Vec3, clamp01, cross, dot, length, normalize
from .params import ParamVector, pack_params, unpack_params
from .renderer import (Hit, Ray, intersect_sphere, intersect_triangle,
                       light_at, nearest_hit, raytrace, render, shade)
from .scene import (Camera, DistantLight, Material, PointLight,
                    RenderSettings, Scene, SceneFile, Sphere, Texture,
                    Triangle, get_primary_rays, load_obj, load_scene_json,
                    sample_material_color, save_obj)

__version__ = "0.1.0"

__all__ = [
    "Aabb", "AdamState", "Bvh", "Camera", "DistantLight", "GradConfig",
    "GradientNaNError", "Hit", "Image", "Material", "OptimConfig",
    "OptimResult", "ParamVector", "PointLight", "Ray", "RenderSettings",
    "Scene", "SceneFile", "Sphere", "Tape", "TapeMixError", "Texture",
    "Triangle", "Var", "Vec3", "aabb_of", "adam_step", "build", "clamp01",
    "cross", "dot", "finite_difference_gradient", "get_primary_rays",
    "gradient", "intersect_sphere", "intersect_triangle", "length",
    "light_at", "load_obj", "load_scene_json", "mse_loss", "nearest_hit",
    "normalize", "optimize", "pack_params", "project", "raytrace",
    "read_ppm", "render", "sample_material_color", "save_obj", "sgd_step",
    "shade", "ssd_loss", "unpack_params", "write_png", "write_ppm",
]
