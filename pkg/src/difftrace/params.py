"""Flat parameter views over scene structures.

``pack_params`` flattens a selection of scene fields into a vector the
optimizer and the finite-difference oracle can walk; ``unpack_params``
writes a vector back through the owning objects.  Each entry also carries a
slot key naming where the value lands in the compiled geometry tables, so
the differentiable renderer can wire tape leaves to the right lanes.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .scene import (DistantLight, Material, PointLight, SceneError, SceneFile,
                    Sphere, Triangle)

# Column layout of the per-material parameter table.
MAT_COLS = {"color_diffuse": 0, "color_ambient": 3, "color_specular": 6,
            "specular_exponent": 9, "reflection": 10}
MAT_WIDTH = 11
TRI_WIDTH = 9  # v1.xyz v2.xyz v3.xyz
SPH_WIDTH = 4  # center.xyz radius

_COMP = {"x": 0, "y": 1, "z": 2, "r": 0, "g": 1, "b": 2}
_VEC_ATTRS = ("x", "y", "z")


@dataclass
class ParamEntry:
    path: str          # human-readable selection path of this scalar
    owner: object      # object whose attribute holds the value
    attr: str          # attribute name on owner (a float field)
    slot: tuple        # compiled-table slot, e.g. ("tri", row, col)


@dataclass
class ParamVector:
    """Flat scalar view with the layout needed to map values back."""

    values: object     # np.ndarray, or an array-valued tape Var
    layout: list = field(default_factory=list)

    def __len__(self):
        return len(self.layout)

    def with_values(self, values) -> "ParamVector":
        return ParamVector(values=values, layout=self.layout)

    def paths(self) -> list:
        return [e.path for e in self.layout]


def scene_rows(scene):
    """Canonical row assignment shared by packing and geometry compilation.

    Returns (triangles, spheres, materials, tri_row, sph_row, mat_row) where
    the *_row maps are keyed by object identity.
    """
    triangles = [o for o in scene.objects if isinstance(o, Triangle)]
    spheres = [o for o in scene.objects if isinstance(o, Sphere)]
    tri_row = {id(o): i for i, o in enumerate(triangles)}
    sph_row = {id(o): i for i, o in enumerate(spheres)}
    materials: list = []
    mat_row: dict = {}
    for obj in scene.objects:
        if id(obj.material) not in mat_row:
            mat_row[id(obj.material)] = len(materials)
            materials.append(obj.material)
    return triangles, spheres, materials, tri_row, sph_row, mat_row


def _vec_entries(path, vec, slot_fn, comp: str | None):
    if comp is not None:
        i = _COMP.get(comp)
        if i is None:
            raise SceneError(f"unknown component {comp!r} in {path!r}")
        return [ParamEntry(f"{path}.{comp}", vec, _VEC_ATTRS[i], slot_fn(i))]
    return [ParamEntry(f"{path}.{c}", vec, _VEC_ATTRS[i], slot_fn(i))
            for i, c in enumerate(_VEC_ATTRS)]


def _material_entries(path, mat: Material, mat_row: int, fields=None,
                      comp: str | None = None):
    out = []
    names = fields if fields else list(MAT_COLS)
    for name in names:
        base = MAT_COLS[name]
        if name in ("specular_exponent", "reflection"):
            out.append(ParamEntry(f"{path}.{name}", mat, name,
                                  ("mat", mat_row, base)))
        else:
            vec = getattr(mat, name)
            out.extend(_vec_entries(f"{path}.{name}", vec,
                                    lambda i, b=base: ("mat", mat_row, b + i),
                                    comp))
    return out


def _light_entries(path, light, li: int, field_name=None, comp=None):
    if isinstance(light, PointLight):
        pos_attr, pos_name = light.position, "position"
    elif isinstance(light, DistantLight):
        pos_attr, pos_name = light.direction, "direction"
    else:
        raise SceneError(f"unsupported light in selection {path!r}")
    all_fields = ["color", "intensity", pos_name]
    names = [field_name] if field_name else all_fields
    out = []
    for name in names:
        if name == "color":
            out.extend(_vec_entries(f"{path}.color", light.color,
                                    lambda i: ("light", li, "color", i), comp))
        elif name == "intensity":
            out.append(ParamEntry(f"{path}.intensity", light, "intensity",
                                  ("light", li, "intensity", None)))
        elif name == pos_name:
            out.extend(_vec_entries(f"{path}.{pos_name}", pos_attr,
                                    lambda i: ("light", li, pos_name, i), comp))
        else:
            raise SceneError(f"unknown light field {name!r} in {path!r}")
    return out


def _object_entries(path, obj, rows, field_name=None, sub=None, comp=None):
    _, _, _, tri_row, sph_row, mat_row = rows
    out = []
    if field_name is None or field_name == "material":
        mrow = mat_row[id(obj.material)]
        mat_fields = [sub] if sub else None
        mat_part = _material_entries(f"{path}.material", obj.material, mrow,
                                     fields=mat_fields, comp=comp)
    if field_name is None:
        if isinstance(obj, Triangle):
            row = tri_row[id(obj)]
            for vi, vname in enumerate(("v1", "v2", "v3")):
                out.extend(_vec_entries(f"{path}.{vname}", getattr(obj, vname),
                                        lambda i, v=vi: ("tri", row, 3 * v + i),
                                        None))
        elif isinstance(obj, Sphere):
            row = sph_row[id(obj)]
            out.extend(_vec_entries(f"{path}.center", obj.center,
                                    lambda i: ("sph", row, i), None))
            out.append(ParamEntry(f"{path}.radius", obj, "radius",
                                  ("sph", row, 3)))
        return out + mat_part
    if field_name == "material":
        return mat_part
    if isinstance(obj, Triangle) and field_name in ("v1", "v2", "v3"):
        row = tri_row[id(obj)]
        vi = ("v1", "v2", "v3").index(field_name)
        return _vec_entries(f"{path}.{field_name}", getattr(obj, field_name),
                            lambda i: ("tri", row, 3 * vi + i), comp)
    if isinstance(obj, Sphere) and field_name == "center":
        row = sph_row[id(obj)]
        return _vec_entries(f"{path}.center", obj.center,
                            lambda i: ("sph", row, i), comp)
    if isinstance(obj, Sphere) and field_name == "radius":
        return [ParamEntry(f"{path}.radius", obj, "radius",
                           ("sph", sph_row[id(obj)], 3))]
    raise SceneError(f"unknown field {field_name!r} for {type(obj).__name__} "
                     f"in selection {path!r}")


_CAMERA_VECS = {"lookfrom": "lookfrom", "lookat": "lookat", "vup": "vup"}

_INDEXED = re.compile(r"^(\w+)\[([^\]]+)\]$")


def _split(spec: str):
    return [p for p in spec.split(".") if p]


def selection_entries(bundle: SceneFile, selection) -> list:
    """Expand selection path strings into one ParamEntry per scalar."""
    rows = scene_rows(bundle.scene)
    entries: list = []
    for spec in selection:
        parts = _split(spec.strip())
        if not parts:
            raise SceneError("empty selection path")
        head = parts[0]
        m = _INDEXED.match(head)
        if head == "camera":
            if len(parts) < 2:
                raise SceneError("select camera sub-fields, e.g. camera.lookfrom")
            fname = parts[1]
            comp = parts[2] if len(parts) > 2 else None
            if fname in _CAMERA_VECS:
                vec = getattr(bundle.camera, fname)
                entries.extend(_vec_entries(f"camera.{fname}", vec,
                                            lambda i, f=fname: ("cam", f, i),
                                            comp))
            elif fname == "focus":
                entries.append(ParamEntry("camera.focus", bundle.camera,
                                          "focus", ("cam", "focus", None)))
            else:
                raise SceneError(f"unknown camera field {fname!r} "
                                 "(differentiable: lookfrom/lookat/vup/focus)")
        elif m and m.group(1) == "lights":
            idxs = (range(len(bundle.lights)) if m.group(2) == "*"
                    else [int(m.group(2))])
            for li in idxs:
                if not (0 <= li < len(bundle.lights)):
                    raise SceneError(f"light index {li} out of range")
                entries.extend(_light_entries(f"lights[{li}]",
                                              bundle.lights[li], li,
                                              parts[1] if len(parts) > 1 else None,
                                              parts[2] if len(parts) > 2 else None))
        elif m and m.group(1) == "objects":
            idxs = (range(len(bundle.scene.objects)) if m.group(2) == "*"
                    else [int(m.group(2))])
            for oi in idxs:
                if not (0 <= oi < len(bundle.scene.objects)):
                    raise SceneError(f"object index {oi} out of range")
                fname = parts[1] if len(parts) > 1 else None
                sub = comp = None
                if fname == "material":
                    sub = parts[2] if len(parts) > 2 else None
                    comp = parts[3] if len(parts) > 3 else None
                else:
                    comp = parts[2] if len(parts) > 2 else None
                entries.extend(_object_entries(f"objects[{oi}]",
                                               bundle.scene.objects[oi], rows,
                                               fname, sub, comp))
        elif m and m.group(1) == "materials":
            name = m.group(2)
            if name not in bundle.scene.materials:
                raise SceneError(f"unknown material {name!r} in selection")
            mat = bundle.scene.materials[name]
            if id(mat) not in rows[5]:
                raise SceneError(f"material {name!r} is not used by any object")
            entries.extend(_material_entries(
                f"materials[{name}]", mat, rows[5][id(mat)],
                fields=[parts[1]] if len(parts) > 1 else None,
                comp=parts[2] if len(parts) > 2 else None))
        else:
            raise SceneError(f"unknown selection path {spec!r}")

    # Shared owners (e.g. one material on many objects) appear once.
    seen = set()
    unique = []
    for e in entries:
        key = (id(e.owner), e.attr)
        if key not in seen:
            seen.add(key)
            unique.append(e)
    return unique


def pack_params(bundle: SceneFile, selection) -> ParamVector:
    """Flatten the selected scene parameters into a vector."""
    layout = selection_entries(bundle, selection)
    values = np.array([float(getattr(e.owner, e.attr)) for e in layout],
                      dtype=np.float64)
    return ParamVector(values=values, layout=layout)


def unpack_params(pv: ParamVector) -> None:
    """Write vector values back into the owning scene structures."""
    vals = np.asarray(pv.values, dtype=np.float64)
    if vals.shape != (len(pv.layout),):
        raise SceneError("parameter vector length does not match its layout")
    for e, v in zip(pv.layout, vals):
        setattr(e.owner, e.attr, float(v))


def geometry_selected(pv: ParamVector) -> bool:
    """True when any vertex/center/radius parameter is selected."""
    return any(e.slot[0] in ("tri", "sph") for e in pv.layout)
