"""Bounding volume hierarchy with the same ray-query contract as a flat list.

Construction is a deterministic recursive median split on the longest axis
of the centroid bounds, stopping at four primitives per leaf.  Traversal
happens in the hit-finding kernels; this module owns the flattened node
arrays they consume.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import precision
from .kernels import get_backend
from .mathcore import Vec3
from .scene import SceneError, Sphere, Triangle

LEAF_SIZE = 4


@dataclass
class Aabb:
    vmin: Vec3
    vmax: Vec3


def aabb_of(primitive) -> Aabb:
    """Tightest axis-aligned box; degenerate (flat) boxes are legal."""
    if isinstance(primitive, Triangle):
        pts = [primitive.v1, primitive.v2, primitive.v3]
        return Aabb(Vec3(min(p.x for p in pts), min(p.y for p in pts),
                         min(p.z for p in pts)),
                    Vec3(max(p.x for p in pts), max(p.y for p in pts),
                         max(p.z for p in pts)))
    if isinstance(primitive, Sphere):
        c, r = primitive.center, primitive.radius
        return Aabb(Vec3(c.x - r, c.y - r, c.z - r),
                    Vec3(c.x + r, c.y + r, c.z + r))
    raise SceneError(f"no bounding box for {type(primitive).__name__}")


@dataclass
class BvhNode:
    """Test-friendly view of one flattened node."""

    aabb: Aabb
    left: int = -1
    right: int = -1
    start: int = -1
    count: int = 0

    @property
    def is_leaf(self) -> bool:
        return self.count > 0


class Bvh:
    """Flattened tree over the global primitive ids of a scene."""

    def __init__(self, objects, nmin, nmax, left, right, start, count,
                 prim_index):
        self.objects = list(objects)
        self.nmin = nmin
        self.nmax = nmax
        self.left = left
        self.right = right
        self.start = start
        self.count = count
        self.prim_index = prim_index

    def __len__(self):
        return len(self.objects)

    def __iter__(self):
        return iter(self.objects)

    def arrays(self):
        return (self.nmin, self.nmax, self.left, self.right, self.start,
                self.count, self.prim_index)

    def nodes(self) -> list:
        out = []
        for i in range(self.nmin.shape[0]):
            out.append(BvhNode(
                aabb=Aabb(Vec3(*(float(x) for x in self.nmin[i])),
                          Vec3(*(float(x) for x in self.nmax[i]))),
                left=int(self.left[i]), right=int(self.right[i]),
                start=int(self.start[i]), count=int(self.count[i])))
        return out

    def leaf_primitives(self) -> list:
        """Primitive ids per leaf, for coverage checks."""
        out = []
        for i in range(self.nmin.shape[0]):
            if self.count[i] > 0:
                s = int(self.start[i])
                out.append([int(p) for p in
                            self.prim_index[s:s + int(self.count[i])]])
        return out


def build(primitives, leaf_size: int = LEAF_SIZE) -> Bvh:
    """Deterministic median-split BVH; errors on an empty primitive list."""
    objects = list(primitives)
    if not objects:
        raise SceneError("cannot build a BVH over an empty primitive list")
    boxes = [aabb_of(o) for o in objects]
    lo = np.array([[b.vmin.x, b.vmin.y, b.vmin.z] for b in boxes],
                  dtype=np.float64)
    hi = np.array([[b.vmax.x, b.vmax.y, b.vmax.z] for b in boxes],
                  dtype=np.float64)
    centroid = 0.5 * (lo + hi)

    nmin: list = []
    nmax: list = []
    left: list = []
    right: list = []
    start: list = []
    count: list = []
    prim_index: list = []

    def new_node(ids):
        nmin.append(lo[ids].min(axis=0))
        nmax.append(hi[ids].max(axis=0))
        left.append(-1)
        right.append(-1)
        start.append(-1)
        count.append(0)
        return len(nmin) - 1

    def rec(ids) -> int:
        me = new_node(ids)
        if ids.size <= leaf_size:
            start[me] = len(prim_index)
            count[me] = int(ids.size)
            prim_index.extend(int(i) for i in ids)
            return me
        c = centroid[ids]
        axis = int(np.argmax(c.max(axis=0) - c.min(axis=0)))
        order = ids[np.argsort(c[:, axis], kind="stable")]
        mid = order.size // 2
        li = rec(order[:mid])
        ri = rec(order[mid:])
        left[me] = li
        right[me] = ri
        return me

    rec(np.arange(len(objects), dtype=np.intp))
    dt = precision.active_dtype()
    return Bvh(objects,
               np.asarray(nmin, dtype=dt), np.asarray(nmax, dtype=dt),
               np.asarray(left, dtype=np.int32),
               np.asarray(right, dtype=np.int32),
               np.asarray(start, dtype=np.int32),
               np.asarray(count, dtype=np.int32),
               np.asarray(prim_index, dtype=np.int32))


def intersect(ray, bvh: Bvh, backend=None):
    """Nearest hit of one ray through the tree; None on a miss."""
    from .renderer import compile_geometry, hit_from_kernel

    tables = compile_geometry(bvh.objects)
    be = backend or get_backend()
    dt = precision.active_dtype()
    o = ray.origin
    d = ray.direction
    ids, t, u, v, _ = be.bvh_hits(
        np.array([o.x], dtype=dt), np.array([o.y], dtype=dt),
        np.array([o.z], dtype=dt), np.array([d.x], dtype=dt),
        np.array([d.y], dtype=dt), np.array([d.z], dtype=dt),
        bvh.arrays(), tables.tri, tables.sph)
    if ids[0] < 0:
        return None
    return hit_from_kernel(bvh.objects, tables, ray, int(ids[0]),
                           float(t[0]), float(u[0]), float(v[0]))
