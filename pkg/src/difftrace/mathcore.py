"""Three-component vector arithmetic generic over the scalar type.

The same vector code runs on plain floats, on numpy arrays (one lane per
ray), and on tape Vars, so the rendering pipeline is written once and is
differentiable end to end.  Comparisons always yield plain booleans; control
flow is never differentiated.
"""

from __future__ import annotations

import numpy as np

from . import precision
from .autodiff import Var


def sqrt(x):
    return x.sqrt() if isinstance(x, Var) else np.sqrt(x)


def absolute(x):
    return abs(x) if isinstance(x, Var) else np.abs(x)


def maximum(a, b):
    """Elementwise max; on ties the first argument carries the derivative."""
    if isinstance(a, Var):
        return a.maximum(b)
    if isinstance(b, Var):
        return b.rmaximum(a)
    return np.maximum(a, b)


def minimum(a, b):
    if isinstance(a, Var):
        return a.minimum(b)
    if isinstance(b, Var):
        return b.rminimum(a)
    return np.minimum(a, b)


def value_of(x):
    """Plain numeric payload of a scalar (identity for non-Vars)."""
    return x.value if isinstance(x, Var) else x


def take(x, indices):
    if isinstance(x, Var):
        return x.take(indices)
    arr = np.asarray(x)
    if arr.ndim == 0:
        return np.full(len(indices), arr[()], dtype=arr.dtype)
    return arr.take(indices)


class Vec3:
    """3-vector of a generic scalar; used for positions, directions and RGB."""

    __slots__ = ("x", "y", "z")

    def __init__(self, x, y=None, z=None):
        if y is None and z is None:
            y = z = x
        self.x = x
        self.y = y
        self.z = z

    def __add__(self, other):
        if isinstance(other, Vec3):
            return Vec3(self.x + other.x, self.y + other.y, self.z + other.z)
        return Vec3(self.x + other, self.y + other, self.z + other)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Vec3):
            return Vec3(self.x - other.x, self.y - other.y, self.z - other.z)
        return Vec3(self.x - other, self.y - other, self.z - other)

    def __rsub__(self, other):
        return Vec3(other - self.x, other - self.y, other - self.z)

    def __mul__(self, other):
        if isinstance(other, Vec3):
            return Vec3(self.x * other.x, self.y * other.y, self.z * other.z)
        return Vec3(self.x * other, self.y * other, self.z * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Vec3):
            return Vec3(self.x / other.x, self.y / other.y, self.z / other.z)
        return Vec3(self.x / other, self.y / other, self.z / other)

    def __neg__(self):
        return Vec3(-self.x, -self.y, -self.z)

    def values(self) -> "Vec3":
        return Vec3(value_of(self.x), value_of(self.y), value_of(self.z))

    def take(self, indices) -> "Vec3":
        return Vec3(take(self.x, indices), take(self.y, indices),
                    take(self.z, indices))

    def as_array(self) -> np.ndarray:
        """(..., 3) numpy array of the plain values."""
        return np.stack(np.broadcast_arrays(
            np.asarray(value_of(self.x)), np.asarray(value_of(self.y)),
            np.asarray(value_of(self.z))), axis=-1)

    def __iter__(self):
        return iter((self.x, self.y, self.z))

    def __repr__(self):
        return f"Vec3({self.x!r}, {self.y!r}, {self.z!r})"


def vec3(seq) -> Vec3:
    x, y, z = seq
    return Vec3(float(x), float(y), float(z))


def dot(a: Vec3, b: Vec3):
    return a.x * b.x + a.y * b.y + a.z * b.z


def cross(a: Vec3, b: Vec3) -> Vec3:
    return Vec3(a.y * b.z - a.z * b.y,
                a.z * b.x - a.x * b.z,
                a.x * b.y - a.y * b.x)


def length(v: Vec3):
    return sqrt(dot(v, v))


def normalize(v: Vec3) -> Vec3:
    """v / |v|, or the zero vector when |v|^2 falls below the guard epsilon."""
    sq = dot(v, v)
    sq_plain = value_of(sq)
    if np.ndim(sq_plain) == 0:
        if sq_plain <= precision.NORM_EPS:
            return Vec3(0.0 * v.x, 0.0 * v.y, 0.0 * v.z)
        return v / sqrt(sq)
    # Array lanes: guard degenerate lanes without branching.
    safe = maximum(sq, precision.NORM_EPS)
    inv = 1.0 / sqrt(safe)
    mask = (sq_plain > precision.NORM_EPS).astype(precision.active_dtype())
    return v * (inv * mask)


def clamp01(c: Vec3) -> Vec3:
    """Each component clamped to [0, 1]."""
    return Vec3(minimum(maximum(c.x, 0.0), 1.0),
                minimum(maximum(c.y, 0.0), 1.0),
                minimum(maximum(c.z, 0.0), 1.0))
