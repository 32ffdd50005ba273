"""Pure-numpy hit-finding: vectorized over rays, looping over primitives.

Functionally identical to the compiled backend; used when the extension is
unavailable or explicitly selected.  The BVH traversal recurses over nodes
with the subset of rays whose slab interval is still open.
"""

from __future__ import annotations

import numpy as np

from .. import precision

NAME = "python"


def _tri_hit(ox, oy, oz, dx, dy, dz, tri):
    """Moller-Trumbore for one triangle against many rays."""
    v1x, v1y, v1z, v2x, v2y, v2z, v3x, v3y, v3z = tri
    e1x, e1y, e1z = v2x - v1x, v2y - v1y, v2z - v1z
    e2x, e2y, e2z = v3x - v1x, v3y - v1y, v3z - v1z
    px = dy * e2z - dz * e2y
    py = dz * e2x - dx * e2z
    pz = dx * e2y - dy * e2x
    det = e1x * px + e1y * py + e1z * pz
    ok = np.abs(det) > precision.DET_EPS
    inv = 1.0 / np.where(ok, det, 1.0)
    tx, ty, tz = ox - v1x, oy - v1y, oz - v1z
    u = (tx * px + ty * py + tz * pz) * inv
    qx = ty * e1z - tz * e1y
    qy = tz * e1x - tx * e1z
    qz = tx * e1y - ty * e1x
    v = (dx * qx + dy * qy + dz * qz) * inv
    t = (e2x * qx + e2y * qy + e2z * qz) * inv
    ok &= (u >= 0.0) & (v >= 0.0) & (u + v <= 1.0) & (t > precision.T_MIN)
    return t, u, v, ok


def _sph_hit(ox, oy, oz, dx, dy, dz, sph):
    """Nearest valid root of the sphere quadratic, stable formulation."""
    cx, cy, cz, r = sph
    lx, ly, lz = ox - cx, oy - cy, oz - cz
    b = dx * lx + dy * ly + dz * lz
    c0 = lx * lx + ly * ly + lz * lz - r * r
    disc = b * b - c0
    ok = disc >= 0.0
    sq = np.sqrt(np.where(ok, disc, 0.0))
    t1 = -b - sq
    t2 = -b + sq
    t = np.where(t1 > precision.T_MIN, t1, t2)
    ok &= t > precision.T_MIN
    return t, ok


def linear_hits(ox, oy, oz, dx, dy, dz, tri, sph):
    """Nearest hit by scanning every primitive for every ray.

    Returns (prim_id, t, u, v, n_tests); prim ids index triangles first,
    then spheres; -1 is a miss.
    """
    n = ox.shape[0]
    dt = ox.dtype
    best_t = np.full(n, np.inf, dtype=dt)
    best_id = np.full(n, -1, dtype=np.int32)
    best_u = np.zeros(n, dtype=dt)
    best_v = np.zeros(n, dtype=dt)
    for j in range(tri.shape[0]):
        t, u, v, ok = _tri_hit(ox, oy, oz, dx, dy, dz, tri[j])
        closer = ok & (t < best_t)
        best_t = np.where(closer, t, best_t)
        best_u = np.where(closer, u, best_u)
        best_v = np.where(closer, v, best_v)
        best_id = np.where(closer, np.int32(j), best_id)
    nt = tri.shape[0]
    for j in range(sph.shape[0]):
        t, ok = _sph_hit(ox, oy, oz, dx, dy, dz, sph[j])
        closer = ok & (t < best_t)
        best_t = np.where(closer, t, best_t)
        best_id = np.where(closer, np.int32(nt + j), best_id)
    return best_id, best_t, best_u, best_v, n * (tri.shape[0] + sph.shape[0])


def _leaf_test(idx, prims, nt, tri, sph, ox, oy, oz, dx, dy, dz,
               best_t, best_id, best_u, best_v):
    for pid in prims:
        if pid < nt:
            t, u, v, ok = _tri_hit(ox[idx], oy[idx], oz[idx],
                                   dx[idx], dy[idx], dz[idx], tri[pid])
            closer = ok & (t < best_t[idx])
            sel = idx[closer]
            best_t[sel] = t[closer]
            best_u[sel] = u[closer]
            best_v[sel] = v[closer]
            best_id[sel] = pid
        else:
            t, ok = _sph_hit(ox[idx], oy[idx], oz[idx],
                             dx[idx], dy[idx], dz[idx], sph[pid - nt])
            closer = ok & (t < best_t[idx])
            sel = idx[closer]
            best_t[sel] = t[closer]
            best_id[sel] = pid


def bvh_hits(ox, oy, oz, dx, dy, dz, bvh_arrays, tri, sph):
    """Nearest hit through the BVH; same contract as linear_hits."""
    nmin, nmax, left, right, start, count, prim_index = bvh_arrays
    n = ox.shape[0]
    dt = ox.dtype
    best_t = np.full(n, np.inf, dtype=dt)
    best_id = np.full(n, -1, dtype=np.int32)
    best_u = np.zeros(n, dtype=dt)
    best_v = np.zeros(n, dtype=dt)
    nt = tri.shape[0]
    ntests = 0

    with np.errstate(divide="ignore", invalid="ignore"):
        ix = 1.0 / dx
        iy = 1.0 / dy
        iz = 1.0 / dz

    # Slab-test padding absorbs 1-ulp disagreement with the exact prim test.
    pad = precision.T_MIN

    stack = [(0, np.arange(n, dtype=np.intp))]
    while stack:
        node, idx = stack.pop()
        if idx.size == 0:
            continue
        t1 = (nmin[node, 0] - ox[idx]) * ix[idx]
        t2 = (nmax[node, 0] - ox[idx]) * ix[idx]
        near = np.fmin(t1, t2)
        far = np.fmax(t1, t2)
        t1 = (nmin[node, 1] - oy[idx]) * iy[idx]
        t2 = (nmax[node, 1] - oy[idx]) * iy[idx]
        near = np.fmax(near, np.fmin(t1, t2))
        far = np.fmin(far, np.fmax(t1, t2))
        t1 = (nmin[node, 2] - oz[idx]) * iz[idx]
        t2 = (nmax[node, 2] - oz[idx]) * iz[idx]
        near = np.fmax(near, np.fmin(t1, t2))
        far = np.fmin(far, np.fmax(t1, t2))
        alive = (near <= np.fmin(far, best_t[idx]) + pad) & \
                (far >= precision.T_MIN)
        idx = idx[alive]
        if idx.size == 0:
            continue
        if count[node] > 0:
            prims = prim_index[start[node]:start[node] + count[node]]
            ntests += idx.size * prims.size
            _leaf_test(idx, prims, nt, tri, sph, ox, oy, oz, dx, dy, dz,
                       best_t, best_id, best_u, best_v)
        else:
            stack.append((right[node], idx))
            stack.append((left[node], idx))
    return best_id, best_t, best_u, best_v, ntests
