# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hit-finding kernels: linear primitive scan and BVH traversal.

Same contract as the numpy backend; loops run per ray without the GIL so
callers can shard rays across threads.
"""

import numpy as np

cimport cython
cimport numpy as cnp
from libc.math cimport INFINITY, fabs, fmax, fmin, sqrt

cnp.import_array()

NAME = "compiled"

ctypedef fused floating:
    float
    double

cdef double T_MIN = 1e-4
cdef double DET_EPS = 1e-9


cdef inline bint _tri_hit_one(floating ox, floating oy, floating oz,
                              floating dx, floating dy, floating dz,
                              const floating* tri,
                              double* t, double* u, double* v) noexcept nogil:
    cdef double e1x = tri[3] - tri[0]
    cdef double e1y = tri[4] - tri[1]
    cdef double e1z = tri[5] - tri[2]
    cdef double e2x = tri[6] - tri[0]
    cdef double e2y = tri[7] - tri[1]
    cdef double e2z = tri[8] - tri[2]
    cdef double px = dy * e2z - dz * e2y
    cdef double py = dz * e2x - dx * e2z
    cdef double pz = dx * e2y - dy * e2x
    cdef double det = e1x * px + e1y * py + e1z * pz
    if fabs(det) <= DET_EPS:
        return 0
    cdef double inv = 1.0 / det
    cdef double tx = ox - tri[0]
    cdef double ty = oy - tri[1]
    cdef double tz = oz - tri[2]
    cdef double uu = (tx * px + ty * py + tz * pz) * inv
    if uu < 0.0:
        return 0
    cdef double qx = ty * e1z - tz * e1y
    cdef double qy = tz * e1x - tx * e1z
    cdef double qz = tx * e1y - ty * e1x
    cdef double vv = (dx * qx + dy * qy + dz * qz) * inv
    if vv < 0.0 or uu + vv > 1.0:
        return 0
    cdef double tt = (e2x * qx + e2y * qy + e2z * qz) * inv
    if tt <= T_MIN:
        return 0
    t[0] = tt
    u[0] = uu
    v[0] = vv
    return 1


cdef inline bint _sph_hit_one(floating ox, floating oy, floating oz,
                              floating dx, floating dy, floating dz,
                              const floating* sph, double* t) noexcept nogil:
    cdef double lx = ox - sph[0]
    cdef double ly = oy - sph[1]
    cdef double lz = oz - sph[2]
    cdef double b = dx * lx + dy * ly + dz * lz
    cdef double c0 = lx * lx + ly * ly + lz * lz - <double>sph[3] * <double>sph[3]
    cdef double disc = b * b - c0
    if disc < 0.0:
        return 0
    cdef double sq = sqrt(disc)
    cdef double tt = -b - sq
    if tt <= T_MIN:
        tt = -b + sq
    if tt <= T_MIN:
        return 0
    t[0] = tt
    return 1


def linear_hits(floating[::1] ox, floating[::1] oy, floating[::1] oz,
                floating[::1] dx, floating[::1] dy, floating[::1] dz,
                floating[:, ::1] tri, floating[:, ::1] sph):
    cdef Py_ssize_t n = ox.shape[0]
    cdef Py_ssize_t nt = tri.shape[0]
    cdef Py_ssize_t ns = sph.shape[0]
    ids_arr = np.full(n, -1, dtype=np.int32)
    t_arr = np.zeros(n, dtype=np.float32 if floating is float else np.float64)
    u_arr = np.zeros_like(t_arr)
    v_arr = np.zeros_like(t_arr)
    cdef cnp.int32_t[::1] ids = ids_arr
    cdef floating[::1] touts = t_arr
    cdef floating[::1] uouts = u_arr
    cdef floating[::1] vouts = v_arr
    cdef Py_ssize_t i, j
    cdef double best, t, u, v
    with nogil:
        for i in range(n):
            best = INFINITY
            for j in range(nt):
                if _tri_hit_one(ox[i], oy[i], oz[i], dx[i], dy[i], dz[i],
                                &tri[j, 0], &t, &u, &v) and t < best:
                    best = t
                    ids[i] = <cnp.int32_t>j
                    touts[i] = <floating>t
                    uouts[i] = <floating>u
                    vouts[i] = <floating>v
            for j in range(ns):
                if _sph_hit_one(ox[i], oy[i], oz[i], dx[i], dy[i], dz[i],
                                &sph[j, 0], &t) and t < best:
                    best = t
                    ids[i] = <cnp.int32_t>(nt + j)
                    touts[i] = <floating>t
                    uouts[i] = 0.0
                    vouts[i] = 0.0
    return ids_arr, t_arr, u_arr, v_arr, n * (nt + ns)


def bvh_hits(floating[::1] ox, floating[::1] oy, floating[::1] oz,
             floating[::1] dx, floating[::1] dy, floating[::1] dz,
             bvh_arrays,
             floating[:, ::1] tri, floating[:, ::1] sph):
    nmin_o, nmax_o, left_o, right_o, start_o, count_o, prim_o = bvh_arrays
    cdef floating[:, ::1] nmin = nmin_o
    cdef floating[:, ::1] nmax = nmax_o
    cdef cnp.int32_t[::1] left = left_o
    cdef cnp.int32_t[::1] right = right_o
    cdef cnp.int32_t[::1] start = start_o
    cdef cnp.int32_t[::1] count = count_o
    cdef cnp.int32_t[::1] prim = prim_o

    cdef Py_ssize_t n = ox.shape[0]
    cdef Py_ssize_t nt = tri.shape[0]
    ids_arr = np.full(n, -1, dtype=np.int32)
    t_arr = np.zeros(n, dtype=np.float32 if floating is float else np.float64)
    u_arr = np.zeros_like(t_arr)
    v_arr = np.zeros_like(t_arr)
    cdef cnp.int32_t[::1] ids = ids_arr
    cdef floating[::1] touts = t_arr
    cdef floating[::1] uouts = u_arr
    cdef floating[::1] vouts = v_arr

    cdef cnp.int32_t[::1] stack = np.zeros(256, dtype=np.int32)
    cdef Py_ssize_t i, k, sp
    cdef int node, pid
    cdef double best, t, u, v
    cdef double invx, invy, invz, t1, t2, near, far
    cdef long long ntests = 0
    with nogil:
        for i in range(n):
            best = INFINITY
            invx = 1.0 / dx[i] if dx[i] != 0.0 else (INFINITY if dx[i] >= 0 else -INFINITY)
            invy = 1.0 / dy[i] if dy[i] != 0.0 else (INFINITY if dy[i] >= 0 else -INFINITY)
            invz = 1.0 / dz[i] if dz[i] != 0.0 else (INFINITY if dz[i] >= 0 else -INFINITY)
            sp = 0
            stack[sp] = 0
            sp += 1
            while sp > 0:
                sp -= 1
                node = stack[sp]
                # slab test against [T_MIN, best]
                t1 = (nmin[node, 0] - ox[i]) * invx
                t2 = (nmax[node, 0] - ox[i]) * invx
                near = fmin(t1, t2)
                far = fmax(t1, t2)
                t1 = (nmin[node, 1] - oy[i]) * invy
                t2 = (nmax[node, 1] - oy[i]) * invy
                near = fmax(near, fmin(t1, t2))
                far = fmin(far, fmax(t1, t2))
                t1 = (nmin[node, 2] - oz[i]) * invz
                t2 = (nmax[node, 2] - oz[i]) * invz
                near = fmax(near, fmin(t1, t2))
                far = fmin(far, fmax(t1, t2))
                if near > fmin(far, best) + T_MIN or far < T_MIN:
                    continue
                if count[node] > 0:
                    ntests += count[node]
                    for k in range(start[node], start[node] + count[node]):
                        pid = prim[k]
                        if pid < nt:
                            if _tri_hit_one(ox[i], oy[i], oz[i],
                                            dx[i], dy[i], dz[i],
                                            &tri[pid, 0], &t, &u, &v) and t < best:
                                best = t
                                ids[i] = pid
                                touts[i] = <floating>t
                                uouts[i] = <floating>u
                                vouts[i] = <floating>v
                        else:
                            if _sph_hit_one(ox[i], oy[i], oz[i],
                                            dx[i], dy[i], dz[i],
                                            &sph[pid - nt, 0], &t) and t < best:
                                best = t
                                ids[i] = pid
                                touts[i] = <floating>t
                                uouts[i] = 0.0
                                vouts[i] = 0.0
                else:
                    stack[sp] = right[node]
                    sp += 1
                    stack[sp] = left[node]
                    sp += 1
    return ids_arr, t_arr, u_arr, v_arr, ntests
