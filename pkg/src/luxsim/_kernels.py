"""Numba kernels for ray-triangle intersection and BVH traversal.

All kernels are deterministic per ray: parallel loops only fill disjoint
output slots, so results do not depend on the thread count. Triangle
intersection follows the watertight shear/scale formulation and is
double-sided; equal-distance hits (within TIE_EPS) resolve to the lowest
patch id so shared-edge grazing rays report exactly one winner.
"""

from __future__ import annotations

import numpy as np
import numba
from numba import njit, prange

# prefer OpenMP: the TBB runtime on common images is too old for numba and
# only produces a noisy fallback warning
numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

T_MIN = 1e-9  # minimum hit distance, rejects self-intersection remnants
TIE_EPS = 1e-12  # hits closer than this count as the same distance


@njit(cache=True, inline="always", error_model="numpy")
def _shear(dx, dy, dz):
    ax, ay, az = abs(dx), abs(dy), abs(dz)
    if az >= ax and az >= ay:
        kz = 2
    elif ay >= ax:
        kz = 1
    else:
        kz = 0
    kx = kz + 1
    if kx == 3:
        kx = 0
    ky = kx + 1
    if ky == 3:
        ky = 0
    d = (dx, dy, dz)
    if d[kz] < 0.0:
        kx, ky = ky, kx
    sz = 1.0 / d[kz]
    sx = d[kx] * sz
    sy = d[ky] * sz
    return kx, ky, kz, sx, sy, sz


@njit(cache=True, inline="always", error_model="numpy")
def _tri_t(ox, oy, oz, kx, ky, kz, sx, sy, sz, p0, p1, p2):
    """Watertight ray-triangle distance; -1.0 on miss. Double-sided."""
    o = (ox, oy, oz)
    a0 = p0[kx] - o[kx]
    a1 = p0[ky] - o[ky]
    a2 = p0[kz] - o[kz]
    b0 = p1[kx] - o[kx]
    b1 = p1[ky] - o[ky]
    b2 = p1[kz] - o[kz]
    c0 = p2[kx] - o[kx]
    c1 = p2[ky] - o[ky]
    c2 = p2[kz] - o[kz]

    ax = a0 - sx * a2
    ay = a1 - sy * a2
    bx = b0 - sx * b2
    by = b1 - sy * b2
    cx = c0 - sx * c2
    cy = c1 - sy * c2

    u = cx * by - cy * bx
    v = ax * cy - ay * cx
    w = bx * ay - by * ax
    if (u < 0.0 or v < 0.0 or w < 0.0) and (u > 0.0 or v > 0.0 or w > 0.0):
        return -1.0
    det = u + v + w
    if det == 0.0:
        return -1.0
    t = (u * (sz * a2) + v * (sz * b2) + w * (sz * c2)) / det
    return t


@njit(cache=True, inline="always", error_model="numpy")
def _box_hit(bmin, bmax, ox, oy, oz, dx, dy, dz, t_limit):
    t0 = 0.0
    t1 = t_limit
    for axis in range(3):
        if axis == 0:
            o, d = ox, dx
        elif axis == 1:
            o, d = oy, dy
        else:
            o, d = oz, dz
        lo = bmin[axis]
        hi = bmax[axis]
        if abs(d) < 1e-300:
            if o < lo or o > hi:
                return False
        else:
            inv = 1.0 / d
            ta = (lo - o) * inv
            tb = (hi - o) * inv
            if ta > tb:
                ta, tb = tb, ta
            if ta > t0:
                t0 = ta
            if tb < t1:
                t1 = tb
            if t0 > t1:
                return False
    return True


@njit(cache=True, error_model="numpy")
def _first_hit_bvh(
    node_min,
    node_max,
    left,
    right,
    start,
    count,
    prim,
    v0,
    v1,
    v2,
    normals,
    ox,
    oy,
    oz,
    dx,
    dy,
    dz,
    exclude,
):
    kx, ky, kz, sx, sy, sz = _shear(dx, dy, dz)
    best_t = np.inf
    best_id = np.int64(-1)
    stack = np.empty(128, dtype=np.int64)
    stack[0] = 0
    sp = 1
    while sp > 0:
        sp -= 1
        node = stack[sp]
        limit = best_t + TIE_EPS if best_id >= 0 else np.inf
        if not _box_hit(node_min[node], node_max[node], ox, oy, oz, dx, dy, dz, limit):
            continue
        if count[node] > 0:
            for k in range(start[node], start[node] + count[node]):
                p = prim[k]
                if p == exclude:
                    continue
                t = _tri_t(ox, oy, oz, kx, ky, kz, sx, sy, sz, v0[p], v1[p], v2[p])
                if t > T_MIN:
                    if t < best_t - TIE_EPS or (abs(t - best_t) <= TIE_EPS and p < best_id):
                        best_t = t
                        best_id = p
        else:
            stack[sp] = right[node]
            stack[sp + 1] = left[node]
            sp += 2
    if best_id < 0:
        return best_id, 0.0, 0.0
    cos_in = abs(dx * normals[best_id, 0] + dy * normals[best_id, 1] + dz * normals[best_id, 2])
    if cos_in > 1.0:
        cos_in = 1.0
    return best_id, best_t, cos_in


@njit(cache=True, error_model="numpy")
def _first_hit_brute(v0, v1, v2, normals, ox, oy, oz, dx, dy, dz, exclude):
    kx, ky, kz, sx, sy, sz = _shear(dx, dy, dz)
    best_t = np.inf
    best_id = np.int64(-1)
    for p in range(v0.shape[0]):
        if p == exclude:
            continue
        t = _tri_t(ox, oy, oz, kx, ky, kz, sx, sy, sz, v0[p], v1[p], v2[p])
        if t > T_MIN:
            if t < best_t - TIE_EPS or (abs(t - best_t) <= TIE_EPS and p < best_id):
                best_t = t
                best_id = p
    if best_id < 0:
        return best_id, 0.0, 0.0
    cos_in = abs(dx * normals[best_id, 0] + dy * normals[best_id, 1] + dz * normals[best_id, 2])
    if cos_in > 1.0:
        cos_in = 1.0
    return best_id, best_t, cos_in


@njit(cache=True, parallel=True, error_model="numpy")
def cast_bvh(
    node_min,
    node_max,
    left,
    right,
    start,
    count,
    prim,
    v0,
    v1,
    v2,
    normals,
    origins,
    dirs,
    excludes,
):
    m = dirs.shape[0]
    hit_ids = np.empty(m, dtype=np.int64)
    ts = np.empty(m, dtype=np.float64)
    cosines = np.empty(m, dtype=np.float64)
    for r in prange(m):
        hid, t, c = _first_hit_bvh(
            node_min,
            node_max,
            left,
            right,
            start,
            count,
            prim,
            v0,
            v1,
            v2,
            normals,
            origins[r, 0],
            origins[r, 1],
            origins[r, 2],
            dirs[r, 0],
            dirs[r, 1],
            dirs[r, 2],
            excludes[r],
        )
        hit_ids[r] = hid
        ts[r] = t
        cosines[r] = c
    return hit_ids, ts, cosines


@njit(cache=True, parallel=True, error_model="numpy")
def cast_brute(v0, v1, v2, normals, origins, dirs, excludes):
    m = dirs.shape[0]
    hit_ids = np.empty(m, dtype=np.int64)
    ts = np.empty(m, dtype=np.float64)
    cosines = np.empty(m, dtype=np.float64)
    for r in prange(m):
        hid, t, c = _first_hit_brute(
            v0,
            v1,
            v2,
            normals,
            origins[r, 0],
            origins[r, 1],
            origins[r, 2],
            dirs[r, 0],
            dirs[r, 1],
            dirs[r, 2],
            excludes[r],
        )
        hit_ids[r] = hid
        ts[r] = t
        cosines[r] = c
    return hit_ids, ts, cosines
