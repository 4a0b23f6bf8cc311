"""Ray-scene intersection over triangular patches.

An axis-aligned bounding-box hierarchy accelerates first-hit queries; a
brute-force scan over every patch is kept as the reference path and must
return identical hits. Intersection is double-sided; the source patch is
excluded by id and a minimum hit distance guards against residual
self-intersection.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .mesh import Patch

BOX_PAD_REL = 1e-9  # node boxes grow by this fraction of the scene diagonal


@dataclass(frozen=True)
class RayHit:
    patch_id: int | None
    distance: float
    incidence_cosine: float  # |ray_dir . hit_normal|, in (0, 1]

    @property
    def hit(self) -> bool:
        return self.patch_id is not None


@dataclass(frozen=True)
class AccelStructure:
    """Flattened AABB hierarchy plus the triangle arrays it indexes."""

    node_min: np.ndarray
    node_max: np.ndarray
    left: np.ndarray
    right: np.ndarray
    start: np.ndarray
    count: np.ndarray  # > 0 marks a leaf spanning prim[start:start+count]
    prim: np.ndarray  # patch ids in leaf order
    v0: np.ndarray
    v1: np.ndarray
    v2: np.ndarray
    normals: np.ndarray
    leaf_size: int

    @property
    def n_patches(self) -> int:
        return self.v0.shape[0]


def _patch_arrays(patches: list[Patch]) -> tuple[np.ndarray, ...]:
    v0 = np.ascontiguousarray([p.vertices[0] for p in patches], dtype=float)
    v1 = np.ascontiguousarray([p.vertices[1] for p in patches], dtype=float)
    v2 = np.ascontiguousarray([p.vertices[2] for p in patches], dtype=float)
    normals = np.ascontiguousarray([p.normal for p in patches], dtype=float)
    return v0, v1, v2, normals


def build_accel(patches: list[Patch], leaf_size: int = 8) -> AccelStructure:
    """Median-split AABB tree; construction is deterministic for a fixed
    patch order (stable sorts, fixed split rule)."""
    if not patches:
        raise ValueError("cannot build an acceleration structure over zero patches")
    if leaf_size < 1:
        raise ValueError("leaf_size must be >= 1")
    v0, v1, v2, normals = _patch_arrays(patches)
    n = len(patches)
    tri_min = np.minimum(np.minimum(v0, v1), v2)
    tri_max = np.maximum(np.maximum(v0, v1), v2)
    centroids = (tri_min + tri_max) * 0.5
    pad = BOX_PAD_REL * max(float(np.linalg.norm(tri_max.max(0) - tri_min.min(0))), 1.0)

    perm = np.arange(n, dtype=np.int64)
    node_min: list[np.ndarray] = []
    node_max: list[np.ndarray] = []
    left: list[int] = []
    right: list[int] = []
    start: list[int] = []
    count: list[int] = []

    def new_node(lo: int, hi: int) -> int:
        idx = len(node_min)
        ids = perm[lo:hi]
        node_min.append(tri_min[ids].min(axis=0) - pad)
        node_max.append(tri_max[ids].max(axis=0) + pad)
        left.append(-1)
        right.append(-1)
        start.append(0)
        count.append(0)
        cent = centroids[ids]
        extent = cent.max(axis=0) - cent.min(axis=0)
        if hi - lo <= leaf_size or float(extent.max()) == 0.0:
            start[idx] = lo
            count[idx] = hi - lo
            return idx
        axis = int(np.argmax(extent))
        order = np.argsort(cent[:, axis], kind="stable")
        perm[lo:hi] = ids[order]
        mid = lo + (hi - lo) // 2
        left[idx] = new_node(lo, mid)
        right[idx] = new_node(mid, hi)
        return idx

    new_node(0, n)
    return AccelStructure(
        node_min=np.ascontiguousarray(node_min, dtype=float),
        node_max=np.ascontiguousarray(node_max, dtype=float),
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        start=np.asarray(start, dtype=np.int64),
        count=np.asarray(count, dtype=np.int64),
        prim=perm,
        v0=v0,
        v1=v1,
        v2=v2,
        normals=normals,
        leaf_size=leaf_size,
    )


def _check_dirs(directions: np.ndarray) -> np.ndarray:
    dirs = np.ascontiguousarray(np.atleast_2d(directions), dtype=float)
    norms = np.linalg.norm(dirs, axis=1)
    if np.any(np.abs(norms - 1.0) > 1e-9):
        raise ValueError("ray directions must be unit vectors")
    return dirs


def first_hits(
    accel: AccelStructure,
    origins: np.ndarray,
    directions: np.ndarray,
    exclude: int | np.ndarray = -1,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Batch first-hit query: (patch ids with -1 for miss, distances,
    incidence cosines)."""
    dirs = _check_dirs(directions)
    orig = np.ascontiguousarray(np.broadcast_to(np.atleast_2d(origins), dirs.shape), dtype=float)
    excl = np.broadcast_to(np.asarray(exclude, dtype=np.int64), (dirs.shape[0],))
    return _kernels.cast_bvh(
        accel.node_min,
        accel.node_max,
        accel.left,
        accel.right,
        accel.start,
        accel.count,
        accel.prim,
        accel.v0,
        accel.v1,
        accel.v2,
        accel.normals,
        orig,
        dirs,
        np.ascontiguousarray(excl),
    )


def first_hit(
    accel: AccelStructure,
    origin: np.ndarray,
    direction: np.ndarray,
    exclude: int = -1,
) -> RayHit:
    origin = np.asarray(origin, dtype=float)
    if not np.all(np.isfinite(origin)):
        raise ValueError("ray origin must be finite")
    ids, ts, cos = first_hits(accel, origin.reshape(1, 3), np.asarray(direction).reshape(1, 3), exclude)
    if ids[0] < 0:
        return RayHit(patch_id=None, distance=float("inf"), incidence_cosine=0.0)
    return RayHit(patch_id=int(ids[0]), distance=float(ts[0]), incidence_cosine=float(cos[0]))


def brute_force_first_hits(
    patches: list[Patch],
    origins: np.ndarray,
    directions: np.ndarray,
    exclude: int | np.ndarray = -1,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Reference path: linear scan over every patch. Same tie rule and
    epsilons as the accelerated path."""
    v0, v1, v2, normals = _patch_arrays(patches)
    dirs = _check_dirs(directions)
    orig = np.ascontiguousarray(np.broadcast_to(np.atleast_2d(origins), dirs.shape), dtype=float)
    excl = np.broadcast_to(np.asarray(exclude, dtype=np.int64), (dirs.shape[0],))
    return _kernels.cast_brute(v0, v1, v2, normals, orig, dirs, np.ascontiguousarray(excl))


def brute_force_first_hit(
    patches: list[Patch],
    origin: np.ndarray,
    direction: np.ndarray,
    exclude: int = -1,
) -> RayHit:
    ids, ts, cos = brute_force_first_hits(
        patches, np.asarray(origin, dtype=float).reshape(1, 3), np.asarray(direction).reshape(1, 3), exclude
    )
    if ids[0] < 0:
        return RayHit(patch_id=None, distance=float("inf"), incidence_cosine=0.0)
    return RayHit(patch_id=int(ids[0]), distance=float(ts[0]), incidence_cosine=float(cos[0]))
