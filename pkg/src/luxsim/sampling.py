"""Cosine-weighted hemisphere direction sets.

Directions are produced by lifting unit-disc samples through Malley's
mapping (x, y) -> (x, y, sqrt(1 - x^2 - y^2)), so the fraction of rays
landing on a target directly estimates its form factor. Two generators are
provided: a deterministic equal-area disc decomposition (isocell) and a
seeded Monte Carlo sampler.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

RING_BASE = 3  # cells in the innermost ring; ring j holds RING_BASE*(2j-1)


@dataclass(frozen=True)
class DirectionSet:
    """Immutable bundle of local-frame unit directions (z = patch normal)."""

    directions: np.ndarray  # (m, 3), unit vectors, all z > 0
    disc_points: np.ndarray  # (m, 2), the generating unit-disc samples
    method: str  # "isocell" | "monte-carlo"
    seed: int | None = None

    @property
    def count(self) -> int:
        return self.directions.shape[0]


def isocell_ring_layout(rings: int) -> list[tuple[float, float, int]]:
    """Per-ring (inner radius, outer radius, cell count) for `rings` rings.

    Rings have equal radial width 1/R, so ring j covers area pi*(2j-1)/R^2
    and splitting it into RING_BASE*(2j-1) sectors makes every cell area
    exactly pi / (RING_BASE * R^2).
    """
    if rings < 1:
        raise ValueError(f"rings must be >= 1, got {rings}")
    out = []
    for j in range(1, rings + 1):
        out.append(((j - 1) / rings, j / rings, RING_BASE * (2 * j - 1)))
    return out


def realized_isocell_count(target_count: int) -> int:
    """Smallest RING_BASE*R^2 >= target_count."""
    if target_count < 1:
        raise ValueError(f"target_count must be >= 1, got {target_count}")
    rings = math.isqrt((target_count - 1) // RING_BASE) + 1
    while RING_BASE * (rings - 1) ** 2 >= target_count:
        rings -= 1
    return RING_BASE * rings * rings


def _lift(disc_points: np.ndarray) -> np.ndarray:
    x = disc_points[:, 0]
    y = disc_points[:, 1]
    z = np.sqrt(np.maximum(1.0 - x * x - y * y, 0.0))
    return np.column_stack([x, y, z])


def isocell_directions(target_count: int) -> DirectionSet:
    """Deterministic cosine-weighted set from the equal-area disc partition.

    The realized count is the smallest RING_BASE*R^2 >= target_count; one
    sample sits at the area centroid of each cell.
    """
    if target_count < 1:
        raise ValueError(f"target_count must be >= 1, got {target_count}")
    realized = realized_isocell_count(target_count)
    rings = math.isqrt(realized // RING_BASE)
    pts = np.empty((realized, 2))
    k = 0
    for r0, r1, cells in isocell_ring_layout(rings):
        dth = 2.0 * math.pi / cells
        # area centroid of an annular sector lies on its bisector at this radius
        rbar = (2.0 / 3.0) * (r1**3 - r0**3) / (r1**2 - r0**2)
        rbar *= math.sin(dth / 2.0) / (dth / 2.0)
        ang = (np.arange(cells) + 0.5) * dth
        pts[k : k + cells, 0] = rbar * np.cos(ang)
        pts[k : k + cells, 1] = rbar * np.sin(ang)
        k += cells
    dirs = _lift(pts)
    dirs.setflags(write=False)
    pts.setflags(write=False)
    return DirectionSet(directions=dirs, disc_points=pts, method="isocell")


def monte_carlo_directions(count: int, seed: int) -> DirectionSet:
    """Seeded random cosine-weighted set.

    Disc points come from the rejection-free polar map r = sqrt(u1),
    theta = 2*pi*u2 with u drawn as rng.random((count, 2)) from numpy's
    PCG64 generator, so identical seeds reproduce identical sets on any
    platform.
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    rng = np.random.default_rng(seed)
    u = rng.random((count, 2))
    r = np.sqrt(u[:, 0])
    theta = 2.0 * math.pi * u[:, 1]
    pts = np.column_stack([r * np.cos(theta), r * np.sin(theta)])
    dirs = _lift(pts)
    dirs.setflags(write=False)
    pts.setflags(write=False)
    return DirectionSet(directions=dirs, disc_points=pts, method="monte-carlo", seed=seed)


def orthonormal_basis(normal: np.ndarray) -> np.ndarray:
    """Rows (t, b, n) of a right-handed frame with n = normal.

    Branches on the sign of normal.z so the frame is continuous on each
    hemisphere and exactly the identity permutation for normal = +z.
    """
    n = np.asarray(normal, dtype=float)
    if abs(np.linalg.norm(n) - 1.0) > 1e-9:
        raise ValueError(f"normal must be unit length, got |n| = {np.linalg.norm(n)!r}")
    s = math.copysign(1.0, n[2])
    a = -1.0 / (s + n[2])
    b = n[0] * n[1] * a
    t = np.array([1.0 + s * n[0] * n[0] * a, s * b, -s * n[0]])
    u = np.array([b, s + n[1] * n[1] * a, -n[1]])
    return np.array([t, u, n])


def to_world_frame(dset: DirectionSet, normal: np.ndarray) -> np.ndarray:
    """Rotate a local direction set into world space around `normal`."""
    basis = orthonormal_basis(normal)
    return dset.directions @ basis


@dataclass(frozen=True)
class SamplerConfig:
    """Ray-budget settings shared by the form-factor assembly and the CLI."""

    method: str = "isocell"  # "isocell" | "monte-carlo"
    rays: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.method not in ("isocell", "monte-carlo"):
            raise ValueError(f"unknown sampler method {self.method!r}")
        if self.rays < 1:
            raise ValueError(f"ray budget must be >= 1, got {self.rays}")

    def realized_count(self) -> int:
        if self.method == "isocell":
            return realized_isocell_count(self.rays)
        return self.rays

    def directions_for_patch(self, patch_id: int) -> DirectionSet:
        """Direction set used when casting from one source patch.

        Isocell sets are identical for every patch; Monte Carlo derives a
        per-patch stream from seed + patch_id so rows are uncorrelated but
        fully reproducible.
        """
        if self.method == "isocell":
            return isocell_directions(self.rays)
        return monte_carlo_directions(self.rays, self.seed + patch_id)
