"""Per-pixel reflectance recovery from single-light images.

Each image is assumed to show the scene lit by exactly one point source of
known position and flux. With known per-pixel normals and positions the
Lambertian shading basis b_m = ambient + max(n.l, 0) * flux / (4 pi d^2)
makes reflectance a one-unknown least-squares problem per pixel. Recovered
values are mapped onto mesh patches as the mean over covered pixels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import Patch, PinholeCamera

MIN_BASIS_ENERGY = 1e-12  # below this the pixel has no usable shading signal


@dataclass(frozen=True)
class LightImage:
    intensity: np.ndarray  # (h, w) >= 0
    light_position: np.ndarray  # world, meters
    light_flux: float  # lumens

    def __post_init__(self):
        if np.any(self.intensity < 0):
            raise ValueError("image intensities must be non-negative")
        if self.light_flux <= 0:
            raise ValueError("light flux must be positive")


@dataclass(frozen=True)
class AlbedoMap:
    rho: np.ndarray  # (h, w) in [0, 1]
    valid_mask: np.ndarray  # (h, w) bool


def shading_basis(
    image: LightImage, normals: np.ndarray, positions: np.ndarray, ambient: float = 0.0
) -> np.ndarray:
    """Per-pixel shading factor for one light: ambient plus the clamped
    Lambertian term under inverse-square falloff."""
    delta = image.light_position.reshape(1, 1, 3) - positions
    dist2 = np.sum(delta * delta, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        l_dir = delta / np.sqrt(dist2)[..., None]
        s = image.light_flux / (4.0 * np.pi * dist2)
    ndotl = np.maximum(np.sum(normals * l_dir, axis=-1), 0.0)
    b = ambient + ndotl * s
    return np.where(np.isfinite(b), b, 0.0)


def render_intensity(
    rho: np.ndarray,
    image_light: LightImage,
    normals: np.ndarray,
    positions: np.ndarray,
    ambient: float = 0.0,
) -> np.ndarray:
    """Forward model: intensity = rho * shading basis. Used to build
    synthetic fixtures and round-trip checks."""
    return rho * shading_basis(image_light, normals, positions, ambient)


def estimate_albedo(
    images: list[LightImage],
    normals: np.ndarray,
    positions: np.ndarray,
    ambient: float = 0.0,
) -> AlbedoMap:
    """Least-squares reflectance per pixel across all single-light images.

    rho_p = sum_m I_m(p) b_m(p) / sum_m b_m(p)^2, clamped to [0, 1]; pixels
    whose basis energy is below MIN_BASIS_ENERGY are marked invalid.
    """
    if not images:
        raise ValueError("need at least one light image")
    shape = images[0].intensity.shape
    for img in images:
        if img.intensity.shape != shape:
            raise ValueError(
                f"image dimensions differ: {img.intensity.shape} vs {shape}"
            )
    if normals.shape != shape + (3,) or positions.shape != shape + (3,):
        raise ValueError("normals/positions must be per-pixel 3-vectors")

    num = np.zeros(shape)
    den = np.zeros(shape)
    for img in images:
        b = shading_basis(img, normals, positions, ambient)
        num += img.intensity * b
        den += b * b
    valid = den >= MIN_BASIS_ENERGY
    rho = np.zeros(shape)
    rho[valid] = np.clip(num[valid] / den[valid], 0.0, 1.0)
    return AlbedoMap(rho=rho, valid_mask=valid)


def _pixels_in_triangle(tri_xy: np.ndarray, width: int, height: int) -> np.ndarray:
    """Pixel centers strictly inside the projected triangle, with the
    top-left rule deciding centers that sit exactly on an edge."""
    # orient counter-clockwise in pixel coordinates (y grows downward)
    v0, v1, v2 = tri_xy
    area2 = (v1[0] - v0[0]) * (v2[1] - v0[1]) - (v1[1] - v0[1]) * (v2[0] - v0[0])
    if area2 == 0.0:
        return np.zeros((height, width), dtype=bool)
    if area2 < 0.0:
        v1, v2 = v2, v1

    xmin = max(int(np.floor(min(v0[0], v1[0], v2[0]) - 0.5)), 0)
    xmax = min(int(np.ceil(max(v0[0], v1[0], v2[0]) + 0.5)), width - 1)
    ymin = max(int(np.floor(min(v0[1], v1[1], v2[1]) - 0.5)), 0)
    ymax = min(int(np.ceil(max(v0[1], v1[1], v2[1]) + 0.5)), height - 1)
    mask = np.zeros((height, width), dtype=bool)
    if xmin > xmax or ymin > ymax:
        return mask

    xs = np.arange(xmin, xmax + 1) + 0.5
    ys = np.arange(ymin, ymax + 1) + 0.5
    px, py = np.meshgrid(xs, ys)

    inside = np.ones(px.shape, dtype=bool)
    for (ax, ay), (bx, by) in ((v0, v1), (v1, v2), (v2, v0)):
        e = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
        # top edge: horizontal with interior below; left edge: going up in
        # screen coordinates (CCW with y-down makes these ay == by and by < ay)
        top_left = (ay == by and bx > ax) or (by < ay)
        inside &= (e > 0.0) | ((e == 0.0) & top_left)
    mask[ymin : ymax + 1, xmin : xmax + 1] = inside
    return mask


def map_albedo_to_patches(
    albedo: AlbedoMap,
    patches: list[Patch],
    camera: PinholeCamera,
    default: float = 0.0,
) -> tuple[np.ndarray, list[int]]:
    """Mean valid reflectance over the pixels covered by each projected
    patch. Returns (per-patch rho, ids of patches that fell back to the
    default because nothing covered them or they sat behind the camera)."""
    h, w = albedo.rho.shape
    rho_out = np.full(len(patches), float(default))
    uncovered: list[int] = []
    for k, patch in enumerate(patches):
        xy, z = camera.project(patch.vertices)
        if np.any(z <= 0.0):
            uncovered.append(patch.id)
            continue
        mask = _pixels_in_triangle(xy, w, h) & albedo.valid_mask
        if not mask.any():
            uncovered.append(patch.id)
            continue
        rho_out[k] = float(albedo.rho[mask].mean())
    return rho_out, uncovered
