"""False-color top-down lux maps as binary PPM images.

Patches are orthographically projected onto the XY plane and rasterized
with a z-buffer (highest surface wins, as seen from above). The color ramp
is a fixed five-stop gradient over normalized lux so two runs with the same
scale bounds color equal readings identically.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .mesh import Patch

# normalized position -> RGB, interpolated linearly between stops
RAMP = (
    (0.00, (0, 0, 0)),
    (0.25, (0, 0, 255)),
    (0.50, (0, 255, 255)),
    (0.75, (255, 255, 0)),
    (1.00, (255, 0, 0)),
)
BACKGROUND = (20, 20, 20)


def ramp_color(t: float) -> tuple[int, int, int]:
    t = min(max(t, 0.0), 1.0)
    for (t0, c0), (t1, c1) in zip(RAMP, RAMP[1:]):
        if t <= t1:
            f = 0.0 if t1 == t0 else (t - t0) / (t1 - t0)
            return tuple(int(round(a + f * (b - a))) for a, b in zip(c0, c1))
    return RAMP[-1][1]


def rasterize_lux(
    patches: list[Patch],
    lux: np.ndarray,
    width: int = 512,
    height: int = 512,
    scale: tuple[float, float] | None = None,
    max_z: float | None = None,
) -> np.ndarray:
    """(h, w, 3) uint8 image of per-patch lux seen from straight above.

    `scale` fixes the (lo, hi) lux bounds of the ramp; `max_z` drops
    geometry above a cutting height (useful to hide the ceiling).
    """
    keep = [p for p in patches if max_z is None or float(p.vertices[:, 2].max()) <= max_z]
    img = np.empty((height, width, 3), dtype=np.uint8)
    img[:] = BACKGROUND
    if not keep:
        return img

    allv = np.concatenate([p.vertices[:, :2] for p in keep])
    lo = allv.min(axis=0)
    hi = allv.max(axis=0)
    span = np.maximum(hi - lo, 1e-12)
    if scale is None:
        vals = np.asarray([lux[p.id] for p in keep])
        scale = (float(vals.min()), float(vals.max()))
    lux_lo, lux_hi = scale
    lux_span = max(lux_hi - lux_lo, 1e-12)

    zbuf = np.full((height, width), -np.inf)

    def to_px(xy):
        x = (xy[:, 0] - lo[0]) / span[0] * (width - 1)
        y = (1.0 - (xy[:, 1] - lo[1]) / span[1]) * (height - 1)
        return np.column_stack([x, y])

    for p in keep:
        tri = to_px(p.vertices[:, :2])
        zs = p.vertices[:, 2]
        color = ramp_color((float(lux[p.id]) - lux_lo) / lux_span)
        xmin = max(int(np.floor(tri[:, 0].min())), 0)
        xmax = min(int(np.ceil(tri[:, 0].max())), width - 1)
        ymin = max(int(np.floor(tri[:, 1].min())), 0)
        ymax = min(int(np.ceil(tri[:, 1].max())), height - 1)
        if xmin > xmax or ymin > ymax:
            continue
        xs = np.arange(xmin, xmax + 1) + 0.5
        ys = np.arange(ymin, ymax + 1) + 0.5
        px, py = np.meshgrid(xs, ys)
        (x0, y0), (x1, y1), (x2, y2) = tri
        det = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)
        if det == 0.0:
            continue
        w1 = ((px - x0) * (y2 - y0) - (py - y0) * (x2 - x0)) / det
        w2 = ((x1 - x0) * (py - y0) - (y1 - y0) * (px - x0)) / det
        w0 = 1.0 - w1 - w2
        inside = (w0 >= 0) & (w1 >= 0) & (w2 >= 0)
        if not inside.any():
            continue
        z = w0 * zs[0] + w1 * zs[1] + w2 * zs[2]
        sub_z = zbuf[ymin : ymax + 1, xmin : xmax + 1]
        sub_i = img[ymin : ymax + 1, xmin : xmax + 1]
        win = inside & (z > sub_z)
        sub_z[win] = z[win]
        sub_i[win] = color
    return img


def write_ppm(path: str | Path, image: np.ndarray) -> None:
    img = np.asarray(image, dtype=np.uint8)
    header = f"P6\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii")
    Path(path).write_bytes(header + img.tobytes())
