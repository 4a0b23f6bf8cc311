"""Triangle-mesh ingestion and per-patch quantities.

Provides the Wavefront OBJ loader, derivation of patch areas/normals/
centroids, and a grid mesher that turns a depth image into a triangle mesh
(median denoising, back-projection, edge-length culling, Laplacian
smoothing). Meshes are plain vertex/face arrays; patches carry everything
the transport stage needs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, GeometryError
from .pgm import read_pgm16

DEGENERATE_AREA = 1e-12  # m^2; faces at or below this are rejected

ROLE_SURFACE = "surface"
ROLE_LUMINAIRE = "luminaire"
ROLE_SENSOR = "sensor"


@dataclass(frozen=True)
class TriangleMesh:
    vertices: np.ndarray  # (nv, 3) float64, meters
    faces: np.ndarray  # (nf, 3) int64 vertex indices

    def __post_init__(self):
        if self.faces.size and self.faces.max() >= len(self.vertices):
            raise GeometryError(
                f"face index {int(self.faces.max())} out of range "
                f"for {len(self.vertices)} vertices"
            )

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)


@dataclass
class Patch:
    """One triangular patch with the scalar fields used by the solver."""

    id: int
    face: tuple[int, int, int]
    vertices: np.ndarray  # (3, 3) triangle corner positions
    area: float  # m^2
    normal: np.ndarray  # unit vector
    centroid: np.ndarray
    albedo: float = 0.0  # diffuse reflectance in [0, 1)
    emission: float = 0.0  # luminous exitance, lm/m^2; > 0 only for luminaires
    role: str = ROLE_SURFACE

    def validate(self) -> None:
        if abs(np.linalg.norm(self.normal) - 1.0) > 1e-9:
            raise GeometryError(f"patch {self.id}: normal is not unit length")
        if self.area <= 0.0:
            raise GeometryError(f"patch {self.id}: non-positive area")
        if not (0.0 <= self.albedo < 1.0):
            raise GeometryError(f"patch {self.id}: albedo {self.albedo} outside [0, 1)")
        if self.emission < 0.0:
            raise GeometryError(f"patch {self.id}: negative emission")
        if self.emission > 0.0 and self.role != ROLE_LUMINAIRE:
            raise GeometryError(f"patch {self.id}: emissive patch must have luminaire role")


@dataclass(frozen=True)
class PinholeCamera:
    fx: float
    fy: float
    cx: float
    cy: float
    pose: np.ndarray  # (4, 4) rigid transform, camera -> world

    def camera_to_world(self, pts_cam: np.ndarray) -> np.ndarray:
        R = self.pose[:3, :3]
        t = self.pose[:3, 3]
        return pts_cam @ R.T + t

    def world_to_camera(self, pts_world: np.ndarray) -> np.ndarray:
        R = self.pose[:3, :3]
        t = self.pose[:3, 3]
        return (pts_world - t) @ R

    def project(self, pts_world: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """World points -> (pixel xy, camera-frame depth z)."""
        cam = self.world_to_camera(np.atleast_2d(pts_world))
        z = cam[:, 2]
        with np.errstate(divide="ignore", invalid="ignore"):
            u = self.fx * cam[:, 0] / z + self.cx
            v = self.fy * cam[:, 1] / z + self.cy
        return np.column_stack([u, v]), z


@dataclass(frozen=True)
class DepthImage:
    depth: np.ndarray  # (h, w) float64 meters, 0 = invalid
    camera: PinholeCamera

    def __post_init__(self):
        if not np.all(np.isfinite(self.depth)) or np.any(self.depth < 0):
            raise FormatError("depth values must be finite and >= 0")

    @property
    def width(self) -> int:
        return self.depth.shape[1]

    @property
    def height(self) -> int:
        return self.depth.shape[0]


def load_mesh(path: str | Path, format: str = "wavefront-obj") -> TriangleMesh:
    """Load an ASCII OBJ mesh; polygons with more than 3 vertices are
    fan-triangulated."""
    if format != "wavefront-obj":
        raise ValueError(f"unsupported mesh format {format!r}")
    path = Path(path)
    vertices: list[tuple[float, float, float]] = []
    faces: list[tuple[int, int, int]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            tag = parts[0]
            if tag == "v":
                if len(parts) < 4:
                    raise FormatError("vertex needs 3 coordinates", str(path), lineno)
                try:
                    vertices.append((float(parts[1]), float(parts[2]), float(parts[3])))
                except ValueError:
                    raise FormatError(f"bad vertex coordinates {parts[1:4]}", str(path), lineno)
            elif tag == "f":
                if len(parts) < 4:
                    raise FormatError("face needs at least 3 vertices", str(path), lineno)
                idx = []
                for tok in parts[1:]:
                    head = tok.split("/")[0]
                    try:
                        k = int(head)
                    except ValueError:
                        raise FormatError(f"bad face index {tok!r}", str(path), lineno)
                    if k < 0:
                        k = len(vertices) + 1 + k  # OBJ relative indexing
                    if k < 1 or k > len(vertices):
                        raise FormatError(
                            f"face index {head} out of range (have {len(vertices)} vertices)",
                            str(path),
                            lineno,
                        )
                    idx.append(k - 1)
                for j in range(1, len(idx) - 1):  # fan triangulation
                    faces.append((idx[0], idx[j], idx[j + 1]))
            # other records (vn, vt, o, g, usemtl, ...) are ignored
    if not faces:
        raise GeometryError(f"{path}: no faces found")
    return TriangleMesh(
        vertices=np.asarray(vertices, dtype=float),
        faces=np.asarray(faces, dtype=np.int64),
    )


def save_mesh(path: str | Path, mesh: TriangleMesh) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for v in mesh.vertices:
            fh.write(f"v {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}\n")
        for f in mesh.faces:
            fh.write(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}\n")


def derive_patches(
    mesh: TriangleMesh,
    albedo_default: float = 0.0,
    normal_orientation: str = "inward",
) -> list[Patch]:
    """Per-face area, centroid, and unit normal.

    With `inward` orientation every normal is flipped (if needed) to face
    the interior of the mesh bounding box, which is the convention a closed
    enclosure needs for hemisphere ray casting.
    """
    if normal_orientation not in ("inward", "as-authored"):
        raise ValueError(f"unknown normal orientation {normal_orientation!r}")
    v = mesh.vertices
    interior = 0.5 * (v.min(axis=0) + v.max(axis=0))
    patches: list[Patch] = []
    for i, face in enumerate(mesh.faces):
        a, b, c = v[face[0]], v[face[1]], v[face[2]]
        cross = np.cross(b - a, c - a)
        double_area = np.linalg.norm(cross)
        area = 0.5 * double_area
        if area <= DEGENERATE_AREA:
            raise GeometryError(f"face {i} is degenerate (area {area:.3e} m^2)")
        normal = cross / double_area
        centroid = (a + b + c) / 3.0
        if normal_orientation == "inward" and np.dot(normal, interior - centroid) < 0.0:
            normal = -normal
        patches.append(
            Patch(
                id=i,
                face=(int(face[0]), int(face[1]), int(face[2])),
                vertices=np.array([a, b, c]),
                area=float(area),
                normal=normal,
                centroid=centroid,
                albedo=float(albedo_default),
            )
        )
    return patches


def _median_denoise(depth: np.ndarray, radius: int) -> np.ndarray:
    """Median over the valid (> 0) pixels of a (2r+1)^2 window.

    Only pixels that were valid to begin with are replaced; holes are never
    filled in, so the valid-pixel mask is unchanged.
    """
    if radius < 1:
        return depth.copy()
    h, w = depth.shape
    valid = depth > 0
    padded = np.full((h + 2 * radius, w + 2 * radius), np.nan)
    padded[radius : radius + h, radius : radius + w] = np.where(valid, depth, np.nan)
    stack = np.empty(((2 * radius + 1) ** 2, h, w))
    k = 0
    for dy in range(-radius, radius + 1):
        for dx in range(-radius, radius + 1):
            stack[k] = padded[radius + dy : radius + dy + h, radius + dx : radius + dx + w]
            k += 1
    med = np.nanmedian(stack[:, valid], axis=0)
    out = np.zeros_like(depth)
    out[valid] = med
    return out


def back_project(depth: np.ndarray, camera: PinholeCamera) -> np.ndarray:
    """Per-pixel world points (h, w, 3); invalid pixels map to NaN."""
    h, w = depth.shape
    jj, ii = np.meshgrid(np.arange(w, dtype=float), np.arange(h, dtype=float))
    z = np.where(depth > 0, depth, np.nan)
    x = (jj - camera.cx) / camera.fx * z
    y = (ii - camera.cy) / camera.fy * z
    pts = np.stack([x, y, z], axis=-1)
    flat = camera.camera_to_world(pts.reshape(-1, 3)).reshape(h, w, 3)
    flat[~(depth > 0)] = np.nan
    return flat


def grid_normals(points: np.ndarray, toward: np.ndarray | None = None) -> np.ndarray:
    """Per-pixel unit normals of a back-projected depth grid via central
    differences; NaN where neighbors are missing. Normals are flipped to
    face `toward` (default: the origin, i.e. the camera) when given."""
    h, w = points.shape[:2]
    du = np.full_like(points, np.nan)
    dv = np.full_like(points, np.nan)
    du[:, 1:-1] = points[:, 2:] - points[:, :-2]
    dv[1:-1, :] = points[2:, :] - points[:-2, :]
    n = np.cross(du, dv)
    norm = np.linalg.norm(n, axis=-1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        n = n / norm
    if toward is None:
        toward = np.zeros(3)
    facing = np.sum(n * (toward.reshape(1, 1, 3) - points), axis=-1)
    flip = facing < 0
    n[flip] = -n[flip]
    return n


def _laplacian_smooth(
    vertices: np.ndarray, faces: np.ndarray, iterations: int, step: float = 0.5
) -> np.ndarray:
    """Uniform (umbrella) smoothing; boundary vertices are kept fixed."""
    if iterations < 1:
        return vertices
    nv = len(vertices)
    edges = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])
    und = np.sort(edges, axis=1)
    uniq, counts = np.unique(und, axis=0, return_counts=True)
    boundary = np.zeros(nv, dtype=bool)
    boundary[uniq[counts == 1].ravel()] = True

    src = np.concatenate([uniq[:, 0], uniq[:, 1]])
    dst = np.concatenate([uniq[:, 1], uniq[:, 0]])
    degree = np.bincount(src, minlength=nv).astype(float)
    movable = (~boundary) & (degree > 0)

    v = vertices.copy()
    for _ in range(iterations):
        acc = np.zeros_like(v)
        np.add.at(acc, src, v[dst])
        mean = acc[movable] / degree[movable, None]
        v[movable] += step * (mean - v[movable])
    return v


def mesh_from_depth(
    depth_image: DepthImage,
    median_radius: int = 1,
    edge_threshold: float = 0.2,
    smooth_iters: int = 0,
) -> TriangleMesh:
    """Regular-grid triangulation of a depth image.

    Each 2x2 block of valid pixels emits two triangles; triangles with any
    edge longer than `edge_threshold` (meters) are dropped so depth
    discontinuities stay disconnected.
    """
    depth = _median_denoise(depth_image.depth, median_radius)
    valid = depth > 0
    if valid.sum() < 4:
        raise GeometryError("need at least a 2x2 block of valid depth pixels")
    points = back_project(depth, depth_image.camera)
    h, w = depth.shape

    vid = -np.ones((h, w), dtype=np.int64)
    used = np.zeros((h, w), dtype=bool)
    faces: list[tuple[tuple[int, int], tuple[int, int], tuple[int, int]]] = []

    def edge_ok(p, q) -> bool:
        return float(np.linalg.norm(points[p] - points[q])) <= edge_threshold

    for i in range(h - 1):
        for j in range(w - 1):
            corners = ((i, j), (i + 1, j), (i, j + 1), (i + 1, j + 1))
            if not all(valid[c] for c in corners):
                continue
            t1 = ((i, j), (i + 1, j), (i, j + 1))
            t2 = ((i + 1, j), (i + 1, j + 1), (i, j + 1))
            for tri in (t1, t2):
                if (
                    edge_ok(tri[0], tri[1])
                    and edge_ok(tri[1], tri[2])
                    and edge_ok(tri[2], tri[0])
                ):
                    faces.append(tri)
                    for c in tri:
                        used[c] = True

    if not faces:
        raise GeometryError("depth triangulation produced no triangles")

    order = np.argwhere(used)
    for k, (i, j) in enumerate(order):
        vid[i, j] = k
    vertices = points[used]
    face_idx = np.asarray(
        [[vid[a], vid[b], vid[c]] for a, b, c in faces], dtype=np.int64
    )
    vertices = _laplacian_smooth(vertices, face_idx, smooth_iters)
    return TriangleMesh(vertices=vertices, faces=face_idx)


def load_depth_image(pgm_path: str | Path, sidecar_path: str | Path) -> DepthImage:
    """16-bit PGM depth in millimeters plus a JSON intrinsics/pose sidecar."""
    raw = read_pgm16(pgm_path)
    sidecar_path = Path(sidecar_path)
    try:
        meta = json.loads(sidecar_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"bad JSON sidecar: {exc}", str(sidecar_path))
    try:
        camera = PinholeCamera(
            fx=float(meta["fx"]),
            fy=float(meta["fy"]),
            cx=float(meta["cx"]),
            cy=float(meta["cy"]),
            pose=np.asarray(meta.get("pose", np.eye(4).tolist()), dtype=float),
        )
    except KeyError as exc:
        raise FormatError(f"sidecar missing field {exc}", str(sidecar_path))
    if camera.pose.shape != (4, 4):
        raise FormatError("sidecar pose must be a 4x4 matrix", str(sidecar_path))
    return DepthImage(depth=raw.astype(float) / 1000.0, camera=camera)
