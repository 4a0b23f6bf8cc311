"""Form-factor assembly by hemisphere ray casting, and rectification.

Each source patch shoots a cosine-weighted direction set from its centroid;
the fraction of rays landing on patch j estimates f_ij directly. Emission
curves (LDC) turn that fraction into a weighted mean over the source rays;
sensitivity curves (LSC) scale, in the numerator only, the rays arriving at
a sensitive patch by its sensitivity at the local incidence angle. An
iterative rectification pass enforces reciprocity (a_i f_ij = a_j f_ji) and
per-row closure targets afterwards.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import DegenerateEmitterError, FormatError, NumericalError
from .mesh import Patch
from .photometry import PhotometricCurve
from .raycast import AccelStructure, first_hits
from .sampling import SamplerConfig, orthonormal_basis

FFM_MAGIC = b"FFM1"


@dataclass(frozen=True)
class RectifyStats:
    iterations: int
    reciprocity_residual: float
    closure_residual: float
    converged: bool


@dataclass(frozen=True)
class FormFactorMatrix:
    values: np.ndarray  # (n, n), f_ij >= 0, f_ii = 0
    areas: np.ndarray  # (n,) patch areas, m^2
    escape: np.ndarray  # (n,) fraction of source weight that left the scene
    ldc_applied: bool = False
    lsc_applied: bool = False
    rectification: RectifyStats | None = None

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def row_sums(self) -> np.ndarray:
        return self.values.sum(axis=1)

    def reciprocity_residual(self) -> float:
        """max_ij |a_i f_ij - a_j f_ji| / max(a_i, a_j)."""
        x = self.areas[:, None] * self.values
        scale = np.maximum(self.areas[:, None], self.areas[None, :])
        return float((np.abs(x - x.T) / scale).max(initial=0.0))


def _local_angles_deg(dirs_local: np.ndarray) -> np.ndarray:
    dz = np.clip(dirs_local[:, 2], -1.0, 1.0)
    return np.degrees(np.arccos(dz))


def compute_form_factors(
    patches: list[Patch],
    accel: AccelStructure,
    sampler: SamplerConfig,
    ldc_map: dict[int, PhotometricCurve] | None = None,
    lsc_map: dict[int, PhotometricCurve] | None = None,
) -> FormFactorMatrix:
    """Assemble the n x n form-factor estimate.

    For source patch i with per-ray emission weights w_r (its LDC, or 1):
      f_ij     = sum_{r hits j} w_r * lsc_j(incidence angle at j) / sum_r w_r
      escape_i = sum_{r misses} w_r / sum_r w_r
    so without curves f_ij is exactly (rays reaching j) / (rays emitted) and
    row sum + escape is 1. A sensitivity factor below 1 removes weight from
    the numerator only, never adds it.
    """
    if not patches:
        raise ValueError("no patches")
    if accel.n_patches != len(patches):
        raise ValueError("acceleration structure does not match the patch list")
    ldc_map = ldc_map or {}
    lsc_map = lsc_map or {}
    n = len(patches)
    values = np.zeros((n, n))
    escape = np.zeros(n)
    areas = np.asarray([p.area for p in patches])

    for patch in patches:
        i = patch.id
        dset = sampler.directions_for_patch(i)
        dirs_world = dset.directions @ orthonormal_basis(patch.normal)
        hit_ids, _, cosines = first_hits(accel, patch.centroid, dirs_world, exclude=i)

        ldc = ldc_map.get(i)
        if ldc is not None:
            w = ldc.weight_at(_local_angles_deg(dset.directions))
        else:
            w = np.ones(dset.count)
        denom = float(w.sum())
        if denom <= 0.0:
            raise DegenerateEmitterError(i)

        hit = hit_ids >= 0
        w_binned = w.copy()
        for s, curve in lsc_map.items():
            into_s = hit_ids == s
            if np.any(into_s):
                ang = np.degrees(np.arccos(np.clip(cosines[into_s], -1.0, 1.0)))
                w_binned[into_s] = w_binned[into_s] * curve.weight_at(ang)
        values[i] = np.bincount(hit_ids[hit], weights=w_binned[hit], minlength=n) / denom
        escape[i] = float(w[~hit].sum()) / denom

    values.setflags(write=False)
    escape.setflags(write=False)
    areas.setflags(write=False)
    return FormFactorMatrix(
        values=values,
        areas=areas,
        escape=escape,
        ldc_applied=bool(ldc_map),
        lsc_applied=bool(lsc_map),
    )


def sensor_gain_rows(
    patches: list[Patch],
    accel: AccelStructure,
    sampler: SamplerConfig,
    lsc_by_patch: dict[int, PhotometricCurve],
) -> dict[int, np.ndarray]:
    """Sensitivity-weighted incident-gain row for each sensor patch.

    Row s holds g_sj = sum_{r hits j} lsc_s(theta_r) / m where theta_r is
    the ray's angle from the sensor normal, i.e. the incidence angle of the
    light the ray samples. With a flat curve the row reduces to the sensor's
    geometric form-factor row, and g_s . r is the sensor's irradiance; an
    all-zero sensitivity yields an all-zero row (a dead sensor, not an
    error).
    """
    rows: dict[int, np.ndarray] = {}
    for s, curve in lsc_by_patch.items():
        patch = patches[s]
        dset = sampler.directions_for_patch(s)
        dirs_world = dset.directions @ orthonormal_basis(patch.normal)
        hit_ids, _, _ = first_hits(accel, patch.centroid, dirs_world, exclude=s)
        w = curve.weight_at(_local_angles_deg(dset.directions))
        hit = hit_ids >= 0
        rows[s] = np.bincount(hit_ids[hit], weights=w[hit], minlength=len(patches)) / dset.count
    return rows


def rectify(
    ff: FormFactorMatrix,
    closure_targets: np.ndarray,
    max_iter: int = 200,
    tol: float = 1e-9,
) -> FormFactorMatrix:
    """Alternate reciprocity averaging with row rescaling until both the
    reciprocity residual and |row sum - target| fall under `tol`.

    Each sweep applies f_ij <- (a_i f_ij + a_j f_ji) / (2 a_i) and then
    scales row i by c_i / sum_j f_ij (zero rows are skipped). Non-convergence
    returns the last iterate with converged=False in the stats rather than
    raising, so callers can inspect the residuals.
    """
    c = np.asarray(closure_targets, dtype=float)
    if c.shape != (ff.n,):
        raise ValueError(f"closure targets must have shape ({ff.n},)")
    if np.any(c < 0.0) or np.any(c > 1.0):
        raise ValueError("closure targets must lie in [0, 1]")
    a = ff.areas
    F = np.array(ff.values)

    row = F.sum(axis=1)
    zero_rows = row <= 0.0
    if np.any(zero_rows & (c > tol)):
        bad = int(np.nonzero(zero_rows & (c > tol))[0][0])
        raise NumericalError(
            f"row {bad} has no form-factor mass but closure target {c[bad]:.3g}"
        )

    def residuals(M: np.ndarray) -> tuple[float, float]:
        x = a[:, None] * M
        scale = np.maximum(a[:, None], a[None, :])
        rec = float((np.abs(x - x.T) / scale).max(initial=0.0))
        clo = float(np.abs(M.sum(axis=1) - c).max(initial=0.0))
        return rec, clo

    rec, clo = residuals(F)
    iterations = 0
    ratio = a[None, :] / a[:, None]
    while (rec > tol or clo > tol) and iterations < max_iter:
        F = 0.5 * (F + F.T * ratio)
        s = F.sum(axis=1)
        scale_rows = s > 0.0
        F[scale_rows] *= (c[scale_rows] / s[scale_rows])[:, None]
        iterations += 1
        rec, clo = residuals(F)

    F.setflags(write=False)
    stats = RectifyStats(
        iterations=iterations,
        reciprocity_residual=rec,
        closure_residual=clo,
        converged=bool(rec <= tol and clo <= tol),
    )
    return replace(ff, values=F, rectification=stats)


def save_ffm(path: str | Path, ff: FormFactorMatrix) -> None:
    """Binary dump: magic, little-endian u64 n, n^2 f64 values, n f64
    areas, n f64 escape fractions."""
    with open(path, "wb") as fh:
        fh.write(FFM_MAGIC)
        fh.write(struct.pack("<Q", ff.n))
        fh.write(ff.values.astype("<f8").tobytes())
        fh.write(ff.areas.astype("<f8").tobytes())
        fh.write(ff.escape.astype("<f8").tobytes())


def load_ffm(path: str | Path) -> FormFactorMatrix:
    path = Path(path)
    data = path.read_bytes()
    if data[:4] != FFM_MAGIC:
        raise FormatError("not a form-factor dump (bad magic)", str(path))
    (n,) = struct.unpack_from("<Q", data, 4)
    need = 4 + 8 + 8 * (n * n + 2 * n)
    if len(data) != need:
        raise FormatError(
            f"form-factor dump has {len(data)} bytes, expected {need}", str(path)
        )
    off = 12
    values = np.frombuffer(data, dtype="<f8", count=n * n, offset=off).reshape(n, n).copy()
    off += 8 * n * n
    areas = np.frombuffer(data, dtype="<f8", count=n, offset=off).copy()
    off += 8 * n
    escape = np.frombuffer(data, dtype="<f8", count=n, offset=off).copy()
    values.setflags(write=False)
    areas.setflags(write=False)
    escape.setflags(write=False)
    return FormFactorMatrix(values=values, areas=areas, escape=escape)
