"""Radiosity linear system: assembly, solvers, illuminance, luxmeters.

The per-patch balance r_i = e_i + rho_i * sum_j f_ij r_j is stacked into
(I - diag(rho) F) r = e and solved directly or iteratively. Incident
irradiance H = F r is reported as illuminance in lux; virtual luxmeters
read either H at their patch or, when a sensitivity curve is configured,
the dot product of their sensitivity-weighted gain row with r.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import NumericalError
from .formfactor import FormFactorMatrix
from .mesh import Patch

SOLVERS = ("direct", "jacobi", "gauss-seidel", "auto")

# above this size the dense factorization loses to matrix-free sweeps
AUTO_DIRECT_LIMIT = 2000


@dataclass(frozen=True)
class RadiositySystem:
    matrix: np.ndarray  # (n, n): delta_ij - rho_i f_ij
    emission: np.ndarray  # (n,) lm/m^2
    rho: np.ndarray
    form_factors: FormFactorMatrix

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


@dataclass
class RadiositySolution:
    radiosity: np.ndarray  # r, lm/m^2
    irradiance: np.ndarray  # H = F r, lux
    illuminance: np.ndarray  # E, lux (== H)
    solver: str
    residual: float  # ||(I - diag(rho) F) r - e||_inf
    iterations: int
    emission: np.ndarray
    rho: np.ndarray
    scenario: str | None = None
    # sensitivity-weighted gain rows for luxmeter patches, attached by the
    # pipeline when sensors carry an LSC
    sensor_gain_rows: dict[int, np.ndarray] = field(default_factory=dict)


@dataclass(frozen=True)
class LuxmeterReading:
    sensor_patch: int
    lux: float
    scenario: str | None = None


def assemble(
    patches: list[Patch],
    ff: FormFactorMatrix,
    emission: np.ndarray | None = None,
) -> RadiositySystem:
    """Build (I - diag(rho) F) and the emission vector.

    The emission defaults to each patch's own exitance field; scenario
    sweeps pass an explicit vector instead.
    """
    if len(patches) != ff.n:
        raise ValueError(f"{len(patches)} patches vs {ff.n}x{ff.n} form factors")
    rho = np.asarray([p.albedo for p in patches], dtype=float)
    if np.any(rho >= 1.0) or np.any(rho < 0.0):
        bad = int(np.nonzero((rho >= 1.0) | (rho < 0.0))[0][0])
        raise ValueError(f"patch {bad}: reflectance {rho[bad]} outside [0, 1)")
    if emission is None:
        emission = np.asarray([p.emission for p in patches], dtype=float)
    else:
        emission = np.asarray(emission, dtype=float)
        if emission.shape != (len(patches),):
            raise ValueError("emission vector length mismatch")
    if np.any(emission < 0.0):
        raise ValueError("emission must be non-negative")
    matrix = np.eye(ff.n) - rho[:, None] * ff.values
    return RadiositySystem(matrix=matrix, emission=emission, rho=rho, form_factors=ff)


def _jacobi(K: np.ndarray, e: np.ndarray, tol: float, max_iter: int):
    d = np.diag(K).copy()
    if np.any(d == 0.0):
        raise NumericalError("zero diagonal entry; Jacobi cannot proceed")
    off = K - np.diag(d)
    x = np.zeros_like(e)
    res = float("inf")
    for it in range(1, max_iter + 1):
        x = (e - off @ x) / d
        res = float(np.abs(K @ x - e).max(initial=0.0))
        if res <= tol:
            return x, res, it
    raise NumericalError(f"Jacobi did not converge in {max_iter} iterations", residual=res)


def _gauss_seidel(K: np.ndarray, e: np.ndarray, tol: float, max_iter: int):
    n = K.shape[0]
    d = np.diag(K)
    if np.any(d == 0.0):
        raise NumericalError("zero diagonal entry; Gauss-Seidel cannot proceed")
    x = np.zeros_like(e)
    res = float("inf")
    for it in range(1, max_iter + 1):
        for i in range(n):
            x[i] = (e[i] - K[i] @ x + K[i, i] * x[i]) / d[i]
        res = float(np.abs(K @ x - e).max(initial=0.0))
        if res <= tol:
            return x, res, it
    raise NumericalError(f"Gauss-Seidel did not converge in {max_iter} iterations", residual=res)


def solve(
    system: RadiositySystem,
    method: str = "direct",
    tol: float = 1e-9,
    max_iter: int = 10000,
    scenario: str | None = None,
) -> RadiositySolution:
    if method not in SOLVERS:
        raise ValueError(f"unknown solver {method!r}, expected one of {SOLVERS}")
    if method == "auto":
        method = "direct" if system.n <= AUTO_DIRECT_LIMIT else "gauss-seidel"
    K, e = system.matrix, system.emission
    if method == "direct":
        try:
            r = np.linalg.solve(K, e)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"direct solve failed: {exc}")
        res = float(np.abs(K @ r - e).max(initial=0.0))
        iters = 1
    elif method == "jacobi":
        r, res, iters = _jacobi(K, e, tol, max_iter)
    else:
        r, res, iters = _gauss_seidel(K, e, tol, max_iter)
    H = system.form_factors.values @ r
    return RadiositySolution(
        radiosity=r,
        irradiance=H,
        illuminance=H.copy(),
        solver=method,
        residual=res,
        iterations=iters,
        emission=e.copy(),
        rho=system.rho.copy(),
        scenario=scenario,
    )


def neumann_solve(
    ff_values: np.ndarray,
    rho: np.ndarray,
    emission: np.ndarray,
    tail_tol: float = 1e-10,
    max_terms: int = 100000,
) -> np.ndarray:
    """Truncated reflection-series solution r = sum_k (diag(rho) F)^k e.

    Independent check on the linear solvers: the series is summed term by
    term until the geometric tail bound drops under `tail_tol`.
    """
    q = float((rho * ff_values.sum(axis=1)).max(initial=0.0))
    if q >= 1.0:
        raise NumericalError(f"series does not converge: max rho * rowsum = {q:.6f} >= 1")
    total = emission.astype(float).copy()
    term = emission.astype(float).copy()
    M = rho[:, None] * ff_values
    for _ in range(max_terms):
        term = M @ term
        total += term
        tail = float(np.abs(term).max(initial=0.0)) * (q / (1.0 - q) if q > 0 else 0.0)
        if tail < tail_tol and float(np.abs(term).max(initial=0.0)) < tail_tol:
            return total
    raise NumericalError(f"series did not converge in {max_terms} terms")


def illuminance(solution: RadiositySolution) -> np.ndarray:
    """Per-patch illuminance in lux: the incident irradiance H = F r.

    On non-emitting reflective patches this equals (r - e) / rho; the H
    form also covers rho = 0 and emitting patches.
    """
    return solution.irradiance.copy()


def radiance_to_illuminance(radiance: float, rho: float) -> float:
    """Illuminance from reflected radiance of a Lambertian patch:
    E = L * pi / rho."""
    if rho <= 0.0:
        raise ValueError("conversion requires rho > 0")
    return radiance * np.pi / rho


def luxmeter_read(
    solution: RadiositySolution, sensor_patch_ids: list[int]
) -> list[LuxmeterReading]:
    """Virtual luxmeter readout at the given patches.

    Sensors with an attached sensitivity gain row report row . r; plain
    sensors report the incident irradiance at their patch.
    """
    n = len(solution.radiosity)
    readings = []
    for sid in sensor_patch_ids:
        if not (0 <= sid < n):
            raise ValueError(f"unknown sensor patch id {sid}")
        row = solution.sensor_gain_rows.get(sid)
        if row is not None:
            lux = float(row @ solution.radiosity)
        else:
            lux = float(solution.irradiance[sid])
        readings.append(LuxmeterReading(sensor_patch=sid, lux=lux, scenario=solution.scenario))
    return readings


def check_invariants(
    solution: RadiositySolution, ff: FormFactorMatrix, tol: float = 1e-6
) -> list[str]:
    """Physics sanity checks; returns a list of violation messages."""
    problems = []
    r, e, rho, H = solution.radiosity, solution.emission, solution.rho, solution.irradiance
    scale = max(float(np.abs(r).max(initial=0.0)), 1.0)
    eq1 = float(np.abs(r - e - rho * H).max(initial=0.0))
    if eq1 > tol * scale:
        problems.append(f"balance residual {eq1:.3e} exceeds {tol * scale:.3e}")
    if float((e - r).max(initial=0.0)) > tol * scale:
        problems.append("radiosity fell below self-emission")
    if float((-r).max(initial=0.0)) > tol * scale:
        problems.append("negative radiosity")
    closed = float(ff.escape.max(initial=0.0)) < 1e-6
    if closed:
        rho_max = float(rho.max(initial=0.0))
        bound = float((ff.areas * e).sum()) / (1.0 - rho_max)
        total = float((ff.areas * r).sum())
        if total > bound * (1.0 + tol):
            problems.append(f"energy bound violated: {total:.6g} > {bound:.6g}")
    return problems


def export_solution_csv(path: str | Path, solution: RadiositySolution, patches: list[Patch]) -> None:
    """CSV rows: patch_id,area_m2,radiosity,irradiance_lux,illuminance_lux
    with 9 significant digits."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["patch_id", "area_m2", "radiosity", "irradiance_lux", "illuminance_lux"])
        for p in patches:
            writer.writerow(
                [
                    p.id,
                    f"{p.area:.9g}",
                    f"{solution.radiosity[p.id]:.9g}",
                    f"{solution.irradiance[p.id]:.9g}",
                    f"{solution.illuminance[p.id]:.9g}",
                ]
            )


def export_luxmeter_json(
    path: str | Path,
    readings: list[LuxmeterReading],
    sensor_names: dict[int, str] | None = None,
) -> None:
    """JSON records {scenario, sensor_id, lux}."""
    sensor_names = sensor_names or {}
    records = [
        {
            "scenario": rd.scenario,
            "sensor_id": sensor_names.get(rd.sensor_patch, str(rd.sensor_patch)),
            "lux": float(f"{rd.lux:.9g}"),
        }
        for rd in readings
    ]
    Path(path).write_text(json.dumps(records, indent=2) + "\n", encoding="utf-8")
