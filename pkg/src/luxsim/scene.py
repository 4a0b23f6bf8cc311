"""Scene configuration: mesh, materials, luminaires, sensors, scenarios.

A scene is a single JSON document referencing the mesh, photometric curve
files, and an explicit list of luminaire activations. Loading validates
every cross-reference and reports all violations at once rather than
stopping at the first.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError, ValidationError
from .mesh import (
    ROLE_LUMINAIRE,
    ROLE_SENSOR,
    Patch,
    PinholeCamera,
    TriangleMesh,
    derive_patches,
    load_mesh,
)
from .pgm import read_pgm16
from .photometry import PhotometricCurve, load_curve
from .sampling import SamplerConfig


@dataclass(frozen=True)
class Luminaire:
    id: str
    patch_ids: tuple[int, ...]
    flux: float  # lumens
    age_factor: float = 1.0
    ldc: str | None = None  # curve name

    def emission_density(self, emitting_area: float) -> float:
        return self.flux * self.age_factor / emitting_area


@dataclass(frozen=True)
class Sensor:
    id: str
    patch_id: int
    lsc: str | None = None  # curve name


@dataclass(frozen=True)
class Scenario:
    id: str
    active_luminaires: frozenset[str]


@dataclass(frozen=True)
class SolverConfig:
    method: str = "direct"
    tol: float = 1e-9
    max_iter: int = 10000


@dataclass(frozen=True)
class RectifyConfig:
    max_iter: int = 200
    tol: float = 1e-9


@dataclass
class Scene:
    mesh: TriangleMesh
    patches: list[Patch]
    luminaires: list[Luminaire]
    sensors: list[Sensor]
    scenarios: list[Scenario]
    curves: dict[tuple[str, str], PhotometricCurve]  # (name, kind) -> curve
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    rectify: RectifyConfig = field(default_factory=RectifyConfig)
    default_albedo: float = 0.5
    uncovered_patches: list[int] = field(default_factory=list)

    def luminaire(self, lum_id: str) -> Luminaire:
        for lum in self.luminaires:
            if lum.id == lum_id:
                return lum
        raise KeyError(lum_id)

    def scenario(self, scenario_id: str) -> Scenario:
        for sc in self.scenarios:
            if sc.id == scenario_id:
                return sc
        raise KeyError(scenario_id)

    def emission_vector(self, scenario: Scenario | str) -> np.ndarray:
        """Per-patch exitance: flux * age / emitting area on the patches of
        every active luminaire, zero elsewhere. Additive over disjoint
        activations by construction."""
        if isinstance(scenario, str):
            scenario = self.scenario(scenario)
        e = np.zeros(len(self.patches))
        for lum in self.luminaires:
            if lum.id not in scenario.active_luminaires:
                continue
            area = sum(self.patches[pid].area for pid in lum.patch_ids)
            e[list(lum.patch_ids)] = lum.emission_density(area)
        return e

    def ldc_map(self) -> dict[int, PhotometricCurve]:
        out: dict[int, PhotometricCurve] = {}
        for lum in self.luminaires:
            if lum.ldc is not None:
                curve = self.curves[(lum.ldc, "LDC")]
                for pid in lum.patch_ids:
                    out[pid] = curve
        return out

    def lsc_map(self) -> dict[int, PhotometricCurve]:
        return {
            s.patch_id: self.curves[(s.lsc, "LSC")]
            for s in self.sensors
            if s.lsc is not None
        }

    def sensor_names(self) -> dict[int, str]:
        return {s.patch_id: s.id for s in self.sensors}


def _load_per_patch_albedo(path: Path, n: int, problems: list[str]) -> np.ndarray | None:
    values = np.full(n, np.nan)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, row in enumerate(csv.reader(fh), start=1):
                if not row or row[0].strip().startswith("#"):
                    continue
                if lineno == 1 and not row[0].strip().lstrip("-").isdigit():
                    continue  # header
                try:
                    pid, rho = int(row[0]), float(row[1])
                except (ValueError, IndexError):
                    problems.append(f"{path}: line {lineno}: expected 'patch_id,albedo'")
                    continue
                if not (0 <= pid < n):
                    problems.append(f"{path}: line {lineno}: patch id {pid} out of range")
                    continue
                values[pid] = rho
    except OSError as exc:
        problems.append(f"cannot read per-patch albedo file: {exc}")
        return None
    return values


def load_scene(path: str | Path) -> Scene:
    """Parse and validate a scene config; raises ValidationError carrying
    every violation found."""
    path = Path(path)
    root = path.parent
    try:
        cfg = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"bad JSON: {exc}", str(path))

    problems: list[str] = []

    mesh_path = root / cfg.get("mesh", "")
    if "mesh" not in cfg:
        raise ValidationError(["config is missing the 'mesh' field"])
    mesh = load_mesh(mesh_path)

    albedo_cfg = cfg.get("albedo", {"default": 0.5})
    default_albedo = float(albedo_cfg.get("default", 0.5))
    orientation = cfg.get("mesh_normals", "inward")
    patches = derive_patches(mesh, albedo_default=default_albedo, normal_orientation=orientation)
    n = len(patches)

    uncovered: list[int] = []
    if "per_patch" in albedo_cfg:
        values = _load_per_patch_albedo(root / albedo_cfg["per_patch"], n, problems)
        if values is not None:
            for p in patches:
                if np.isfinite(values[p.id]):
                    p.albedo = float(values[p.id])
    elif "map" in albedo_cfg:
        from .albedo import AlbedoMap, map_albedo_to_patches  # deferred, avoids cycle

        map_cfg = albedo_cfg["map"]
        try:
            rho_img = read_pgm16(root / map_cfg["albedo"]).astype(float) / 65535.0
            mask = read_pgm16(root / map_cfg["mask"]) > 0
            cam_meta = json.loads((root / map_cfg["camera"]).read_text(encoding="utf-8"))
            camera = PinholeCamera(
                fx=float(cam_meta["fx"]),
                fy=float(cam_meta["fy"]),
                cx=float(cam_meta["cx"]),
                cy=float(cam_meta["cy"]),
                pose=np.asarray(cam_meta.get("pose", np.eye(4).tolist()), dtype=float),
            )
            amap = AlbedoMap(rho=rho_img, valid_mask=mask)
            rho_patch, uncovered = map_albedo_to_patches(amap, patches, camera, default_albedo)
            for p, rho in zip(patches, rho_patch):
                p.albedo = float(rho)
        except (KeyError, OSError, FormatError) as exc:
            problems.append(f"albedo map: {exc}")

    for p in patches:
        if not (0.0 <= p.albedo < 1.0):
            problems.append(f"patch {p.id}: albedo {p.albedo} outside [0, 1)")

    # curves referenced by luminaires/sensors, loaded with the right kind
    curve_paths = {str(k): v for k, v in cfg.get("curves", {}).items()}
    curves: dict[tuple[str, str], PhotometricCurve] = {}

    def resolve_curve(name: str | None, kind: str, owner: str) -> str | None:
        if name is None:
            return None
        if name not in curve_paths:
            problems.append(f"{owner}: unknown curve {name!r}")
            return None
        key = (name, kind)
        if key not in curves:
            try:
                curves[key] = load_curve(root / curve_paths[name], kind)
            except (FormatError, OSError) as exc:
                problems.append(f"curve {name!r}: {exc}")
                return None
        return name

    luminaires: list[Luminaire] = []
    seen_lum_ids: set[str] = set()
    claimed: dict[int, str] = {}
    for k, spec in enumerate(cfg.get("luminaires", [])):
        lid = str(spec.get("id", f"luminaire_{k}"))
        if lid in seen_lum_ids:
            problems.append(f"duplicate luminaire id {lid!r}")
        seen_lum_ids.add(lid)
        pids = tuple(int(p) for p in spec.get("patch_ids", []))
        if not pids:
            problems.append(f"luminaire {lid!r}: no emitting patches")
        for pid in pids:
            if not (0 <= pid < n):
                problems.append(f"luminaire {lid!r}: patch id {pid} out of range")
            elif pid in claimed:
                problems.append(
                    f"luminaire {lid!r}: patch {pid} already claimed by {claimed[pid]!r}"
                )
            else:
                claimed[pid] = lid
        flux = float(spec.get("flux", 0.0))
        if flux <= 0.0:
            problems.append(f"luminaire {lid!r}: flux must be positive, got {flux}")
        age = float(spec.get("age_factor", 1.0))
        if not (0.0 < age <= 1.0):
            problems.append(f"luminaire {lid!r}: age_factor must be in (0, 1], got {age}")
        ldc = resolve_curve(spec.get("ldc"), "LDC", f"luminaire {lid!r}")
        luminaires.append(
            Luminaire(id=lid, patch_ids=pids, flux=flux, age_factor=age, ldc=ldc)
        )

    sensors: list[Sensor] = []
    seen_sensor_patches: dict[int, str] = {}
    seen_sensor_ids: set[str] = set()
    for k, spec in enumerate(cfg.get("sensors", [])):
        sid = str(spec.get("id", f"sensor_{k}"))
        if sid in seen_sensor_ids:
            problems.append(f"duplicate sensor id {sid!r}")
        seen_sensor_ids.add(sid)
        pid = int(spec.get("patch_id", -1))
        if not (0 <= pid < n):
            problems.append(f"sensor {sid!r}: patch id {pid} out of range")
        elif pid in seen_sensor_patches:
            problems.append(
                f"sensor {sid!r}: patch {pid} already carries sensor "
                f"{seen_sensor_patches[pid]!r}"
            )
        else:
            seen_sensor_patches[pid] = sid
        lsc = resolve_curve(spec.get("lsc"), "LSC", f"sensor {sid!r}")
        sensors.append(Sensor(id=sid, patch_id=pid, lsc=lsc))

    scenarios: list[Scenario] = []
    seen_scenario_ids: set[str] = set()
    for k, spec in enumerate(cfg.get("scenarios", [])):
        scid = str(spec.get("id", f"scenario_{k}"))
        if scid in seen_scenario_ids:
            problems.append(f"duplicate scenario id {scid!r}")
        seen_scenario_ids.add(scid)
        active = [str(x) for x in spec.get("active_luminaires", [])]
        for lum_id in active:
            if lum_id not in seen_lum_ids:
                problems.append(f"scenario {scid!r}: unknown luminaire {lum_id!r}")
        scenarios.append(Scenario(id=scid, active_luminaires=frozenset(active)))

    try:
        sampler = SamplerConfig(
            method=str(cfg.get("sampler", {}).get("method", "isocell")),
            rays=int(cfg.get("sampler", {}).get("rays", 1000)),
            seed=int(cfg.get("sampler", {}).get("seed", 0)),
        )
    except ValueError as exc:
        problems.append(f"sampler: {exc}")
        sampler = SamplerConfig()

    solver_cfg = cfg.get("solver", {})
    solver = SolverConfig(
        method=str(solver_cfg.get("method", "auto")),
        tol=float(solver_cfg.get("tol", 1e-9)),
        max_iter=int(solver_cfg.get("max_iter", 10000)),
    )
    if solver.method not in ("direct", "jacobi", "gauss-seidel", "auto"):
        problems.append(f"solver: unknown method {solver.method!r}")

    rect_cfg = cfg.get("rectify", {})
    rectify = RectifyConfig(
        max_iter=int(rect_cfg.get("max_iter", 200)),
        tol=float(rect_cfg.get("tol", 1e-9)),
    )

    if problems:
        raise ValidationError(problems)

    for lum in luminaires:
        for pid in lum.patch_ids:
            patches[pid].role = ROLE_LUMINAIRE
    for sensor in sensors:
        patches[sensor.patch_id].role = ROLE_SENSOR

    return Scene(
        mesh=mesh,
        patches=patches,
        luminaires=luminaires,
        sensors=sensors,
        scenarios=scenarios,
        curves=curves,
        sampler=sampler,
        solver=solver,
        rectify=rectify,
        default_albedo=default_albedo,
        uncovered_patches=uncovered,
    )
