"""Command-line pipeline: simulate, mesh-from-depth, albedo, heatmap,
validate.

`simulate` runs the full chain (patches, form factors, rectification,
per-scenario solve, luxmeter readout) and writes deterministic artifacts:
per-scenario CSVs, an aggregated report.json, and a luxmeter.json. Wall
clock timings go to a separate timings.json so the primary report is
byte-identical across thread counts. Exit codes: 0 success, 1 validation,
2 numerical failure, 3 I/O.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .albedo import AlbedoMap, LightImage, estimate_albedo
from .errors import (
    FormatError,
    GeometryError,
    LuxsimError,
    NumericalError,
    ValidationError,
)
from .formfactor import (
    compute_form_factors,
    load_ffm,
    rectify,
    save_ffm,
    sensor_gain_rows,
)
from .luxmap import rasterize_lux, write_ppm
from .mesh import back_project, grid_normals, load_depth_image, mesh_from_depth, save_mesh
from .pgm import write_pgm16
from .radiosity import (
    assemble,
    check_invariants,
    export_luxmeter_json,
    export_solution_csv,
    luxmeter_read,
    solve,
)
from .raycast import build_accel
from .sampling import SamplerConfig
from .scene import Scene, load_scene

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2
EXIT_IO = 3


def _round9(x: float) -> float:
    return float(f"{float(x):.9g}")


def _round9_list(xs) -> list[float]:
    return [_round9(x) for x in xs]


@dataclass
class RunReport:
    """Per-scenario result block mirroring the pipeline stages."""

    scenario: str
    sensors: list[dict]
    illuminance_min: float
    illuminance_mean: float
    illuminance_max: float
    solver_method: str
    solver_iterations: int
    solver_residual: float
    checks: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "scenario": self.scenario,
            "sensors": self.sensors,
            "illuminance": {
                "min": _round9(self.illuminance_min),
                "mean": _round9(self.illuminance_mean),
                "max": _round9(self.illuminance_max),
            },
            "solver": {
                "method": self.solver_method,
                "iterations": self.solver_iterations,
                "residual": _round9(self.solver_residual),
            },
            "checks": {"passed": not self.checks, "violations": self.checks},
        }


def _set_threads(threads: int | None) -> None:
    if threads is None:
        return
    if threads < 1:
        raise ValidationError([f"--threads must be >= 1, got {threads}"])
    import numba

    # numba caps the pool at the core count detected at startup; results are
    # identical at any worker count, so clamping is safe
    numba.set_num_threads(min(threads, numba.config.NUMBA_NUM_THREADS))


def run_simulation(
    scene: Scene,
    out_dir: Path,
    ff_cache: Path | None = None,
    ff_load: Path | None = None,
    check_mode: str = "fail",
    verbose: bool = False,
) -> dict:
    """Algorithm pipeline shared by the CLI and the test-suite: form
    factors once per geometry, then one solve per scenario."""
    timings: dict[str, float] = {}
    out_dir.mkdir(parents=True, exist_ok=True)

    def log(msg: str) -> None:
        if verbose:
            print(msg, file=sys.stderr)

    t0 = time.perf_counter()
    accel = build_accel(scene.patches)
    timings["accel_build"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    loaded_from_cache = False
    if ff_load is not None:
        ff = load_ffm(ff_load)
        if ff.n != len(scene.patches):
            raise ValidationError(
                [f"cached form factors are {ff.n}x{ff.n} but the scene has "
                 f"{len(scene.patches)} patches"]
            )
        loaded_from_cache = True
        log(f"loaded form factors from {ff_load}")
    else:
        ff = compute_form_factors(
            scene.patches, accel, scene.sampler, ldc_map=scene.ldc_map(), lsc_map=None
        )
        if ff_cache is not None:
            save_ffm(ff_cache, ff)
            log(f"cached form factors to {ff_cache}")
    timings["form_factors"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    closure = np.clip(1.0 - ff.escape, 0.0, 1.0)
    ff = rectify(ff, closure, max_iter=scene.rectify.max_iter, tol=scene.rectify.tol)
    stats = ff.rectification
    if not stats.converged:
        log(
            f"warning: rectification stopped after {stats.iterations} sweeps "
            f"(reciprocity {stats.reciprocity_residual:.3e}, "
            f"closure {stats.closure_residual:.3e})"
        )
    timings["rectify"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    gain_rows = sensor_gain_rows(scene.patches, accel, scene.sampler, scene.lsc_map())
    timings["sensor_rows"] = time.perf_counter() - t0

    names = scene.sensor_names()
    sensor_patch_ids = [s.patch_id for s in scene.sensors]
    reports: list[RunReport] = []
    all_readings = []
    t0 = time.perf_counter()
    for scenario in scene.scenarios:
        e = scene.emission_vector(scenario)
        system = assemble(scene.patches, ff, emission=e)
        solution = solve(
            system,
            method=scene.solver.method,
            tol=scene.solver.tol,
            max_iter=scene.solver.max_iter,
            scenario=scenario.id,
        )
        solution.sensor_gain_rows = gain_rows
        violations = check_invariants(solution, ff)
        if violations and check_mode == "fail":
            raise NumericalError(
                f"scenario {scenario.id!r}: invariant checks failed: "
                + "; ".join(violations)
            )
        readings = luxmeter_read(solution, sensor_patch_ids)
        all_readings.extend(readings)
        export_solution_csv(out_dir / f"scenario_{scenario.id}.csv", solution, scene.patches)
        reports.append(
            RunReport(
                scenario=scenario.id,
                sensors=[
                    {"sensor_id": names[rd.sensor_patch], "lux": _round9(rd.lux)}
                    for rd in readings
                ],
                illuminance_min=float(solution.illuminance.min(initial=0.0)),
                illuminance_mean=float(solution.illuminance.mean()) if len(solution.illuminance) else 0.0,
                illuminance_max=float(solution.illuminance.max(initial=0.0)),
                solver_method=solution.solver,
                solver_iterations=solution.iterations,
                solver_residual=solution.residual,
                checks=violations,
            )
        )
        log(f"scenario {scenario.id}: mean illuminance {reports[-1].illuminance_mean:.1f} lux")
    timings["scenarios"] = time.perf_counter() - t0

    report = {
        "version": __version__,
        "sampler": {
            "method": scene.sampler.method,
            "requested_rays": scene.sampler.rays,
            "realized_rays": scene.sampler.realized_count(),
            "seed": scene.sampler.seed,
        },
        "form_factors": {
            "patches": ff.n,
            "ldc_applied": ff.ldc_applied,
            "lsc_applied": ff.lsc_applied,
            "loaded_from_cache": loaded_from_cache,
            "rectify_iterations": stats.iterations,
            "reciprocity_residual": _round9(stats.reciprocity_residual),
            "closure_residual": _round9(stats.closure_residual),
            "converged": stats.converged,
            "escape": _round9_list(ff.escape),
        },
        "scenarios": [r.to_json() for r in reports],
    }
    (out_dir / "report.json").write_text(
        json.dumps(report, indent=2) + "\n", encoding="utf-8"
    )
    export_luxmeter_json(out_dir / "luxmeter.json", all_readings, names)
    (out_dir / "timings.json").write_text(
        json.dumps({k: round(v, 6) for k, v in timings.items()}, indent=2) + "\n",
        encoding="utf-8",
    )
    return report


def _cmd_simulate(args) -> int:
    scene = load_scene(args.scene)
    if args.rays is not None or args.sampler is not None or args.seed is not None:
        scene.sampler = SamplerConfig(
            method={"mc": "monte-carlo"}.get(args.sampler, args.sampler) or scene.sampler.method,
            rays=args.rays if args.rays is not None else scene.sampler.rays,
            seed=args.seed if args.seed is not None else scene.sampler.seed,
        )
    run_simulation(
        scene,
        Path(args.out),
        ff_cache=Path(args.ff_cache) if args.ff_cache else None,
        ff_load=Path(args.ff_load) if args.ff_load else None,
        check_mode=args.check,
        verbose=args.verbose,
    )
    return EXIT_OK


def _cmd_mesh_from_depth(args) -> int:
    depth = load_depth_image(args.depth, args.sidecar)
    mesh = mesh_from_depth(
        depth,
        median_radius=args.median_radius,
        edge_threshold=args.edge_threshold,
        smooth_iters=args.smooth_iters,
    )
    save_mesh(args.out, mesh)
    print(f"wrote {mesh.n_vertices} vertices, {mesh.n_faces} triangles to {args.out}")
    return EXIT_OK


def _load_intensity(path: Path) -> np.ndarray:
    if path.suffix == ".npy":
        return np.load(path).astype(float)
    from .pgm import read_pgm16

    return read_pgm16(path).astype(float)


def _cmd_albedo(args) -> int:
    manifest = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
    entries = manifest.get("images", [])
    if not entries:
        raise ValidationError(["albedo manifest lists no images"])
    root = Path(args.manifest).parent
    geom = manifest.get("geometry", {})
    if "depth" not in geom or "sidecar" not in geom:
        raise ValidationError(["albedo manifest needs geometry.depth and geometry.sidecar"])
    depth = load_depth_image(root / geom["depth"], root / geom["sidecar"])
    positions = back_project(depth.depth, depth.camera)
    cam_pos = depth.camera.pose[:3, 3]
    normals = grid_normals(positions, toward=cam_pos)

    images = []
    for entry in entries:
        images.append(
            LightImage(
                intensity=_load_intensity(root / entry["path"]),
                light_position=np.asarray(entry["light_position"], dtype=float),
                light_flux=float(entry["light_flux"]),
            )
        )
    ok = np.all(np.isfinite(normals), axis=-1) & np.all(np.isfinite(positions), axis=-1)
    normals = np.where(ok[..., None], normals, 0.0)
    positions = np.where(ok[..., None], positions, 0.0)
    amap = estimate_albedo(images, normals, positions, ambient=args.ambient)
    amap = AlbedoMap(rho=np.where(ok, amap.rho, 0.0), valid_mask=amap.valid_mask & ok)

    out = Path(args.out)
    if out.suffix == ".npy":
        np.save(out, amap.rho)
    else:
        write_pgm16(out, np.round(amap.rho * 65535.0).astype(np.uint16))
    if args.mask:
        write_pgm16(args.mask, amap.valid_mask.astype(np.uint16) * 65535)
    print(f"wrote albedo map ({int(amap.valid_mask.sum())} valid pixels) to {out}")
    return EXIT_OK


def _cmd_heatmap(args) -> int:
    import csv as _csv

    scene = load_scene(args.scene)
    lux = np.zeros(len(scene.patches))
    with open(args.lux, "r", encoding="utf-8") as fh:
        rows = list(_csv.DictReader(fh))
    if not rows:
        raise ValidationError([f"{args.lux}: no illuminance rows"])
    for row in rows:
        lux[int(row["patch_id"])] = float(row["illuminance_lux"])
    scale = None
    if args.scale:
        lo, hi = args.scale.split(":")
        scale = (float(lo), float(hi))
    width, height = (int(x) for x in args.size.split("x"))
    img = rasterize_lux(
        scene.patches, lux, width=width, height=height, scale=scale, max_z=args.below
    )
    write_ppm(args.out, img)
    print(f"wrote {width}x{height} lux map to {args.out}")
    return EXIT_OK


def _cmd_validate(args) -> int:
    scene = load_scene(args.scene)
    print(
        f"scene OK: {len(scene.patches)} patches, {len(scene.luminaires)} luminaires, "
        f"{len(scene.sensors)} sensors, {len(scene.scenarios)} scenarios"
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    # global flags are accepted both before and after the subcommand; the
    # SUPPRESS default keeps a pre-subcommand value from being overwritten
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--threads", type=int, default=argparse.SUPPRESS,
        help="worker threads for ray casting",
    )
    common.add_argument(
        "--seed", type=int, default=argparse.SUPPRESS, help="Monte Carlo base seed"
    )
    common.add_argument("--verbose", action="store_true", default=argparse.SUPPRESS)

    parser = argparse.ArgumentParser(
        prog="luxsim",
        description="Radiosity-based illuminance simulation with photometric curves",
        parents=[common],
    )
    parser.set_defaults(threads=None, seed=None, verbose=False)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run the full pipeline on a scene config", parents=[common])
    p.add_argument("--scene", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--rays", type=int, default=None)
    p.add_argument("--sampler", choices=["isocell", "mc", "monte-carlo"], default=None)
    p.add_argument("--ff-cache", default=None, help="write the form-factor matrix here")
    p.add_argument("--ff-load", default=None, help="reuse a cached form-factor matrix")
    p.add_argument("--check", choices=["fail", "warn"], default="fail")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser(
        "mesh-from-depth", help="triangulate a depth image into an OBJ mesh", parents=[common]
    )
    p.add_argument("--depth", required=True, help="16-bit PGM, millimeters")
    p.add_argument("--sidecar", required=True, help="JSON intrinsics/pose")
    p.add_argument("--out", required=True)
    p.add_argument("--median-radius", type=int, default=1)
    p.add_argument("--edge-threshold", type=float, default=0.2)
    p.add_argument("--smooth-iters", type=int, default=0)
    p.set_defaults(func=_cmd_mesh_from_depth)

    p = sub.add_parser(
        "albedo", help="estimate reflectance from single-light images", parents=[common]
    )
    p.add_argument("--manifest", required=True, help="JSON listing images and lights")
    p.add_argument("--out", required=True, help="output albedo map (.pgm or .npy)")
    p.add_argument("--mask", default=None, help="optional validity mask PGM")
    p.add_argument("--ambient", type=float, default=0.0)
    p.set_defaults(func=_cmd_albedo)

    p = sub.add_parser("heatmap", help="false-color lux map from a scenario CSV", parents=[common])
    p.add_argument("--scene", required=True)
    p.add_argument("--lux", required=True, help="per-patch illuminance CSV")
    p.add_argument("--out", required=True, help="output PPM")
    p.add_argument("--scale", default=None, help="fixed ramp bounds, e.g. 0:500")
    p.add_argument("--size", default="512x512")
    p.add_argument("--below", type=float, default=None, help="drop geometry above this z")
    p.set_defaults(func=_cmd_heatmap)

    p = sub.add_parser("validate", help="check a scene config and exit", parents=[common])
    p.add_argument("--scene", required=True)
    p.set_defaults(func=_cmd_validate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _set_threads(args.threads)
        return args.func(args)
    except (ValidationError, FormatError, GeometryError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except LuxsimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
