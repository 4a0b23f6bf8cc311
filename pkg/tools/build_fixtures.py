#!/usr/bin/env python3
"""Generate the committed fixtures: the cube demo scene and the box-room
regression scene with its golden luxmeter values.

The golden file is produced by the truncated reflection-series solver, not
the production linear solver, so the regression test cross-checks both
paths. Rerun this script only when the sampling or transport definitions
deliberately change, and commit the regenerated outputs.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from luxsim.formfactor import compute_form_factors, rectify, sensor_gain_rows
from luxsim.mesh import TriangleMesh, save_mesh
from luxsim.radiosity import neumann_solve
from luxsim.raycast import build_accel
from luxsim.scene import load_scene

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "fixtures"

LDC_DOWNLIGHT = [
    (0, 1.00), (10, 0.98), (20, 0.92), (30, 0.83), (40, 0.70),
    (50, 0.55), (60, 0.38), (70, 0.22), (80, 0.08), (90, 0.0),
]
LSC_LUXMETER = [
    (0, 1.00), (10, 0.985), (20, 0.94), (30, 0.86), (40, 0.77),
    (50, 0.64), (60, 0.50), (70, 0.34), (80, 0.17), (90, 0.0),
]


def write_curve(path: Path, rows) -> None:
    path.write_text("angle_deg,value\n" + "\n".join(f"{a},{v}" for a, v in rows) + "\n")


def box_mesh(sx: float, sy: float, sz: float):
    """Inward-facing rectangular box: 8 vertices, 12 triangles."""
    v = [
        [0, 0, 0], [sx, 0, 0], [sx, sy, 0], [0, sy, 0],
        [0, 0, sz], [sx, 0, sz], [sx, sy, sz], [0, sy, sz],
    ]
    f = [
        [0, 2, 1], [0, 3, 2],  # floor
        [4, 5, 6], [4, 6, 7],  # ceiling
        [0, 1, 5], [0, 5, 4],  # y = 0
        [2, 3, 7], [2, 7, 6],  # y = sy
        [0, 4, 7], [0, 7, 3],  # x = 0
        [1, 2, 6], [1, 6, 5],  # x = sx
    ]
    return v, f


def horizontal_quad(cx: float, cy: float, z: float, half: float, v, f):
    """Append a 2-triangle square of side 2*half centered at (cx, cy, z);
    returns the two new face indices."""
    base = len(v)
    v.extend(
        [
            [cx - half, cy - half, z],
            [cx + half, cy - half, z],
            [cx + half, cy + half, z],
            [cx - half, cy + half, z],
        ]
    )
    f.append([base, base + 1, base + 2])
    f.append([base, base + 2, base + 3])
    return [len(f) - 2, len(f) - 1]


def build_cube_demo() -> None:
    out = FIXTURES / "cube"
    out.mkdir(parents=True, exist_ok=True)
    v, f = box_mesh(1.0, 1.0, 1.0)
    save_mesh(out / "cube.obj", TriangleMesh(np.asarray(v, float), np.asarray(f, np.int64)))
    write_curve(out / "ldc_downlight.csv", LDC_DOWNLIGHT)
    write_curve(out / "lsc_luxmeter.csv", LSC_LUXMETER)
    cfg = {
        "mesh": "cube.obj",
        "mesh_normals": "inward",
        "albedo": {"default": 0.5},
        "curves": {
            "downlight": "ldc_downlight.csv",
            "luxmeter": "lsc_luxmeter.csv",
        },
        "luminaires": [
            {"id": "L1", "patch_ids": [2, 3], "flux": 1000.0, "age_factor": 1.0, "ldc": "downlight"}
        ],
        "sensors": [{"id": "S1", "patch_id": 0, "lsc": "luxmeter"}],
        "scenarios": [
            {"id": "on", "active_luminaires": ["L1"]},
            {"id": "dark", "active_luminaires": []},
        ],
        "sampler": {"method": "isocell", "rays": 1000, "seed": 0},
        "solver": {"method": "direct", "tol": 1e-9, "max_iter": 5000},
        "rectify": {"max_iter": 200, "tol": 1e-9},
    }
    (out / "scene.json").write_text(json.dumps(cfg, indent=2) + "\n")
    print(f"cube demo written to {out}")


def room_scenarios() -> list[dict]:
    """31 distinct activation subsets of 8 luminaires: all singles, seven
    leave-one-out sets, cumulative prefixes, parity groups, the back half,
    and six cross pairs. (The choice is a fixture convention, nothing more.)"""
    L = [f"L{i}" for i in range(1, 9)]
    combos: list[tuple[str, list[str]]] = []
    combos += [(f"single_{x}", [x]) for x in L]
    combos += [(f"all_but_{x}", [y for y in L if y != x]) for x in L[:7]]
    combos += [(f"first_{k}", L[:k]) for k in range(2, 9)]
    combos.append(("evens", L[1::2]))
    combos.append(("odds", L[0::2]))
    combos.append(("back_half", L[4:]))
    for a, b in [(1, 5), (2, 6), (3, 7), (4, 8), (1, 8), (2, 7)]:
        combos.append((f"pair_L{a}_L{b}", [f"L{a}", f"L{b}"]))
    assert len(combos) == 31
    assert len({frozenset(c) for _, c in combos}) == 31, "activation sets must be distinct"
    return [{"id": name, "active_luminaires": active} for name, active in combos]


def build_room() -> None:
    out = FIXTURES / "room"
    out.mkdir(parents=True, exist_ok=True)
    sx, sy, sz = 6.0, 4.0, 3.0
    v, f = box_mesh(sx, sy, sz)

    luminaires = []
    lum_xs = [0.75, 2.25, 3.75, 5.25]
    lum_ys = [1.0, 3.0]
    i = 1
    for y in lum_ys:
        for x in lum_xs:
            ids = horizontal_quad(x, y, sz - 0.01, 0.3, v, f)
            luminaires.append(
                {"id": f"L{i}", "patch_ids": ids, "flux": 7913.0, "age_factor": 1.0, "ldc": "downlight"}
            )
            i += 1

    sensors = []
    sensor_pos = [
        (1.0, 0.8), (2.5, 0.8), (4.0, 0.8), (5.2, 0.8),
        (1.0, 3.2), (2.5, 3.2), (4.0, 3.2), (5.2, 3.2),
    ]
    for k, (x, y) in enumerate(sensor_pos, start=1):
        ids = horizontal_quad(x, y, 0.01, 0.05, v, f)
        sensors.append({"id": f"S{k}", "patch_id": ids[0], "lsc": "luxmeter"})

    mesh = TriangleMesh(np.asarray(v, float), np.asarray(f, np.int64))
    save_mesh(out / "room.obj", mesh)
    write_curve(out / "ldc_downlight.csv", LDC_DOWNLIGHT)
    write_curve(out / "lsc_luxmeter.csv", LSC_LUXMETER)

    cfg = {
        "mesh": "room.obj",
        "mesh_normals": "inward",
        "albedo": {"default": 0.5},
        "curves": {
            "downlight": "ldc_downlight.csv",
            "luxmeter": "lsc_luxmeter.csv",
        },
        "luminaires": luminaires,
        "sensors": sensors,
        "scenarios": room_scenarios(),
        "sampler": {"method": "isocell", "rays": 1000, "seed": 0},
        "solver": {"method": "direct", "tol": 1e-9, "max_iter": 5000},
        "rectify": {"max_iter": 200, "tol": 1e-9},
    }
    (out / "scene.json").write_text(json.dumps(cfg, indent=2) + "\n")
    print(f"room scene written to {out} ({len(mesh.faces)} patches)")

    # golden luxmeter values via the reflection-series oracle
    scene = load_scene(out / "scene.json")
    accel = build_accel(scene.patches)
    ff = compute_form_factors(scene.patches, accel, scene.sampler, ldc_map=scene.ldc_map())
    ff = rectify(ff, np.clip(1.0 - ff.escape, 0.0, 1.0), max_iter=scene.rectify.max_iter, tol=scene.rectify.tol)
    assert ff.rectification.converged, "room form factors must rectify cleanly"
    gains = sensor_gain_rows(scene.patches, accel, scene.sampler, scene.lsc_map())
    rho = np.asarray([p.albedo for p in scene.patches])

    golden = {}
    for scenario in scene.scenarios:
        e = scene.emission_vector(scenario)
        r = neumann_solve(ff.values, rho, e, tail_tol=1e-12)
        golden[scenario.id] = {
            s["id"]: float(gains[s["patch_id"]] @ r) for s in sensors
        }
    (out / "golden_lux.json").write_text(json.dumps(golden, indent=2) + "\n")
    mean_all_on = np.mean(list(golden["first_8"].values()))
    print(f"golden written; mean sensor lux with all 8 on: {mean_all_on:.2f}")


if __name__ == "__main__":
    build_cube_demo()
    build_room()
