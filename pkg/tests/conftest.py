import numpy as np
import pytest

from luxsim.mesh import TriangleMesh, derive_patches

CUBE_VERTICES = np.array(
    [
        [0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0],
        [0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1],
    ],
    dtype=float,
)
CUBE_FACES = np.array(
    [
        [0, 2, 1], [0, 3, 2],  # floor z=0
        [4, 5, 6], [4, 6, 7],  # ceiling z=1
        [0, 1, 5], [0, 5, 4],  # wall y=0
        [2, 3, 7], [2, 7, 6],  # wall y=1
        [0, 4, 7], [0, 7, 3],  # wall x=0
        [1, 2, 6], [1, 6, 5],  # wall x=1
    ],
    dtype=np.int64,
)


def make_unit_cube() -> TriangleMesh:
    return TriangleMesh(vertices=CUBE_VERTICES.copy(), faces=CUBE_FACES.copy())


@pytest.fixture
def unit_cube():
    return make_unit_cube()


@pytest.fixture
def cube_patches(unit_cube):
    return derive_patches(unit_cube, albedo_default=0.5, normal_orientation="inward")


def random_triangle_patches(n: int, seed: int, extent: float = 10.0):
    """Soup of small random triangles inside a cube, as derived patches."""
    rng = np.random.default_rng(seed)
    base = rng.uniform(0.0, extent, size=(n, 3))
    e1 = rng.uniform(-0.5, 0.5, size=(n, 3))
    e2 = rng.uniform(-0.5, 0.5, size=(n, 3))
    verts = np.empty((3 * n, 3))
    verts[0::3] = base
    verts[1::3] = base + e1
    verts[2::3] = base + e2
    faces = np.arange(3 * n, dtype=np.int64).reshape(n, 3)
    # reject degenerate slivers by nudging until all areas are healthy
    cross = np.cross(verts[faces[:, 1]] - verts[faces[:, 0]], verts[faces[:, 2]] - verts[faces[:, 0]])
    bad = 0.5 * np.linalg.norm(cross, axis=1) < 1e-6
    while bad.any():
        idx = np.nonzero(bad)[0]
        verts[3 * idx + 2] = verts[3 * idx] + rng.uniform(-0.5, 0.5, size=(len(idx), 3))
        cross = np.cross(
            verts[faces[:, 1]] - verts[faces[:, 0]], verts[faces[:, 2]] - verts[faces[:, 0]]
        )
        bad = 0.5 * np.linalg.norm(cross, axis=1) < 1e-6
    mesh = TriangleMesh(vertices=verts, faces=faces)
    return derive_patches(mesh, normal_orientation="as-authored")
