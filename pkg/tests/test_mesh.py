import json

import numpy as np
import pytest

from luxsim.errors import FormatError, GeometryError
from luxsim.mesh import (
    DepthImage,
    PinholeCamera,
    TriangleMesh,
    back_project,
    derive_patches,
    grid_normals,
    load_depth_image,
    load_mesh,
    mesh_from_depth,
    save_mesh,
)
from luxsim.pgm import read_pgm16, write_pgm16

from conftest import make_unit_cube


def write_obj(path, text):
    path.write_text(text)
    return path


class TestLoadMesh:
    def test_single_triangle(self, tmp_path):
        p = write_obj(tmp_path / "t.obj", "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n")
        mesh = load_mesh(p)
        assert mesh.n_vertices == 3
        assert mesh.n_faces == 1

    def test_unit_cube_quads_fan_triangulated(self, tmp_path):
        lines = [
            "v 0 0 0", "v 1 0 0", "v 1 1 0", "v 0 1 0",
            "v 0 0 1", "v 1 0 1", "v 1 1 1", "v 0 1 1",
            "f 1 4 3 2", "f 5 6 7 8", "f 1 2 6 5",
            "f 3 4 8 7", "f 1 5 8 4", "f 2 3 7 6",
        ]
        p = write_obj(tmp_path / "cube.obj", "\n".join(lines) + "\n")
        mesh = load_mesh(p)
        assert mesh.n_vertices == 8
        assert mesh.n_faces == 12
        patches = derive_patches(mesh)
        assert len(patches) == 12

    def test_index_out_of_range(self, tmp_path):
        body = "".join(f"v {i} 0 0\n" for i in range(8)) + "f 1 2 9\n"
        p = write_obj(tmp_path / "bad.obj", body)
        with pytest.raises(FormatError, match="line 9"):
            load_mesh(p)

    def test_slash_indices_and_comments(self, tmp_path):
        p = write_obj(
            tmp_path / "s.obj",
            "# comment\nv 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nf 1//1 2//1 3//1\n",
        )
        assert load_mesh(p).n_faces == 1

    def test_no_faces(self, tmp_path):
        p = write_obj(tmp_path / "empty.obj", "v 0 0 0\nv 1 0 0\nv 0 1 0\n")
        with pytest.raises(GeometryError, match="no faces"):
            load_mesh(p)

    def test_roundtrip_through_save(self, tmp_path):
        mesh = make_unit_cube()
        save_mesh(tmp_path / "out.obj", mesh)
        back = load_mesh(tmp_path / "out.obj")
        assert np.allclose(back.vertices, mesh.vertices)
        assert np.array_equal(back.faces, mesh.faces)

    def test_face_index_validated_in_type(self):
        with pytest.raises(GeometryError):
            TriangleMesh(
                vertices=np.zeros((3, 3)), faces=np.array([[0, 1, 5]], dtype=np.int64)
            )


class TestDerivePatches:
    def test_right_triangle_area(self, tmp_path):
        p = write_obj(tmp_path / "t.obj", "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n")
        patches = derive_patches(load_mesh(p), normal_orientation="as-authored")
        assert patches[0].area == pytest.approx(0.5, abs=1e-15)

    def test_equilateral_triangle_area(self, tmp_path):
        # side 2 m: area = sqrt(3)
        h = np.sqrt(3.0)
        p = write_obj(tmp_path / "e.obj", f"v 0 0 0\nv 2 0 0\nv 1 {h} 0\nf 1 2 3\n")
        patches = derive_patches(load_mesh(p), normal_orientation="as-authored")
        assert patches[0].area == pytest.approx(1.7320508075688772, abs=1e-12)

    def test_cube_inward_normals(self, cube_patches):
        center = np.array([0.5, 0.5, 0.5])
        for p in cube_patches:
            assert np.dot(p.normal, center - p.centroid) > 0.0
            assert abs(np.linalg.norm(p.normal) - 1.0) <= 1e-9

    def test_cube_area_sum(self, cube_patches):
        assert sum(p.area for p in cube_patches) == pytest.approx(6.0, abs=1e-9)

    def test_deterministic(self, unit_cube):
        a = derive_patches(unit_cube, albedo_default=0.3)
        b = derive_patches(unit_cube, albedo_default=0.3)
        for pa, pb in zip(a, b):
            assert np.array_equal(pa.normal, pb.normal)
            assert np.array_equal(pa.centroid, pb.centroid)
            assert pa.area == pb.area

    def test_degenerate_face_rejected(self):
        mesh = TriangleMesh(
            vertices=np.array([[0, 0, 0], [1, 0, 0], [2, 0, 0]], dtype=float),
            faces=np.array([[0, 1, 2]], dtype=np.int64),
        )
        with pytest.raises(GeometryError, match="face 0"):
            derive_patches(mesh)

    def test_centroid_is_vertex_mean(self, cube_patches, unit_cube):
        for p in cube_patches:
            expect = unit_cube.vertices[list(p.face)].mean(axis=0)
            assert np.allclose(p.centroid, expect)


def flat_depth_image(h=10, w=10, depth=2.0, fx=100.0, fy=100.0):
    camera = PinholeCamera(fx=fx, fy=fy, cx=w / 2, cy=h / 2, pose=np.eye(4))
    return DepthImage(depth=np.full((h, w), depth), camera=camera)


class TestMeshFromDepth:
    def test_flat_plane_normals_parallel(self):
        mesh = mesh_from_depth(flat_depth_image(), median_radius=0, edge_threshold=1.0)
        patches = derive_patches(mesh, normal_orientation="as-authored")
        normals = np.array([p.normal for p in patches])
        ref = normals[0]
        assert np.all(np.abs(np.abs(normals @ ref) - 1.0) <= 1e-6)

    def test_salt_noise_removed_by_median(self):
        clean = flat_depth_image()
        noisy_depth = clean.depth.copy()
        noisy_depth[5, 5] = 8.0  # single outlier
        noisy = DepthImage(depth=noisy_depth, camera=clean.camera)
        m_clean = mesh_from_depth(clean, median_radius=1, edge_threshold=1.0)
        m_noisy = mesh_from_depth(noisy, median_radius=1, edge_threshold=1.0)
        assert np.array_equal(m_clean.vertices, m_noisy.vertices)
        assert np.array_equal(m_clean.faces, m_noisy.faces)

    def test_step_depth_gives_two_sheets(self):
        depth = np.full((10, 10), 1.0)
        depth[:, 5:] = 2.0  # one meter step
        img = DepthImage(
            depth=depth, camera=PinholeCamera(fx=100, fy=100, cx=5, cy=5, pose=np.eye(4))
        )
        mesh = mesh_from_depth(img, median_radius=0, edge_threshold=0.5)
        # no triangle bridges the discontinuity
        for f in mesh.faces:
            zs = mesh.vertices[f][:, 2]
            assert zs.max() - zs.min() < 0.5
        zs = mesh.vertices[:, 2]
        assert set(np.round(zs, 6)) == {1.0, 2.0}

    def test_plane_is_smoothing_fixed_point(self):
        rough = mesh_from_depth(flat_depth_image(), median_radius=0, edge_threshold=1.0)
        smooth = mesh_from_depth(
            flat_depth_image(), median_radius=0, edge_threshold=1.0, smooth_iters=10
        )
        assert np.abs(smooth.vertices - rough.vertices).max() <= 1e-6

    def test_too_few_valid_pixels(self):
        depth = np.zeros((10, 10))
        depth[0, 0] = 1.0
        img = DepthImage(
            depth=depth, camera=PinholeCamera(fx=100, fy=100, cx=5, cy=5, pose=np.eye(4))
        )
        with pytest.raises(GeometryError):
            mesh_from_depth(img)

    def test_back_project_through_pose(self):
        pose = np.eye(4)
        pose[:3, 3] = [10.0, 0.0, 0.0]
        camera = PinholeCamera(fx=100, fy=100, cx=2, cy=2, pose=pose)
        img = DepthImage(depth=np.full((4, 4), 1.0), camera=camera)
        pts = back_project(img.depth, camera)
        assert np.allclose(pts[2, 2], [10.0, 0.0, 1.0])


class TestDepthIO:
    def test_pgm_roundtrip(self, tmp_path):
        img = (np.arange(30, dtype=np.uint16) * 1000).reshape(5, 6)
        write_pgm16(tmp_path / "d.pgm", img)
        assert np.array_equal(read_pgm16(tmp_path / "d.pgm"), img)

    def test_load_depth_image(self, tmp_path):
        depth_mm = np.full((6, 6), 1500, dtype=np.uint16)
        write_pgm16(tmp_path / "d.pgm", depth_mm)
        sidecar = {"fx": 50.0, "fy": 50.0, "cx": 3.0, "cy": 3.0, "pose": np.eye(4).tolist()}
        (tmp_path / "d.json").write_text(json.dumps(sidecar))
        img = load_depth_image(tmp_path / "d.pgm", tmp_path / "d.json")
        assert img.depth[0, 0] == pytest.approx(1.5)
        assert img.width == 6 and img.height == 6

    def test_sidecar_missing_field(self, tmp_path):
        write_pgm16(tmp_path / "d.pgm", np.full((4, 4), 1000, dtype=np.uint16))
        (tmp_path / "d.json").write_text(json.dumps({"fx": 50.0}))
        with pytest.raises(FormatError, match="missing"):
            load_depth_image(tmp_path / "d.pgm", tmp_path / "d.json")

    def test_grid_normals_flat_plane(self):
        img = flat_depth_image()
        pts = back_project(img.depth, img.camera)
        n = grid_normals(pts, toward=np.zeros(3))
        interior = n[1:-1, 1:-1]
        assert np.allclose(np.abs(interior[..., 2]), 1.0, atol=1e-9)
