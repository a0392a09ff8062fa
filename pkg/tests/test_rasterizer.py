"""Rasterizer correctness: fill rule, z-buffer, interpolation, masks.

The brute-force oracle re-implements the same per-pixel mathematics with
plain scalar loops (edge functions, perspective-correct barycentrics,
strict less-than depth test, top-left ties).  Since both paths perform
identical IEEE operations, agreement is required to be bit-exact.
"""

import numpy as np
import pytest

from gazesynth.errors import DegenerateLandmarksError, RenderError
from gazesynth.facemodel import FACE_OUTLINE, N_LANDMARKS
from gazesynth.geometry import CameraIntrinsics
from gazesynth.matching import MetricMesh, PatchMesh
from gazesynth.rasterizer import (
    BackgroundSpec,
    VirtualCamera,
    composite_background,
    downscale,
    downscale_mask,
    face_region_vertices,
    mask_to_image,
    quantize_unit_rgb,
    rasterize,
    render_mask,
)

SMALL_CAM = VirtualCamera(
    intrinsics=CameraIntrinsics(fx=100.0, fy=100.0, cx=32.0, cy=32.0),
    render_size=(64, 64),
    output_size=(32, 32),
)

DUMMY_LANDMARKS = {i: 0 for i in list(range(27)) + [36, 39, 42, 45, 48, 54]}


def tri_mesh(vertices, triangles, colors):
    return MetricMesh(
        vertices=np.asarray(vertices, dtype=float),
        triangles=np.asarray(triangles, dtype=int),
        colors=np.asarray(colors, dtype=float),
        landmark_map=dict(DUMMY_LANDMARKS),
    )


def brute_force_render(mesh, cam, ambient=1.0):
    """Scalar re-implementation of the raster core (same formulas)."""
    width, height = cam.render_size
    k = cam.intrinsics
    img = np.zeros((height, width, 3))
    cov = np.zeros((height, width), dtype=bool)
    dep = np.full((height, width), np.inf)
    win = np.full((height, width), -1, dtype=np.int64)
    verts = mesh.vertices
    zs_all = verts[:, 2]
    pxs = k.fx * verts[:, 0] / zs_all + k.cx
    pys = k.fy * verts[:, 1] / zs_all + k.cy

    def edge(ax, ay, bx, by, px, py):
        return (bx - ax) * (py - ay) - (by - ay) * (px - ax)

    def tl(ax, ay, bx, by):
        dx, dy = bx - ax, by - ay
        return dy < 0.0 or (dy == 0.0 and dx > 0.0)

    for tri_index, tri in enumerate(mesh.triangles):
        i0, i1, i2 = (int(v) for v in tri)
        area2 = (pxs[i1] - pxs[i0]) * (pys[i2] - pys[i0]) - (pys[i1] - pys[i0]) * (
            pxs[i2] - pxs[i0]
        )
        if area2 == 0.0:
            continue
        if area2 < 0.0:
            i1, i2 = i2, i1
        xs = (pxs[i0], pxs[i1], pxs[i2])
        ys = (pys[i0], pys[i1], pys[i2])
        zs = (zs_all[i0], zs_all[i1], zs_all[i2])
        norm = (xs[1] - xs[0]) * (ys[2] - ys[0]) - (ys[1] - ys[0]) * (xs[2] - xs[0])
        cols = (mesh.colors[i0], mesh.colors[i1], mesh.colors[i2])
        tls = (
            tl(xs[1], ys[1], xs[2], ys[2]),
            tl(xs[2], ys[2], xs[0], ys[0]),
            tl(xs[0], ys[0], xs[1], ys[1]),
        )
        for row in range(height):
            py = float(row) + 0.5
            for col in range(width):
                px = float(col) + 0.5
                e0 = edge(xs[1], ys[1], xs[2], ys[2], px, py)
                e1 = edge(xs[2], ys[2], xs[0], ys[0], px, py)
                e2 = edge(xs[0], ys[0], xs[1], ys[1], px, py)
                if not (
                    (e0 > 0.0 or (e0 == 0.0 and tls[0]))
                    and (e1 > 0.0 or (e1 == 0.0 and tls[1]))
                    and (e2 > 0.0 or (e2 == 0.0 and tls[2]))
                ):
                    continue
                l0, l1, l2 = e0 / norm, e1 / norm, e2 / norm
                inv_z = l0 / zs[0] + l1 / zs[1] + l2 / zs[2]
                d = 1.0 / inv_z
                if d < dep[row, col]:
                    dep[row, col] = d
                    cov[row, col] = True
                    win[row, col] = tri_index
                    img[row, col] = (
                        l0 * (cols[0] / zs[0]) + l1 * (cols[1] / zs[1]) + l2 * (cols[2] / zs[2])
                    ) * d
    out = quantize_unit_rgb(np.clip(img * ambient, 0.0, 1.0))
    out[~cov] = 0
    return out, cov, dep, win


def random_triangle_pair_mesh(rng):
    """Two random triangles in front of the small camera."""
    verts = np.zeros((6, 3))
    verts[:, 0] = rng.uniform(-25, 25, size=6)
    verts[:, 1] = rng.uniform(-25, 25, size=6)
    verts[:, 2] = rng.uniform(40, 120, size=6)
    colors = rng.uniform(0, 1, size=(6, 3))
    return tri_mesh(verts, [[0, 1, 2], [3, 4, 5]], colors)


class TestRasterizeBasics:
    def _one_triangle(self, color):
        verts = [[-10.0, -10.0, 100.0], [10.0, -10.0, 100.0], [0.0, 12.0, 100.0]]
        return tri_mesh(verts, [[0, 1, 2]], [color, color, color])

    def test_constant_color_triangle(self):
        # Colors chosen away from 8-bit rounding boundaries so perspective
        # interpolation noise (~1e-13) cannot flip the quantization.
        c = [0.24, 0.61, 0.97]
        out = rasterize(self._one_triangle(c), SMALL_CAM, ambient=1.0)
        assert out.coverage.sum() > 50
        expected = quantize_unit_rgb(np.array(c))
        np.testing.assert_array_equal(
            out.color[out.coverage], np.tile(expected, (out.coverage.sum(), 1))
        )

    def test_ambient_scales_linearly(self):
        c = [0.24, 0.61, 0.97]
        out = rasterize(self._one_triangle(c), SMALL_CAM, ambient=0.5)
        expected = quantize_unit_rgb(0.5 * np.array(c))
        np.testing.assert_array_equal(
            out.color[out.coverage], np.tile(expected, (out.coverage.sum(), 1))
        )

    def test_nearer_triangle_wins_overlap(self):
        verts = [
            [-50.0, -50.0, 500.0],
            [50.0, -50.0, 500.0],
            [0.0, 60.0, 500.0],
            [-50.0, -50.0, 400.0],
            [50.0, -50.0, 400.0],
            [0.0, 60.0, 400.0],
        ]
        # Scale the nearer triangle's x/y so both project to the same screen area.
        for i in (3, 4, 5):
            verts[i][0] *= 400.0 / 500.0
            verts[i][1] *= 400.0 / 500.0
        far_color, near_color = [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]
        mesh = tri_mesh(verts, [[0, 1, 2], [3, 4, 5]], [far_color] * 3 + [near_color] * 3)
        out = rasterize(mesh, SMALL_CAM)
        overlap = (out.winner == 1) & out.coverage
        assert overlap.sum() > 20
        np.testing.assert_array_equal(
            out.color[overlap], np.tile(quantize_unit_rgb(np.array(near_color)), (overlap.sum(), 1))
        )

    def test_empty_mesh_renders_empty(self):
        # No triangles: nothing rasterizes, and that is not an error.
        mesh = tri_mesh([[0.0, 0.0, 100.0]], np.zeros((0, 3), dtype=int), [[0.5, 0.5, 0.5]])
        out = rasterize(mesh, SMALL_CAM)
        assert not out.coverage.any()
        assert (out.color == 0).all()

    def test_depth_finite_where_covered(self):
        out = rasterize(self._one_triangle([0.5, 0.5, 0.5]), SMALL_CAM)
        assert np.all(np.isfinite(out.depth[out.coverage]))
        assert np.all(np.isinf(out.depth[~out.coverage]))

    def test_nan_vertices_rejected(self):
        from gazesynth.rasterizer import _raster_core

        verts = np.array([[0.0, 0.0, np.nan], [1.0, 0.0, 100.0], [0.0, 1.0, 100.0]])
        with pytest.raises(RenderError):
            _raster_core(verts, np.array([[0, 1, 2]]), SMALL_CAM)

    def test_bad_ambient_rejected(self):
        mesh = self._one_triangle([0.5, 0.5, 0.5])
        with pytest.raises(ValueError):
            rasterize(mesh, SMALL_CAM, ambient=0.0)
        with pytest.raises(ValueError):
            rasterize(mesh, SMALL_CAM, ambient=1.5)


class TestDeterminismAndLinearity:
    def test_bit_identical_across_runs(self):
        rng = np.random.default_rng(10)
        mesh = random_triangle_pair_mesh(rng)
        a = rasterize(mesh, SMALL_CAM)
        b = rasterize(mesh, SMALL_CAM)
        np.testing.assert_array_equal(a.color, b.color)
        np.testing.assert_array_equal(a.depth, b.depth)
        np.testing.assert_array_equal(a.winner, b.winner)

    def test_light_linearity_within_one_step(self):
        rng = np.random.default_rng(11)
        for _ in range(5):
            mesh = random_triangle_pair_mesh(rng)
            full = rasterize(mesh, SMALL_CAM, ambient=1.0)
            for ambient in (0.25, 0.5, 0.75):
                dim = rasterize(mesh, SMALL_CAM, ambient=ambient)
                diff = np.abs(
                    dim.color.astype(float) - ambient * full.color.astype(float)
                )
                assert diff.max() <= 1.0


class TestZBufferOracle:
    def test_matches_brute_force_bit_exact(self):
        rng = np.random.default_rng(12)
        for _ in range(40):
            mesh = random_triangle_pair_mesh(rng)
            fast = rasterize(mesh, SMALL_CAM)
            img, cov, dep, win = brute_force_render(mesh, SMALL_CAM)
            np.testing.assert_array_equal(fast.coverage, cov)
            np.testing.assert_array_equal(fast.winner, win)
            np.testing.assert_array_equal(fast.color, img)
            np.testing.assert_array_equal(fast.depth, dep)


def outline_patch_mesh():
    """Patch mesh with a circular outline, one inside / outside / deep vertex."""
    verts = np.zeros((N_LANDMARKS + 3, 3))
    # Landmarks on a circle of radius 50 around (112, 112); chin depth 30.
    for slot, lm in enumerate(FACE_OUTLINE):
        angle = 2.0 * np.pi * slot / len(FACE_OUTLINE)
        verts[lm] = [112 + 50 * np.cos(angle), 112 + 50 * np.sin(angle), 10.0]
    # Remaining landmarks sit near the center.
    placed = set(FACE_OUTLINE)
    for lm in range(N_LANDMARKS):
        if lm not in placed:
            verts[lm] = [112.0, 112.0, 5.0]
    verts[8][2] = 30.0  # chin depth bound
    verts[N_LANDMARKS + 0] = [112.0, 112.0, 8.0]  # inside, shallow -> kept
    verts[N_LANDMARKS + 1] = [112.0 + 200.0, 112.0, 8.0]  # outside -> dropped
    verts[N_LANDMARKS + 2] = [112.0, 112.0, 31.0]  # inside but deep -> dropped
    return PatchMesh(
        vertices=verts,
        triangles=np.zeros((0, 3), dtype=int),
        colors=np.full((len(verts), 3), 0.5),
        landmark_map={i: i for i in range(N_LANDMARKS)},
    )


class TestFaceRegion:
    def test_interior_vertex_kept(self):
        region = face_region_vertices(outline_patch_mesh())
        assert N_LANDMARKS + 0 in region

    def test_outside_vertex_dropped(self):
        region = face_region_vertices(outline_patch_mesh())
        assert N_LANDMARKS + 1 not in region

    def test_deep_vertex_dropped(self):
        region = face_region_vertices(outline_patch_mesh())
        assert N_LANDMARKS + 2 not in region

    def test_chin_itself_kept(self):
        # Depth exactly equal to the chin's passes the <= rule.
        region = face_region_vertices(outline_patch_mesh())
        assert 8 in region

    def test_self_intersecting_outline_rejected(self):
        mesh = outline_patch_mesh()
        verts = mesh.vertices.copy()
        # Swap two far-apart outline points to force an edge crossing.
        verts[[0, 8]] = verts[[8, 0]]
        bad = PatchMesh(
            vertices=verts,
            triangles=mesh.triangles,
            colors=mesh.colors,
            landmark_map=mesh.landmark_map,
        )
        with pytest.raises(DegenerateLandmarksError):
            face_region_vertices(bad)


class TestRenderMask:
    def _shell_mesh(self):
        rng = np.random.default_rng(13)
        verts = np.zeros((9, 3))
        verts[:, 0] = rng.uniform(-20, 20, 9)
        verts[:, 1] = rng.uniform(-20, 20, 9)
        verts[:, 2] = rng.uniform(60, 100, 9)
        tris = [[0, 1, 2], [3, 4, 5], [6, 7, 8]]
        return tri_mesh(verts, tris, rng.uniform(0, 1, (9, 3)))

    def test_full_subset_equals_coverage(self):
        mesh = self._shell_mesh()
        out = rasterize(mesh, SMALL_CAM)
        mask = render_mask(mesh, SMALL_CAM, subset=np.arange(9))
        np.testing.assert_array_equal(mask, out.coverage)

    def test_empty_subset_is_all_zero(self):
        mesh = self._shell_mesh()
        mask = render_mask(mesh, SMALL_CAM, subset=np.array([], dtype=int))
        assert not mask.any()

    def test_mask_subset_of_coverage(self):
        rng = np.random.default_rng(14)
        for _ in range(10):
            mesh = self._shell_mesh()
            subset = rng.choice(9, size=rng.integers(0, 10), replace=False)
            out = rasterize(mesh, SMALL_CAM)
            mask = render_mask(mesh, SMALL_CAM, subset=subset)
            assert not (mask & ~out.coverage).any()

    def test_requires_subset(self):
        with pytest.raises(ValueError):
            render_mask(self._shell_mesh(), SMALL_CAM)


class TestDownscale:
    def test_constant_image(self):
        img = np.full((448, 448, 3), 77, dtype=np.uint8)
        out = downscale(img)
        assert out.shape == (224, 224, 3)
        assert (out == 77).all()

    def test_round_half_up_on_mixed_block(self):
        img = np.zeros((2, 2), dtype=np.uint8)
        img[1, :] = 255  # block average 127.5 -> 128
        assert downscale(img)[0, 0] == 128

    def test_checkerboard_becomes_mid_gray(self):
        img = np.zeros((64, 64), dtype=np.uint8)
        img[::2, 1::2] = 255
        img[1::2, ::2] = 255
        assert (downscale(img) == 128).all()

    def test_odd_size_rejected(self):
        with pytest.raises(RenderError):
            downscale(np.zeros((7, 8), dtype=np.uint8))

    def test_mask_downscale_threshold(self):
        mask = np.zeros((4, 4), dtype=bool)
        mask[0, 0] = True  # 1/4 -> off
        mask[2, 0] = mask[2, 1] = True  # 2/4 -> on (>= 0.5)
        small = downscale_mask(mask)
        assert not small[0, 0]
        assert small[1, 0]

    def test_mask_image_levels(self):
        img = mask_to_image(np.array([[True, False]]))
        np.testing.assert_array_equal(img, [[255, 0]])


class TestCompositeBackground:
    def _empty_output(self):
        mesh = tri_mesh([[0.0, 0.0, 100.0]], np.zeros((0, 3), dtype=int), [[0.5, 0.5, 0.5]])
        return rasterize(mesh, SMALL_CAM)

    def test_solid_color_fills_empty(self):
        out = self._empty_output()
        img = composite_background(out, BackgroundSpec(kind="color", color=(255, 0, 0)))
        assert (img == [255, 0, 0]).all()

    def test_full_coverage_ignores_background(self):
        big = [[-200.0, -200.0, 100.0], [200.0, -200.0, 100.0], [0.0, 300.0, 100.0]]
        mesh = tri_mesh(big, [[0, 1, 2]], [[0.3, 0.3, 0.3]] * 3)
        out = rasterize(mesh, SMALL_CAM)
        assert out.coverage.all()
        img = composite_background(out, BackgroundSpec(kind="color", color=(255, 0, 0)))
        np.testing.assert_array_equal(img, out.color)

    def test_zero_blur_copies_scene_exactly(self, tmp_path):
        from PIL import Image

        rng = np.random.default_rng(15)
        scene = rng.integers(0, 256, size=(64, 64, 3), dtype=np.uint8)
        path = tmp_path / "scene.png"
        Image.fromarray(scene).save(path)
        out = self._empty_output()
        img = composite_background(
            out, BackgroundSpec(kind="scene", scene_path=str(path), blur_sigma=0.0)
        )
        np.testing.assert_array_equal(img, scene)

    def test_blur_changes_scene_smoothly(self, tmp_path):
        from PIL import Image

        scene = np.zeros((64, 64, 3), dtype=np.uint8)
        scene[:, 32:] = 255
        path = tmp_path / "scene.png"
        Image.fromarray(scene).save(path)
        out = self._empty_output()
        img = composite_background(
            out, BackgroundSpec(kind="scene", scene_path=str(path), blur_sigma=4.0)
        )
        edge_band = img[:, 28:36, 0].astype(int)
        assert edge_band.min() > 0 and edge_band.max() < 255

    def test_unreadable_scene_names_path(self, tmp_path):
        from gazesynth.errors import BackgroundError

        out = self._empty_output()
        missing = tmp_path / "nope.png"
        with pytest.raises(BackgroundError, match="nope.png"):
            composite_background(
                out, BackgroundSpec(kind="scene", scene_path=str(missing))
            )
