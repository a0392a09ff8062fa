"""Deterministic software rasterizer for lifted face meshes.

Geometry: perspective projection through pinhole intrinsics; pixel
(row i, col j) covers the unit square with center (j + 0.5, i + 0.5).
Visibility: per-pixel z-buffer with a strict less-than test, triangles
processed in index order (first triangle wins exact depth ties).
Coverage ties on edges follow the top-left fill rule, so identical
inputs give bit-identical images on any platform.  Vertex colors are
interpolated perspective-correctly; the global ambient factor scales
colors linearly before the single 8-bit quantization (round half up)
at output.  Back faces are not culled: reconstructed faces are open
surfaces and culling would punch holes at grazing poses.
"""

from dataclasses import dataclass

import numpy as np
from PIL import Image
from scipy.ndimage import gaussian_filter

from . import facemodel
from .errors import BackgroundError, DegenerateLandmarksError, RenderError
from .geometry import CameraIntrinsics
from .matching import MetricMesh, PatchMesh

#: Normalized rendering rig: focal length and face distance follow the
#: standard full-face normalization; images are rendered at 448 x 448 and
#: box-downscaled to 224 x 224.
DEFAULT_FOCAL_PX = 960.0
DEFAULT_RENDER_SIZE = (448, 448)
DEFAULT_OUTPUT_SIZE = (224, 224)


@dataclass(frozen=True)
class VirtualCamera:
    """Rendering camera: intrinsics plus render/output resolutions (w, h)."""

    intrinsics: CameraIntrinsics
    render_size: tuple = DEFAULT_RENDER_SIZE
    output_size: tuple = DEFAULT_OUTPUT_SIZE

    def __post_init__(self):
        w, h = self.render_size
        if w <= 0 or h <= 0:
            raise ValueError(f"bad render size {self.render_size}")

    @classmethod
    def default(cls) -> "VirtualCamera":
        w, h = DEFAULT_RENDER_SIZE
        return cls(
            intrinsics=CameraIntrinsics(
                fx=DEFAULT_FOCAL_PX, fy=DEFAULT_FOCAL_PX, cx=w / 2.0, cy=h / 2.0
            )
        )


@dataclass(frozen=True)
class BackgroundSpec:
    """What goes behind the face: black, a solid color, or a blurred scene."""

    kind: str = "black"  # black | color | scene
    color: tuple = (0, 0, 0)  # 8-bit RGB, used by kind == "color"
    scene_path: str = ""  # used by kind == "scene"
    blur_sigma: float = 4.0  # px at render resolution; 0 disables blurring

    def __post_init__(self):
        if self.kind not in ("black", "color", "scene"):
            raise ValueError(f"unknown background kind {self.kind!r}")
        if self.blur_sigma < 0:
            raise ValueError("blur sigma must be >= 0")
        c = tuple(int(v) for v in self.color)
        if len(c) != 3 or any(not 0 <= v <= 255 for v in c):
            raise ValueError(f"color must be three 8-bit values, got {self.color}")
        object.__setattr__(self, "color", c)


@dataclass(frozen=True)
class RenderConfig:
    background: BackgroundSpec = BackgroundSpec()
    ambient: float = 1.0
    render_size: tuple = DEFAULT_RENDER_SIZE
    output_size: tuple = DEFAULT_OUTPUT_SIZE

    def __post_init__(self):
        if not 0.0 < self.ambient <= 1.0:
            raise ValueError(f"ambient must lie in (0, 1], got {self.ambient}")


@dataclass(eq=False)
class RenderOutput:
    """Raster results: 8-bit color, boolean coverage, metric depth buffer.

    ``depth`` holds +inf where nothing was drawn; ``winner`` records the
    index of the visible triangle per pixel (-1 where empty).
    """

    color: np.ndarray
    coverage: np.ndarray
    depth: np.ndarray
    winner: np.ndarray
    face_mask: "np.ndarray | None" = None


def _edge(ax, ay, bx, by, px, py):
    """Signed edge function: cross(b - a, p - a); >= 0 is the interior side."""
    return (bx - ax) * (py - ay) - (by - ay) * (px - ax)


def _top_left(ax, ay, bx, by) -> bool:
    """Whether ties on this directed edge count as covered (top-left rule)."""
    dx, dy = bx - ax, by - ay
    return dy < 0.0 or (dy == 0.0 and dx > 0.0)


def rasterize(mesh: MetricMesh, cam: VirtualCamera, ambient: float = 1.0) -> RenderOutput:
    """Render per-vertex colors with z-buffer visibility.

    Pixels nothing projects to keep coverage unset (an empty mesh renders
    an empty image; that is not an error).
    """
    if not 0.0 < ambient <= 1.0:
        raise ValueError(f"ambient must lie in (0, 1], got {ambient}")
    shaded = _raster_core(
        mesh.vertices, mesh.triangles, cam, colors=np.asarray(mesh.colors, dtype=float)
    )
    color_f, coverage, depth, winner = shaded
    out = np.clip(color_f * ambient, 0.0, 1.0)
    img = quantize_unit_rgb(out)
    img[~coverage] = 0
    return RenderOutput(color=img, coverage=coverage, depth=depth, winner=winner)


def quantize_unit_rgb(values: np.ndarray) -> np.ndarray:
    """[0, 1] floats -> 8-bit, rounding half up."""
    return np.floor(values * 255.0 + 0.5).astype(np.uint8)


def _raster_core(vertices, triangles, cam: VirtualCamera, colors=None):
    verts = np.asarray(vertices, dtype=float)
    if not np.all(np.isfinite(verts)):
        raise RenderError("mesh vertices contain non-finite values")
    if verts.size and np.any(verts[:, 2] <= 0.0):
        raise RenderError("mesh vertices must have z > 0")
    width, height = cam.render_size
    k = cam.intrinsics
    coverage = np.zeros((height, width), dtype=bool)
    depth = np.full((height, width), np.inf)
    winner = np.full((height, width), -1, dtype=np.int64)
    shade = np.zeros((height, width, 3)) if colors is not None else None

    if verts.size == 0 or len(triangles) == 0:
        return shade, coverage, depth, winner

    z = verts[:, 2]
    px = k.fx * verts[:, 0] / z + k.cx
    py = k.fy * verts[:, 1] / z + k.cy

    for tri_index, tri in enumerate(triangles):
        i0, i1, i2 = (int(v) for v in tri)
        # Normalize orientation so the interior is the >= 0 side of every edge.
        area2 = (px[i1] - px[i0]) * (py[i2] - py[i0]) - (py[i1] - py[i0]) * (px[i2] - px[i0])
        if area2 == 0.0:
            continue
        if area2 < 0.0:
            i1, i2 = i2, i1
        xs = (px[i0], px[i1], px[i2])
        ys = (py[i0], py[i1], py[i2])
        zs = (z[i0], z[i1], z[i2])

        x_lo = max(0, int(np.ceil(min(xs) - 0.5)))
        x_hi = min(width - 1, int(np.floor(max(xs) - 0.5)))
        y_lo = max(0, int(np.ceil(min(ys) - 0.5)))
        y_hi = min(height - 1, int(np.floor(max(ys) - 0.5)))
        if x_lo > x_hi or y_lo > y_hi:
            continue

        cx = np.arange(x_lo, x_hi + 1, dtype=float) + 0.5
        cy = (np.arange(y_lo, y_hi + 1, dtype=float) + 0.5)[:, np.newaxis]
        e0 = _edge(xs[1], ys[1], xs[2], ys[2], cx, cy)
        e1 = _edge(xs[2], ys[2], xs[0], ys[0], cx, cy)
        e2 = _edge(xs[0], ys[0], xs[1], ys[1], cx, cy)
        inside = (
            ((e0 > 0.0) | ((e0 == 0.0) & _top_left(xs[1], ys[1], xs[2], ys[2])))
            & ((e1 > 0.0) | ((e1 == 0.0) & _top_left(xs[2], ys[2], xs[0], ys[0])))
            & ((e2 > 0.0) | ((e2 == 0.0) & _top_left(xs[0], ys[0], xs[1], ys[1])))
        )
        if not inside.any():
            continue

        norm = (px[i1] - px[i0]) * (py[i2] - py[i0]) - (py[i1] - py[i0]) * (px[i2] - px[i0])
        l0 = e0 / norm
        l1 = e1 / norm
        l2 = e2 / norm
        inv_z = l0 / zs[0] + l1 / zs[1] + l2 / zs[2]
        tri_depth = 1.0 / inv_z

        window = (slice(y_lo, y_hi + 1), slice(x_lo, x_hi + 1))
        closer = inside & (tri_depth < depth[window])
        if not closer.any():
            continue
        depth[window] = np.where(closer, tri_depth, depth[window])
        coverage[window] |= closer
        winner[window] = np.where(closer, tri_index, winner[window])
        if colors is not None:
            c0, c1, c2 = colors[i0], colors[i1], colors[i2]
            interp = (
                l0[..., np.newaxis] * (c0 / zs[0])
                + l1[..., np.newaxis] * (c1 / zs[1])
                + l2[..., np.newaxis] * (c2 / zs[2])
            ) * tri_depth[..., np.newaxis]
            shade[window] = np.where(closer[..., np.newaxis], interp, shade[window])

    return shade, coverage, depth, winner


def composite_background(output: RenderOutput, bg: BackgroundSpec) -> np.ndarray:
    """Fill uncovered pixels; covered face pixels pass through unchanged."""
    img = output.color.copy()
    empty = ~output.coverage
    if bg.kind == "black":
        img[empty] = 0
    elif bg.kind == "color":
        img[empty] = np.array(bg.color, dtype=np.uint8)
    else:
        scene = _load_scene(bg, (img.shape[1], img.shape[0]))
        img[empty] = scene[empty]
    return img


def _load_scene(bg: BackgroundSpec, size) -> np.ndarray:
    try:
        with Image.open(bg.scene_path) as f:
            scene = f.convert("RGB").resize(size, Image.BILINEAR)
    except (OSError, ValueError) as exc:
        raise BackgroundError(f"cannot read scene image {bg.scene_path!r}: {exc}") from exc
    arr = np.asarray(scene, dtype=float)
    if bg.blur_sigma > 0.0:
        arr = gaussian_filter(arr, sigma=(bg.blur_sigma, bg.blur_sigma, 0.0))
    return np.floor(arr + 0.5).clip(0, 255).astype(np.uint8)


def face_region_vertices(mesh) -> np.ndarray:
    """Vertex indices inside the landmark outline and no deeper than the chin.

    Works in the source patch coordinates: a vertex is kept when its (u, v)
    lies inside the closed jaw+brow outline polygon and its depth does not
    exceed the chin landmark's depth.  Accepts a PatchMesh, or a MetricMesh
    that carries its source patch vertices.
    """
    if isinstance(mesh, PatchMesh):
        uvd = mesh.vertices
    elif isinstance(mesh, MetricMesh):
        if mesh.source_vertices is None:
            raise ValueError("metric mesh lacks source patch vertices")
        uvd = mesh.source_vertices
    else:
        raise TypeError(f"expected a mesh, got {type(mesh)!r}")
    outline_ids = [mesh.landmark_map[i] for i in facemodel.FACE_OUTLINE]
    polygon = uvd[outline_ids][:, :2]
    if _self_intersects(polygon):
        raise DegenerateLandmarksError("face outline polygon self-intersects")
    chin_depth = uvd[mesh.landmark_map[facemodel.CHIN], 2]
    inside = _points_in_polygon(uvd[:, :2], polygon)
    keep = inside & (uvd[:, 2] <= chin_depth)
    return np.flatnonzero(keep)


def _points_in_polygon(points: np.ndarray, polygon: np.ndarray) -> np.ndarray:
    """Even-odd rule with the half-open edge convention (vectorized)."""
    x, y = points[:, 0], points[:, 1]
    inside = np.zeros(len(points), dtype=bool)
    n = len(polygon)
    for i in range(n):
        x0, y0 = polygon[i]
        x1, y1 = polygon[(i + 1) % n]
        crosses = (y0 <= y) != (y1 <= y)
        with np.errstate(divide="ignore", invalid="ignore"):
            x_at = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
        inside ^= crosses & (x < x_at)
    return inside


def _self_intersects(polygon: np.ndarray) -> bool:
    """Brute-force proper-intersection test between non-adjacent edges."""
    n = len(polygon)
    segs = [(polygon[i], polygon[(i + 1) % n]) for i in range(n)]

    def orient(a, b, c):
        return np.sign((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))

    for i in range(n):
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue  # adjacent around the wrap
            a, b = segs[i]
            c, d = segs[j]
            if (
                orient(a, b, c) * orient(a, b, d) < 0
                and orient(c, d, a) * orient(c, d, b) < 0
            ):
                return True
    return False


def render_mask(mesh: MetricMesh, cam: VirtualCamera, subset=None) -> np.ndarray:
    """Binary face-region mask: triangles entirely within the vertex subset."""
    if subset is None:
        subset = mesh.face_region
    if subset is None:
        raise ValueError("no face-region subset: pass one or attach it to the mesh")
    keep = np.zeros(len(mesh.vertices), dtype=bool)
    keep[np.asarray(subset, dtype=np.int64)] = True
    tris = mesh.triangles
    selected = tris[np.all(keep[tris], axis=1)] if len(tris) else tris
    _, coverage, _, _ = _raster_core(mesh.vertices, selected, cam, colors=None)
    return coverage


def downscale(image: np.ndarray) -> np.ndarray:
    """Halve each dimension with a 2x2 box filter, rounding half up."""
    img = np.asarray(image)
    h, w = img.shape[:2]
    if h % 2 or w % 2:
        raise RenderError(f"downscale needs even dimensions, got {h} x {w}")
    blocks = img.reshape(h // 2, 2, w // 2, 2, -1).astype(float)
    mean = blocks.mean(axis=(1, 3))
    out = np.floor(mean + 0.5).clip(0, 255).astype(np.uint8)
    return out[..., 0] if image.ndim == 2 else out


def downscale_mask(mask: np.ndarray) -> np.ndarray:
    """Box-downscale a boolean mask and re-binarize at the 0.5 threshold."""
    m = np.asarray(mask, dtype=bool)
    h, w = m.shape
    if h % 2 or w % 2:
        raise RenderError(f"downscale needs even dimensions, got {h} x {w}")
    mean = m.reshape(h // 2, 2, w // 2, 2).astype(float).mean(axis=(1, 3))
    return mean >= 0.5


def mask_to_image(mask: np.ndarray) -> np.ndarray:
    """Boolean mask -> 8-bit grayscale image (0 / 255)."""
    return np.where(mask, 255, 0).astype(np.uint8)
