"""Lift patch-space face meshes onto metric camera rays.

A single-image face reconstruction outputs vertices (u, v, d): u, v are
pixel positions in the cropped face patch and d is the vertex's distance
to the u-v plane in the same pixel unit.  Each vertex's metric position
must lie on the camera ray through its original-image pixel, so lifting
reduces to choosing a per-image affine map from reconstructed depth to
ray distance:

    distance_along_ray = scale * d + offset        (mm)

``scale`` (mm per patch pixel) is fixed by comparing the mesh's eye-center
distance against a metric reference face model.  ``offset`` aligns the
mesh with the head pose estimated from the image's 2D landmarks: it is
the norm of the six-landmark centroid in the camera frame minus the
scaled mean landmark depth.  The offset is an approximation (it mixes a
ray distance with a per-vertex depth mean), so lifted positions match the
pose-derived face center to within a small off-axis residual; the exact
per-pixel reprojection property holds for every vertex regardless.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from . import facemodel
from .errors import DegenerateLandmarksError, FaceBehindCameraError, MalformedLandmarksError
from .facemodel import ReferenceFaceModel
from .geometry import CameraIntrinsics, CropTransform, back_project_ray
from .pnp import HeadPose

#: Landmarks every patch mesh must map: the face outline (jaw 0-16 and
#: brows 17-26, used for mask generation) plus the six eye/mouth corners.
REQUIRED_LANDMARKS = tuple(range(0, 27)) + facemodel.SIX_LANDMARKS


def _validate_mesh_arrays(vertices, triangles, colors, landmark_map):
    if vertices.ndim != 2 or vertices.shape[1] != 3:
        raise ValueError(f"vertices must be (n, 3), got {vertices.shape}")
    if not np.all(np.isfinite(vertices)):
        raise ValueError("non-finite vertex coordinates")
    n = vertices.shape[0]
    if triangles.ndim != 2 or triangles.shape[1] != 3:
        raise ValueError(f"triangles must be (m, 3), got {triangles.shape}")
    if triangles.size and (triangles.min() < 0 or triangles.max() >= n):
        raise ValueError("triangle indices out of range")
    if colors.shape != (n, 3):
        raise ValueError(f"colors must be ({n}, 3), got {colors.shape}")
    if np.any(colors < 0.0) or np.any(colors > 1.0):
        raise ValueError("colors must lie in [0, 1]")
    missing = [i for i in REQUIRED_LANDMARKS if i not in landmark_map]
    if missing:
        raise MalformedLandmarksError(f"landmark map missing indices {sorted(set(missing))}")
    bad = [v for v in landmark_map.values() if not 0 <= int(v) < n]
    if bad:
        raise ValueError(f"landmark map points at nonexistent vertices {bad}")


@dataclass(frozen=True, eq=False)
class PatchMesh:
    """Reconstructed face surface in patch coordinates.

    vertices: (n, 3) float64 rows (u, v, d) in patch pixels.
    triangles: (m, 3) int vertex indices.
    colors: (n, 3) float64 RGB in [0, 1].
    landmark_map: semantic landmark index -> vertex index; must cover the
        face outline (0-26) and the six eye/mouth corners.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    colors: np.ndarray
    landmark_map: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.ascontiguousarray(self.vertices, dtype=float)
        t = np.ascontiguousarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        c = np.ascontiguousarray(self.colors, dtype=float)
        m = {int(k): int(i) for k, i in self.landmark_map.items()}
        _validate_mesh_arrays(v, t, c, m)
        for a in (v, t, c):
            a.flags.writeable = False
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)
        object.__setattr__(self, "colors", c)
        object.__setattr__(self, "landmark_map", m)

    def landmark_vertex(self, index: int) -> np.ndarray:
        return self.vertices[self.landmark_map[index]]

    @property
    def six_vertex_ids(self) -> list:
        return facemodel.select_six(self.landmark_map)

    @property
    def six_vertices(self) -> np.ndarray:
        """(6, 3) patch-space (u, v, d) rows of the eye/mouth corners."""
        return self.vertices[self.six_vertex_ids]


@dataclass(frozen=True, eq=False)
class MetricMesh:
    """The same surface in camera coordinates (mm), all z > 0.

    ``source_vertices`` preserves the patch-space (u, v, d) rows so that
    patch-defined operations (face-region filtering) remain available,
    and ``face_region`` optionally records that filter's vertex subset.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    colors: np.ndarray
    landmark_map: dict
    source_vertices: "np.ndarray | None" = None
    face_region: "np.ndarray | None" = None

    def __post_init__(self):
        v = np.ascontiguousarray(self.vertices, dtype=float)
        t = np.ascontiguousarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        c = np.ascontiguousarray(self.colors, dtype=float)
        m = {int(k): int(i) for k, i in self.landmark_map.items()}
        _validate_mesh_arrays(v, t, c, m)
        if np.any(v[:, 2] <= 0.0):
            raise FaceBehindCameraError("metric mesh has vertices with z <= 0")
        for a in (v, t, c):
            a.flags.writeable = False
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)
        object.__setattr__(self, "colors", c)
        object.__setattr__(self, "landmark_map", m)

    def landmark_vertex(self, index: int) -> np.ndarray:
        return self.vertices[self.landmark_map[index]]

    @property
    def six_vertex_ids(self) -> list:
        return facemodel.select_six(self.landmark_map)

    @property
    def six_vertices(self) -> np.ndarray:
        return self.vertices[self.six_vertex_ids]

    def with_face_region(self, subset: np.ndarray) -> "MetricMesh":
        return replace(self, face_region=np.asarray(subset, dtype=np.int64))


@dataclass(frozen=True, eq=False)
class LiftParams:
    """Per-image constants of the depth-to-ray-distance map."""

    scale: float  # mm per patch pixel; > 0
    offset: float  # mm
    patch_eye_distance: float  # px
    ref_eye_distance: float  # mm
    mean_landmark_depth: float  # px, mean d over the six corner vertices
    landmark_centroid: np.ndarray  # (3,) mm, pose-derived six-corner centroid
    source_pose: HeadPose

    def __post_init__(self):
        if not self.scale > 0.0:
            raise ValueError(f"scale must be positive, got {self.scale}")
        c = np.asarray(self.landmark_centroid, dtype=float).reshape(3)
        c.flags.writeable = False
        object.__setattr__(self, "landmark_centroid", c)

    def distance_along_ray(self, d) -> np.ndarray:
        return self.scale * np.asarray(d, dtype=float) + self.offset


def depth_scale(mesh: PatchMesh, ref: ReferenceFaceModel) -> float:
    """mm-per-patch-pixel scale: reference eye distance over mesh eye distance."""
    l_patch = facemodel.eye_center_distance(mesh.six_vertices[:, :2][:4])
    if l_patch < 1e-6:
        raise DegenerateLandmarksError(f"patch eye distance degenerate ({l_patch:g} px)")
    return ref.eye_distance / l_patch


def depth_offset(mesh: PatchMesh, scale: float, pose: HeadPose, ref: ReferenceFaceModel) -> float:
    """Ray-distance bias aligning scaled depth with the estimated head pose.

    offset = ||centroid of posed reference corners|| - scale * mean corner depth.
    Raises FaceBehindCameraError if any mesh vertex would land at or behind
    the camera origin under the resulting map.
    """
    posed_six = pose.apply(ref.six_points)
    centroid = posed_six.mean(axis=0)
    mean_depth = float(mesh.six_vertices[:, 2].mean())
    offset = float(np.linalg.norm(centroid)) - scale * mean_depth
    min_dist = scale * float(mesh.vertices[:, 2].min()) + offset
    if min_dist <= 0.0:
        raise FaceBehindCameraError(
            f"scale*d + offset reaches {min_dist:.3f} mm <= 0 over the mesh"
        )
    return offset


def solve_lift_params(mesh: PatchMesh, ref: ReferenceFaceModel, pose: HeadPose) -> LiftParams:
    """Bundle scale, offset and their ingredients for one source image."""
    scale = depth_scale(mesh, ref)
    offset = depth_offset(mesh, scale, pose, ref)
    posed_six = pose.apply(ref.six_points)
    return LiftParams(
        scale=scale,
        offset=offset,
        patch_eye_distance=facemodel.eye_center_distance(mesh.six_vertices[:, :2][:4]),
        ref_eye_distance=ref.eye_distance,
        mean_landmark_depth=float(mesh.six_vertices[:, 2].mean()),
        landmark_centroid=posed_six.mean(axis=0),
        source_pose=pose,
    )


def lift_to_camera(
    mesh: PatchMesh, cam: CameraIntrinsics, crop: CropTransform, params: LiftParams
) -> MetricMesh:
    """Place every vertex at (scale*d + offset) along its back-projected ray.

    By construction each lifted vertex reprojects exactly onto its
    original-image pixel.  Triangles, colors and the landmark map carry
    over; patch coordinates are kept as ``source_vertices``.
    """
    d = mesh.vertices[:, 2]
    dist = params.distance_along_ray(d)
    if np.any(dist <= 0.0):
        bad = int(np.argmin(dist))
        raise FaceBehindCameraError(
            f"vertex {bad} lands at ray distance {dist[bad]:.3f} mm <= 0 "
            f"(d = {d[bad]:.3f}, scale = {params.scale:.6f}, offset = {params.offset:.3f})"
        )
    original_px = crop.to_original(mesh.vertices[:, :2])
    rays = back_project_ray(cam, original_px)
    return MetricMesh(
        vertices=dist[:, np.newaxis] * rays,
        triangles=mesh.triangles,
        colors=mesh.colors,
        landmark_map=mesh.landmark_map,
        source_vertices=mesh.vertices,
    )
