"""Synthetic face samples with analytically known ground truth.

Stands in for real reconstruction backends in tests and demos: builds a
half-ellipsoid face shell around the generic 68-landmark template, poses
it rigidly in front of a source camera, and derives the exact patch mesh
a depth-from-patch reconstruction would produce for it.  Because every
step is constructed rather than estimated, the true pose, the true
depth-map coefficients and the true gaze geometry are all recorded and
can be compared against what the pipeline recovers.

Extra oracle hooks baked into the mesh:
- a small triangle of a distinct marker color placed 100 mm from the
  face center along the gaze ray (the marker transports rigidly, so in
  any re-rendered view its blob must land where the transported gaze
  label says);
- "probe" shell vertices whose entire one-ring shares one checker color
  (the rendered pixel under a probe's projection must show that color);
- back-of-head vertices strictly deeper than the chin (the face-region
  filter must drop all of them).
"""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from . import facemodel
from .facemodel import ReferenceFaceModel, build_generic_model
from .geometry import CameraIntrinsics, CropTransform, project
from .matching import PatchMesh
from .pnp import HeadPose
from .rasterizer import VirtualCamera, rasterize
from .rotation import rot_x, rot_y, rot_z

#: Marker color; the checker palette must stay away from it so exact
#: pixel matches identify the marker uniquely.
MARKER_COLOR = (1.0, 0.0, 1.0)

#: Two-tone checker palette (green components kept above zero so no face
#: pixel can quantize to the marker's G == 0 signature).
CHECKER_PALETTE = ((0.25, 0.2, 0.15), (0.8, 0.75, 0.65))

MARKER_DISTANCE_MM = 100.0


@dataclass(frozen=True)
class SyntheticFaceParams:
    interocular_mm: float = 60.0
    mean_landmark_depth_px: float = 100.0
    checker_period: int = 4
    rings: int = 18
    sectors: int = 36
    max_rotation_deg: float = 20.0
    distance_range_mm: tuple = (550.0, 700.0)
    image_size: tuple = (640, 480)
    patch_px: int = 224
    seed: int = 0

    def __post_init__(self):
        if self.interocular_mm <= 0 or self.mean_landmark_depth_px <= 0:
            raise ValueError("face proportions must be positive")
        if self.checker_period < 1 or self.rings < 4 or self.sectors < 8:
            raise ValueError("shell resolution too small")


@dataclass(frozen=True, eq=False)
class SyntheticTruth:
    """Everything the generator knows exactly about one sample."""

    pose: HeadPose
    gaze_target: np.ndarray  # (3,) mm camera frame
    gaze_vector: np.ndarray  # unit, camera frame, from the face center
    face_center: np.ndarray  # (3,) mm camera frame (six-corner centroid)
    scale: float  # mm per patch px used to build d
    offset: float  # mm bias used to build d
    marker_center: np.ndarray  # (3,) mm camera frame
    back_vertex_ids: np.ndarray
    probe_vertex_ids: np.ndarray
    probe_colors: np.ndarray
    metric_vertices: np.ndarray  # (n, 3) mm camera frame

    def to_json(self) -> dict:
        return {
            "rotation": self.pose.rotation.tolist(),
            "translation": self.pose.translation.tolist(),
            "gaze_target": self.gaze_target.tolist(),
            "gaze_vector": self.gaze_vector.tolist(),
            "face_center": self.face_center.tolist(),
            "scale": self.scale,
            "offset": self.offset,
            "marker_center": self.marker_center.tolist(),
            "marker_color": list(MARKER_COLOR),
            "back_vertex_ids": self.back_vertex_ids.tolist(),
            "probe_vertex_ids": self.probe_vertex_ids.tolist(),
            "probe_colors": self.probe_colors.tolist(),
        }


def _shell_local(params: SyntheticFaceParams):
    """Front half-ellipsoid grid, plus isolated back-of-head rings.

    Returns (vertices, triangles, colors, probe_ids) in face-local mm.
    The grid is a pole fan plus rings x sectors quads; colors follow a
    checkerboard over (ring, sector) cells of size checker_period.
    """
    s = params.interocular_mm / 60.0
    ax, by, cz = 75.0 * s, 85.0 * s, 45.0 * s
    yc, z0 = 8.0 * s, 12.0 * s
    rings, sectors = params.rings, params.sectors

    verts = [np.array([0.0, yc, z0 - cz])]  # front pole
    colors = [CHECKER_PALETTE[0]]
    psi = np.linspace(np.pi / (2.0 * rings), np.pi / 2.0, rings)
    phi = np.linspace(0.0, 2.0 * np.pi, sectors, endpoint=False)
    for p in psi:
        for f in phi:
            verts.append(
                np.array(
                    [
                        ax * np.sin(p) * np.cos(f),
                        yc + by * np.sin(p) * np.sin(f),
                        z0 - cz * np.cos(p),
                    ]
                )
            )
    period = params.checker_period

    def cell_color(ring, sector):
        return CHECKER_PALETTE[(ring // period + sector // period) % 2]

    for ring in range(rings):
        for sector in range(sectors):
            colors.append(cell_color(ring, sector))

    tris = []
    for sector in range(sectors):
        tris.append([0, 1 + sector, 1 + (sector + 1) % sectors])
    for ring in range(rings - 1):
        base0 = 1 + ring * sectors
        base1 = 1 + (ring + 1) * sectors
        for sector in range(sectors):
            nxt = (sector + 1) % sectors
            tris.append([base0 + sector, base1 + sector, base1 + nxt])
            tris.append([base0 + sector, base1 + nxt, base0 + nxt])

    # Probe vertices: the whole 3x3 vertex neighborhood must sit inside one
    # checker cell so every one-ring triangle shares the probe's color.
    probe_ids = []
    for ring in range(2, min(rings - 1, 10)):
        for sector in range(sectors):
            if (
                1 <= ring % period <= period - 2
                and 1 <= sector % period <= period - 2
                and (ring + sector) % 5 == 0
            ):
                probe_ids.append(1 + ring * sectors + sector)
    probe_ids = np.array(probe_ids[:12], dtype=np.int64)

    # Back-of-head rings: isolated vertices (never rasterized).  Depth is
    # compared by ray distance, and the chin sits at the face's bottom edge
    # where ray distances are largest, so the rings go well behind the
    # skull midline to stay strictly deeper for any modest pose.
    back_start = len(verts)
    for z_back in (85.0 * s, 100.0 * s):
        for f in phi[::3]:
            verts.append(np.array([30.0 * s * np.cos(f), yc + 30.0 * s * np.sin(f), z_back]))
            colors.append(CHECKER_PALETTE[0])
    back_ids = np.arange(back_start, len(verts), dtype=np.int64)

    return (
        np.array(verts),
        np.array(tris, dtype=np.int64),
        np.array(colors, dtype=float),
        probe_ids,
        back_ids,
    )


def generate_synthetic_face(
    params: SyntheticFaceParams = SyntheticFaceParams(),
    reference: "ReferenceFaceModel | None" = None,
) -> tuple[PatchMesh, CameraIntrinsics, CropTransform, np.ndarray, SyntheticTruth]:
    """Build one synthetic sample.

    Returns (patch mesh, source intrinsics, crop transform, landmark
    pixels (68, 2), truth).  The landmark template doubles as the mesh's
    landmark vertices, so fitting the reference model to the projected
    landmarks recovers the true pose exactly when the interocular
    distances agree.
    """
    if reference is None:
        reference = facemodel.load_default_model()
    rng = np.random.default_rng(params.seed)

    template = build_generic_model(params.interocular_mm).points
    shell, shell_tris, shell_colors, probe_ids, back_ids = _shell_local(params)

    n_landmarks = len(template)
    local = np.vstack([template, shell])
    colors = np.vstack([np.full((n_landmarks, 3), 0.5), shell_colors])
    tris = shell_tris + n_landmarks
    probe_ids = probe_ids + n_landmarks
    back_ids = back_ids + n_landmarks

    # True pose: modest rotation, face center well inside the image.
    amax = np.radians(params.max_rotation_deg)
    rot = (
        rot_z(rng.uniform(-amax / 2.0, amax / 2.0))
        @ rot_y(rng.uniform(-amax, amax))
        @ rot_x(rng.uniform(-amax, amax))
    )
    z = rng.uniform(*params.distance_range_mm)
    trans = np.array([rng.uniform(-25.0, 25.0), rng.uniform(-25.0, 25.0), z])
    pose = HeadPose(rotation=rot, translation=trans)

    face_center = pose.apply(np.zeros(3))  # template is centered at the origin
    # Gaze within a small cone of the face's forward axis: re-posed views
    # then keep the gaze (and the marker blob) near the frame center for
    # any modest target pose.
    cone = np.radians(5.0)
    ang = rng.uniform(0.0, cone)
    azi = rng.uniform(0.0, 2.0 * np.pi)
    forward_local = np.array(
        [np.sin(ang) * np.cos(azi), np.sin(ang) * np.sin(azi), -np.cos(ang)]
    )
    gaze_vector = pose.rotation @ forward_local
    gaze_target = face_center + rng.uniform(450.0, 650.0) * gaze_vector
    marker_center = face_center + MARKER_DISTANCE_MM * gaze_vector

    # Marker solid: a small octahedron shows a filled blob from any view
    # direction, so re-posed renders never lose it to an edge-on sliver.
    # The radius trades detectability (needs clean interior pixels after
    # the 2x2 downscale) against centroid bias from silhouette asymmetry.
    r = 2.0
    offsets = np.array(
        [[r, 0, 0], [-r, 0, 0], [0, r, 0], [0, -r, 0], [0, 0, r], [0, 0, -r]]
    )
    marker_verts_cam = marker_center + offsets
    marker_ids = np.arange(len(local), len(local) + 6, dtype=np.int64)
    local = np.vstack([local, (marker_verts_cam - trans) @ pose.rotation])
    colors = np.vstack([colors, np.tile(MARKER_COLOR, (6, 1))])
    m = marker_ids
    octa_faces = [
        [m[0], m[2], m[4]], [m[2], m[1], m[4]], [m[1], m[3], m[4]], [m[3], m[0], m[4]],
        [m[2], m[0], m[5]], [m[1], m[2], m[5]], [m[3], m[1], m[5]], [m[0], m[3], m[5]],
    ]
    tris = np.vstack([tris, octa_faces])

    metric = pose.apply(local)
    if np.any(metric[:, 2] <= 0.0):
        raise RuntimeError("synthetic pose places vertices behind the camera")

    # Source camera and face crop.
    width, height = params.image_size
    cam = CameraIntrinsics(fx=650.0, fy=650.0, cx=width / 2.0, cy=height / 2.0)
    pixels = project(cam, metric)
    landmark_px = pixels[:n_landmarks]
    lo = landmark_px.min(axis=0)
    hi = landmark_px.max(axis=0)
    span = (hi - lo).max() * 1.5
    center = (hi + lo) / 2.0
    crop = CropTransform(
        box_cx=center[0],
        box_cy=center[1],
        box_w=span,
        box_h=span,
        scale_x=params.patch_px / span,
        scale_y=params.patch_px / span,
    )

    # Patch mesh: (u, v) from the crop, d from the exact inverse of the
    # lifting relation so that scale * d + offset reproduces each vertex's
    # ray distance.
    distances = np.linalg.norm(metric, axis=1)
    patch_eye = facemodel.eye_center_distance(
        crop.to_patch(landmark_px[list(facemodel.SIX_LANDMARKS)])
    )
    scale = reference.eye_distance / patch_eye
    offset = float(np.linalg.norm(face_center)) - scale * params.mean_landmark_depth_px
    d = (distances - offset) / scale

    # Re-deriving the offset downstream uses the corner centroid's norm,
    # which undershoots the mean corner ray distance (convexity), so the
    # whole lifted mesh lands short of the construction by that fixed gap.
    # Pre-stretch only the marker's depth so its lifted position is exactly
    # the 100 mm gaze-ray point that the transported labels predict.
    six_ids = list(facemodel.SIX_LANDMARKS)
    gap = float(distances[six_ids].mean() - np.linalg.norm(face_center))
    d[marker_ids] += gap / scale

    chin_d = d[facemodel.CHIN]
    if d[back_ids].min() <= chin_d + 1.0:
        raise RuntimeError("back-of-head vertices are not strictly behind the chin")

    patch_uv = crop.to_patch(pixels)
    mesh = PatchMesh(
        vertices=np.column_stack([patch_uv, d]),
        triangles=tris,
        colors=colors,
        landmark_map={i: i for i in range(n_landmarks)},
    )
    truth = SyntheticTruth(
        pose=pose,
        gaze_target=gaze_target,
        gaze_vector=gaze_vector,
        face_center=face_center,
        scale=scale,
        offset=offset,
        marker_center=marker_center,
        back_vertex_ids=back_ids,
        probe_vertex_ids=probe_ids,
        probe_colors=colors[probe_ids],
        metric_vertices=metric,
    )
    return mesh, cam, crop, landmark_px, truth


def render_source_image(truth: SyntheticTruth, mesh: PatchMesh, cam, image_size) -> np.ndarray:
    """Draw the posed mesh through the source camera (for the dataset files)."""
    from .matching import MetricMesh

    metric_mesh = MetricMesh(
        vertices=truth.metric_vertices,
        triangles=mesh.triangles,
        colors=mesh.colors,
        landmark_map=mesh.landmark_map,
    )
    rig = VirtualCamera(intrinsics=cam, render_size=tuple(image_size))
    return rasterize(metric_mesh, rig).color


def write_synthetic_dataset(
    out_dir,
    n_sources: int = 2,
    params: SyntheticFaceParams = SyntheticFaceParams(),
    seed: int = 0,
    scene_images: int = 3,
) -> Path:
    """Generate a ready-to-synthesize dataset directory.

    Layout: images/, meshes/, scenes/, manifest.jsonl (paths relative to
    the manifest).  Returns the manifest path.
    """
    from dataclasses import replace

    from .meshio import write_patch_mesh

    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    (out / "meshes").mkdir(exist_ok=True)
    (out / "scenes").mkdir(exist_ok=True)

    records = []
    for i in range(n_sources):
        sample_params = replace(params, seed=seed + i)
        mesh, cam, crop, landmark_px, truth = generate_synthetic_face(sample_params)
        sample_id = f"synth{i:03d}"
        image_rel = f"images/{sample_id}.png"
        mesh_rel = f"meshes/{sample_id}.mesh"
        img = render_source_image(truth, mesh, cam, sample_params.image_size)
        Image.fromarray(img).save(out / image_rel)
        write_patch_mesh(mesh, out / mesh_rel)
        records.append(
            {
                "id": sample_id,
                "subject": "synthetic",
                "image": image_rel,
                "mesh": mesh_rel,
                "intrinsics": {"fx": cam.fx, "fy": cam.fy, "cx": cam.cx, "cy": cam.cy},
                "crop": {
                    "box_cx": crop.box_cx,
                    "box_cy": crop.box_cy,
                    "box_w": crop.box_w,
                    "box_h": crop.box_h,
                    "scale_x": crop.scale_x,
                    "scale_y": crop.scale_y,
                },
                "landmarks": landmark_px.tolist(),
                "gaze_target": truth.gaze_target.tolist(),
                "truth": truth.to_json(),
            }
        )

    rng = np.random.default_rng(seed + 7777)
    for i in range(scene_images):
        # Smooth two-tone gradients; green floor keeps them off the marker color.
        base = rng.integers(40, 200, size=3)
        tilt = rng.integers(-80, 80, size=3)
        yy, xx = np.mgrid[0:240, 0:320]
        ramp = (xx / 320.0 + yy / 240.0)[..., np.newaxis] / 2.0
        img = np.clip(base + tilt * ramp, 10, 255).astype(np.uint8)
        img[..., 1] = np.maximum(img[..., 1], 60)
        Image.fromarray(img).save(out / "scenes" / f"scene{i:02d}.png")

    manifest = out / "manifest.jsonl"
    with open(manifest, "w") as f:
        for rec in records:
            f.write(json.dumps(rec) + "\n")
    return manifest
