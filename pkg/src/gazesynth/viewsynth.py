"""Re-pose metric meshes and transport gaze labels exactly.

A head pose (R, t) maps face-local coordinates to camera coordinates.
Changing the head pose of a lifted mesh from (R_s, t_s) to (R_t, t_t)
applies the rigid map

    v  ->  R_t R_s^T (v - t_s) + t_t

to every vertex and to the 3D gaze target, so gaze labels stay exact by
construction.  After re-posing, a residual in-plane roll can remain
because the estimated pose and the reconstructed mesh are not perfectly
aligned; a final rotation about the optical axis levels the mesh's eye
line in the image and is applied identically to the vertices, the gaze
label and the head pose.  It does not repair the misalignment itself,
only the rolled appearance.

Gaze directions are encoded as (pitch, yaw) radians with
pitch = arcsin(-y) and yaw = atan2(-x, -z): the unit vector (0, 0, -1)
(looking straight into the camera) maps to (0, 0).
"""

from dataclasses import dataclass, field

import numpy as np

from . import facemodel
from .errors import ProfileDegenerateError
from .geometry import CameraIntrinsics, CropTransform
from .matching import MetricMesh
from .pnp import HeadPose
from .rotation import rot_z

#: Distance from the camera origin to the face center in the normalized
#: rendering frame (mm).
NORMALIZED_FACE_DISTANCE_MM = 300.0

_UNIT_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class GazeSample:
    """One source record: image, camera, crop, landmarks and gaze target."""

    image_path: str
    camera: CameraIntrinsics
    crop: CropTransform
    landmarks: np.ndarray  # (68, 2) px in the original image
    gaze_target: np.ndarray  # (3,) mm, camera frame
    sample_id: str = ""
    subject: str = ""
    mesh_path: str = ""

    def __post_init__(self):
        lm = np.asarray(self.landmarks, dtype=float)
        if lm.shape != (facemodel.N_LANDMARKS, 2) or not np.all(np.isfinite(lm)):
            raise ValueError(f"landmarks must be finite ({facemodel.N_LANDMARKS}, 2)")
        g = np.asarray(self.gaze_target, dtype=float).reshape(3)
        if not np.all(np.isfinite(g)):
            raise ValueError("gaze target must be finite")
        object.__setattr__(self, "landmarks", lm)
        object.__setattr__(self, "gaze_target", g)


def transform_to_pose(
    mesh: MetricMesh, gaze_target, source: HeadPose, target: HeadPose
) -> tuple[MetricMesh, np.ndarray]:
    """Rigidly move a mesh (and its gaze target) from one head pose to another."""
    g = np.asarray(gaze_target, dtype=float).reshape(3)
    rot = target.rotation @ source.rotation.T
    shift = target.translation - rot @ source.translation
    new_mesh = MetricMesh(
        vertices=mesh.vertices @ rot.T + shift,
        triangles=mesh.triangles,
        colors=mesh.colors,
        landmark_map=mesh.landmark_map,
        source_vertices=mesh.source_vertices,
        face_region=mesh.face_region,
    )
    return new_mesh, rot @ g + shift


def eye_line(mesh: MetricMesh) -> np.ndarray:
    """Left-eye center minus right-eye center, from the mesh's landmarks."""
    right = 0.5 * (
        mesh.landmark_vertex(facemodel.RIGHT_EYE_OUTER)
        + mesh.landmark_vertex(facemodel.RIGHT_EYE_INNER)
    )
    left = 0.5 * (
        mesh.landmark_vertex(facemodel.LEFT_EYE_OUTER)
        + mesh.landmark_vertex(facemodel.LEFT_EYE_INNER)
    )
    return left - right


def face_axes(mesh: MetricMesh) -> np.ndarray:
    """Orthonormal face axes from mesh landmarks, rows (x, y, z).

    x runs along the eye line (toward the subject's left), y is the
    Gram-Schmidt-orthogonalized direction from face center to mouth
    center, z completes the right-handed frame.
    """
    x = eye_line(mesh)
    x = x / np.linalg.norm(x)
    mouth = 0.5 * (
        mesh.landmark_vertex(facemodel.MOUTH_RIGHT) + mesh.landmark_vertex(facemodel.MOUTH_LEFT)
    )
    center = facemodel.face_center(mesh.six_vertices)
    y = mouth - center
    y = y - (y @ x) * x
    norm = np.linalg.norm(y)
    if norm < 1e-9:
        raise ProfileDegenerateError("mouth direction parallel to the eye line")
    y = y / norm
    return np.stack([x, y, np.cross(x, y)])


def inplane_roll(mesh: MetricMesh) -> float:
    """Signed roll (radians) of the mesh's eye line about the optical axis.

    Zero means the projected eye line runs along +u.  Raises when the eye
    line is parallel to the optical axis (profile-degenerate).
    """
    x = eye_line(mesh)
    planar = np.hypot(x[0], x[1])
    if planar < 1e-9 * np.linalg.norm(x):
        raise ProfileDegenerateError("eye line parallel to the optical axis")
    return float(np.arctan2(x[1], x[0]))


def remove_inplane_roll(
    mesh: MetricMesh, gaze_target, pose: HeadPose
) -> tuple[MetricMesh, np.ndarray, HeadPose]:
    """Rotate about the optical axis through the face center to level the eyes.

    The same rotation is applied to the vertices, the gaze target and the
    head pose, so relative gaze geometry is untouched.
    """
    g = np.asarray(gaze_target, dtype=float).reshape(3)
    angle = -inplane_roll(mesh)
    rz = rot_z(angle)
    center = pose.translation
    new_mesh = MetricMesh(
        vertices=(mesh.vertices - center) @ rz.T + center,
        triangles=mesh.triangles,
        colors=mesh.colors,
        landmark_map=mesh.landmark_map,
        source_vertices=mesh.source_vertices,
        face_region=mesh.face_region,
    )
    new_pose = HeadPose(rotation=rz @ pose.rotation, translation=center)
    return new_mesh, rz @ (g - center) + center, new_pose


def gaze_to_pitch_yaw(vectors) -> np.ndarray:
    """Encode unit gaze vectors (..., 3) as (..., 2) (pitch, yaw) radians."""
    v = np.asarray(vectors, dtype=float)
    if v.shape[-1] != 3:
        raise ValueError(f"expected (..., 3) vectors, got {v.shape}")
    norms = np.linalg.norm(v, axis=-1)
    if np.any(np.abs(norms - 1.0) > _UNIT_TOL):
        raise ValueError("gaze vectors must be unit length")
    pitch = np.arcsin(np.clip(-v[..., 1], -1.0, 1.0))
    yaw = np.arctan2(-v[..., 0], -v[..., 2])
    return np.stack([pitch, yaw], axis=-1)


def pitch_yaw_to_gaze(pitch_yaw) -> np.ndarray:
    """Inverse of :func:`gaze_to_pitch_yaw`."""
    py = np.asarray(pitch_yaw, dtype=float)
    if py.shape[-1] != 2:
        raise ValueError(f"expected (..., 2) angles, got {py.shape}")
    pitch, yaw = py[..., 0], py[..., 1]
    return np.stack(
        [-np.cos(pitch) * np.sin(yaw), -np.sin(pitch), -np.cos(pitch) * np.cos(yaw)], axis=-1
    )


def angular_error(a, b) -> np.ndarray:
    """Angle between unit vectors, in degrees; batched over leading axes."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    dot = np.clip(np.sum(a * b, axis=-1), -1.0, 1.0)
    return np.degrees(np.arccos(dot))


@dataclass(frozen=True, eq=False)
class PosedSample:
    """A normalized, render-ready sample with consistent labels.

    Validity: unit gaze vector (1e-9), face center at
    (0, 0, NORMALIZED_FACE_DISTANCE_MM) within 1e-6 mm, and residual
    in-plane roll below 1e-6 rad.
    """

    mesh: MetricMesh
    gaze_vector: np.ndarray
    gaze_pitch_yaw: np.ndarray
    head_pose: HeadPose
    source_id: str = ""
    target_pose_id: int = 0
    tags: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.gaze_vector, dtype=float).reshape(3)
        py = np.asarray(self.gaze_pitch_yaw, dtype=float).reshape(2)
        if abs(np.linalg.norm(v) - 1.0) > 1e-9:
            raise ValueError("gaze vector must be unit length (1e-9)")
        expected = np.array([0.0, 0.0, NORMALIZED_FACE_DISTANCE_MM])
        if np.abs(self.head_pose.translation - expected).max() > 1e-6:
            raise ValueError(
                f"face center must sit at {expected} mm, got {self.head_pose.translation}"
            )
        roll = inplane_roll(self.mesh)
        if abs(roll) > 1e-6:
            raise ValueError(f"residual in-plane roll {roll:g} rad exceeds 1e-6")
        object.__setattr__(self, "gaze_vector", v)
        object.__setattr__(self, "gaze_pitch_yaw", py)
