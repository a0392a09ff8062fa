"""Reference 3D landmark model and 68-point landmark conventions.

Landmark indexing follows the common 68-point scheme: jawline 0-16 (chin
at 8), right brow 17-21, left brow 22-26, nose 27-35, right eye 36-41
(corners 36/39), left eye 42-47 (corners 42/45), mouth 48-67 (corners
48/54).  "Right"/"left" are the subject's sides, so the right eye sits at
negative x in the face-local frame (x along the image's +u direction for
an upright frontal face, y down, z away from the camera).

The face center is the centroid of the four eye corners and two mouth
corners; it is the origin of the face-local frame and of gaze vectors.
"""

import importlib.resources
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegenerateLandmarksError, MalformedLandmarksError

RIGHT_EYE_OUTER = 36
RIGHT_EYE_INNER = 39
LEFT_EYE_INNER = 42
LEFT_EYE_OUTER = 45
MOUTH_RIGHT = 48
MOUTH_LEFT = 54
CHIN = 8

#: Eye and mouth corners, in the fixed order used everywhere downstream.
SIX_LANDMARKS = (
    RIGHT_EYE_OUTER,
    RIGHT_EYE_INNER,
    LEFT_EYE_INNER,
    LEFT_EYE_OUTER,
    MOUTH_RIGHT,
    MOUTH_LEFT,
)

#: Jaw 0..16 then brows 26..17: a closed outline of the face region.
FACE_OUTLINE = tuple(range(0, 17)) + tuple(range(26, 16, -1))

N_LANDMARKS = 68

_COINCIDENT_EYE_EPS = 1e-6


def select_six(landmarks):
    """Pick the eye/mouth-corner entries in the fixed SIX_LANDMARKS order.

    Accepts either an array of 68 points (rows returned) or a mapping from
    landmark index to vertex id (ids returned).  Raises
    MalformedLandmarksError when a required entry is missing.
    """
    if isinstance(landmarks, dict):
        missing = [i for i in SIX_LANDMARKS if i not in landmarks]
        if missing:
            raise MalformedLandmarksError(f"landmark map missing indices {missing}")
        return [landmarks[i] for i in SIX_LANDMARKS]
    pts = np.asarray(landmarks, dtype=float)
    if pts.ndim != 2 or pts.shape[0] != N_LANDMARKS:
        raise MalformedLandmarksError(
            f"expected {N_LANDMARKS} landmarks, got shape {pts.shape}"
        )
    return pts[list(SIX_LANDMARKS)]


def eye_center_distance(points) -> float:
    """Distance between the two eye centers (midpoints of the corner pairs).

    ``points`` may be the full 68-point set, the six corner points in
    SIX_LANDMARKS order, or just the four eye corners
    (right outer, right inner, left inner, left outer).  Works in 2D or 3D;
    the result is in the input's units.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] not in (2, 3):
        raise MalformedLandmarksError(f"expected (n, 2|3) points, got shape {pts.shape}")
    if pts.shape[0] == N_LANDMARKS:
        corners = pts[[RIGHT_EYE_OUTER, RIGHT_EYE_INNER, LEFT_EYE_INNER, LEFT_EYE_OUTER]]
    elif pts.shape[0] in (4, 6):
        corners = pts[:4]
    else:
        raise MalformedLandmarksError(
            f"expected 4, 6 or {N_LANDMARKS} points, got {pts.shape[0]}"
        )
    right_center = 0.5 * (corners[0] + corners[1])
    left_center = 0.5 * (corners[2] + corners[3])
    dist = float(np.linalg.norm(left_center - right_center))
    if dist < _COINCIDENT_EYE_EPS:
        raise DegenerateLandmarksError(f"eye centers coincide (distance {dist:g})")
    return dist


def face_center(six_points) -> np.ndarray:
    """Centroid of the six eye/mouth-corner points."""
    pts = np.asarray(six_points, dtype=float)
    if pts.shape != (6, 3) and pts.shape != (6, 2):
        raise MalformedLandmarksError(f"expected (6, 2|3) points, got shape {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise MalformedLandmarksError("non-finite landmark coordinates")
    return pts.mean(axis=0)


@dataclass(frozen=True)
class ReferenceFaceModel:
    """68 reference landmark positions in mm, face-local frame.

    The frame origin is the face center: construction re-centers the
    points so the six-corner centroid is exactly zero.
    """

    points: np.ndarray  # (68, 3) float64
    eye_distance: float  # distance between the eye centers, mm

    @classmethod
    def from_points(cls, points) -> "ReferenceFaceModel":
        pts = np.asarray(points, dtype=float)
        if pts.shape != (N_LANDMARKS, 3):
            raise MalformedLandmarksError(
                f"expected ({N_LANDMARKS}, 3) points, got shape {pts.shape}"
            )
        if not np.all(np.isfinite(pts)):
            raise MalformedLandmarksError("non-finite reference model coordinates")
        centered = pts - face_center(select_six(pts))
        centered.flags.writeable = False
        return cls(points=centered, eye_distance=eye_center_distance(centered))

    @property
    def six_points(self) -> np.ndarray:
        """The eye/mouth-corner points, (6, 3), in SIX_LANDMARKS order."""
        return select_six(self.points)

    def save(self, path) -> None:
        """Write the plain-text model file: a header line ``68 <eye_distance>``
        followed by 68 lines ``index x y z`` (mm)."""
        lines = [f"{N_LANDMARKS} {float(self.eye_distance)!r}"]
        for i, (x, y, z) in enumerate(self.points):
            lines.append(f"{i} {float(x)!r} {float(y)!r} {float(z)!r}")
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path) -> "ReferenceFaceModel":
        text = Path(path).read_text()
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise MalformedLandmarksError(f"empty reference model file: {path}")
        header = lines[0].split()
        if len(header) != 2:
            raise MalformedLandmarksError(f"bad header in {path}: {lines[0]!r}")
        count, stated_distance = int(header[0]), float(header[1])
        if count != N_LANDMARKS or len(lines) != 1 + count:
            raise MalformedLandmarksError(
                f"expected {N_LANDMARKS} model points in {path}, header says {count}, "
                f"file has {len(lines) - 1}"
            )
        pts = np.full((count, 3), np.nan)
        for ln in lines[1:]:
            fields = ln.split()
            if len(fields) != 4:
                raise MalformedLandmarksError(f"bad model line in {path}: {ln!r}")
            idx = int(fields[0])
            if not 0 <= idx < count:
                raise MalformedLandmarksError(f"landmark index {idx} out of range in {path}")
            pts[idx] = [float(f) for f in fields[1:]]
        model = cls.from_points(pts)
        if abs(model.eye_distance - stated_distance) > 1e-6:
            raise MalformedLandmarksError(
                f"header eye distance {stated_distance} does not match points "
                f"({model.eye_distance}) in {path}"
            )
        return model


def build_generic_model(eye_distance_mm: float = 60.0) -> ReferenceFaceModel:
    """Procedural generic 68-point face with realistic proportions.

    The template is hand-placed at a 60 mm eye-center distance and scaled
    uniformly to the requested value.  Units are mm; the face looks along
    -z (nose tip at the most negative z).
    """
    pts = np.zeros((N_LANDMARKS, 3))

    # Jawline: half-ellipse from the right ear (0) through the chin (8) to
    # the left ear (16); ears sit back (larger z), the chin slightly forward.
    t = np.arange(17) / 16.0
    pts[0:17, 0] = -70.0 * np.cos(np.pi * t)
    pts[0:17, 1] = -10.0 + 72.0 * np.sin(np.pi * t)
    pts[0:17, 2] = 30.0 - 35.0 * np.sin(np.pi * t)

    right_brow = [
        (-55.0, -28.0, -2.0),
        (-44.0, -33.0, -6.0),
        (-33.0, -35.0, -8.0),
        (-22.0, -34.0, -9.0),
        (-12.0, -30.0, -10.0),
    ]
    pts[17:22] = right_brow
    pts[22:27] = [(-x, y, z) for x, y, z in reversed(right_brow)]

    pts[27:31] = [(0.0, -20.0, -12.0), (0.0, -12.0, -17.0), (0.0, -4.0, -22.0), (0.0, 4.0, -27.0)]
    pts[31:36] = [
        (-16.0, 14.0, -14.0),
        (-8.0, 16.0, -18.0),
        (0.0, 17.0, -20.0),
        (8.0, 16.0, -18.0),
        (16.0, 14.0, -14.0),
    ]

    right_eye = [
        (-45.0, -18.0, -5.0),  # 36 outer corner
        (-37.0, -21.0, -8.0),
        (-27.0, -21.0, -9.0),
        (-15.0, -16.0, -8.0),  # 39 inner corner
        (-26.0, -13.0, -9.0),
        (-36.0, -13.0, -8.0),
    ]
    pts[36:42] = right_eye
    # Left eye mirrors the right; index order restarts at the inner corner.
    mirror = [(-x, y, z) for x, y, z in right_eye]
    pts[42:48] = [mirror[3], mirror[2], mirror[1], mirror[0], mirror[5], mirror[4]]

    pts[48:60] = [
        (-25.0, 32.0, -8.0),  # 48 right corner
        (-15.0, 28.0, -13.0),
        (-6.0, 26.0, -15.0),
        (0.0, 27.0, -16.0),
        (6.0, 26.0, -15.0),
        (15.0, 28.0, -13.0),
        (25.0, 32.0, -8.0),  # 54 left corner
        (15.0, 37.0, -13.0),
        (6.0, 40.0, -14.0),
        (0.0, 41.0, -14.0),
        (-6.0, 40.0, -14.0),
        (-15.0, 37.0, -13.0),
    ]
    pts[60:68] = [
        (-20.0, 32.0, -9.0),
        (-7.0, 30.0, -12.0),
        (0.0, 31.0, -13.0),
        (7.0, 30.0, -12.0),
        (20.0, 32.0, -9.0),
        (7.0, 34.0, -12.0),
        (0.0, 35.0, -13.0),
        (-7.0, 34.0, -12.0),
    ]

    pts *= eye_distance_mm / 60.0
    return ReferenceFaceModel.from_points(pts)


def default_model_path() -> Path:
    """Path of the reference model file shipped with the package."""
    return Path(importlib.resources.files("gazesynth") / "data" / "reference_face_68.txt")


def load_default_model() -> ReferenceFaceModel:
    return ReferenceFaceModel.load(default_model_path())
