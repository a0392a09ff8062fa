"""Pinhole camera intrinsics and crop/resize pixel transforms.

Coordinate conventions used throughout the package:

- Image coordinates: ``u`` increases rightward, ``v`` increases downward,
  origin at the top-left corner of the image.
- Camera coordinates: right-handed, ``x`` right, ``y`` down, ``z`` forward
  into the scene.  Points visible to the camera have ``z > 0``.
- Pixels may be given homogeneously as ``(u, v, w)``; affine points have
  ``w != 0`` and dehomogenize to ``(u/w, v/w)``.

All functions accept a single point or a batch (leading axes preserved)
and compute in float64.
"""

from dataclasses import dataclass

import numpy as np

from .errors import BehindCameraError


@dataclass(frozen=True)
class CameraIntrinsics:
    """Zero-skew pinhole intrinsics: focal lengths and principal point in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        vals = (self.fx, self.fy, self.cx, self.cy)
        if not all(np.isfinite(v) for v in vals):
            raise ValueError(f"intrinsics must be finite, got {vals}")
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")

    @property
    def matrix(self) -> np.ndarray:
        """3x3 projection matrix."""
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )

    @property
    def inverse_matrix(self) -> np.ndarray:
        """Closed-form inverse of the projection matrix."""
        return np.array(
            [
                [1.0 / self.fx, 0.0, -self.cx / self.fx],
                [0.0, 1.0 / self.fy, -self.cy / self.fy],
                [0.0, 0.0, 1.0],
            ]
        )

    @classmethod
    def from_matrix(cls, k: np.ndarray) -> "CameraIntrinsics":
        k = np.asarray(k, dtype=float)
        if k.shape != (3, 3):
            raise ValueError(f"expected a 3x3 matrix, got shape {k.shape}")
        return cls(fx=k[0, 0], fy=k[1, 1], cx=k[0, 2], cy=k[1, 2])


def dehomogenize(pixels) -> np.ndarray:
    """Reduce ``(..., 3)`` homogeneous pixels to ``(..., 2)`` affine ones.

    ``(..., 2)`` input is passed through unchanged.  Raises on w == 0.
    """
    p = np.asarray(pixels, dtype=float)
    if p.shape[-1] == 2:
        return p
    if p.shape[-1] != 3:
        raise ValueError(f"expected (..., 2) or (..., 3) pixels, got shape {p.shape}")
    w = p[..., 2]
    if np.any(w == 0.0):
        raise ValueError("pixel at infinity: homogeneous coordinate w is zero")
    return p[..., :2] / w[..., np.newaxis]


def project(cam: CameraIntrinsics, points) -> np.ndarray:
    """Perspective-project camera-frame points ``(..., 3)`` mm to pixels ``(..., 2)``.

    (u, v) = (fx*x/z + cx, fy*y/z + cy).  Raises BehindCameraError if any
    point has z <= 0.
    """
    pts = np.asarray(points, dtype=float)
    if pts.shape[-1] != 3:
        raise ValueError(f"expected (..., 3) points, got shape {pts.shape}")
    z = pts[..., 2]
    if np.any(z <= 0.0):
        raise BehindCameraError("cannot project points with z <= 0")
    u = cam.fx * pts[..., 0] / z + cam.cx
    v = cam.fy * pts[..., 1] / z + cam.cy
    return np.stack([u, v], axis=-1)


def back_project_ray(cam: CameraIntrinsics, pixel) -> np.ndarray:
    """Unit direction of the viewing ray through a pixel, ``(..., 3)``.

    Computes C^-1 p / ||C^-1 p|| for the affine pixel p = (u, v, 1); the
    result always has a positive z component.
    """
    uv = dehomogenize(pixel)
    x = (uv[..., 0] - cam.cx) / cam.fx
    y = (uv[..., 1] - cam.cy) / cam.fy
    d = np.stack([x, y, np.ones_like(x)], axis=-1)
    return d / np.linalg.norm(d, axis=-1, keepdims=True)


@dataclass(frozen=True)
class CropTransform:
    """Crop-and-resize map from original-image pixels to face-patch pixels.

    The crop box is centered at (box_cx, box_cy) with size box_w x box_h in
    original-image pixels; the box is resized by (scale_x, scale_y) so the
    patch is scale_x*box_w x scale_y*box_h pixels.  The box's top-left
    corner maps to patch (0, 0).
    """

    box_cx: float
    box_cy: float
    box_w: float
    box_h: float
    scale_x: float
    scale_y: float

    def __post_init__(self):
        if self.box_w <= 0 or self.box_h <= 0:
            raise ValueError(f"box size must be positive, got {self.box_w} x {self.box_h}")
        if self.scale_x <= 0 or self.scale_y <= 0:
            raise ValueError(
                f"scale factors must be positive, got ({self.scale_x}, {self.scale_y})"
            )

    @property
    def matrix(self) -> np.ndarray:
        """3x3 homogeneous matrix taking original pixels to patch pixels."""
        tx = -self.scale_x * (self.box_cx - self.box_w / 2.0)
        ty = -self.scale_y * (self.box_cy - self.box_h / 2.0)
        return np.array([[self.scale_x, 0.0, tx], [0.0, self.scale_y, ty], [0.0, 0.0, 1.0]])

    @property
    def patch_size(self) -> tuple[float, float]:
        return (self.scale_x * self.box_w, self.scale_y * self.box_h)

    def to_patch(self, original_pixel) -> np.ndarray:
        """Map original-image pixels ``(..., 2|3)`` into patch pixels ``(..., 2)``."""
        uv = dehomogenize(original_pixel)
        u = self.scale_x * (uv[..., 0] - (self.box_cx - self.box_w / 2.0))
        v = self.scale_y * (uv[..., 1] - (self.box_cy - self.box_h / 2.0))
        return np.stack([u, v], axis=-1)

    def to_original(self, patch_pixel) -> np.ndarray:
        """Inverse of :meth:`to_patch`; exact up to float rounding."""
        uv = dehomogenize(patch_pixel)
        u = uv[..., 0] / self.scale_x + (self.box_cx - self.box_w / 2.0)
        v = uv[..., 1] / self.scale_y + (self.box_cy - self.box_h / 2.0)
        return np.stack([u, v], axis=-1)

    @classmethod
    def identity(cls, width: float, height: float) -> "CropTransform":
        """Unit-scale crop covering the whole width x height image."""
        return cls(
            box_cx=width / 2.0,
            box_cy=height / 2.0,
            box_w=width,
            box_h=height,
            scale_x=1.0,
            scale_y=1.0,
        )


def patch_to_original(crop: CropTransform, patch_pixel) -> np.ndarray:
    """Map patch pixels back to original-image pixels (inverse crop)."""
    return crop.to_original(patch_pixel)
