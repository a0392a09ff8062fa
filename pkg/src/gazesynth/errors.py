"""Exception types shared across the package.

The pipeline distinguishes per-sample failures (skippable, counted against
the failure budget) from hard errors (malformed inputs, config problems).
All per-sample failures derive from :class:`SampleError`.
"""


class GazeSynthError(Exception):
    """Base class for all package errors."""


class SampleError(GazeSynthError):
    """A failure tied to one source sample; the batch pipeline may skip it."""


class BehindCameraError(SampleError):
    """A 3D point with z <= 0 was passed to a perspective projection."""


class FaceBehindCameraError(SampleError):
    """Lifting the mesh produced a vertex at or behind the camera origin."""


class DegenerateLandmarksError(SampleError):
    """Landmark geometry collapsed (e.g. coincident eye centers)."""


class MalformedLandmarksError(GazeSynthError):
    """A landmark set or landmark map is missing required entries."""


class DegenerateConfigurationError(SampleError):
    """Point configuration unusable for pose estimation (e.g. collinear)."""


class ProfileDegenerateError(SampleError):
    """Roll removal is undefined: face x-axis parallel to the optical axis."""


class MeshFormatError(GazeSynthError):
    """A mesh interchange file could not be parsed or violates invariants."""


class ManifestError(GazeSynthError):
    """A source manifest could not be parsed at all."""


class RenderError(GazeSynthError):
    """Invalid rasterizer input (NaN vertices, bad image sizes, ...)."""


class BackgroundError(GazeSynthError):
    """A background image could not be read or a scene directory is empty."""
