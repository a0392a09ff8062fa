"""Novel-head-pose gaze training data from single-view face reconstructions.

The package lifts patch-space face meshes into the metric camera frame
(projective lifting along back-projected rays), re-poses them with exactly
transported gaze labels, and renders augmented training images with
face-region masks through a deterministic software rasterizer.  A
synthetic-face generator with analytically known ground truth backs the
test and acceptance suites.

Typical flow: ``validate`` a JSON-lines manifest, then ``synthesize`` an
output dataset; see the CLI (``gazesynth --help``) or the module docs.
"""

__version__ = "0.1.0"

from .facemodel import ReferenceFaceModel, build_generic_model, load_default_model
from .geometry import CameraIntrinsics, CropTransform, back_project_ray, project
from .matching import LiftParams, MetricMesh, PatchMesh, lift_to_camera, solve_lift_params
from .pipeline import AugmentationSchedule, SynthesisConfig, synthesize, validate_manifest
from .pnp import HeadPose, PnPConfig, PnPResult, reprojection_rms, solve_pnp
from .rasterizer import BackgroundSpec, RenderOutput, VirtualCamera, rasterize
from .sampler import PoseSamplerConfig, sample_poses
from .viewsynth import (
    GazeSample,
    PosedSample,
    angular_error,
    gaze_to_pitch_yaw,
    pitch_yaw_to_gaze,
    remove_inplane_roll,
    transform_to_pose,
)

__all__ = [
    "AugmentationSchedule",
    "BackgroundSpec",
    "CameraIntrinsics",
    "CropTransform",
    "GazeSample",
    "HeadPose",
    "LiftParams",
    "MetricMesh",
    "PatchMesh",
    "PnPConfig",
    "PnPResult",
    "PosedSample",
    "PoseSamplerConfig",
    "ReferenceFaceModel",
    "RenderOutput",
    "SynthesisConfig",
    "VirtualCamera",
    "angular_error",
    "back_project_ray",
    "build_generic_model",
    "gaze_to_pitch_yaw",
    "lift_to_camera",
    "load_default_model",
    "pitch_yaw_to_gaze",
    "project",
    "rasterize",
    "remove_inplane_roll",
    "reprojection_rms",
    "sample_poses",
    "solve_lift_params",
    "solve_pnp",
    "synthesize",
    "transform_to_pose",
    "validate_manifest",
]
