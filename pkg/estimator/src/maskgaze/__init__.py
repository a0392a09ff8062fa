"""Desk-scale mask-guided gaze estimator over synthesized datasets."""

__version__ = "0.1.0"

from .angles import angular_error_degrees, pitch_yaw_to_vector
from .losses import LossConfig, LossParts, multitask_loss
from .model import MaskGuidedGazeNet, ModelConfig
from .train import TrainConfig, evaluate, load_checkpoint, save_checkpoint, train

__all__ = [
    "LossConfig",
    "LossParts",
    "MaskGuidedGazeNet",
    "ModelConfig",
    "TrainConfig",
    "angular_error_degrees",
    "evaluate",
    "load_checkpoint",
    "multitask_loss",
    "pitch_yaw_to_vector",
    "save_checkpoint",
    "train",
]
