"""Gaze angle encodings shared by training and evaluation.

Pitch/yaw (radians) encode a unit 3-vector as pitch = arcsin(-y),
yaw = atan2(-x, -z); (0, 0) looks straight into the camera.
"""

import torch


def pitch_yaw_to_vector(pitch_yaw: torch.Tensor) -> torch.Tensor:
    pitch, yaw = pitch_yaw[..., 0], pitch_yaw[..., 1]
    return torch.stack(
        [-torch.cos(pitch) * torch.sin(yaw), -torch.sin(pitch), -torch.cos(pitch) * torch.cos(yaw)],
        dim=-1,
    )


def angular_error_degrees(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """Angle between pitch/yaw pairs (..., 2), in degrees."""
    va = pitch_yaw_to_vector(a)
    vb = pitch_yaw_to_vector(b)
    dot = (va * vb).sum(dim=-1).clamp(-1.0, 1.0)
    return torch.rad2deg(torch.acos(dot))
