"""Multitask loss: L1 on gaze angles plus weighted mask cross-entropy.

The mask term is a binary cross-entropy between the predicted two-channel
softmax and the ground-truth face mask stacked with its bitwise inverse.
The total is gaze_l1 + gamma * mask_bce; returning the parts keeps the
additivity of the weighting checkable bit-for-bit.
"""

from dataclasses import dataclass
from typing import NamedTuple

import torch
from torch.nn import functional as F


@dataclass(frozen=True)
class LossConfig:
    gamma: float = 0.5

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")


class LossParts(NamedTuple):
    total: torch.Tensor
    gaze_l1: torch.Tensor
    mask_bce: torch.Tensor


def multitask_loss(
    pred_gaze: torch.Tensor,
    mask_logits: torch.Tensor,
    gt_gaze: torch.Tensor,
    gt_mask: torch.Tensor,
    config: LossConfig = LossConfig(),
) -> LossParts:
    """gt_mask must be strictly binary, shape (n, m, m) matching the logits."""
    if pred_gaze.shape != gt_gaze.shape:
        raise ValueError(f"gaze shape mismatch: {pred_gaze.shape} vs {gt_gaze.shape}")
    if mask_logits.shape[1] != 2:
        raise ValueError("mask logits must have two channels")
    if gt_mask.shape != (mask_logits.shape[0], *mask_logits.shape[2:]):
        raise ValueError(f"mask shape mismatch: {gt_mask.shape} vs {mask_logits.shape}")
    if not torch.all((gt_mask == 0) | (gt_mask == 1)):
        raise ValueError("ground-truth mask must be binary")

    gaze_l1 = (pred_gaze - gt_gaze).abs().mean()
    target = torch.stack([gt_mask, 1.0 - gt_mask], dim=1).to(mask_logits.dtype)
    probs = torch.softmax(mask_logits, dim=1)
    mask_bce = F.binary_cross_entropy(probs, target)
    total = gaze_l1 + config.gamma * mask_bce
    return LossParts(total=total, gaze_l1=gaze_l1, mask_bce=mask_bce)
