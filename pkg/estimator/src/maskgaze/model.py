"""Mask-guided gaze network.

A small convolutional backbone maps a 224 x 224 RGB image to a 7 x 7
feature map.  A fully-convolutional branch predicts a two-channel
segmentation of the reliable face region; the softmax probability of its
face channel, resized to 7 x 7, multiplies the feature map element-wise
(soft attention) before the pooled linear head regresses gaze
(pitch, yaw) in radians.

The backbone is deliberately configurable and desk-sized; swapping in a
large pretrained extractor is a config change, not a code change, as long
as it still emits a 7 x 7 map.
"""

from dataclasses import dataclass

import torch
from torch import nn
from torch.nn import functional as F

FEATURE_SIZE = 7  # spatial size of the attention contract


@dataclass(frozen=True)
class ModelConfig:
    # Five stride-2 convolutions: 224 -> 112 -> 56 -> 28 -> 14 -> 7.
    backbone_channels: tuple = (16, 32, 48, 64, 64)
    mask_head_channels: int = 32
    mask_resolution: int = 56
    seed: int = 0

    def __post_init__(self):
        if len(self.backbone_channels) != 5:
            raise ValueError("backbone needs exactly five stride-2 stages (224 -> 7)")
        if self.mask_resolution < FEATURE_SIZE:
            raise ValueError("mask resolution must be at least the feature size")


class MaskGuidedGazeNet(nn.Module):
    def __init__(self, config: ModelConfig = ModelConfig()):
        super().__init__()
        self.config = config
        torch.manual_seed(config.seed)
        layers = []
        in_ch = 3
        for out_ch in config.backbone_channels:
            layers += [nn.Conv2d(in_ch, out_ch, 3, stride=2, padding=1), nn.ReLU(inplace=True)]
            in_ch = out_ch
        self.backbone = nn.Sequential(*layers)
        self.mask_head = nn.Sequential(
            nn.Conv2d(in_ch, config.mask_head_channels, 3, padding=1),
            nn.ReLU(inplace=True),
            nn.Conv2d(config.mask_head_channels, 2, 1),
        )
        self.gaze_head = nn.Linear(in_ch, 2)

    def features(self, images: torch.Tensor) -> torch.Tensor:
        if images.dim() != 4 or images.shape[1] != 3 or images.shape[2:] != (224, 224):
            raise ValueError(f"expected (n, 3, 224, 224) input, got {tuple(images.shape)}")
        return self.backbone(images)

    def mask_logits(self, feats: torch.Tensor) -> torch.Tensor:
        """Two-channel segmentation logits at the configured mask resolution."""
        logits = self.mask_head(feats)
        return F.interpolate(
            logits,
            size=(self.config.mask_resolution, self.config.mask_resolution),
            mode="bilinear",
            align_corners=False,
        )

    def attention_from_logits(self, mask_logits: torch.Tensor) -> torch.Tensor:
        """Face-channel softmax probability resized to the feature grid."""
        probs = torch.softmax(mask_logits, dim=1)[:, 0:1]
        return F.interpolate(
            probs, size=(FEATURE_SIZE, FEATURE_SIZE), mode="bilinear", align_corners=False
        )

    def gaze_from_features(self, feats: torch.Tensor) -> torch.Tensor:
        pooled = feats.mean(dim=(2, 3))
        return self.gaze_head(pooled)

    def forward(self, images: torch.Tensor, attention_override: "torch.Tensor | None" = None):
        """Returns (gaze (n, 2) pitch/yaw radians, mask logits (n, 2, m, m)).

        ``attention_override`` replaces the predicted attention map
        (broadcastable to (n, 1, 7, 7)); useful for ablation and tests.
        """
        feats = self.features(images)
        logits = self.mask_logits(feats)
        if attention_override is None:
            attention = self.attention_from_logits(logits)
        else:
            attention = attention_override
        gaze = self.gaze_from_features(feats * attention)
        return gaze, logits
