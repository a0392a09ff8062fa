"""Dataset over the synthesis pipeline's output directory.

Expects labels.jsonl plus the images/ and masks/ PNGs it references.
Images are normalized to [-1, 1] floats; masks load as binary {0, 1}
at their stored resolution and are pooled to the model's mask grid with
nearest sampling (which keeps them binary).
"""

import json
from pathlib import Path

import numpy as np
import torch
from PIL import Image
from torch.nn import functional as F
from torch.utils.data import Dataset


class GazeRecords(Dataset):
    def __init__(self, dataset_dir):
        self.root = Path(dataset_dir)
        labels = self.root / "labels.jsonl"
        if not labels.exists():
            raise FileNotFoundError(f"no labels.jsonl under {self.root}")
        self.records = [json.loads(line) for line in open(labels) if line.strip()]
        if not self.records:
            raise ValueError(f"{labels} holds no records")
        for rec in self.records:
            if not (self.root / rec["mask"]).exists():
                raise FileNotFoundError(
                    f"mask file missing for {rec['image']}: {self.root / rec['mask']}"
                )

    def __len__(self):
        return len(self.records)

    def __getitem__(self, index):
        rec = self.records[index]
        with Image.open(self.root / rec["image"]) as f:
            rgb = np.asarray(f.convert("RGB"), dtype=np.float32)
        image = torch.from_numpy(rgb).permute(2, 0, 1) / 127.5 - 1.0
        with Image.open(self.root / rec["mask"]) as f:
            mask = torch.from_numpy(np.asarray(f, dtype=np.float32) / 255.0)
        gaze = torch.tensor([rec["gaze_pitch"], rec["gaze_yaw"]], dtype=torch.float32)
        return image, mask, gaze


def pool_mask(mask: torch.Tensor, resolution: int) -> torch.Tensor:
    """Resample binary masks (n, h, w) to (n, resolution, resolution)."""
    out = F.interpolate(mask.unsqueeze(1), size=(resolution, resolution), mode="nearest")
    return out.squeeze(1)
