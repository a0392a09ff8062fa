"""Training/evaluation loops and checkpoints.

Hyperparameters beyond the loss weight are local defaults with no claim
of matching any particular published schedule.  All randomness is seeded;
data loading is in-process so runs are reproducible on fixed hardware.
"""

import csv
from dataclasses import dataclass
from pathlib import Path

import torch
from torch.utils.data import DataLoader

from .angles import angular_error_degrees
from .data import GazeRecords, pool_mask
from .losses import LossConfig, multitask_loss
from .model import MaskGuidedGazeNet, ModelConfig


@dataclass(frozen=True)
class TrainConfig:
    model: ModelConfig = ModelConfig()
    loss: LossConfig = LossConfig()
    epochs: int = 100
    batch_size: int = 10
    learning_rate: float = 2e-3
    seed: int = 0


def _loader(dataset, config: TrainConfig, shuffle: bool) -> DataLoader:
    generator = torch.Generator()
    generator.manual_seed(config.seed)
    return DataLoader(
        dataset,
        batch_size=config.batch_size,
        shuffle=shuffle,
        generator=generator if shuffle else None,
        num_workers=0,
    )


def train(dataset_dir, config: TrainConfig = TrainConfig(), out_dir=None, log=print):
    """Train on a synthesis output directory.

    Writes checkpoint.pt and metrics.csv (epoch, mean train angular error
    in degrees, mean mask BCE) under out_dir (defaults to dataset_dir).
    Returns (model, metrics rows).
    """
    out = Path(out_dir) if out_dir is not None else Path(dataset_dir)
    out.mkdir(parents=True, exist_ok=True)
    torch.manual_seed(config.seed)
    dataset = GazeRecords(dataset_dir)
    loader = _loader(dataset, config, shuffle=True)
    model = MaskGuidedGazeNet(config.model)
    optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate)

    eval_loader = _loader(dataset, config, shuffle=False)
    metrics = []
    for epoch in range(config.epochs):
        model.train()
        for images, masks, gazes in loader:
            optimizer.zero_grad()
            pred, logits = model(images)
            target_mask = pool_mask(masks, config.model.mask_resolution)
            parts = multitask_loss(pred, logits, gazes, target_mask, config.loss)
            parts.total.backward()
            optimizer.step()
        # Metrics describe the epoch-end model, so they agree with what a
        # later evaluation of the checkpoint reports.
        err, bce = _epoch_metrics(model, eval_loader, config)
        metrics.append((epoch, err, bce))
        if (epoch + 1) % max(1, config.epochs // 10) == 0:
            log(f"epoch {epoch + 1}/{config.epochs}: angular {err:.3f} deg, mask bce {bce:.4f}")

    with open(out / "metrics.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["epoch", "train_angular_error_deg", "train_mask_bce"])
        writer.writerows(metrics)
    save_checkpoint(model, config, out / "checkpoint.pt")
    return model, metrics


def _epoch_metrics(model, loader, config: TrainConfig) -> tuple:
    model.eval()
    err_sum, bce_sum, count = 0.0, 0.0, 0
    with torch.no_grad():
        for images, masks, gazes in loader:
            pred, logits = model(images)
            target_mask = pool_mask(masks, config.model.mask_resolution)
            parts = multitask_loss(pred, logits, gazes, target_mask, config.loss)
            err_sum += angular_error_degrees(pred, gazes).sum().item()
            bce_sum += parts.mask_bce.item() * len(images)
            count += len(images)
    return err_sum / count, bce_sum / count


def save_checkpoint(model: MaskGuidedGazeNet, config: TrainConfig, path) -> None:
    torch.save(
        {
            "state_dict": model.state_dict(),
            "model_config": model.config,
            "train_config": config,
        },
        path,
    )


def load_checkpoint(path) -> MaskGuidedGazeNet:
    payload = torch.load(path, weights_only=False)
    model = MaskGuidedGazeNet(payload["model_config"])
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model


def evaluate(checkpoint_path, dataset_dir, batch_size: int = 32) -> float:
    """Mean angular error (degrees) of a checkpoint over a dataset."""
    model = load_checkpoint(checkpoint_path)
    dataset = GazeRecords(dataset_dir)
    loader = DataLoader(dataset, batch_size=batch_size, shuffle=False, num_workers=0)
    total, count = 0.0, 0
    with torch.no_grad():
        for images, _, gazes in loader:
            pred, _ = model(images)
            total += angular_error_degrees(pred, gazes).sum().item()
            count += len(images)
    return total / count
