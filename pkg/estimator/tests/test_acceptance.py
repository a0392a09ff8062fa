"""Trainer acceptance: gradient correctness, attention/loss invariants,
and the 20-sample overfit.  Run with -s for one PASS line per criterion."""

import time

import torch

from maskgaze.losses import LossConfig, multitask_loss
from maskgaze.model import MaskGuidedGazeNet, ModelConfig
from maskgaze.train import TrainConfig, train


def _passed(name, t0, budget_s):
    elapsed = time.monotonic() - t0
    assert elapsed < budget_s, f"{name} took {elapsed:.0f}s, budget {budget_s}s"
    print(f"PASS {name} ({elapsed:.1f}s)")


class TestGradientCheck:
    def test_autograd_matches_central_differences(self):
        """Relative error < 1e-3 against float64 finite differences."""
        t0 = time.monotonic()
        torch.manual_seed(0)
        model = MaskGuidedGazeNet(
            ModelConfig(backbone_channels=(2, 2, 2, 2, 2), mask_head_channels=3,
                        mask_resolution=8, seed=1)
        ).double()
        images = torch.randn(1, 3, 224, 224, dtype=torch.float64) * 0.3
        gt_gaze = torch.tensor([[0.12, -0.2]], dtype=torch.float64)
        gen = torch.Generator().manual_seed(2)
        gt_mask = (torch.rand((1, 8, 8), generator=gen) > 0.5).double()
        config = LossConfig(gamma=0.5)

        def loss_value():
            pred, logits = model(images)
            return multitask_loss(pred, logits, gt_gaze, gt_mask, config).total

        model.zero_grad()
        loss_value().backward()

        rng = torch.Generator().manual_seed(3)
        checked = 0
        for param in model.parameters():
            flat = param.detach().reshape(-1)
            grad = param.grad.reshape(-1)
            for _ in range(2):
                idx = int(torch.randint(0, flat.numel(), (1,), generator=rng))
                h = 1e-6
                with torch.no_grad():
                    original = flat[idx].item()
                    flat[idx] = original + h
                    up = loss_value().item()
                    flat[idx] = original - h
                    down = loss_value().item()
                    flat[idx] = original
                numeric = (up - down) / (2.0 * h)
                analytic = grad[idx].item()
                denom = max(abs(numeric), abs(analytic), 1e-8)
                assert abs(numeric - analytic) / denom < 1e-3, (
                    f"grad mismatch: analytic {analytic}, numeric {numeric}"
                )
                checked += 1
        assert checked >= 16
        _passed(f"gradient check ({checked} weights, rel err < 1e-3)", t0, 120.0)


class TestInvariants:
    def test_attention_identity_exact(self):
        """All-ones attention equals the attention-free composition (1e-6)."""
        t0 = time.monotonic()
        model = MaskGuidedGazeNet(ModelConfig(seed=5)).eval()
        gen = torch.Generator().manual_seed(6)
        images = torch.rand((3, 3, 224, 224), generator=gen) * 2.0 - 1.0
        with torch.no_grad():
            overridden, _ = model(images, attention_override=torch.ones(3, 1, 7, 7))
            baseline = model.gaze_from_features(model.features(images))
        assert torch.allclose(overridden, baseline, atol=1e-6)
        _passed("attention identity (all-ones == no attention)", t0, 30.0)

    def test_loss_additivity_exact(self):
        """total(gamma) == gaze_l1 + gamma * mask_bce, bit for bit."""
        t0 = time.monotonic()
        gen = torch.Generator().manual_seed(7)
        pred_gaze = torch.randn((4, 2), generator=gen)
        gt_gaze = torch.randn((4, 2), generator=gen)
        logits = torch.randn((4, 2, 8, 8), generator=gen)
        gt_mask = (torch.rand((4, 8, 8), generator=gen) > 0.5).float()
        for gamma in (0.0, 0.25, 0.5, 1.0, 2.0):
            parts = multitask_loss(pred_gaze, logits, gt_gaze, gt_mask, LossConfig(gamma=gamma))
            assert torch.equal(parts.total, parts.gaze_l1 + gamma * parts.mask_bce)
        zero = multitask_loss(pred_gaze, logits, gt_gaze, gt_mask, LossConfig(gamma=0.0))
        assert torch.equal(zero.total, zero.gaze_l1)
        _passed("loss additivity (bitwise decomposition)", t0, 5.0)


class TestOverfit:
    def test_twenty_sample_overfit_under_two_degrees(self, dataset_dir, tmp_path):
        """<= 500 epochs on 20 synthesized samples: train error < 2 deg, < 10 min;
        evaluating the checkpoint on the training set agrees with the last
        logged training error within 0.1 deg."""
        from maskgaze.train import evaluate

        t0 = time.monotonic()
        config = TrainConfig(epochs=300, batch_size=10, learning_rate=2e-3, seed=0)
        _, metrics = train(dataset_dir, config, out_dir=tmp_path, log=lambda s: None)
        final = metrics[-1][1]
        assert config.epochs <= 500
        assert final < 2.0, f"final training angular error {final:.2f} deg"
        eval_err = evaluate(tmp_path / "checkpoint.pt", dataset_dir)
        assert abs(eval_err - final) < 0.1, f"eval {eval_err:.3f} vs logged {final:.3f}"
        _passed(f"20-sample overfit ({final:.2f} deg after {config.epochs} epochs)", t0, 600.0)
