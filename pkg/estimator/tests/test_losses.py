"""Loss semantics against an independent scalar-loop oracle."""

import math

import pytest
import torch

from maskgaze.losses import LossConfig, multitask_loss


def tiny_case():
    """One sample, 1x2 mask grid: small enough to hand-evaluate."""
    pred_gaze = torch.tensor([[0.3, -0.1]])
    gt_gaze = torch.tensor([[0.1, 0.1]])
    logits = torch.tensor([[[[0.7, -0.4]], [[-0.2, 0.9]]]])  # (1, 2, 1, 2)
    gt_mask = torch.tensor([[[1.0, 0.0]]])
    return pred_gaze, logits, gt_gaze, gt_mask


def oracle(pred_gaze, logits, gt_gaze, gt_mask, gamma):
    """Plain-python recomputation, element by element."""
    l1_terms = []
    for p, g in zip(pred_gaze.flatten().tolist(), gt_gaze.flatten().tolist()):
        l1_terms.append(abs(p - g))
    l1 = sum(l1_terms) / len(l1_terms)

    bce_terms = []
    _, _, h, w = logits.shape
    for row in range(h):
        for col in range(w):
            z0 = logits[0, 0, row, col].item()
            z1 = logits[0, 1, row, col].item()
            p0 = math.exp(z0) / (math.exp(z0) + math.exp(z1))
            p1 = 1.0 - p0
            t0 = gt_mask[0, row, col].item()
            t1 = 1.0 - t0
            for p, t in ((p0, t0), (p1, t1)):
                bce_terms.append(-(t * math.log(p) + (1.0 - t) * math.log(1.0 - p)))
    bce = sum(bce_terms) / len(bce_terms)
    return l1, bce, l1 + gamma * bce


class TestAgainstOracle:
    @pytest.mark.parametrize("gamma", [0.0, 0.5, 2.0])
    def test_matches_scalar_loops(self, gamma):
        pred_gaze, logits, gt_gaze, gt_mask = tiny_case()
        parts = multitask_loss(pred_gaze, logits, gt_gaze, gt_mask, LossConfig(gamma=gamma))
        l1, bce, total = oracle(pred_gaze, logits, gt_gaze, gt_mask, gamma)
        assert parts.gaze_l1.item() == pytest.approx(l1, abs=1e-6)
        assert parts.mask_bce.item() == pytest.approx(bce, abs=1e-6)
        assert parts.total.item() == pytest.approx(total, abs=1e-6)

    def test_hand_l1_value(self):
        # |0.3-0.1| = 0.2 and |-0.1-0.1| = 0.2 -> mean 0.2.
        pred_gaze, logits, gt_gaze, gt_mask = tiny_case()
        parts = multitask_loss(pred_gaze, logits, gt_gaze, gt_mask)
        assert parts.gaze_l1.item() == pytest.approx(0.2, abs=1e-7)


class TestStructure:
    def test_gamma_zero_is_pure_l1(self):
        pred_gaze, logits, gt_gaze, gt_mask = tiny_case()
        parts = multitask_loss(pred_gaze, logits, gt_gaze, gt_mask, LossConfig(gamma=0.0))
        assert torch.equal(parts.total, parts.gaze_l1)

    def test_weighting_additivity_bitwise(self):
        pred_gaze, logits, gt_gaze, gt_mask = tiny_case()
        for gamma in (0.25, 0.5, 1.0):
            parts = multitask_loss(pred_gaze, logits, gt_gaze, gt_mask, LossConfig(gamma=gamma))
            assert torch.equal(parts.total, parts.gaze_l1 + gamma * parts.mask_bce)

    def test_perfect_prediction_drives_loss_to_zero(self):
        gt_gaze = torch.tensor([[0.1, -0.2]])
        gt_mask = torch.tensor([[[1.0, 0.0]]])
        # Extreme logits saturate the softmax toward the true mask.
        logits = torch.tensor([[[[30.0, -30.0]], [[-30.0, 30.0]]]])
        parts = multitask_loss(gt_gaze.clone(), logits, gt_gaze, gt_mask)
        assert parts.total.item() < 1e-6


class TestValidation:
    def test_non_binary_mask_rejected(self):
        pred_gaze, logits, gt_gaze, gt_mask = tiny_case()
        with pytest.raises(ValueError):
            multitask_loss(pred_gaze, logits, gt_gaze, gt_mask * 0.5)

    def test_shape_mismatch_rejected(self):
        pred_gaze, logits, gt_gaze, gt_mask = tiny_case()
        with pytest.raises(ValueError):
            multitask_loss(pred_gaze, logits, gt_gaze, torch.zeros(1, 3, 3))
        with pytest.raises(ValueError):
            multitask_loss(pred_gaze[:, :1], logits, gt_gaze, gt_mask)

    def test_negative_gamma_rejected(self):
        with pytest.raises(ValueError):
            LossConfig(gamma=-0.1)
