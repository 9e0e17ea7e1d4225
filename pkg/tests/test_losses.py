import math

import numpy as np
import pytest
import torch

from src.errors import ConfigError, ShapeError
from src.losses import HybridLoss, bce_loss, iou_loss, ssim_loss, ssim_map, total_loss
from src.models import LossConfig
from tests import oracles


def as_tensor(values, shape=(2, 2)):
    return torch.tensor(values, dtype=torch.float64).reshape(shape)


class TestBce:
    def test_half_map_is_ln2(self, rng):
        gt = torch.from_numpy((rng.random((16, 16)) < 0.5).astype(np.float64))
        assert bce_loss(torch.full((16, 16), 0.5, dtype=torch.float64), gt).item() == pytest.approx(
            math.log(2), abs=1e-9)

    def test_hand_computed_case(self):
        loss = bce_loss(as_tensor([0.9, 0.1, 0.8, 0.2]), as_tensor([1, 0, 1, 0]))
        expected = (-2 * math.log(0.9) - 2 * math.log(0.8)) / 4
        assert loss.item() == pytest.approx(expected, abs=1e-12)
        assert loss.item() == pytest.approx(0.164252, abs=1e-6)

    def test_perfect_prediction(self):
        gt = as_tensor([1, 0, 0, 1])
        assert bce_loss(gt.clone(), gt).item() <= 1e-6

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            bce_loss(torch.zeros(1, 1, 4, 4), torch.zeros(1, 1, 4, 5))


class TestIou:
    def test_identical(self, rng):
        for _ in range(100):
            gt = torch.from_numpy((rng.random((8, 8)) < 0.5).astype(np.float64))
            gt[0, 0] = 1
            assert iou_loss(gt.clone(), gt).item() == 0.0

    def test_disjoint(self):
        assert iou_loss(as_tensor([1, 1, 0, 0]), as_tensor([0, 0, 1, 1])).item() == 1.0

    def test_hand_computed_case(self):
        assert iou_loss(as_tensor([1, 1, 0, 0]), as_tensor([1, 0, 1, 0])).item() == pytest.approx(
            2 / 3, abs=1e-12)

    def test_empty_union(self):
        loss = iou_loss(torch.zeros(2, 2, dtype=torch.float64), torch.zeros(2, 2, dtype=torch.float64))
        assert loss.item() == 0.0

    def test_empty_union_gradient_is_finite(self):
        pred = torch.zeros(1, 1, 2, 2, dtype=torch.float64, requires_grad=True)
        iou_loss(pred, torch.zeros(1, 1, 2, 2, dtype=torch.float64)).backward()
        assert torch.isfinite(pred.grad).all()

    def test_per_image_average(self):
        pred = torch.stack([as_tensor([1, 1, 0, 0]), as_tensor([1, 0, 1, 0])])[:, None]
        gt = torch.stack([as_tensor([1, 0, 1, 0]), as_tensor([1, 0, 1, 0])])[:, None]
        assert iou_loss(pred, gt).item() == pytest.approx((2 / 3 + 0) / 2, abs=1e-12)


class TestPixelPermutation:
    @pytest.mark.parametrize("loss", [bce_loss, iou_loss])
    def test_shared_permutation_leaves_loss_unchanged(self, rng, loss):
        pred = torch.from_numpy(rng.random((1, 1, 12, 12)))
        gt = torch.from_numpy((rng.random((1, 1, 12, 12)) < 0.4).astype(np.float64))
        perm = torch.from_numpy(rng.permutation(144))
        shuffled_pred = pred.flatten()[perm].reshape(pred.shape)
        shuffled_gt = gt.flatten()[perm].reshape(gt.shape)
        assert loss(shuffled_pred, shuffled_gt).item() == pytest.approx(loss(pred, gt).item(), abs=1e-12)


class TestSsim:
    def test_identical_inputs(self, rng):
        for _ in range(100):
            p = torch.from_numpy(rng.random((16, 16)))
            assert ssim_loss(p, p.clone()).item() <= 1e-9

    def test_constant_maps_closed_form(self):
        for a, b in ((1.0, 0.0), (0.3, 0.7), (0.5, 0.5)):
            p = torch.full((16, 16), a, dtype=torch.float64)
            g = torch.full((16, 16), b, dtype=torch.float64)
            c1 = 0.01 ** 2
            expected = 1 - (2 * a * b + c1) / (a * a + b * b + c1)
            assert ssim_loss(p, g).item() == pytest.approx(expected, abs=1e-9)
        assert ssim_loss(torch.ones(16, 16, dtype=torch.float64),
                         torch.zeros(16, 16, dtype=torch.float64)).item() == pytest.approx(0.99990, abs=1e-5)

    def test_map_matches_patch_oracle(self, rng):
        for _ in range(3):
            p, g = rng.random((16, 16)), (rng.random((16, 16)) < 0.5).astype(np.float64)
            computed = ssim_map(torch.from_numpy(p), torch.from_numpy(g))[0, 0].numpy()
            np.testing.assert_allclose(computed, oracles.ssim_map(p, g), atol=1e-9)

    def test_loss_clips_negative_structure(self, rng):
        p = torch.from_numpy(rng.random((16, 16)))
        loss = ssim_loss(p, 1 - p).item()
        assert 0.0 <= loss <= 1.0

    def test_symmetric(self, rng):
        p, g = torch.from_numpy(rng.random((16, 16))), torch.from_numpy(rng.random((16, 16)))
        assert ssim_loss(p, g).item() == ssim_loss(g, p).item()

    def test_image_smaller_than_window(self):
        with pytest.raises(ConfigError):
            ssim_loss(torch.zeros(8, 8), torch.zeros(8, 8))


def side_outputs_like(gt, k=5):
    return [gt.clone() for _ in range(k)]


class TestHybridLoss:
    def test_perfect_side_outputs(self):
        gt = torch.zeros(2, 1, 16, 16)
        gt[:, :, 4:10, 3:12] = 1
        result = HybridLoss()(side_outputs_like(gt), gt)
        assert result.total.item() <= 5e-5

    def test_bookkeeping_identity(self, rng):
        gt = torch.from_numpy((rng.random((2, 1, 16, 16)) < 0.3).astype(np.float64))
        outputs = [torch.from_numpy(rng.random((2, 1, 16, 16))) for _ in range(5)]
        result = HybridLoss()(outputs, gt)
        stored = math.fsum(v for t in result.breakdown.per_output for v in (t.bce, t.iou, t.ssim))
        assert len(result.breakdown.per_output) == 5
        assert result.total.item() == pytest.approx(stored, abs=1e-9)
        assert result.breakdown.total == pytest.approx(stored, abs=1e-12)

    def test_wrong_number_of_outputs(self):
        gt = torch.zeros(1, 1, 16, 16)
        with pytest.raises(ConfigError):
            HybridLoss()(side_outputs_like(gt, 4), gt)

    def test_without_deep_supervision_only_final_output_counts(self, rng):
        gt = torch.from_numpy((rng.random((1, 1, 16, 16)) < 0.3).astype(np.float64))
        outputs = [torch.from_numpy(rng.random((1, 1, 16, 16))) for _ in range(5)]
        full = HybridLoss(LossConfig(deep_supervision=False))(outputs, gt)
        final_only = HybridLoss()(outputs, gt).breakdown.per_output[-1]
        assert full.total.item() == pytest.approx(final_only.sum, abs=1e-12)
        assert all(t.sum == 0.0 for t in full.breakdown.per_output[:-1])

    def test_disabled_terms_recorded_as_zero(self, rng):
        gt = torch.from_numpy((rng.random((1, 1, 16, 16)) < 0.3).astype(np.float64))
        outputs = [torch.from_numpy(rng.random((1, 1, 16, 16))) for _ in range(5)]
        result = HybridLoss(LossConfig(use_iou=False, use_ssim=False))(outputs, gt)
        assert all(t.iou == 0.0 and t.ssim == 0.0 for t in result.breakdown.per_output)
        assert all(t.bce > 0 for t in result.breakdown.per_output)

    def test_gradient_matches_finite_differences(self, rng):
        gt = torch.from_numpy((rng.random((1, 1, 16, 16)) < 0.3).astype(np.float64))
        base = [torch.from_numpy(0.05 + 0.9 * rng.random((1, 1, 16, 16))) for _ in range(5)]
        checked = base[2].clone().requires_grad_(True)
        outputs = base[:2] + [checked] + base[3:]
        total_loss(outputs, gt).total.backward()

        h = 1e-6
        for index in [(0, 0, 3, 5), (0, 0, 8, 8), (0, 0, 15, 0)]:
            plus, minus = base[2].clone(), base[2].clone()
            plus[index] += h
            minus[index] -= h
            lp = total_loss(base[:2] + [plus] + base[3:], gt).total.item()
            lm = total_loss(base[:2] + [minus] + base[3:], gt).total.item()
            numeric = (lp - lm) / (2 * h)
            analytic = checked.grad[index].item()
            assert abs(analytic - numeric) <= 1e-3 * max(abs(numeric), 1e-6)

    @pytest.mark.parametrize("loss", [bce_loss, iou_loss, ssim_loss])
    def test_gradcheck(self, rng, loss):
        gt = torch.from_numpy((rng.random((2, 1, 16, 16)) < 0.3).astype(np.float64))
        pred = torch.from_numpy(0.1 + 0.8 * rng.random((2, 1, 16, 16))).requires_grad_(True)
        assert torch.autograd.gradcheck(lambda p: loss(p, gt), (pred,), eps=1e-6, atol=1e-6, rtol=1e-3)
