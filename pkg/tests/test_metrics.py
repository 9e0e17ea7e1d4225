import numpy as np
import pytest

from src import metrics
from src.errors import DegenerateMaskError, ShapeError
from tests import oracles
from tests.helpers import random_pair, random_rectangle


def binary_pair(rng, size=16):
    """P == G with both classes present"""
    gt = (rng.random((size, size)) < 0.4).astype(np.uint8)
    gt[0, 0], gt[-1, -1] = 1, 0
    return gt.astype(np.float64), gt


class TestMae:
    def test_identical(self, rng):
        pred, gt = binary_pair(rng)
        assert metrics.mae(pred, gt) == 0.0

    def test_constant_case(self):
        assert metrics.mae(np.full((8, 8), 0.5), np.ones((8, 8), dtype=np.uint8)) == 0.5

    def test_matches_double_loop(self, rng):
        for _ in range(100):
            pred, gt = random_pair(rng)
            assert abs(metrics.mae(pred, gt) - oracles.mae(pred, gt)) <= 1e-12

    def test_symmetric_for_binary_maps(self, rng):
        a = (rng.random((16, 16)) < 0.5).astype(np.uint8)
        b = (rng.random((16, 16)) < 0.5).astype(np.uint8)
        assert metrics.mae(a, b) == metrics.mae(b, a)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            metrics.mae(np.zeros((4, 4)), np.zeros((4, 5), dtype=np.uint8))

    def test_non_binary_ground_truth(self):
        with pytest.raises(ShapeError):
            metrics.mae(np.zeros((4, 4)), np.full((4, 4), 0.5))


class TestCurves:
    def test_thresholds(self):
        t = metrics.thresholds()
        assert t.shape == (256,)
        assert t[0] == 0.0 and t[-1] == 1.0

    def test_identical_binary_maps(self, rng):
        pred, gt = binary_pair(rng)
        precision, recall, f_beta = metrics.pr_and_f_curves(pred, gt)
        # t = 0 marks every pixel positive; all other thresholds recover G exactly
        np.testing.assert_array_equal(precision[1:], 1.0)
        np.testing.assert_array_equal(recall, 1.0)
        np.testing.assert_allclose(f_beta[1:], 1.0)

    def test_f_measure_fixed_point(self):
        assert metrics.f_measure(0.8, 0.8) == pytest.approx(0.8, abs=1e-12)

    def test_f_measure_of_zeros(self):
        assert metrics.f_measure(0.0, 0.0) == 0.0

    def test_matches_counting_oracle(self, rng):
        t = metrics.thresholds()
        for _ in range(100):
            pred, gt = random_pair(rng, size=8)
            precision, recall, f_beta = metrics.pr_and_f_curves(pred, gt)
            for i in (0, 64, 128, 200, 255):
                p, r = oracles.pr_counts(pred, gt, t[i])
                assert abs(precision[i] - p) <= 1e-12
                assert abs(recall[i] - r) <= 1e-12
            np.testing.assert_allclose(f_beta, metrics.f_measure(precision, recall), atol=1e-12)

    def test_empty_prediction_precision_is_one(self):
        gt = np.zeros((8, 8), dtype=np.uint8)
        gt[2:4, 2:4] = 1
        precision, recall, f_beta = metrics.pr_and_f_curves(np.zeros((8, 8)), gt)
        assert precision[-1] == 1.0
        assert recall[-1] == 0.0
        assert f_beta[-1] == 0.0

    def test_curve_sanity(self, rng):
        for _ in range(20):
            pred, gt = random_pair(rng)
            precision, recall, _ = metrics.pr_and_f_curves(pred, gt)
            assert np.all(np.diff(recall) <= 0)
            assert np.all((precision >= 0) & (precision <= 1))

    def test_degenerate_ground_truth(self):
        with pytest.raises(DegenerateMaskError):
            metrics.pr_and_f_curves(np.zeros((8, 8)), np.zeros((8, 8), dtype=np.uint8))


class TestWeightedF:
    def test_identical_binary_maps(self, rng):
        pred, gt = binary_pair(rng)
        assert metrics.weighted_fbeta(pred, gt) == pytest.approx(1.0, abs=1e-6)

    def test_inverted_prediction(self):
        # Foreground kept away from the border so the dependency kernel sees no padding
        gt = np.zeros((16, 16), dtype=np.uint8)
        gt[5:11, 4:12] = 1
        assert metrics.weighted_fbeta(1.0 - gt, gt) == pytest.approx(0.0, abs=1e-6)

    def test_matches_exhaustive_oracle(self, rng):
        # Rectangular foregrounds make every nearest foreground pixel unique
        for _ in range(30):
            gt = random_rectangle(rng)
            pred = rng.random((16, 16))
            assert metrics.weighted_fbeta(pred, gt) == pytest.approx(oracles.weighted_fbeta(pred, gt), abs=1e-6)

    def test_monotone_under_correction(self, rng):
        for _ in range(20):
            pred, gt = random_pair(rng)
            corrected = pred.copy()
            subset = rng.random(pred.shape) < 0.3
            corrected[subset] = gt[subset]
            assert metrics.weighted_fbeta(corrected, gt) >= metrics.weighted_fbeta(pred, gt) - 1e-12
            assert metrics.mae(corrected, gt) <= metrics.mae(pred, gt) + 1e-12

    def test_degenerate_ground_truth(self):
        with pytest.raises(DegenerateMaskError):
            metrics.weighted_fbeta(np.zeros((8, 8)), np.zeros((8, 8), dtype=np.uint8))


class TestStructureMeasure:
    def test_identical_binary_maps(self, rng):
        pred, gt = binary_pair(rng)
        assert metrics.s_measure(pred, gt) == pytest.approx(1.0, abs=1e-6)

    def test_empty_ground_truth(self):
        gt = np.zeros((8, 8), dtype=np.uint8)
        assert metrics.s_measure(np.zeros((8, 8)), gt) == 1.0
        assert metrics.s_measure(np.full((8, 8), 0.25), gt) == pytest.approx(0.75)

    def test_full_ground_truth(self):
        gt = np.ones((8, 8), dtype=np.uint8)
        assert metrics.s_measure(np.full((8, 8), 0.25), gt) == pytest.approx(0.25)

    def test_matches_oracle(self, rng):
        for _ in range(100):
            pred, gt = random_pair(rng)
            assert metrics.s_measure(pred, gt) == pytest.approx(oracles.s_measure(pred, gt), abs=1e-6)

    def test_range(self, rng):
        for _ in range(20):
            pred, gt = random_pair(rng)
            assert 0.0 <= metrics.s_measure(pred, gt) <= 1.0


class TestEnhancedAlignment:
    def test_identical_binary_maps(self, rng):
        pred, gt = binary_pair(rng)
        assert metrics.e_measure(pred, gt) == pytest.approx(1.0, abs=1e-6)

    def test_degenerate_conventions(self):
        assert metrics.e_measure(np.full((8, 8), 0.2), np.zeros((8, 8), dtype=np.uint8)) == pytest.approx(0.8)
        assert metrics.e_measure(np.full((8, 8), 0.2), np.ones((8, 8), dtype=np.uint8)) == pytest.approx(0.2)

    def test_matches_oracle(self, rng):
        for _ in range(100):
            pred, gt = random_pair(rng)
            assert metrics.e_measure(pred, gt) == pytest.approx(oracles.e_measure(pred, gt), abs=1e-6)


class TestFlipInvariance:
    """Centroid rounding (S_m) and nearest-pixel ties (F_w) make those two only approximately flip-invariant"""

    @pytest.mark.parametrize("flip", [np.fliplr, np.flipud])
    def test_exact_metrics(self, rng, flip):
        pred, gt = random_pair(rng)
        fp, fg = flip(pred).copy(), flip(gt).copy()
        assert metrics.mae(fp, fg) == pytest.approx(metrics.mae(pred, gt), abs=1e-12)
        assert metrics.e_measure(fp, fg) == pytest.approx(metrics.e_measure(pred, gt), abs=1e-12)
        for a, b in zip(metrics.pr_and_f_curves(fp, fg), metrics.pr_and_f_curves(pred, gt)):
            np.testing.assert_allclose(a, b, atol=1e-12)

    @pytest.mark.parametrize("flip", [np.fliplr, np.flipud])
    def test_weighted_f_with_unique_nearest_pixels(self, rng, flip):
        gt = random_rectangle(rng)
        pred = rng.random((16, 16))
        assert metrics.weighted_fbeta(flip(pred).copy(), flip(gt).copy()) == pytest.approx(
            metrics.weighted_fbeta(pred, gt), abs=1e-9)
