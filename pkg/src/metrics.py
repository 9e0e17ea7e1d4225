"""
Saliency evaluation metrics: MAE, PR / F-measure curves, weighted F-measure,
S-measure and E-measure.

Predictions are float maps in [0,1], ground truths binary {0,1}; both 2-D.
"""
import math
from typing import Tuple

import numpy as np
from scipy import ndimage

from src.errors import DegenerateMaskError, ShapeError

NUM_THRESHOLDS = 256
F_BETA2 = 0.3
WF_BETA2 = 1.0
WF_SIGMA = 5.0
WF_KERNEL = 7
WF_DECAY = math.log(0.5) / 5
SM_ALPHA = 0.5
EM_EPS = 1e-12
EPS = np.spacing(1)


def _check_pair(pred: np.ndarray, gt: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise ShapeError(f"prediction shape {pred.shape} != ground-truth shape {gt.shape}")
    if pred.ndim != 2:
        raise ShapeError(f"expected 2-D maps, got shape {pred.shape}")
    if not np.isin(gt, (0, 1)).all():
        raise ShapeError("ground truth must be binary {0, 1}")
    return pred, gt.astype(bool)


def thresholds() -> np.ndarray:
    return np.arange(NUM_THRESHOLDS, dtype=np.float64) / (NUM_THRESHOLDS - 1)


def mae(pred: np.ndarray, gt: np.ndarray) -> float:
    pred, gt = _check_pair(pred, gt)
    return float(np.mean(np.abs(pred - gt)))


def f_measure(precision, recall, beta2: float = F_BETA2):
    precision = np.asarray(precision, dtype=np.float64)
    recall = np.asarray(recall, dtype=np.float64)
    denominator = beta2 * precision + recall
    with np.errstate(divide="ignore", invalid="ignore"):
        f = (1 + beta2) * precision * recall / denominator
    return np.where(denominator > 0, f, 0.0)


def pr_and_f_curves(pred: np.ndarray, gt: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Precision, recall and F (beta^2 = 0.3) at thresholds i/255, binarizing P >= t"""
    pred, gt = _check_pair(pred, gt)
    num_fg = int(gt.sum())
    if num_fg == 0:
        raise DegenerateMaskError("ground truth has no foreground")
    t = thresholds()
    fg = np.sort(pred[gt])
    bg = np.sort(pred[~gt])
    tp = (fg.size - np.searchsorted(fg, t, side="left")).astype(np.float64)
    fp = (bg.size - np.searchsorted(bg, t, side="left")).astype(np.float64)
    predicted = tp + fp
    with np.errstate(divide="ignore", invalid="ignore"):
        precision = np.where(predicted > 0, tp / predicted, 1.0)
    recall = tp / num_fg
    return precision, recall, f_measure(precision, recall)


def _gaussian_kernel(size: int = WF_KERNEL, sigma: float = WF_SIGMA) -> np.ndarray:
    half = (size - 1) / 2
    y, x = np.mgrid[-half:half + 1, -half:half + 1]
    kernel = np.exp(-(x * x + y * y) / (2 * sigma * sigma))
    return kernel / kernel.sum()


def weighted_fbeta(pred: np.ndarray, gt: np.ndarray, beta2: float = WF_BETA2) -> float:
    pred, gt = _check_pair(pred, gt)
    if not gt.any():
        raise DegenerateMaskError("ground truth has no foreground")
    dist, (rows, cols) = ndimage.distance_transform_edt(~gt, return_indices=True)
    error = np.abs(pred - gt)
    # Background errors inherit the error of their nearest foreground pixel
    spread = error.copy()
    spread[~gt] = error[rows[~gt], cols[~gt]]
    blurred = ndimage.convolve(spread, _gaussian_kernel(), mode="constant", cval=0.0)
    dependent = np.where(gt & (blurred < error), blurred, error)
    importance = np.where(gt, 1.0, 2 - np.exp(WF_DECAY * dist))
    weighted = dependent * importance
    tp = gt.sum() - weighted[gt].sum()
    fp = weighted[~gt].sum()
    recall = 1 - weighted[gt].mean()
    precision = tp / (tp + fp + EPS)
    return float((1 + beta2) * recall * precision / (recall + beta2 * precision + EPS))


def _object_score(values: np.ndarray) -> float:
    mean = values.mean()
    std = values.std(ddof=1) if values.size > 1 else 0.0
    return 2 * mean / (mean * mean + 1 + std + EPS)


def _object_similarity(pred: np.ndarray, gt: np.ndarray) -> float:
    u = gt.mean()
    fg = pred[gt]
    bg = 1 - pred[~gt]
    return u * _object_score(fg) + (1 - u) * _object_score(bg)


def _region_ssim(pred: np.ndarray, gt: np.ndarray) -> float:
    n = pred.size
    if n == 0:
        return 0.0
    x, y = pred.mean(), gt.mean()
    if n > 1:
        sigma_x = ((pred - x) ** 2).sum() / (n - 1)
        sigma_y = ((gt - y) ** 2).sum() / (n - 1)
        sigma_xy = ((pred - x) * (gt - y)).sum() / (n - 1)
    else:
        sigma_x = sigma_y = sigma_xy = 0.0
    alpha = 4 * x * y * sigma_xy
    beta = (x * x + y * y) * (sigma_x + sigma_y)
    if alpha != 0:
        return alpha / (beta + EPS)
    return 1.0 if beta == 0 else 0.0


def gt_centroid(gt: np.ndarray) -> Tuple[int, int]:
    """Split point (col, row): rounded foreground centroid plus one"""
    height, width = gt.shape
    if not gt.any():
        return int(round(width / 2)), int(round(height / 2))
    row, col = np.argwhere(gt).mean(axis=0).round()
    return int(col) + 1, int(row) + 1


def _region_similarity(pred: np.ndarray, gt: np.ndarray) -> float:
    height, width = gt.shape
    x, y = gt_centroid(gt)
    area = height * width
    gt_f = gt.astype(np.float64)
    parts = [
        (slice(0, y), slice(0, x), x * y / area),
        (slice(0, y), slice(x, width), (width - x) * y / area),
        (slice(y, height), slice(0, x), x * (height - y) / area),
    ]
    weights = [w for _, _, w in parts]
    parts.append((slice(y, height), slice(x, width), 1 - sum(weights)))
    return sum(w * _region_ssim(pred[r, c], gt_f[r, c]) for r, c, w in parts)


def s_measure(pred: np.ndarray, gt: np.ndarray, alpha: float = SM_ALPHA) -> float:
    pred, gt = _check_pair(pred, gt)
    y = gt.mean()
    if y == 0:
        return float(1 - pred.mean())
    if y == 1:
        return float(pred.mean())
    score = alpha * _object_similarity(pred, gt) + (1 - alpha) * _region_similarity(pred, gt)
    return float(max(score, 0.0))


def e_measure(pred: np.ndarray, gt: np.ndarray) -> float:
    pred, gt = _check_pair(pred, gt)
    if not gt.any():
        return float(1 - pred.mean())
    if gt.all():
        return float(pred.mean())
    gt_f = gt.astype(np.float64)
    bias_p = pred - pred.mean()
    bias_g = gt_f - gt_f.mean()
    align = 2 * bias_g * bias_p / (bias_g * bias_g + bias_p * bias_p + EM_EPS)
    phi = (1 + align) ** 2 / 4
    return float(phi.mean())
