"""
Hybrid deep-supervision objective: BCE + IoU + SSIM on every side output.
"""
from typing import List, NamedTuple, Optional, Sequence, Union

import torch
import torch.nn.functional as F
from torch import nn

from src.errors import ConfigError, ShapeError
from src.models import NUM_SIDE_OUTPUTS, LossBreakdown, LossConfig, LossTerms
from src.network import NetworkOutput

BCE_EPS = 1e-7
SSIM_C1 = 0.01 ** 2
SSIM_C2 = 0.03 ** 2


def _as_batch(x: torch.Tensor) -> torch.Tensor:
    if x.dim() == 2:
        return x[None, None]
    if x.dim() == 3:
        return x[:, None]
    return x


def _check_pair(pred: torch.Tensor, target: torch.Tensor):
    pred, target = _as_batch(pred), _as_batch(target)
    if pred.shape != target.shape:
        raise ShapeError(f"prediction shape {tuple(pred.shape)} != target shape {tuple(target.shape)}")
    return pred, target.to(pred.dtype)


def bce_loss(pred: torch.Tensor, target: torch.Tensor, eps: float = BCE_EPS) -> torch.Tensor:
    pred, target = _check_pair(pred, target)
    p = pred.clamp(eps, 1 - eps)
    return -(target * torch.log(p) + (1 - target) * torch.log(1 - p)).mean()


def iou_loss(pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Soft IoU loss per image, averaged over the batch; an empty union scores 0"""
    pred, target = _check_pair(pred, target)
    dims = tuple(range(1, pred.dim()))
    inter = (pred * target).sum(dim=dims)
    union = (pred + target - pred * target).sum(dim=dims)
    safe = union.clamp_min(torch.finfo(pred.dtype).tiny)
    loss = torch.where(union > 0, 1 - inter / safe, torch.zeros_like(union))
    return loss.mean()


def gaussian_window(size: int, sigma: float, dtype=torch.float32, device=None) -> torch.Tensor:
    coords = torch.arange(size, dtype=dtype, device=device) - (size - 1) / 2
    g = torch.exp(-coords ** 2 / (2 * sigma ** 2))
    g = g / g.sum()
    return torch.outer(g, g)[None, None]


def ssim_map(pred: torch.Tensor, target: torch.Tensor, window_size: int = 11,
             sigma: float = 1.5) -> torch.Tensor:
    """Per-pixel SSIM over Gaussian-weighted patches with reflection padding"""
    pred, target = _check_pair(pred, target)
    height, width = pred.shape[-2:]
    if height < window_size or width < window_size:
        raise ConfigError(f"image {height}x{width} is smaller than the SSIM window {window_size}")
    channels = pred.shape[1]
    window = gaussian_window(window_size, sigma, pred.dtype, pred.device).expand(channels, 1, -1, -1)
    pad = window_size // 2

    def filt(x: torch.Tensor) -> torch.Tensor:
        return F.conv2d(F.pad(x, (pad, pad, pad, pad), mode="reflect"), window, groups=channels)

    mu_x, mu_y = filt(pred), filt(target)
    sigma_x = filt(pred * pred) - mu_x * mu_x
    sigma_y = filt(target * target) - mu_y * mu_y
    sigma_xy = filt(pred * target) - mu_x * mu_y
    numerator = (2 * mu_x * mu_y + SSIM_C1) * (2 * sigma_xy + SSIM_C2)
    denominator = (mu_x * mu_x + mu_y * mu_y + SSIM_C1) * (sigma_x + sigma_y + SSIM_C2)
    return numerator / denominator


def ssim_loss(pred: torch.Tensor, target: torch.Tensor, window_size: int = 11,
              sigma: float = 1.5) -> torch.Tensor:
    # Anti-correlated patches score below zero; clip so the loss stays in [0, 1]
    return 1 - ssim_map(pred, target, window_size, sigma).clamp_min(0).mean()


class LossResult(NamedTuple):
    total: torch.Tensor
    breakdown: LossBreakdown


class HybridLoss(nn.Module):
    def __init__(self, config: Optional[LossConfig] = None, ssim_window: int = 11, ssim_sigma: float = 1.5):
        super().__init__()
        self.config = config or LossConfig()
        self.ssim_window = ssim_window
        self.ssim_sigma = ssim_sigma

    def side_terms(self, pred: torch.Tensor, target: torch.Tensor) -> List[torch.Tensor]:
        zero = pred.new_zeros(())
        return [
            bce_loss(pred, target, self.config.bce_eps) if self.config.use_bce else zero,
            iou_loss(pred, target) if self.config.use_iou else zero,
            ssim_loss(pred, target, self.ssim_window, self.ssim_sigma) if self.config.use_ssim else zero,
        ]

    def forward(self, outputs: Union[NetworkOutput, Sequence[torch.Tensor]], target: torch.Tensor) -> LossResult:
        side_outputs = outputs.side_outputs if isinstance(outputs, NetworkOutput) else list(outputs)
        if len(side_outputs) != NUM_SIDE_OUTPUTS:
            raise ConfigError(f"expected {NUM_SIDE_OUTPUTS} side outputs, got {len(side_outputs)}")
        supervised = (
            range(NUM_SIDE_OUTPUTS) if self.config.deep_supervision else [NUM_SIDE_OUTPUTS - 1]
        )
        total = side_outputs[-1].new_zeros(())
        records = [LossTerms() for _ in range(NUM_SIDE_OUTPUTS)]
        for k in supervised:
            bce, iou, ssim = self.side_terms(side_outputs[k], target)
            total = total + bce + iou + ssim
            records[k] = LossTerms(bce=bce.item(), iou=iou.item(), ssim=ssim.item())
        return LossResult(total=total, breakdown=LossBreakdown.from_terms(records))


def total_loss(outputs: Union[NetworkOutput, Sequence[torch.Tensor]], target: torch.Tensor,
               config: Optional[LossConfig] = None, ssim_window: int = 11, ssim_sigma: float = 1.5) -> LossResult:
    return HybridLoss(config, ssim_window, ssim_sigma)(outputs, target)
