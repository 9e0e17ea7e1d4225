"""
Joint attention-guided feature fusion.

High-level features are upsampled to the low-level resolution and turned into a
channel map M_c and a spatial map M_s. Their outer product, passed through a
depthwise separable dilated convolution, gives the joint map M that refines the
low-level features before concatenation:

    F_l' = alpha * (F_l * M) + F_l,    F_fuse = CAT(F_l', up(F_h))
"""
from typing import NamedTuple, Optional

import torch
import torch.nn.functional as F
from torch import nn

from src.errors import ShapeError


def upsample_to(x: torch.Tensor, size) -> torch.Tensor:
    if tuple(x.shape[-2:]) == tuple(size):
        return x
    return F.interpolate(x, size=tuple(size), mode="bilinear", align_corners=False)


class AttentionBundle(NamedTuple):
    channel: torch.Tensor   # B x C_l x 1 x 1, in (0, 1)
    spatial: torch.Tensor   # B x 1 x H_l x W_l, in (0, 1)
    joint: torch.Tensor     # B x C_l x H_l x W_l, unbounded
    alpha: torch.Tensor


class ChannelAttention(nn.Module):
    """1x1 conv, GAP/GMP over space, per-path 1x1 conv, shared 1x1 conv, sum, sigmoid"""

    def __init__(self, high_channels: int, low_channels: int):
        super().__init__()
        self.reduce = nn.Conv2d(high_channels, low_channels, kernel_size=1)
        self.avg_proj = nn.Conv2d(low_channels, low_channels, kernel_size=1)
        self.max_proj = nn.Conv2d(low_channels, low_channels, kernel_size=1)
        self.shared = nn.Conv2d(low_channels, low_channels, kernel_size=1)

    def forward(self, high_up: torch.Tensor) -> torch.Tensor:
        features = self.reduce(high_up)
        avg = F.adaptive_avg_pool2d(features, 1)
        mx = F.adaptive_max_pool2d(features, 1)
        return torch.sigmoid(self.shared(self.avg_proj(avg)) + self.shared(self.max_proj(mx)))


class SpatialAttention(nn.Module):
    """1x1 conv, channelwise max/avg, dilated 3x3 (rate 2) then (rate 4), sigmoid"""

    def __init__(self, high_channels: int, low_channels: int, hidden: int = 1):
        super().__init__()
        self.reduce = nn.Conv2d(high_channels, low_channels, kernel_size=1)
        self.dilated2 = nn.Conv2d(2, hidden, kernel_size=3, padding=2, dilation=2)
        self.dilated4 = nn.Conv2d(hidden, 1, kernel_size=3, padding=4, dilation=4)

    def forward(self, high_up: torch.Tensor) -> torch.Tensor:
        features = self.reduce(high_up)
        mx = features.amax(dim=1, keepdim=True)
        avg = features.mean(dim=1, keepdim=True)
        return torch.sigmoid(self.dilated4(self.dilated2(torch.cat([mx, avg], dim=1))))


class DepthwiseSeparableConv(nn.Module):
    def __init__(self, channels: int, dilation: int = 2):
        super().__init__()
        self.depthwise = nn.Conv2d(channels, channels, kernel_size=3, padding=dilation,
                                   dilation=dilation, groups=channels)
        self.pointwise = nn.Conv2d(channels, channels, kernel_size=1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.pointwise(self.depthwise(x))


class JointAttentionFusion(nn.Module):
    def __init__(self, low_channels: int, high_channels: int, use_channel: bool = True,
                 use_spatial: bool = True, name: str = "jaff"):
        super().__init__()
        self.name = name
        self.low_channels = low_channels
        self.high_channels = high_channels
        self.channel_branch: Optional[ChannelAttention] = (
            ChannelAttention(high_channels, low_channels) if use_channel else None
        )
        self.spatial_branch: Optional[SpatialAttention] = (
            SpatialAttention(high_channels, low_channels) if use_spatial else None
        )
        self.map_conv = DepthwiseSeparableConv(low_channels, dilation=2)
        # Starts as plain concatenation; guidance is learned
        self.alpha = nn.Parameter(torch.zeros(1))

    @property
    def out_channels(self) -> int:
        return self.low_channels + self.high_channels

    def channel_attention(self, high_up: torch.Tensor) -> torch.Tensor:
        if self.channel_branch is None:
            return high_up.new_ones(high_up.shape[0], self.low_channels, 1, 1)
        return self.channel_branch(high_up)

    def spatial_attention(self, high_up: torch.Tensor) -> torch.Tensor:
        if self.spatial_branch is None:
            return high_up.new_ones(high_up.shape[0], 1, *high_up.shape[-2:])
        return self.spatial_branch(high_up)

    @staticmethod
    def outer_product(m_c: torch.Tensor, m_s: torch.Tensor) -> torch.Tensor:
        batch, channels = m_c.shape[:2]
        height, width = m_s.shape[-2:]
        joint = torch.bmm(m_c.reshape(batch, channels, 1), m_s.reshape(batch, 1, height * width))
        return joint.reshape(batch, channels, height, width)

    def fuse_maps(self, m_c: torch.Tensor, m_s: torch.Tensor) -> torch.Tensor:
        return self.map_conv(self.outer_product(m_c, m_s))

    def attention(self, high_up: torch.Tensor) -> AttentionBundle:
        m_c = self.channel_attention(high_up)
        m_s = self.spatial_attention(high_up)
        return AttentionBundle(channel=m_c, spatial=m_s, joint=self.fuse_maps(m_c, m_s), alpha=self.alpha)

    def refine(self, low: torch.Tensor, joint: torch.Tensor) -> torch.Tensor:
        return self.alpha * (low * joint) + low

    def check_inputs(self, low: torch.Tensor, high: torch.Tensor) -> None:
        if low.dim() != 4 or high.dim() != 4:
            raise ShapeError(f"{self.name}: expected 4-D feature batches")
        if low.shape[1] != self.low_channels:
            raise ShapeError(f"{self.name}: low-level input has {low.shape[1]} channels, "
                             f"expected {self.low_channels}")
        if high.shape[1] != self.high_channels:
            raise ShapeError(f"{self.name}: high-level input has {high.shape[1]} channels, "
                             f"expected {self.high_channels}")
        if low.shape[0] != high.shape[0]:
            raise ShapeError(f"{self.name}: batch sizes differ ({low.shape[0]} vs {high.shape[0]})")

    def forward(self, low: torch.Tensor, high: torch.Tensor) -> torch.Tensor:
        self.check_inputs(low, high)
        high_up = upsample_to(high, low.shape[-2:])
        bundle = self.attention(high_up)
        return torch.cat([self.refine(low, bundle.joint), high_up], dim=1)


class ConcatFusion(nn.Module):
    """Upsample-and-concatenate fusion without attention guidance"""

    def __init__(self, low_channels: int, high_channels: int, name: str = "concat"):
        super().__init__()
        self.name = name
        self.low_channels = low_channels
        self.high_channels = high_channels

    @property
    def out_channels(self) -> int:
        return self.low_channels + self.high_channels

    def forward(self, low: torch.Tensor, high: torch.Tensor) -> torch.Tensor:
        if low.shape[1] != self.low_channels or high.shape[1] != self.high_channels:
            raise ShapeError(f"{self.name}: got channels ({low.shape[1]}, {high.shape[1]}), "
                             f"expected ({self.low_channels}, {self.high_channels})")
        return torch.cat([low, upsample_to(high, low.shape[-2:])], dim=1)
