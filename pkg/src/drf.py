"""
Dense receptive field module: densely connected multi-receptive-field units plus a
global-context branch, all summed with the input.

    Y_i = H_i(X + sum_{j<i} Y_j),  i = 1..3
    Y   = X + Y_1 + Y_2 + Y_3 + Y_4
"""
from typing import List, NamedTuple, Sequence

import torch
import torch.nn.functional as F
from torch import nn

from src.encoder import BasicBlock
from src.errors import ShapeError


class MultiReceptiveFieldUnit(nn.Module):
    """Parallel 3x3 dilated convolutions, summed, then ReLU"""

    def __init__(self, channels: int, rates: Sequence[int] = (1, 2, 4)):
        super().__init__()
        self.channels = channels
        self.branches = nn.ModuleList(
            nn.Conv2d(channels, channels, kernel_size=3, padding=rate, dilation=rate)
            for rate in rates
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[1] != self.channels:
            raise ShapeError(f"MRF unit expects {self.channels} channels, got {x.shape[1]}")
        out = self.branches[0](x)
        for branch in self.branches[1:]:
            out = out + branch(x)
        return F.relu(out)


class DrfTrace(NamedTuple):
    unit_inputs: List[torch.Tensor]
    unit_outputs: List[torch.Tensor]
    global_context: torch.Tensor
    output: torch.Tensor


class DenseReceptiveField(nn.Module):
    def __init__(self, channels: int, rates: Sequence[int] = (1, 2, 4), num_units: int = 3):
        super().__init__()
        self.channels = channels
        self.units = nn.ModuleList(MultiReceptiveFieldUnit(channels, rates) for _ in range(num_units))
        self.global_conv = nn.Conv2d(channels, channels, kernel_size=1)

    def global_context(self, x: torch.Tensor) -> torch.Tensor:
        # Upsampling a 1x1 map is a broadcast
        pooled = self.global_conv(F.adaptive_avg_pool2d(x, 1))
        return pooled.expand_as(x)

    def trace(self, x: torch.Tensor) -> DrfTrace:
        if x.dim() != 4 or x.shape[1] != self.channels:
            raise ShapeError(f"DRF expects B x {self.channels} x H x W, got {tuple(x.shape)}")
        inputs, outputs = [], []
        dense = x
        for unit in self.units:
            inputs.append(dense)
            y = unit(dense)
            outputs.append(y)
            dense = dense + y
        context = self.global_context(x)
        return DrfTrace(unit_inputs=inputs, unit_outputs=outputs, global_context=context,
                        output=dense + context)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.trace(x).output


class ResidualContext(nn.Sequential):
    """Two basic res-blocks standing in for the DRF module"""

    def __init__(self, channels: int):
        super().__init__(BasicBlock(channels, channels), BasicBlock(channels, channels))
        self.channels = channels
