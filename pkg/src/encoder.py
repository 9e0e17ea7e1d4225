"""
Five-stage residual encoder E1-E5.

Stages E1-E4 are the ResNet18 basic-block stages behind a 3x3 stride-1 stem with no
pooling; E5 adds a 2x2 max-pool and two more basic blocks at the E4 width.
"""
import logging
from typing import Dict, List, Mapping, NamedTuple

import torch
from torch import nn

from src.errors import ConfigError, ShapeError
from src.models import NetworkConfig

logger = logging.getLogger(__name__)

INPUT_DIVISOR = 16


def conv3x3(in_channels: int, out_channels: int, stride: int = 1, dilation: int = 1,
            bias: bool = False) -> nn.Conv2d:
    return nn.Conv2d(in_channels, out_channels, kernel_size=3, stride=stride,
                     padding=dilation, dilation=dilation, bias=bias)


class BasicBlock(nn.Module):
    def __init__(self, in_channels: int, out_channels: int, stride: int = 1):
        super().__init__()
        self.conv1 = conv3x3(in_channels, out_channels, stride)
        self.bn1 = nn.BatchNorm2d(out_channels)
        self.relu = nn.ReLU(inplace=True)
        self.conv2 = conv3x3(out_channels, out_channels)
        self.bn2 = nn.BatchNorm2d(out_channels)
        if stride != 1 or in_channels != out_channels:
            self.shortcut = nn.Sequential(
                nn.Conv2d(in_channels, out_channels, kernel_size=1, stride=stride, bias=False),
                nn.BatchNorm2d(out_channels),
            )
        else:
            self.shortcut = nn.Identity()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        out = self.relu(self.bn1(self.conv1(x)))
        out = self.bn2(self.conv2(out))
        return self.relu(out + self.shortcut(x))


def make_stage(in_channels: int, out_channels: int, stride: int, blocks: int = 2) -> List[nn.Module]:
    layers = [BasicBlock(in_channels, out_channels, stride)]
    layers += [BasicBlock(out_channels, out_channels) for _ in range(blocks - 1)]
    return layers


class Encoder(nn.Module):
    def __init__(self, config: NetworkConfig):
        super().__init__()
        w1, w2, w3, w4, w5 = config.encoder_widths
        self.input_channels = config.input_channels
        self.stem = nn.Sequential(
            conv3x3(config.input_channels, w1),
            nn.BatchNorm2d(w1),
            nn.ReLU(inplace=True),
        )
        self.stage1 = nn.Sequential(*make_stage(w1, w1, stride=1))
        self.stage2 = nn.Sequential(*make_stage(w1, w2, stride=2))
        self.stage3 = nn.Sequential(*make_stage(w2, w3, stride=2))
        self.stage4 = nn.Sequential(*make_stage(w3, w4, stride=2))
        self.stage5 = nn.Sequential(nn.MaxPool2d(kernel_size=2, stride=2), *make_stage(w4, w5, stride=1))
        self.out_channels = config.encoder_widths

    def check_input(self, image: torch.Tensor) -> None:
        if image.dim() != 4:
            raise ShapeError(f"expected a B x C x H x W batch, got shape {tuple(image.shape)}")
        channels, height, width = image.shape[1:]
        if channels != self.input_channels:
            raise ShapeError(f"input has {channels} channels, encoder expects {self.input_channels}")
        for name, size in (("height", height), ("width", width)):
            if size % INPUT_DIVISOR != 0:
                raise ShapeError(f"input {name} {size} is not divisible by {INPUT_DIVISOR}")

    def forward(self, image: torch.Tensor) -> List[torch.Tensor]:
        self.check_input(image)
        e1 = self.stage1(self.stem(image))
        e2 = self.stage2(e1)
        e3 = self.stage3(e2)
        e4 = self.stage4(e3)
        e5 = self.stage5(e4)
        return [e1, e2, e3, e4, e5]


def init_parameters(module: nn.Module, seed: int) -> None:
    """He fan-in init for convolutions, unit scale / zero shift for batch norm"""
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        for m in module.modules():
            if isinstance(m, nn.Conv2d):
                nn.init.kaiming_normal_(m.weight, mode="fan_in", nonlinearity="relu")
                if m.bias is not None:
                    nn.init.zeros_(m.bias)
            elif isinstance(m, nn.BatchNorm2d):
                nn.init.ones_(m.weight)
                nn.init.zeros_(m.bias)


def build_encoder(config: NetworkConfig, seed: int) -> Encoder:
    if config.base_width <= 0 or config.input_channels <= 0:
        raise ConfigError(f"invalid encoder widths: base_width={config.base_width}, "
                          f"input_channels={config.input_channels}")
    # construction and init both stay off the global generator
    with torch.random.fork_rng(devices=[]):
        encoder = Encoder(config)
        init_parameters(encoder, seed)
    return encoder


def encode(encoder: Encoder, image: torch.Tensor) -> List[torch.Tensor]:
    return encoder(image)


class ImportReport(NamedTuple):
    loaded: List[str]
    skipped: List[str]


def _torchvision_name(name: str) -> str:
    """Map a torchvision ResNet18 key onto this encoder's naming"""
    name = name.replace("downsample", "shortcut")
    for i in range(1, 5):
        if name.startswith(f"layer{i}."):
            return f"stage{i}." + name[len(f"layer{i}."):]
    return name


def import_backbone_weights(encoder: Encoder, state_dict: Mapping[str, torch.Tensor]) -> ImportReport:
    """Copy matching ResNet18 tensors (e.g. ImageNet weights) into the encoder"""
    own: Dict[str, torch.Tensor] = encoder.state_dict()
    loaded, skipped = [], []
    updates = {}
    for name, tensor in state_dict.items():
        target = _torchvision_name(name)
        if target in own and own[target].shape == tensor.shape:
            updates[target] = tensor.to(own[target].dtype)
            loaded.append(target)
        else:
            skipped.append(name)
    encoder.load_state_dict(updates, strict=False)
    logger.info("Imported %d backbone tensors, skipped %d", len(loaded), len(skipped))
    return ImportReport(loaded=loaded, skipped=skipped)
