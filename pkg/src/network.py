"""
JAFFNet assembly: encoder -> context module -> four fusion decode stages, with five
deeply supervised side outputs (context stage, then D1..D4).
"""
import logging
from collections import OrderedDict
from typing import Dict, List, NamedTuple, Tuple

import torch
import torch.nn.functional as F
from torch import nn

from src.drf import DenseReceptiveField, ResidualContext
from src.encoder import Encoder, conv3x3, init_parameters
from src.errors import ShapeError
from src.jaff import ConcatFusion, JointAttentionFusion
from src.models import ContextKind, FusionKind, NetworkConfig

logger = logging.getLogger(__name__)

REFERENCE_PARAM_COUNT = 41.94e6
PARAM_BAND = 0.30
STAGE_NAMES = ("D1", "D2", "D3", "D4")


class NetworkOutput(NamedTuple):
    final: torch.Tensor
    side_outputs: List[torch.Tensor]


class ConvBlock(nn.Sequential):
    def __init__(self, in_channels: int, out_channels: int):
        super().__init__(
            conv3x3(in_channels, out_channels),
            nn.BatchNorm2d(out_channels),
            nn.ReLU(inplace=True),
        )


class DecodeStage(nn.Module):
    def __init__(self, name: str, low_channels: int, high_channels: int, out_channels: int,
                 config: NetworkConfig):
        super().__init__()
        self.name = name
        if config.fusion == FusionKind.JAFF:
            self.fusion = JointAttentionFusion(
                low_channels, high_channels,
                use_channel=config.channel_attention,
                use_spatial=config.spatial_attention,
                name=name,
            )
        else:
            self.fusion = ConcatFusion(low_channels, high_channels, name=name)
        self.block = ConvBlock(self.fusion.out_channels, out_channels)
        self.out_channels = out_channels

    def forward(self, low: torch.Tensor, high: torch.Tensor) -> torch.Tensor:
        return self.block(self.fusion(low, high))


class SideHead(nn.Module):
    """3x3 conv to one channel, bilinear upsample to the input size, sigmoid"""

    def __init__(self, in_channels: int):
        super().__init__()
        self.conv = conv3x3(in_channels, 1, bias=True)

    def forward(self, x: torch.Tensor, size) -> torch.Tensor:
        logits = F.interpolate(self.conv(x), size=tuple(size), mode="bilinear", align_corners=False)
        return torch.sigmoid(logits)


class JAFFNet(nn.Module):
    def __init__(self, config: NetworkConfig):
        super().__init__()
        self.config = config
        e1, e2, e3, e4, e5 = config.encoder_widths
        d1, d2, d3, d4 = config.stage_widths
        self.encoder = Encoder(config)
        if config.context == ContextKind.DRF:
            self.context = DenseReceptiveField(e5, config.mrf_rates)
        else:
            self.context = ResidualContext(e5)
        self.stages = nn.ModuleList([
            DecodeStage("D1", e4, e5, d1, config),
            DecodeStage("D2", e3, d1, d2, config),
            DecodeStage("D3", e2, d2, d3, config),
            DecodeStage("D4", e1, d3, d4, config),
        ])
        self.side_heads = nn.ModuleList(SideHead(c) for c in (e5, d1, d2, d3, d4))

    def forward_with_features(self, image: torch.Tensor) -> Tuple[NetworkOutput, Dict[str, torch.Tensor]]:
        size = image.shape[-2:]
        features: Dict[str, torch.Tensor] = OrderedDict()
        encoded = self.encoder(image)
        for i, e in enumerate(encoded, start=1):
            features[f"E{i}"] = e
        high = self.context(encoded[-1])
        features["context"] = high
        decoded = [high]
        for stage, low in zip(self.stages, reversed(encoded[:-1])):
            try:
                high = stage(low, high)
            except ShapeError as exc:
                raise ShapeError(f"decode stage {stage.name}: {exc}") from exc
            features[stage.name] = high
            decoded.append(high)
        side_outputs = [head(x, size) for head, x in zip(self.side_heads, decoded)]
        return NetworkOutput(final=side_outputs[-1], side_outputs=side_outputs), features

    def forward(self, image: torch.Tensor) -> NetworkOutput:
        return self.forward_with_features(image)[0]

    def fusion_modules(self) -> List[nn.Module]:
        return [stage.fusion for stage in self.stages]


def build_network(config: NetworkConfig, seed: int) -> JAFFNet:
    with torch.random.fork_rng(devices=[]):
        model = JAFFNet(config)
        init_parameters(model, seed)
    return model


def forward(model: JAFFNet, image: torch.Tensor, mode: str = "eval") -> NetworkOutput:
    model.train(mode == "train")
    if mode == "train":
        return model(image)
    with torch.no_grad():
        return model(image)


def predict(model: JAFFNet, image: torch.Tensor) -> torch.Tensor:
    return forward(model, image, mode="eval").final


def count_params(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters() if p.requires_grad)


def model_size_mb(model: nn.Module) -> float:
    """Float32 footprint of parameters and buffers"""
    numel = sum(p.numel() for p in model.parameters()) + sum(
        b.numel() for b in model.buffers() if b.is_floating_point()
    )
    return numel * 4 / 1024 ** 2


def param_deviation(count: int) -> float:
    return (count - REFERENCE_PARAM_COUNT) / REFERENCE_PARAM_COUNT


def param_band_message(count: int) -> str:
    deviation = param_deviation(count)
    if abs(deviation) <= PARAM_BAND:
        return (f"{count / 1e6:.2f}M parameters, {deviation:+.1%} from the 41.94M reference "
                f"(within the ±{PARAM_BAND:.0%} band)")
    return (f"{count / 1e6:.2f}M parameters, {deviation:+.1%} from the 41.94M reference "
            f"(outside the ±{PARAM_BAND:.0%} band): revisit decoder_widths / decode-stage "
            f"conv block widths")


def stage_shapes(model: JAFFNet, input_size: Tuple[int, int]) -> Dict[str, Tuple[int, ...]]:
    """Per-stage feature shapes (C, H, W) for one eval-mode forward on zeros"""
    param = next(model.parameters())
    image = torch.zeros(1, model.config.input_channels, *input_size, dtype=param.dtype, device=param.device)
    was_training = model.training
    model.eval()
    with torch.no_grad():
        output, features = model.forward_with_features(image)
    model.train(was_training)
    shapes = {name: tuple(t.shape[1:]) for name, t in features.items()}
    shapes["final"] = tuple(output.final.shape[1:])
    return shapes
