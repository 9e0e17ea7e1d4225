"""
Core data models for the JAFFNet defect saliency detector
"""
import hashlib
import math
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


NUM_SIDE_OUTPUTS = 5
REFERENCE_WIDTH = 64


class FusionKind(str, Enum):
    JAFF = "jaff"
    CONCAT = "concat"


class ContextKind(str, Enum):
    DRF = "drf"
    RESBLOCKS = "resblocks"


class DefectKind(str, Enum):
    SCRATCH = "scratch"
    PATCH = "patch"
    INCLUSION = "inclusion"
    NONE = "none"


class Background(str, Enum):
    FLAT = "flat"
    GRATING = "grating"
    BLOBS = "blobs"


class NetworkConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    base_width: int = 64
    input_channels: int = 1
    mrf_rates: Tuple[int, int, int] = (1, 2, 4)
    num_side_outputs: int = NUM_SIDE_OUTPUTS
    decoder_widths: Tuple[int, int, int, int] = (256, 128, 64, 64)
    ssim_window: int = 11
    ssim_sigma: float = 1.5
    fusion: FusionKind = FusionKind.JAFF
    context: ContextKind = ContextKind.DRF
    channel_attention: bool = True
    spatial_attention: bool = True

    @field_validator("base_width")
    @classmethod
    def _check_width(cls, value: int) -> int:
        if value <= 0 or value % 4 != 0:
            raise ValueError(f"base_width must be a positive multiple of 4, got {value}")
        return value

    @field_validator("input_channels")
    @classmethod
    def _check_channels(cls, value: int) -> int:
        if value <= 0:
            raise ValueError(f"input_channels must be positive, got {value}")
        return value

    @field_validator("mrf_rates")
    @classmethod
    def _check_rates(cls, value: Tuple[int, int, int]) -> Tuple[int, int, int]:
        if value[0] <= 0 or not all(a < b for a, b in zip(value, value[1:])):
            raise ValueError(f"mrf_rates must be positive and strictly increasing, got {value}")
        return value

    @field_validator("num_side_outputs")
    @classmethod
    def _check_side_outputs(cls, value: int) -> int:
        if value != NUM_SIDE_OUTPUTS:
            raise ValueError(f"num_side_outputs is fixed at {NUM_SIDE_OUTPUTS}, got {value}")
        return value

    @field_validator("decoder_widths")
    @classmethod
    def _check_decoder(cls, value: Tuple[int, int, int, int]) -> Tuple[int, int, int, int]:
        if any(w <= 0 for w in value):
            raise ValueError(f"decoder_widths must be positive, got {value}")
        return value

    @field_validator("ssim_window")
    @classmethod
    def _check_window(cls, value: int) -> int:
        if value < 3 or value % 2 == 0:
            raise ValueError(f"ssim_window must be odd and >= 3, got {value}")
        return value

    @field_validator("ssim_sigma")
    @classmethod
    def _check_sigma(cls, value: float) -> float:
        if value <= 0:
            raise ValueError(f"ssim_sigma must be positive, got {value}")
        return value

    @property
    def encoder_widths(self) -> Tuple[int, int, int, int, int]:
        w = self.base_width
        return (w, 2 * w, 4 * w, 8 * w, 8 * w)

    @property
    def stage_widths(self) -> Tuple[int, int, int, int]:
        """Decoder widths scaled to the configured base width"""
        return tuple(max(1, d * self.base_width // REFERENCE_WIDTH) for d in self.decoder_widths)

    def config_hash(self) -> str:
        return hashlib.sha256(self.model_dump_json().encode("utf-8")).hexdigest()


class LossConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    use_bce: bool = True
    use_iou: bool = True
    use_ssim: bool = True
    deep_supervision: bool = True
    bce_eps: float = 1e-7

    @model_validator(mode="after")
    def _check_terms(self) -> "LossConfig":
        if not (self.use_bce or self.use_iou or self.use_ssim):
            raise ValueError("at least one of use_bce, use_iou, use_ssim must be enabled")
        return self


class RunConfig(BaseModel):
    network: NetworkConfig = NetworkConfig()
    loss: LossConfig = LossConfig()
    learning_rate: float = Field(default=1e-3, gt=0)
    weight_decay: float = Field(default=0.0, ge=0)
    batch_size: int = Field(default=8, ge=1)
    epochs: Optional[int] = Field(default=None, ge=1)
    steps: int = Field(default=500, ge=1)
    seed: int = 0
    resize_size: int = 256
    crop_size: int = 224
    flip: bool = True
    noisy_fraction: float = Field(default=0.0, ge=0, le=1)
    noise_rho: float = Field(default=0.2, ge=0, le=1)
    log_every: int = Field(default=10, ge=1)
    checkpoint_every: int = Field(default=0, ge=0)
    num_workers: int = Field(default=0, ge=0)
    device: str = "cpu"

    @model_validator(mode="after")
    def _check_sizes(self) -> "RunConfig":
        if self.crop_size > self.resize_size:
            raise ValueError(f"crop_size {self.crop_size} exceeds resize_size {self.resize_size}")
        if self.crop_size % 16 != 0:
            raise ValueError(f"crop_size must be divisible by 16, got {self.crop_size}")
        return self


class SynthSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    image_size: int = Field(default=64, ge=16)
    defect_kind: DefectKind = DefectKind.SCRATCH
    contrast: float = Field(default=1.0, gt=0, le=1)
    background: Background = Background.FLAT
    noise_rho: float = Field(default=0.0, ge=0, le=1)
    seed: int = Field(default=0, ge=0)


class SynthDatasetConfig(BaseModel):
    """A batch of synthetic samples; item i uses seed + i"""
    model_config = ConfigDict(frozen=True)

    n: int = Field(default=8, ge=1)
    image_size: int = Field(default=64, ge=16)
    kinds: Tuple[DefectKind, ...] = (DefectKind.SCRATCH, DefectKind.PATCH, DefectKind.INCLUSION)
    backgrounds: Tuple[Background, ...] = (Background.FLAT, Background.GRATING, Background.BLOBS)
    contrast_range: Tuple[float, float] = (0.4, 1.0)
    noise_rho: float = Field(default=0.2, ge=0, le=1)
    noisy_fraction: float = Field(default=0.0, ge=0, le=1)
    seed: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _check_choices(self) -> "SynthDatasetConfig":
        if not self.kinds or not self.backgrounds:
            raise ValueError("kinds and backgrounds must not be empty")
        low, high = self.contrast_range
        if not 0 < low <= high <= 1:
            raise ValueError(f"contrast_range must satisfy 0 < low <= high <= 1, got {self.contrast_range}")
        return self


class SynthManifestEntry(SynthSpec):
    name: str


class SynthManifest(BaseModel):
    config: SynthDatasetConfig
    samples: List[SynthManifestEntry]


class Sample(BaseModel):
    """Gray image in [0,1] (H x W) with its binary defect mask"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    image: np.ndarray
    mask: np.ndarray

    @model_validator(mode="after")
    def _check_pair(self) -> "Sample":
        if self.image.shape != self.mask.shape:
            raise ValueError(f"image shape {self.image.shape} != mask shape {self.mask.shape}")
        if not np.isin(self.mask, (0, 1)).all():
            raise ValueError("mask must be binary")
        return self


class LossTerms(BaseModel):
    bce: float = 0.0
    iou: float = 0.0
    ssim: float = 0.0

    @property
    def sum(self) -> float:
        return self.bce + self.iou + self.ssim


class LossBreakdown(BaseModel):
    per_output: List[LossTerms]
    total: float

    @classmethod
    def from_terms(cls, terms: List[LossTerms]) -> "LossBreakdown":
        total = math.fsum(v for t in terms for v in (t.bce, t.iou, t.ssim))
        return cls(per_output=terms, total=total)

    def as_row(self, step: int) -> dict:
        row = {"step": step}
        for k, terms in enumerate(self.per_output, start=1):
            row[f"out{k}_bce"] = terms.bce
            row[f"out{k}_iou"] = terms.iou
            row[f"out{k}_ssim"] = terms.ssim
        row["total"] = self.total
        return row


class TrainingSummary(BaseModel):
    start_step: int
    final_step: int
    initial_loss: Optional[float] = None
    final_loss: Optional[float] = None
    checkpoint: str
    loss_log: str

    @property
    def steps_run(self) -> int:
        return self.final_step - self.start_step


class ImageMetrics(BaseModel):
    name: str
    height: int
    width: int
    mae: float
    f_w: Optional[float] = None
    s_m: float
    e_m: float
    max_f: Optional[float] = None
    degenerate: bool = False


class MetricReport(BaseModel):
    mae: float
    f_w: Optional[float] = None
    s_m: float
    e_m: float
    max_f: Optional[float] = None
    mean_f: Optional[float] = None
    precision: List[float] = []
    recall: List[float] = []
    f_beta: List[float] = []
    num_images: int = 0
    num_degenerate: int = 0
    num_skipped: int = 0


class TensorEntry(BaseModel):
    name: str
    shape: List[int]
    dtype: str
    offset: int
    nbytes: int
    sha256: str


class OptimizerMeta(BaseModel):
    learning_rate: float
    betas: Tuple[float, float]
    eps: float
    weight_decay: float
    step: int


class CheckpointManifest(BaseModel):
    format_version: int
    config_hash: str
    network: NetworkConfig
    step: int = 0
    optimizer: Optional[OptimizerMeta] = None
    tensors: List[TensorEntry]
