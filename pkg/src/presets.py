"""
Preset registry: architecture ablations, loss ablations and dataset protocols
"""
from enum import Enum
from typing import Any, Dict, List


class ArchitecturePreset(str, Enum):
    FULL = "full"
    BASELINE = "baseline"
    WO_JAFF = "wo_jaff"
    WO_DRF = "wo_drf"
    WO_CAB = "wo_cab"
    WO_SAB = "wo_sab"


class LossPreset(str, Enum):
    HYBRID = "hybrid"
    BCE = "bce"
    BCE_IOU = "bce_iou"
    BCE_SSIM = "bce_ssim"
    WO_DP = "wo_dp"


class DatasetPreset(str, Enum):
    SD900 = "sd900"
    MTILE = "mtile"
    DAGM = "dagm"
    DESK = "desk"


# Overrides are flat config keys, applied before the keys of a config file
ARCHITECTURE_OVERRIDES: Dict[str, Dict[str, Any]] = {
    ArchitecturePreset.FULL.value: {},
    ArchitecturePreset.BASELINE.value: {"fusion": "concat", "context": "resblocks"},
    ArchitecturePreset.WO_JAFF.value: {"fusion": "concat"},
    ArchitecturePreset.WO_DRF.value: {"context": "resblocks"},
    ArchitecturePreset.WO_CAB.value: {"channel_attention": False},
    ArchitecturePreset.WO_SAB.value: {"spatial_attention": False},
}

LOSS_OVERRIDES: Dict[str, Dict[str, Any]] = {
    LossPreset.HYBRID.value: {},
    LossPreset.BCE.value: {"use_iou": False, "use_ssim": False},
    LossPreset.BCE_IOU.value: {"use_ssim": False},
    LossPreset.BCE_SSIM.value: {"use_iou": False},
    LossPreset.WO_DP.value: {"deep_supervision": False},
}

# Epoch and batch settings of the three public benchmarks are recorded as published;
# they presume the real datasets and are not exercised at desk scale.
DATASET_OVERRIDES: Dict[str, Dict[str, Any]] = {
    DatasetPreset.SD900.value: {"epochs": 600, "batch_size": 8, "noisy_fraction": 1 / 3, "noise_rho": 0.2},
    DatasetPreset.MTILE.value: {"epochs": 900, "batch_size": 5},
    DatasetPreset.DAGM.value: {"epochs": 300, "batch_size": 8},
    DatasetPreset.DESK.value: {
        "base_width": 16,
        "batch_size": 8,
        "steps": 500,
        "resize_size": 64,
        "crop_size": 64,
    },
}

PRESET_TABLES: Dict[str, Dict[str, Dict[str, Any]]] = {
    "preset": ARCHITECTURE_OVERRIDES,
    "loss_preset": LOSS_OVERRIDES,
    "dataset_preset": DATASET_OVERRIDES,
}


def preset_names(table_key: str) -> List[str]:
    return list(PRESET_TABLES[table_key])


def preset_overrides(table_key: str, name: str) -> Dict[str, Any]:
    """Flat overrides for one preset; None if the name is unknown"""
    return PRESET_TABLES[table_key].get(name)
