import numpy as np
import pytest
import torch

from src.models import NetworkConfig, SynthDatasetConfig
from src.synth import write_dataset


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_config():
    return NetworkConfig(base_width=16)


@pytest.fixture
def synth_dir(tmp_path):
    """Eight 64x64 synthetic samples"""
    out = tmp_path / "synth"
    write_dataset(SynthDatasetConfig(n=8, image_size=64, seed=1), out)
    return out


@pytest.fixture
def double_precision():
    previous = torch.get_default_dtype()
    torch.set_default_dtype(torch.float64)
    yield
    torch.set_default_dtype(previous)
