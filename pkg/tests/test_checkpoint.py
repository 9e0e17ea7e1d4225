import json

import pytest
import torch

from src.checkpoint import (
    MANIFEST_NAME, PAYLOAD_NAME, checkpoint_load, checkpoint_save, read_manifest,
)
from src.errors import ChecksumError, ManifestError, ShapeMismatchError
from src.losses import total_loss
from src.models import NetworkConfig
from src.network import build_network, forward


def trained_a_little(config):
    model = build_network(config, seed=0)
    optimizer = torch.optim.Adam(model.parameters(), lr=1e-3)
    for _ in range(2):
        optimizer.zero_grad()
        out = forward(model, torch.randn(2, 1, 32, 32), mode="train")
        target = (torch.rand(2, 1, 32, 32) > 0.5).float()
        total_loss(out, target).total.backward()
        optimizer.step()
    return model, optimizer


def assert_same_state(a, b):
    for (name, x), (_, y) in zip(a.state_dict().items(), b.state_dict().items()):
        assert torch.equal(x, y), name


class TestRoundTrip:
    def test_parameters_bit_exact(self, tmp_path, tiny_config):
        model, optimizer = trained_a_little(tiny_config)
        checkpoint_save(tmp_path / "ckpt", model, optimizer, step=2)
        loaded = checkpoint_load(tmp_path / "ckpt")
        assert loaded.step == 2
        assert loaded.manifest.network == tiny_config
        assert_same_state(model, loaded.model)

    def test_optimizer_state_restored(self, tmp_path, tiny_config):
        model, optimizer = trained_a_little(tiny_config)
        checkpoint_save(tmp_path / "ckpt", model, optimizer, step=2)
        fresh = build_network(tiny_config, seed=5)
        fresh_optimizer = torch.optim.Adam(fresh.parameters(), lr=1e-3)
        checkpoint_load(tmp_path / "ckpt", fresh, fresh_optimizer)
        assert len(fresh_optimizer.state) == len(optimizer.state)
        for p, q in zip(model.parameters(), fresh.parameters()):
            a, b = optimizer.state[p], fresh_optimizer.state[q]
            assert set(a) == set(b)
            if "exp_avg" not in a:
                continue
            assert torch.equal(a["exp_avg"], b["exp_avg"])
            assert torch.equal(a["exp_avg_sq"], b["exp_avg_sq"])

    def test_save_is_deterministic(self, tmp_path, tiny_config):
        model = build_network(tiny_config, seed=0)
        checkpoint_save(tmp_path / "a", model)
        checkpoint_save(tmp_path / "b", model)
        for name in (MANIFEST_NAME, PAYLOAD_NAME):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_manifest_contents(self, tmp_path, tiny_config):
        model = build_network(tiny_config, seed=0)
        checkpoint_save(tmp_path / "ckpt", model)
        manifest = read_manifest(tmp_path / "ckpt")
        assert manifest.config_hash == tiny_config.config_hash()
        assert manifest.optimizer is None
        payload = (tmp_path / "ckpt" / PAYLOAD_NAME).read_bytes()
        assert sum(t.nbytes for t in manifest.tensors) == len(payload)
        assert {t.dtype for t in manifest.tensors} == {"float32", "int64"}


class TestCorruption:
    def test_truncated_payload_names_tensor(self, tmp_path, tiny_config):
        checkpoint_save(tmp_path / "ckpt", build_network(tiny_config, seed=0))
        payload = tmp_path / "ckpt" / PAYLOAD_NAME
        payload.write_bytes(payload.read_bytes()[:-1])
        last = read_manifest(tmp_path / "ckpt").tensors[-1].name
        with pytest.raises(ChecksumError) as info:
            checkpoint_load(tmp_path / "ckpt")
        assert info.value.tensor == last

    def test_flipped_byte(self, tmp_path, tiny_config):
        checkpoint_save(tmp_path / "ckpt", build_network(tiny_config, seed=0))
        payload = tmp_path / "ckpt" / PAYLOAD_NAME
        data = bytearray(payload.read_bytes())
        data[3] ^= 0xFF
        payload.write_bytes(bytes(data))
        first = read_manifest(tmp_path / "ckpt").tensors[0].name
        with pytest.raises(ChecksumError, match="sha256"):
            checkpoint_load(tmp_path / "ckpt")
        with pytest.raises(ChecksumError) as info:
            checkpoint_load(tmp_path / "ckpt")
        assert info.value.tensor == first

    def test_corrupt_manifest(self, tmp_path, tiny_config):
        checkpoint_save(tmp_path / "ckpt", build_network(tiny_config, seed=0))
        (tmp_path / "ckpt" / MANIFEST_NAME).write_text("{not json")
        with pytest.raises(ManifestError):
            checkpoint_load(tmp_path / "ckpt")

    def test_tampered_config(self, tmp_path, tiny_config):
        checkpoint_save(tmp_path / "ckpt", build_network(tiny_config, seed=0))
        path = tmp_path / "ckpt" / MANIFEST_NAME
        manifest = json.loads(path.read_text())
        manifest["network"]["base_width"] = 32
        path.write_text(json.dumps(manifest))
        with pytest.raises(ManifestError, match="hash"):
            read_manifest(tmp_path / "ckpt")

    def test_missing_checkpoint(self, tmp_path):
        with pytest.raises(ManifestError):
            checkpoint_load(tmp_path / "nowhere")

    def test_differently_configured_model(self, tmp_path, tiny_config):
        checkpoint_save(tmp_path / "ckpt", build_network(tiny_config, seed=0))
        other = build_network(NetworkConfig(base_width=32), seed=0)
        with pytest.raises(ShapeMismatchError) as info:
            checkpoint_load(tmp_path / "ckpt", other)
        assert info.value.tensor == "encoder.stem.0.weight"
