import logging

import pytest

from src.config import build_run_config, load_run_config, network_config, network_diff, parse_config_text
from src.errors import ConfigError
from src.models import ContextKind, FusionKind, NetworkConfig
from src.runtime import THREADS_ENV, evaluator_threads

from tests.helpers import CONFIGS


class TestParse:
    def test_comments_and_blank_lines(self):
        text = "# desk run\n\nlearning_rate = 0.01  # faster\nseed=3\n"
        assert parse_config_text(text) == {"learning_rate": "0.01", "seed": "3"}

    def test_missing_equals(self):
        with pytest.raises(ConfigError, match=":2:"):
            parse_config_text("seed = 1\nbatch_size 4\n", source="run.cfg")

    def test_duplicate_key(self):
        with pytest.raises(ConfigError, match="duplicate key 'seed'"):
            parse_config_text("seed = 1\nseed = 2\n")

class TestBuild:
    def test_defaults(self):
        config = build_run_config({})
        assert config.network == NetworkConfig()
        assert config.learning_rate == 1e-3
        assert config.crop_size == 224 and config.resize_size == 256

    def test_values_are_coerced(self):
        config = build_run_config({"batch_size": "4", "flip": "false", "mrf_rates": "1, 3, 5"})
        assert config.batch_size == 4
        assert config.flip is False
        assert config.network.mrf_rates == (1, 3, 5)

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="unknown config key 'momentum'"):
            build_run_config({"momentum": "0.9"})

    def test_unknown_preset(self):
        with pytest.raises(ConfigError, match="choices"):
            build_run_config({"preset": "wo_everything"})

    @pytest.mark.parametrize("values", [
        {"base_width": "6"},
        {"mrf_rates": "4, 2, 1"},
        {"crop_size": "300"},
        {"learning_rate": "0"},
        {"use_bce": "false", "use_iou": "false", "use_ssim": "false"},
    ])
    def test_invalid_values(self, values):
        with pytest.raises(ConfigError):
            build_run_config(values)

    def test_epochs_none(self):
        assert build_run_config({"epochs": "none"}).epochs is None

class TestPresets:
    def test_baseline(self):
        network = build_run_config({"preset": "baseline"}).network
        assert network.fusion == FusionKind.CONCAT
        assert network.context == ContextKind.RESBLOCKS

    @pytest.mark.parametrize("preset, field", [("wo_cab", "channel_attention"), ("wo_sab", "spatial_attention")])
    def test_attention_ablations(self, preset, field):
        assert getattr(build_run_config({"preset": preset}).network, field) is False

    def test_wo_dp(self):
        assert build_run_config({"loss_preset": "wo_dp"}).loss.deep_supervision is False

    def test_file_keys_override_presets(self):
        config = build_run_config({"dataset_preset": "desk", "steps": "20", "base_width": "8"})
        assert config.steps == 20
        assert config.network.base_width == 8
        assert config.crop_size == 64

    def test_dataset_protocol(self):
        config = build_run_config({"dataset_preset": "mtile"})
        assert (config.epochs, config.batch_size) == (900, 5)

    def test_sd900_noisy_third(self):
        config = build_run_config({"dataset_preset": "sd900"})
        assert (config.epochs, config.batch_size) == (600, 8)
        assert config.noisy_fraction == pytest.approx(1 / 3)
        assert config.noise_rho == 0.2
        assert build_run_config({}).noisy_fraction == 0.0

class TestLoad:
    def test_desk_file(self):
        config = load_run_config(CONFIGS / "desk.cfg")
        assert config.network.base_width == 16
        assert config.steps == 500

    def test_cli_overrides(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("seed = 1\n")
        assert load_run_config(path, seed=9, steps=None).seed == 9

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            load_run_config(tmp_path / "absent.cfg")

    @pytest.mark.parametrize("name", [
        "desk", "sd900", "mtile", "dagm", "ablation_wo_jaff", "ablation_wo_drf",
        "ablation_wo_cab", "ablation_wo_sab", "ablation_baseline", "ablation_wo_dp",
    ])
    def test_shipped_configs_validate(self, name):
        load_run_config(CONFIGS / f"{name}.cfg")

def test_network_config_error():
    with pytest.raises(ConfigError, match="base_width"):
        network_config(base_width=-4)
    with pytest.raises(ConfigError, match="base_width"):
        build_run_config({"base_width": "-4"})

def test_network_diff():
    diff = network_diff(NetworkConfig(), NetworkConfig(base_width=16, fusion=FusionKind.CONCAT))
    assert diff == {"base_width": (64, 16), "fusion": ("jaff", "concat")}
    assert network_diff(NetworkConfig(), NetworkConfig()) == {}

class TestThreads:
    def test_default(self, monkeypatch):
        monkeypatch.delenv(THREADS_ENV, raising=False)
        assert evaluator_threads() == 1

    def test_cap(self, monkeypatch):
        monkeypatch.setenv(THREADS_ENV, "4")
        assert evaluator_threads() == 4

    @pytest.mark.parametrize("raw", ["many", "0"])
    def test_invalid_falls_back(self, monkeypatch, caplog, raw):
        monkeypatch.setenv(THREADS_ENV, raw)
        with caplog.at_level(logging.WARNING, logger="src.runtime"):
            assert evaluator_threads() == 1
        assert THREADS_ENV in caplog.text
