"""
Run configuration: flat key=value files, presets and validation
"""
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Union

from pydantic import ValidationError

from src.errors import ConfigError
from src.models import LossConfig, NetworkConfig, RunConfig
from src.presets import PRESET_TABLES, preset_names, preset_overrides

logger = logging.getLogger(__name__)

NETWORK_KEYS = set(NetworkConfig.model_fields)
LOSS_KEYS = set(LossConfig.model_fields)
RUN_KEYS = set(RunConfig.model_fields) - {"network", "loss"}
TUPLE_KEYS = {"mrf_rates", "decoder_widths"}


def describe_validation_error(exc: ValidationError) -> str:
    return "; ".join(
        f"{'.'.join(str(part) for part in error['loc']) or 'config'}: {error['msg']}"
        for error in exc.errors()
    )


def parse_config_text(text: str, source: str = "<config>") -> Dict[str, str]:
    """Parse key=value lines; '#' starts a comment"""
    values: Dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got '{line}'")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key '{key}'")
        values[key] = value
    return values


def _coerce(key: str, value: Any) -> Any:
    if key in TUPLE_KEYS and isinstance(value, str):
        return [item.strip() for item in value.split(",") if item.strip()]
    if key == "epochs" and isinstance(value, str) and value.lower() in ("", "none"):
        return None
    return value


def build_run_config(values: Dict[str, Any]) -> RunConfig:
    """Apply presets, route flat keys to their models and validate"""
    values = dict(values)
    merged: Dict[str, Any] = {}
    for table_key in PRESET_TABLES:
        name = values.pop(table_key, None)
        if name is None:
            continue
        overrides = preset_overrides(table_key, str(name))
        if overrides is None:
            raise ConfigError(
                f"unknown {table_key} '{name}' (choices: {', '.join(preset_names(table_key))})"
            )
        logger.debug("Applying %s '%s': %s", table_key, name, overrides)
        merged.update(overrides)
    merged.update(values)

    network: Dict[str, Any] = {}
    loss: Dict[str, Any] = {}
    run: Dict[str, Any] = {}
    for key, value in merged.items():
        if key in NETWORK_KEYS:
            network[key] = _coerce(key, value)
        elif key in LOSS_KEYS:
            loss[key] = _coerce(key, value)
        elif key in RUN_KEYS:
            run[key] = _coerce(key, value)
        else:
            raise ConfigError(f"unknown config key '{key}'")

    network_settings = network_config(**network)
    try:
        return RunConfig(network=network_settings, loss=LossConfig(**loss), **run)
    except ValidationError as exc:
        raise ConfigError(describe_validation_error(exc)) from exc


def load_run_config(path: Optional[Union[str, Path]] = None, **overrides: Any) -> RunConfig:
    """Read a config file (optional) and apply CLI overrides that are not None"""
    values: Dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config file '{path}': {exc}") from exc
        values = parse_config_text(text, source=str(path))
    values.update({k: v for k, v in overrides.items() if v is not None})
    return build_run_config(values)


def network_config(**overrides: Any) -> NetworkConfig:
    try:
        return NetworkConfig(**overrides)
    except ValidationError as exc:
        raise ConfigError(describe_validation_error(exc)) from exc


def network_diff(expected: NetworkConfig, found: NetworkConfig) -> Dict[str, tuple]:
    """Fields whose values differ between two network configs"""
    a, b = expected.model_dump(mode="json"), found.model_dump(mode="json")
    return {key: (a[key], b[key]) for key in a if a[key] != b[key]}
