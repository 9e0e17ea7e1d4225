"""
Checkpoint directories: manifest.json (tensor table, network config, training meta)
plus payload.bin (raw little-endian tensors in manifest order).
"""
import hashlib
import logging
from collections import OrderedDict
from pathlib import Path
from typing import Dict, NamedTuple, Optional, Union

import numpy as np
import torch
from pydantic import ValidationError

from src.errors import CheckpointError, ChecksumError, ManifestError, ShapeMismatchError
from src.models import CheckpointManifest, OptimizerMeta, TensorEntry
from src.network import JAFFNet

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
MANIFEST_NAME = "manifest.json"
PAYLOAD_NAME = "payload.bin"
MODEL_PREFIX = "model."
OPTIMIZER_PREFIX = "optimizer."
DTYPES = {"float32": np.dtype("<f4"), "int64": np.dtype("<i8")}


class LoadedCheckpoint(NamedTuple):
    model: JAFFNet
    manifest: CheckpointManifest
    step: int


def _to_array(tensor: torch.Tensor) -> np.ndarray:
    array = tensor.detach().cpu().numpy()
    dtype = DTYPES["float32"] if tensor.is_floating_point() else DTYPES["int64"]
    return np.ascontiguousarray(array.astype(dtype))


def _dtype_name(array: np.ndarray) -> str:
    return "float32" if array.dtype == DTYPES["float32"] else "int64"


def _optimizer_tensors(model: torch.nn.Module, optimizer: torch.optim.Optimizer) -> Dict[str, torch.Tensor]:
    names = {id(p): name for name, p in model.named_parameters()}
    tensors: Dict[str, torch.Tensor] = OrderedDict()
    for group in optimizer.param_groups:
        for param in group["params"]:
            for key, value in optimizer.state.get(param, {}).items():
                if torch.is_tensor(value):
                    tensors[f"{OPTIMIZER_PREFIX}{names[id(param)]}.{key}"] = value
    return tensors


def _optimizer_meta(optimizer: torch.optim.Optimizer, step: int) -> OptimizerMeta:
    group = optimizer.param_groups[0]
    return OptimizerMeta(
        learning_rate=group["lr"],
        betas=tuple(group.get("betas", (0.9, 0.999))),
        eps=group.get("eps", 1e-8),
        weight_decay=group.get("weight_decay", 0.0),
        step=step,
    )


def checkpoint_save(path: Union[str, Path], model: JAFFNet,
                    optimizer: Optional[torch.optim.Optimizer] = None, step: int = 0) -> Path:
    """Write model parameters and buffers (and Adam moments) to a checkpoint directory"""
    path = Path(path)
    tensors: Dict[str, torch.Tensor] = OrderedDict(
        (MODEL_PREFIX + name, t) for name, t in model.state_dict().items()
    )
    if optimizer is not None:
        tensors.update(_optimizer_tensors(model, optimizer))

    entries, chunks, offset = [], [], 0
    for name, tensor in tensors.items():
        array = _to_array(tensor)
        data = array.tobytes()
        entries.append(TensorEntry(
            name=name,
            shape=list(tensor.shape),
            dtype=_dtype_name(array),
            offset=offset,
            nbytes=len(data),
            sha256=hashlib.sha256(data).hexdigest(),
        ))
        chunks.append(data)
        offset += len(data)

    manifest = CheckpointManifest(
        format_version=FORMAT_VERSION,
        config_hash=model.config.config_hash(),
        network=model.config,
        step=step,
        optimizer=_optimizer_meta(optimizer, step) if optimizer is not None else None,
        tensors=entries,
    )
    try:
        path.mkdir(parents=True, exist_ok=True)
        (path / PAYLOAD_NAME).write_bytes(b"".join(chunks))
        (path / MANIFEST_NAME).write_text(manifest.model_dump_json(indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        raise CheckpointError(f"cannot write checkpoint '{path}': {exc}") from exc
    logger.debug("Saved checkpoint '%s' (%d tensors, %d bytes)", path, len(entries), offset)
    return path


def read_manifest(path: Union[str, Path]) -> CheckpointManifest:
    manifest_path = Path(path) / MANIFEST_NAME
    try:
        text = manifest_path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ManifestError(f"cannot read checkpoint manifest '{manifest_path}': {exc}") from exc
    try:
        manifest = CheckpointManifest.model_validate_json(text)
    except ValidationError as exc:
        raise ManifestError(f"corrupt checkpoint manifest '{manifest_path}': {exc}") from exc
    if manifest.format_version != FORMAT_VERSION:
        raise ManifestError(
            f"unsupported checkpoint format {manifest.format_version} (expected {FORMAT_VERSION})"
        )
    if manifest.config_hash != manifest.network.config_hash():
        raise ManifestError(f"config hash in '{manifest_path}' does not match its network config")
    return manifest


def _read_tensor(payload: bytes, entry: TensorEntry) -> np.ndarray:
    if entry.dtype not in DTYPES:
        raise ManifestError(f"tensor '{entry.name}': unsupported dtype '{entry.dtype}'")
    dtype = DTYPES[entry.dtype]
    expected = int(np.prod(entry.shape, dtype=np.int64)) * dtype.itemsize
    if entry.nbytes != expected:
        raise ChecksumError(entry.name, f"manifest lists {entry.nbytes} bytes, shape implies {expected}")
    end = entry.offset + entry.nbytes
    if end > len(payload):
        raise ChecksumError(entry.name, f"payload truncated: needs bytes {entry.offset}..{end}, "
                                        f"file has {len(payload)}")
    data = payload[entry.offset:end]
    if hashlib.sha256(data).hexdigest() != entry.sha256:
        raise ChecksumError(entry.name, "sha256 mismatch")
    return np.frombuffer(data, dtype=dtype).reshape(entry.shape)


def _load_model_state(model: JAFFNet, arrays: Dict[str, np.ndarray]) -> None:
    own = model.state_dict()
    for name, array in arrays.items():
        if name in own and tuple(own[name].shape) != array.shape:
            raise ShapeMismatchError(name, own[name].shape, array.shape)
    missing = [name for name in own if name not in arrays]
    unexpected = [name for name in arrays if name not in own]
    if missing or unexpected:
        raise ManifestError(
            f"checkpoint tensors do not match the model: missing {missing[:3]}, unexpected {unexpected[:3]}"
        )
    state = {name: torch.from_numpy(array.copy()).to(own[name].dtype) for name, array in arrays.items()}
    model.load_state_dict(state, strict=True)


def _load_optimizer_state(model: JAFFNet, optimizer: torch.optim.Optimizer,
                          arrays: Dict[str, np.ndarray]) -> None:
    names = {id(p): name for name, p in model.named_parameters()}
    current = optimizer.state_dict()
    state = {}
    index = 0
    for group in optimizer.param_groups:
        for param in group["params"]:
            prefix = f"{OPTIMIZER_PREFIX}{names[id(param)]}."
            entries = {
                key[len(prefix):]: torch.from_numpy(array.copy())
                for key, array in arrays.items() if key.startswith(prefix)
            }
            if entries:
                state[index] = entries
            index += 1
    optimizer.load_state_dict({"state": state, "param_groups": current["param_groups"]})


def checkpoint_load(path: Union[str, Path], model: Optional[JAFFNet] = None,
                    optimizer: Optional[torch.optim.Optimizer] = None) -> LoadedCheckpoint:
    """Verify and load a checkpoint; builds the model from the manifest when none is given"""
    path = Path(path)
    manifest = read_manifest(path)
    try:
        payload = (path / PAYLOAD_NAME).read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint payload in '{path}': {exc}") from exc

    model_arrays: Dict[str, np.ndarray] = OrderedDict()
    optimizer_arrays: Dict[str, np.ndarray] = OrderedDict()
    for entry in manifest.tensors:
        array = _read_tensor(payload, entry)
        if entry.name.startswith(MODEL_PREFIX):
            model_arrays[entry.name[len(MODEL_PREFIX):]] = array
        elif entry.name.startswith(OPTIMIZER_PREFIX):
            optimizer_arrays[entry.name] = array
        else:
            raise ManifestError(f"tensor '{entry.name}' has no model/optimizer prefix")

    if model is None:
        model = JAFFNet(manifest.network)
    _load_model_state(model, model_arrays)
    if optimizer is not None and optimizer_arrays:
        _load_optimizer_state(model, optimizer, optimizer_arrays)
    logger.info("Loaded checkpoint '%s' at step %d", path, manifest.step)
    return LoadedCheckpoint(model=model, manifest=manifest, step=manifest.step)
