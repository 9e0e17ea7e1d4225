"""
Command implementations behind main.py: train, infer, eval, synth, inspect
"""
import logging
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np
import torch
import torch.nn.functional as F
from pydantic import ValidationError

from src.checkpoint import checkpoint_load, read_manifest
from src.config import describe_validation_error, load_run_config, network_diff
from src.data import IMAGE_SUFFIX, RESIZE_SIZE, read_gray, test_transform, write_gray
from src.errors import ConfigError, ConfigMismatchError, DataError, EmptyDatasetError, OutputDirError
from src.evaluator import evaluate_dataset, write_report
from src.models import MetricReport, NetworkConfig, SynthDatasetConfig, SynthSpec, TrainingSummary
from src.network import (
    JAFFNet, build_network, count_params, model_size_mb, param_band_message, predict, stage_shapes,
)
from src.report_formatter import ReportFormatter
from src.synth import write_dataset
from src.trainer import train

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def _saved(path: PathLike) -> None:
    print(f"✅ Output saved to: {path}")


def cmd_train(config_path: Optional[PathLike], data_dir: PathLike, out_dir: PathLike,
              ckpt: Optional[PathLike] = None, seed: Optional[int] = None,
              steps: Optional[int] = None) -> TrainingSummary:
    # An explicit step count replaces any epoch count from the config or a preset
    config = load_run_config(config_path, seed=seed, steps=steps,
                             epochs="none" if steps is not None else None)
    summary = train(config, data_dir, out_dir, resume=ckpt)
    print(ReportFormatter().format_training(summary))
    _saved(summary.checkpoint)
    return summary


def _input_images(input_path: Path) -> List[Path]:
    if input_path.is_dir():
        images = sorted(input_path.glob(f"*{IMAGE_SUFFIX}"))
        if not images:
            raise EmptyDatasetError(f"no {IMAGE_SUFFIX} images under '{input_path}'")
        return images
    if not input_path.is_file():
        raise DataError(f"input '{input_path}' does not exist")
    return [input_path]


def load_for_inference(ckpt: PathLike, config_path: Optional[PathLike] = None) -> JAFFNet:
    if config_path is not None:
        expected = load_run_config(config_path).network
        found = read_manifest(ckpt).network
        if expected != found:
            raise ConfigMismatchError(network_diff(expected, found))
    return checkpoint_load(ckpt).model


def infer_image(model: JAFFNet, gray: np.ndarray, size: int = RESIZE_SIZE) -> np.ndarray:
    """Saliency map for one gray image in [0,1], rescaled to the image's own resolution"""
    height, width = gray.shape
    x = torch.from_numpy(test_transform(gray, size)).float()[None, None]
    pred = predict(model, x)
    pred = F.interpolate(pred, size=(height, width), mode="bilinear", align_corners=False)
    return pred[0, 0].clamp(0, 1).numpy()


def cmd_infer(ckpt: PathLike, input_path: PathLike, out_dir: PathLike,
              config_path: Optional[PathLike] = None, size: int = RESIZE_SIZE) -> List[Path]:
    model = load_for_inference(ckpt, config_path)
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutputDirError(f"cannot create output directory '{out_dir}': {exc}") from exc

    written = []
    for image_path in _input_images(Path(input_path)):
        gray = read_gray(image_path)
        if gray is None:
            raise DataError(f"unreadable image '{image_path}'")
        target = out_dir / (image_path.stem + IMAGE_SUFFIX)
        write_gray(target, infer_image(model, gray, size))
        written.append(target)
    logger.info("Wrote %d saliency maps", len(written))
    _saved(out_dir)
    return written


def cmd_eval(pred_dir: PathLike, gt_dir: PathLike, report_path: PathLike, plot: bool = False) -> MetricReport:
    result = evaluate_dataset(pred_dir, gt_dir)
    print(ReportFormatter().format_metrics(result.report))
    for path in write_report(result, report_path, plot=plot):
        _saved(path)
    return result.report


def cmd_synth(out_dir: PathLike, n: int = 8, size: int = 64, seed: int = 0,
              kinds: Optional[Sequence[str]] = None, noisy_fraction: float = 0.0) -> List[SynthSpec]:
    options = dict(n=n, image_size=size, seed=seed, noisy_fraction=noisy_fraction)
    if kinds:
        options["kinds"] = tuple(kinds)
    try:
        config = SynthDatasetConfig(**options)
    except ValidationError as exc:
        raise ConfigError(describe_validation_error(exc)) from exc
    specs = write_dataset(config, out_dir)
    _saved(out_dir)
    return specs


def cmd_inspect(config_path: Optional[PathLike] = None, ckpt: Optional[PathLike] = None,
                size: int = 224) -> str:
    if ckpt is not None:
        config: NetworkConfig = read_manifest(ckpt).network
    else:
        config = load_run_config(config_path).network
    model = build_network(config, seed=0)
    count = count_params(model)
    text = ReportFormatter().format_inspect(
        config, count, model_size_mb(model), param_band_message(count), (size, size),
        stage_shapes(model, (size, size)),
    )
    print(text)
    return text
