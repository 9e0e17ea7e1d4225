"""
Synthetic surface-defect generator: textured backgrounds with scratch, patch and
inclusion defects, the exact defect support as mask, optional salt-and-pepper noise.
"""
import logging
import math
from pathlib import Path
from typing import List, Union

import cv2
import numpy as np
from scipy import ndimage

from src.data import IMAGE_DIR, IMAGE_SUFFIX, MASK_DIR, salt_pepper, write_gray
from src.errors import OutputDirError
from src.models import (
    Background, DefectKind, Sample, SynthDatasetConfig, SynthManifest, SynthManifestEntry, SynthSpec,
)

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
DEFECT_OFFSET = 0.45
SCRATCH_POINTS = 8
PATCH_AREA = (0.02, 0.15)
INCLUSION_AXES = (0.03, 0.07)

# Independent streams so the mask never depends on texture or contrast
MASK_STREAM, TEXTURE_STREAM, OFFSET_STREAM, CONTRAST_STREAM = range(4)


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([seed, stream])


def render_background(size: int, background: Background, rng: np.random.Generator) -> np.ndarray:
    base = rng.uniform(0.35, 0.65)
    if background == Background.GRATING:
        y, x = np.mgrid[0:size, 0:size].astype(np.float64)
        theta = rng.uniform(0, math.pi)
        period = size * rng.uniform(0.1, 0.25)
        phase = rng.uniform(0, 2 * math.pi)
        wave = np.sin(2 * math.pi * (x * math.cos(theta) + y * math.sin(theta)) / period + phase)
        texture = base + 0.08 * wave
    elif background == Background.BLOBS:
        field = ndimage.gaussian_filter(rng.standard_normal((size, size)), sigma=size / 10)
        field /= np.abs(field).max() + 1e-12
        texture = base + 0.12 * field
    else:
        texture = np.full((size, size), base)
    texture = texture + rng.normal(0.0, 0.015, (size, size))
    return np.clip(texture, 0.0, 1.0)


def _scratch(size: int, rng: np.random.Generator) -> np.ndarray:
    mask = np.zeros((size, size), dtype=np.uint8)
    point = rng.uniform(0.3, 0.7, 2) * size
    heading = rng.uniform(0, 2 * math.pi)
    points = [point.copy()]
    for _ in range(SCRATCH_POINTS - 1):
        heading += rng.normal(0.0, 0.4)
        step = size * rng.uniform(0.06, 0.12)
        point = point + step * np.array([math.cos(heading), math.sin(heading)])
        points.append(np.clip(point, 0, size - 1))
    polyline = np.round(np.array(points)).astype(np.int32).reshape(-1, 1, 2)
    thickness = int(rng.integers(1, 4))
    cv2.polylines(mask, [polyline], isClosed=False, color=1, thickness=thickness)
    return mask


def _patch(size: int, rng: np.random.Generator) -> np.ndarray:
    y, x = np.mgrid[0:size, 0:size].astype(np.float64)
    cy, cx = rng.uniform(0.3, 0.7, 2) * size
    sigma = size * rng.uniform(0.1, 0.2)
    envelope = np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / (2 * sigma * sigma))
    noise = ndimage.gaussian_filter(rng.random((size, size)), sigma=size / 16)
    noise = (noise - noise.min()) / (np.ptp(noise) + 1e-12)
    field = envelope * (0.5 + 0.5 * noise)
    area = rng.uniform(*PATCH_AREA)
    return (field >= np.quantile(field, 1 - area)).astype(np.uint8)


def _inclusion(size: int, rng: np.random.Generator) -> np.ndarray:
    mask = np.zeros((size, size), dtype=np.uint8)
    for _ in range(int(rng.integers(1, 5))):
        cx, cy = np.round(rng.uniform(0.15, 0.85, 2) * size).astype(int)
        axes = tuple(max(2, int(round(a * size))) for a in rng.uniform(*INCLUSION_AXES, 2))
        angle = rng.uniform(0, 180)
        cv2.ellipse(mask, (int(cx), int(cy)), axes, angle, 0, 360, color=1, thickness=-1)
    return mask


_DEFECT_RENDERERS = {
    DefectKind.SCRATCH: _scratch,
    DefectKind.PATCH: _patch,
    DefectKind.INCLUSION: _inclusion,
}


def render_defect_mask(size: int, kind: DefectKind, rng: np.random.Generator) -> np.ndarray:
    if kind == DefectKind.NONE:
        return np.zeros((size, size), dtype=np.uint8)
    return _DEFECT_RENDERERS[kind](size, rng)


def synth_generate(spec: SynthSpec) -> Sample:
    size = spec.image_size
    mask = render_defect_mask(size, spec.defect_kind, _rng(spec.seed, MASK_STREAM))
    image = render_background(size, spec.background, _rng(spec.seed, TEXTURE_STREAM))
    sign = _rng(spec.seed, OFFSET_STREAM).choice((-1.0, 1.0))
    image = np.clip(image + sign * spec.contrast * DEFECT_OFFSET * mask, 0.0, 1.0)
    if spec.noise_rho > 0:
        image = salt_pepper(image, spec.noise_rho, spec.seed)
    return Sample(image=image, mask=mask)


def _is_noisy(index: int, fraction: float) -> bool:
    # Spreads the noisy items evenly over the index range
    return math.floor((index + 1) * fraction) > math.floor(index * fraction)


def plan_specs(config: SynthDatasetConfig) -> List[SynthSpec]:
    specs = []
    for i in range(config.n):
        seed = config.seed + i
        specs.append(SynthSpec(
            image_size=config.image_size,
            defect_kind=config.kinds[i % len(config.kinds)],
            background=config.backgrounds[(i // len(config.kinds)) % len(config.backgrounds)],
            contrast=float(_rng(seed, CONTRAST_STREAM).uniform(*config.contrast_range)),
            noise_rho=config.noise_rho if _is_noisy(i, config.noisy_fraction) else 0.0,
            seed=seed,
        ))
    return specs


def sample_name(index: int) -> str:
    return f"{index:05d}{IMAGE_SUFFIX}"


def write_dataset(config: SynthDatasetConfig, out_dir: Union[str, Path]) -> List[SynthSpec]:
    """Write images/, masks/ and manifest.json under out_dir"""
    out_dir = Path(out_dir)
    try:
        (out_dir / IMAGE_DIR).mkdir(parents=True, exist_ok=True)
        (out_dir / MASK_DIR).mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutputDirError(f"cannot create dataset directory '{out_dir}': {exc}") from exc

    specs = plan_specs(config)
    entries = []
    for i, spec in enumerate(specs):
        sample = synth_generate(spec)
        name = sample_name(i)
        write_gray(out_dir / IMAGE_DIR / name, sample.image)
        write_gray(out_dir / MASK_DIR / name, sample.mask)
        entries.append(SynthManifestEntry(name=name, **spec.model_dump()))
    manifest = SynthManifest(config=config, samples=entries)
    (out_dir / MANIFEST_NAME).write_text(manifest.model_dump_json(indent=2) + "\n", encoding="utf-8")
    logger.info("Wrote %d synthetic samples to '%s'", len(specs), out_dir)
    return specs
