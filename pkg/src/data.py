"""
Data processing: normalization, paired augmentation, salt-and-pepper corruption,
ground-truth binarization, PNG I/O and the training dataset.
"""
import logging
from pathlib import Path
from typing import FrozenSet, Iterator, List, Optional, Tuple, Union

import cv2
import numpy as np
import torch
from torch.utils.data import Dataset, Sampler

from src.errors import EmptyDatasetError, UnpairedFileError
from src.models import Sample

logger = logging.getLogger(__name__)

MEAN = 0.4669
STD = 0.2437
RESIZE_SIZE = 256
CROP_SIZE = 224
IMAGE_DIR = "images"
MASK_DIR = "masks"
IMAGE_SUFFIX = ".png"


def normalize(image):
    return (image - MEAN) / STD


def denormalize(image):
    return image * STD + MEAN


def resize(image: np.ndarray, size: Tuple[int, int], nearest: bool = False) -> np.ndarray:
    """Resize an H x W array to size = (height, width)"""
    height, width = size
    if image.shape[:2] == (height, width):
        return image.copy()
    interpolation = cv2.INTER_NEAREST if nearest else cv2.INTER_LINEAR
    return cv2.resize(image, (width, height), interpolation=interpolation)


def train_transform(sample: Sample, seed: int, resize_size: int = RESIZE_SIZE,
                    crop_size: int = CROP_SIZE, flip: bool = True) -> Sample:
    """Resize, random crop and independent horizontal / vertical flips, paired on image and mask"""
    rng = np.random.default_rng(seed)
    image = resize(sample.image.astype(np.float64), (resize_size, resize_size))
    mask = resize(sample.mask.astype(np.uint8), (resize_size, resize_size), nearest=True)
    top = int(rng.integers(0, resize_size - crop_size + 1))
    left = int(rng.integers(0, resize_size - crop_size + 1))
    image = image[top:top + crop_size, left:left + crop_size]
    mask = mask[top:top + crop_size, left:left + crop_size]
    flip_h, flip_v = rng.random(2) < 0.5
    if flip and flip_h:
        image, mask = image[:, ::-1], mask[:, ::-1]
    if flip and flip_v:
        image, mask = image[::-1], mask[::-1]
    return Sample(image=np.ascontiguousarray(image), mask=np.ascontiguousarray(mask))


def test_transform(image: np.ndarray, size: int = RESIZE_SIZE) -> np.ndarray:
    return normalize(resize(image.astype(np.float64), (size, size)))


def salt_pepper(image: np.ndarray, rho: float, seed: int) -> np.ndarray:
    """Overwrite floor(rho*H*W) distinct pixels: half with 1.0 (salt), the rest with 0.0"""
    if not 0 <= rho <= 1:
        raise ValueError(f"rho must lie in [0, 1], got {rho}")
    noisy = np.array(image, dtype=np.float64, copy=True)
    count = int(np.floor(rho * noisy.size))
    if count == 0:
        return noisy
    rng = np.random.default_rng(seed)
    flat = noisy.reshape(-1)
    picked = rng.choice(flat.size, size=count, replace=False)
    salt = count // 2
    flat[picked[:salt]] = 1.0
    flat[picked[salt:]] = 0.0
    return noisy


def binarize_gt(mask_image: np.ndarray) -> np.ndarray:
    """Foreground where value >= half the mask's maximum gray value"""
    mask_image = np.asarray(mask_image, dtype=np.float64)
    peak = mask_image.max()
    if peak <= 0:
        return np.zeros(mask_image.shape, dtype=np.uint8)
    return (mask_image >= 0.5 * peak).astype(np.uint8)


def read_gray(path: Union[str, Path]) -> Optional[np.ndarray]:
    """8-bit grayscale PNG as floats in [0,1]; None if unreadable"""
    raw = cv2.imread(str(path), cv2.IMREAD_GRAYSCALE)
    if raw is None:
        return None
    return raw.astype(np.float64) / 255.0


def to_uint8(values: np.ndarray) -> np.ndarray:
    return np.clip(np.round(np.asarray(values, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)


def write_gray(path: Union[str, Path], values: np.ndarray) -> None:
    if not cv2.imwrite(str(path), to_uint8(values)):
        raise OSError(f"failed to write '{path}'")


def list_pairs(data_dir: Union[str, Path]) -> List[Tuple[str, Path, Path]]:
    """Matching (stem, image, mask) paths under images/ and masks/"""
    data_dir = Path(data_dir)
    images = {p.stem: p for p in sorted((data_dir / IMAGE_DIR).glob(f"*{IMAGE_SUFFIX}"))}
    masks = {p.stem: p for p in sorted((data_dir / MASK_DIR).glob(f"*{IMAGE_SUFFIX}"))}
    if not images:
        raise EmptyDatasetError(f"no images found under '{data_dir / IMAGE_DIR}'")
    missing_masks = sorted(set(images) - set(masks))
    if missing_masks:
        raise UnpairedFileError(images[missing_masks[0]].name, str(data_dir / MASK_DIR))
    missing_images = sorted(set(masks) - set(images))
    if missing_images:
        raise UnpairedFileError(masks[missing_images[0]].name, str(data_dir / IMAGE_DIR))
    return [(stem, images[stem], masks[stem]) for stem in sorted(images)]


def load_sample(image_path: Path, mask_path: Path) -> Sample:
    image = read_gray(image_path)
    mask = read_gray(mask_path)
    if image is None or mask is None:
        raise EmptyDatasetError(f"unreadable sample '{image_path.name}'")
    return Sample(image=image, mask=binarize_gt(mask))


def noisy_indices(num_items: int, fraction: float, seed: int) -> FrozenSet[int]:
    """The round(fraction * n) samples that are stored with salt-and-pepper noise"""
    count = int(round(fraction * num_items))
    if count == 0:
        return frozenset()
    order = np.random.default_rng(seed).permutation(num_items)
    return frozenset(int(i) for i in order[:count])


class DefectDataset(Dataset):
    """Training samples; items are indices or (index, augmentation seed) pairs"""

    def __init__(self, data_dir: Union[str, Path], resize_size: int = RESIZE_SIZE,
                 crop_size: int = CROP_SIZE, flip: bool = True, augment: bool = True,
                 noisy_fraction: float = 0.0, noise_rho: float = 0.2, noise_seed: int = 0):
        self.pairs = list_pairs(data_dir)
        self.resize_size = resize_size
        self.crop_size = crop_size
        self.flip = flip
        self.augment = augment
        self.noise_rho = noise_rho
        self.noise_seed = noise_seed
        self.noisy = noisy_indices(len(self.pairs), noisy_fraction, noise_seed)
        logger.info("Dataset '%s': %d samples (%d noisy)", data_dir, len(self.pairs), len(self.noisy))

    def load(self, index: int) -> Sample:
        """Stored sample; noisy ones are corrupted at native resolution, the same way every epoch"""
        _, image_path, mask_path = self.pairs[index]
        sample = load_sample(image_path, mask_path)
        if index in self.noisy:
            image = salt_pepper(sample.image, self.noise_rho, self.noise_seed + index)
            sample = Sample(image=image, mask=sample.mask)
        return sample

    def __len__(self) -> int:
        return len(self.pairs)

    def __getitem__(self, item) -> Tuple[torch.Tensor, torch.Tensor]:
        index, seed = item if isinstance(item, tuple) else (item, item)
        sample = self.load(index)
        if self.augment:
            sample = train_transform(sample, seed, self.resize_size, self.crop_size, self.flip)
        else:
            size = (self.crop_size, self.crop_size)
            sample = Sample(image=resize(sample.image, size), mask=resize(sample.mask, size, nearest=True))
        image = torch.from_numpy(normalize(sample.image).astype(np.float32))[None]
        mask = torch.from_numpy(sample.mask.astype(np.float32))[None]
        return image, mask


class StepBatchSampler(Sampler):
    """Per-step batches of (index, augmentation seed); epoch e shuffles with seed + e"""

    def __init__(self, num_items: int, batch_size: int, seed: int, total_steps: int, start_step: int = 0):
        self.num_items = num_items
        self.batch_size = min(batch_size, num_items)
        self.seed = seed
        self.total_steps = total_steps
        self.start_step = start_step
        self.batches_per_epoch = batches_per_epoch(num_items, batch_size)

    def batch_for_step(self, step: int) -> List[Tuple[int, int]]:
        epoch, position = divmod(step, self.batches_per_epoch)
        order = np.random.default_rng(self.seed + epoch).permutation(self.num_items)
        start = position * self.batch_size
        # the last batch of an epoch takes whatever remains
        end = self.num_items if position == self.batches_per_epoch - 1 else start + self.batch_size
        indices = order[start:end]
        base = self.seed * 1_000_003 + step * (self.batch_size + 1)
        return [(int(i), base + j) for j, i in enumerate(indices)]

    def __iter__(self) -> Iterator[List[Tuple[int, int]]]:
        for step in range(self.start_step, self.total_steps):
            yield self.batch_for_step(step)

    def __len__(self) -> int:
        return max(0, self.total_steps - self.start_step)


def batches_per_epoch(num_items: int, batch_size: int) -> int:
    """Batches per epoch; a lone leftover sample joins the previous batch (batch norm needs two)"""
    batch_size = min(batch_size, num_items)
    full, rest = divmod(num_items, batch_size)
    if rest == 1 and full > 0:
        return full
    return full + (rest > 0)


def steps_for_epochs(num_items: int, batch_size: int, epochs: int) -> int:
    return epochs * batches_per_epoch(num_items, batch_size)
