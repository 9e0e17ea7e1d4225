from pathlib import Path

import numpy as np
import torch

from src.data import IMAGE_DIR, MASK_DIR, write_gray

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

def write_pairs(root, pairs):
    """Write {name: (image, mask)} under root/images and root/masks"""
    (root / IMAGE_DIR).mkdir(parents=True, exist_ok=True)
    (root / MASK_DIR).mkdir(parents=True, exist_ok=True)
    for name, (image, mask) in pairs.items():
        write_gray(root / IMAGE_DIR / name, image)
        write_gray(root / MASK_DIR / name, mask)
    return root

def random_pair(rng, size=16):
    """Continuous prediction and a binary mask with at least one pixel of each class"""
    pred = rng.random((size, size))
    gt = (rng.random((size, size)) < 0.3).astype(np.uint8)
    gt[0, 0], gt[-1, -1] = 1, 0
    return pred, gt

def random_rectangle(rng, size=16):
    gt = np.zeros((size, size), dtype=np.uint8)
    top, left = rng.integers(0, size - 2, 2)
    height, width = rng.integers(1, size // 2, 2)
    gt[top:top + height, left:left + width] = 1
    return gt

def gradcheck_parameters(module, *inputs):
    """torch.autograd.gradcheck with the module's parameters as the checked inputs"""
    names = [name for name, _ in module.named_parameters()]
    params = tuple(p.detach().clone().requires_grad_(True) for _, p in module.named_parameters())

    def call(*values):
        return torch.func.functional_call(module, dict(zip(names, values)), inputs)

    return torch.autograd.gradcheck(call, params, eps=1e-6, atol=1e-6, rtol=1e-3)
