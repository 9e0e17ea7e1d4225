"""
Central finite-difference spot checks of parameter gradients.

A full torch.autograd.gradcheck over every weight of the network is too slow;
these checks sample a few scalar parameters and compare autograd against
(L(w + h) - L(w - h)) / 2h. Run modules in double precision and eval mode.
"""
from typing import Callable, List, NamedTuple

import numpy as np
import torch
from torch import nn

DEFAULT_STEP = 1e-6
# Gradients smaller than this are compared in absolute terms
GRAD_FLOOR = 1e-6


class SpotCheck(NamedTuple):
    name: str
    index: int
    analytic: float
    numeric: float

    @property
    def relative_error(self) -> float:
        scale = max(abs(self.analytic), abs(self.numeric), GRAD_FLOOR)
        return abs(self.analytic - self.numeric) / scale


def spot_check_parameters(module: nn.Module, loss_fn: Callable[[], torch.Tensor], num_samples: int = 8,
                          step: float = DEFAULT_STEP, seed: int = 0) -> List[SpotCheck]:
    params = [(name, p) for name, p in module.named_parameters() if p.requires_grad and p.numel() > 0]
    module.zero_grad()
    loss_fn().backward()
    analytic = {name: p.grad.detach().clone() if p.grad is not None else torch.zeros_like(p)
                for name, p in params}

    rng = np.random.default_rng(seed)
    checks = []
    with torch.no_grad():
        for _ in range(num_samples):
            name, param = params[int(rng.integers(len(params)))]
            index = int(rng.integers(param.numel()))
            flat = param.view(-1)
            original = flat[index].item()
            flat[index] = original + step
            plus = loss_fn().item()
            flat[index] = original - step
            minus = loss_fn().item()
            flat[index] = original
            checks.append(SpotCheck(
                name=name,
                index=index,
                analytic=analytic[name].view(-1)[index].item(),
                numeric=(plus - minus) / (2 * step),
            ))
    return checks


def max_relative_error(checks: List[SpotCheck]) -> float:
    return max(c.relative_error for c in checks)
