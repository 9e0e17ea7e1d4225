"""
Process-level settings: .env loading, thread caps, logging and seeding
"""
import logging
import os
import random

import numpy as np
import torch
from dotenv import load_dotenv

load_dotenv()

logger = logging.getLogger(__name__)

THREADS_ENV = "JAFFNET_THREADS"
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def evaluator_threads() -> int:
    """Worker count for dataset evaluation, capped by JAFFNET_THREADS"""
    raw = os.getenv(THREADS_ENV)
    if not raw:
        return 1
    try:
        threads = int(raw)
    except ValueError:
        logger.warning("%s=%r is not an integer; evaluating with 1 thread", THREADS_ENV, raw)
        return 1
    if threads < 1:
        logger.warning("%s=%d is not positive; evaluating with 1 thread", THREADS_ENV, threads)
        return 1
    return threads


def configure_logging(verbose: bool = False) -> None:
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO, format=LOG_FORMAT)


def seed_everything(seed: int) -> None:
    random.seed(seed)
    np.random.seed(seed % (2 ** 32))
    torch.manual_seed(seed)
    torch.use_deterministic_algorithms(True, warn_only=True)


def resolve_device(name: str) -> torch.device:
    if name.startswith("cuda") and not torch.cuda.is_available():
        logger.warning("CUDA requested but not available; falling back to CPU")
        return torch.device("cpu")
    return torch.device(name)
