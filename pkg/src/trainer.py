"""
Seeded single-process training loop with deep-supervised hybrid loss
"""
import logging
import os
from pathlib import Path
from typing import List, Optional, Union

import pandas as pd
import torch
from torch.utils.data import DataLoader

from src.checkpoint import checkpoint_load, checkpoint_save, read_manifest
from src.config import network_diff
from src.data import DefectDataset, StepBatchSampler, steps_for_epochs
from src.errors import ConfigMismatchError, OutputDirError
from src.losses import HybridLoss
from src.models import RunConfig, TrainingSummary
from src.network import build_network, count_params
from src.runtime import resolve_device, seed_everything

logger = logging.getLogger(__name__)

LOSS_LOG = "loss_log.csv"
FINAL_CHECKPOINT = "checkpoint-final"


def checkpoint_name(step: int) -> str:
    return f"checkpoint-step{step:06d}"


def prepare_output_dir(out_dir: Path) -> Path:
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutputDirError(f"cannot create output directory '{out_dir}': {exc}") from exc
    if not os.access(out_dir, os.W_OK):
        raise OutputDirError(f"output directory '{out_dir}' is not writable")
    return out_dir


def append_loss_rows(path: Path, rows: List[dict]) -> None:
    if rows:
        pd.DataFrame(rows).to_csv(path, mode="a", header=not path.exists(), index=False)


def truncate_loss_log(path: Path, step: int) -> None:
    """Drop rows past a resume point so the log stays monotone in step"""
    if not path.exists():
        return
    log = pd.read_csv(path)
    log[log["step"] <= step].to_csv(path, index=False)


class Trainer:
    def __init__(self, config: RunConfig, data_dir: Union[str, Path], out_dir: Union[str, Path]):
        self.config = config
        # Both directories are validated before any training step
        self.dataset = DefectDataset(
            data_dir, config.resize_size, config.crop_size, config.flip,
            noisy_fraction=config.noisy_fraction, noise_rho=config.noise_rho, noise_seed=config.seed,
        )
        self.out_dir = prepare_output_dir(Path(out_dir))
        self.loss_log = self.out_dir / LOSS_LOG
        if config.epochs is not None:
            self.total_steps = steps_for_epochs(len(self.dataset), config.batch_size, config.epochs)
        else:
            self.total_steps = config.steps

        seed_everything(config.seed)
        self.device = resolve_device(config.device)
        self.model = build_network(config.network, config.seed).to(self.device)
        self.criterion = HybridLoss(config.loss, config.network.ssim_window, config.network.ssim_sigma)
        self.optimizer = torch.optim.Adam(
            self.model.parameters(), lr=config.learning_rate, weight_decay=config.weight_decay
        )
        logger.info("Model has %d parameters; training for %d steps", count_params(self.model), self.total_steps)

    def resume(self, checkpoint: Union[str, Path]) -> int:
        manifest = read_manifest(checkpoint)
        if manifest.network != self.config.network:
            raise ConfigMismatchError(network_diff(self.config.network, manifest.network))
        loaded = checkpoint_load(checkpoint, self.model, self.optimizer)
        truncate_loss_log(self.loss_log, loaded.step)
        logger.info("Resuming from '%s' at step %d", checkpoint, loaded.step)
        return loaded.step

    def run(self, resume: Optional[Union[str, Path]] = None) -> TrainingSummary:
        if resume is not None:
            start_step = self.resume(resume)
        else:
            start_step = 0
            self.loss_log.unlink(missing_ok=True)

        sampler = StepBatchSampler(len(self.dataset), self.config.batch_size, self.config.seed,
                                   self.total_steps, start_step)
        loader = DataLoader(self.dataset, batch_sampler=sampler, num_workers=self.config.num_workers)

        self.model.train()
        rows: List[dict] = []
        initial_loss = final_loss = None
        step = start_step
        for images, masks in loader:
            images, masks = images.to(self.device), masks.to(self.device)
            self.optimizer.zero_grad()
            result = self.criterion(self.model(images), masks)
            result.total.backward()
            self.optimizer.step()
            step += 1

            rows.append(result.breakdown.as_row(step))
            final_loss = result.breakdown.total
            if initial_loss is None:
                initial_loss = final_loss
            if step % self.config.log_every == 0:
                terms = result.breakdown.per_output
                logger.info("step %d/%d  loss %.5f  (bce %.4f  iou %.4f  ssim %.4f)",
                            step, self.total_steps, final_loss,
                            sum(t.bce for t in terms), sum(t.iou for t in terms),
                            sum(t.ssim for t in terms))
                append_loss_rows(self.loss_log, rows)
                rows = []
            if self.config.checkpoint_every and step % self.config.checkpoint_every == 0:
                append_loss_rows(self.loss_log, rows)
                rows = []
                checkpoint_save(self.out_dir / checkpoint_name(step), self.model, self.optimizer, step)

        append_loss_rows(self.loss_log, rows)
        final = checkpoint_save(self.out_dir / FINAL_CHECKPOINT, self.model, self.optimizer, step)
        return TrainingSummary(
            start_step=start_step,
            final_step=step,
            initial_loss=initial_loss,
            final_loss=final_loss,
            checkpoint=str(final),
            loss_log=str(self.loss_log),
        )


def train(config: RunConfig, data_dir: Union[str, Path], out_dir: Union[str, Path],
          resume: Optional[Union[str, Path]] = None) -> TrainingSummary:
    return Trainer(config, data_dir, out_dir).run(resume=resume)
