# Copyright 2026 Google LLC
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""SRST-fed training of backbone, SCAM stack and both heads."""

from dataclasses import dataclass
from pathlib import Path

import pandas as pd
import torch
from loguru import logger
from torch.utils.data import DataLoader

from rgbs_track.app_utils.determinism import seed_everything
from rgbs_track.config import RunConfig
from rgbs_track.errors import NumericError
from rgbs_track.losses import BranchLoss, branch_loss, total_loss
from rgbs_track.model.checkpoint import load_checkpoint, save_checkpoint
from rgbs_track.model.network import SCANet, build_network
from rgbs_track.srst.datasets import read_detection_annotations, read_sequence_dir
from rgbs_track.srst.sampler import SourceMixer, SrstDataset, boxes_from_batch

CHECKPOINT_FILE = "checkpoint.pt"
LOSS_LOG_FILE = "loss_log.csv"


@dataclass(frozen=True)
class TrainResult:
    checkpoint: Path
    loss_log: Path
    steps: int
    initial_loss: float
    final_loss: float


def build_dataset(cfg: RunConfig) -> SrstDataset:
    sot = read_sequence_dir(cfg.train.sot_root)
    detection = []
    if cfg.srst.detection and cfg.train.detection_annotations:
        detection = read_detection_annotations(cfg.train.detection_annotations)
    mixer = SourceMixer(sot, detection, cfg.srst.mix_sot, cfg.srst.mix_detection if cfg.srst.detection else 0.0)
    return SrstDataset(mixer, cfg)


def _item(value: torch.Tensor | None) -> float:
    return float("nan") if value is None else float(value.detach())


def _log_row(
    step: int, epoch: int, lr: float, loss: torch.Tensor, rgb: BranchLoss, sonar: BranchLoss
) -> dict[str, float]:
    return {
        "step": step,
        "epoch": epoch,
        "lr": lr,
        "total": float(loss.detach()),
        "cls_rgb": _item(rgb.cls),
        "iou_rgb": _item(rgb.iou),
        "l1_rgb": _item(rgb.l1),
        "cls_sonar": _item(sonar.cls),
        "iou_sonar": _item(sonar.iou),
        "l1_sonar": _item(sonar.l1),
    }


def train_step(
    network: SCANet, batch: dict[str, torch.Tensor], cfg: RunConfig
) -> tuple[torch.Tensor, BranchLoss, BranchLoss]:
    device = torch.device(cfg.device)
    bundle_r, bundle_s = network(
        batch["z_r"].to(device), batch["x_r"].to(device), batch["z_s"].to(device), batch["x_s"].to(device)
    )
    rgb = branch_loss(bundle_r, boxes_from_batch(batch["gt_r"]), cfg.loss)
    sonar = branch_loss(bundle_s, boxes_from_batch(batch["gt_s"]), cfg.loss)
    return total_loss(rgb, sonar, cfg.loss), rgb, sonar


def train(cfg: RunConfig, out_dir: str | Path | None = None) -> TrainResult:
    """Trains for cfg.train.epochs (or max_steps) and writes the checkpoint and loss log.

    A non-finite loss stops training before the offending update; the
    parameters at that point are saved and NumericError propagates.
    """
    out_dir = Path(out_dir or cfg.train.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    seed_everything(cfg.seed, cfg.deterministic)

    network = build_network(cfg)
    if cfg.train.init_checkpoint:
        load_checkpoint(network, cfg.train.init_checkpoint)
    network.train()

    dataset = build_dataset(cfg)
    loader = DataLoader(
        dataset,
        batch_size=cfg.train.batch_size,
        shuffle=False,
        num_workers=cfg.train.num_workers,
        drop_last=False,
    )
    optimizer = torch.optim.AdamW(
        network.param_groups(), lr=cfg.optim.lr, weight_decay=cfg.optim.weight_decay, betas=cfg.optim.betas
    )
    # lr_drop_step counts optimizer steps, not epochs
    milestones = [cfg.optim.lr_drop_step] if cfg.optim.lr_drop_step else []
    scheduler = torch.optim.lr_scheduler.MultiStepLR(optimizer, milestones, gamma=cfg.optim.lr_drop_factor)

    rows: list[dict[str, float]] = []
    checkpoint = out_dir / CHECKPOINT_FILE
    loss_log = out_dir / LOSS_LOG_FILE
    step = 0
    done = False
    try:
        for epoch in range(cfg.train.epochs):
            dataset.set_epoch(epoch)
            for batch in loader:
                optimizer.zero_grad(set_to_none=True)
                loss, rgb, sonar = train_step(network, batch, cfg)
                loss.backward()
                if cfg.optim.grad_clip_norm is not None:
                    torch.nn.utils.clip_grad_norm_(network.parameters(), cfg.optim.grad_clip_norm)
                optimizer.step()
                lr = scheduler.get_last_lr()[0]
                scheduler.step()
                step += 1
                rows.append(_log_row(step, epoch, lr, loss, rgb, sonar))
                if step % cfg.train.log_every == 0 or step == 1:
                    logger.info(f"step {step} epoch {epoch} loss {rows[-1]['total']:.4f}")
                if cfg.train.max_steps is not None and step >= cfg.train.max_steps:
                    done = True
                    break
            if done:
                break
    except NumericError:
        logger.error(f"Non-finite loss at step {step + 1}; saving the last good parameters to {checkpoint}")
        save_checkpoint(network, checkpoint)
        pd.DataFrame.from_records(rows).to_csv(loss_log, index=False)
        raise

    save_checkpoint(network, checkpoint)
    pd.DataFrame.from_records(rows).to_csv(loss_log, index=False)
    logger.info(f"Finished {step} steps; loss log at {loss_log}")
    initial = rows[0]["total"] if rows else float("nan")
    final = rows[-1]["total"] if rows else float("nan")
    return TrainResult(checkpoint, loss_log, step, initial, final)
