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

"""Pseudo RGB-sonar training pairs built from single-modality sequences.

Both branches draw template/search frames from the same sequence inside one
temporal window. With misalignment on they draw independently, so the two
modalities see the target at unrelated places, which is the situation SCAM
has to learn to handle.
"""

import math
from dataclasses import dataclass

import numpy as np
import torch
from loguru import logger
from torch.utils.data import Dataset

from rgbs_track.app_utils.determinism import example_rng
from rgbs_track.boxgeom import BBox, CropWindow, crop_image, crop_window
from rgbs_track.config import RunConfig
from rgbs_track.errors import DataError
from rgbs_track.model.preprocess import to_tensor
from rgbs_track.srst.datasets import SequenceRecord, load_image
from rgbs_track.srst.saliency import to_saliency

FramePair = tuple[int, int]


def sample_pair(
    seq: SequenceRecord,
    rng: np.random.Generator,
    max_gap: int = 200,
    misalign: bool = True,
) -> tuple[FramePair, FramePair]:
    """(template, search) frame indices for the RGB branch and for the sonar branch.

    All four indices come from annotated frames inside one window of
    max_gap + 1 consecutive frames, so any two of them are at most max_gap apart.
    """
    valid = seq.valid_indices()
    if not valid:
        raise DataError(f"{seq.name} has no annotated frame to sample")
    reference = int(rng.choice(valid))
    low = reference - int(rng.integers(0, max_gap + 1))
    candidates = np.array([i for i in valid if low <= i <= low + max_gap])
    picks = [int(i) for i in rng.choice(candidates, size=4 if misalign else 2)]
    rgb_pair = (picks[0], picks[1])
    sonar_pair = (picks[2], picks[3]) if misalign else rgb_pair
    return rgb_pair, sonar_pair


@dataclass(frozen=True)
class TrainingExample:
    """Template and search crops per branch.

    gt_rgb and gt_son are in crop-normalized units (search crop side = 1) and
    absent when the target did not fit in the jittered search crop.
    """

    z_rgb: np.ndarray
    x_rgb: np.ndarray
    z_son: np.ndarray
    x_son: np.ndarray
    gt_rgb: BBox
    gt_son: BBox


def _inside(box: BBox, size: int) -> bool:
    x1, y1, x2, y2 = box.corners()
    return x1 >= 0.0 and y1 >= 0.0 and x2 <= size and y2 <= size


def jittered_search(
    box: BBox, rng: np.random.Generator, cfg: RunConfig
) -> tuple[CropWindow, BBox]:
    """Search window with scale/shift jitter and the crop-normalized target inside it."""
    out = cfg.backbone.search_size
    low, high = cfg.srst.search_scale_range
    window = crop_window(box, cfg.tracker.search_factor, out)
    for _ in range(cfg.srst.max_resample + 1):
        side = window.side * float(rng.uniform(low, high))
        shift = cfg.srst.search_shift * side
        cx, cy = box.center
        cx += float(rng.uniform(-shift, shift))
        cy += float(rng.uniform(-shift, shift))
        candidate = CropWindow(center=(cx, cy), side=side, out_size=out)
        in_crop = candidate.to_crop(box)
        if _inside(in_crop, out):
            return candidate, in_crop.scaled(1.0 / out)
    return candidate, BBox.absent()


def _branch_crops(
    seq: SequenceRecord, pair: FramePair, rng: np.random.Generator, cfg: RunConfig
) -> tuple[np.ndarray, np.ndarray, BBox]:
    template_idx, search_idx = pair
    template_window = crop_window(seq.boxes[template_idx], cfg.tracker.template_factor, cfg.backbone.template_size)
    z = crop_image(load_image(seq.frames[template_idx]), template_window)
    search_window, gt = jittered_search(seq.boxes[search_idx], rng, cfg)
    x = crop_image(load_image(seq.frames[search_idx]), search_window)
    return z, x, gt


def make_training_example(seq: SequenceRecord, rng: np.random.Generator, cfg: RunConfig) -> TrainingExample:
    rgb_pair, sonar_pair = sample_pair(seq, rng, cfg.srst.max_gap, cfg.srst.misalign)
    z_rgb, x_rgb, gt_rgb = _branch_crops(seq, rgb_pair, rng, cfg)
    if cfg.srst.misalign:
        z_son, x_son, gt_son = _branch_crops(seq, sonar_pair, rng, cfg)
    else:
        z_son, x_son, gt_son = z_rgb, x_rgb, gt_rgb
    # detection images skip the conversion when detection_saliency is off
    if cfg.srst.saliency and (seq.source == "sot" or cfg.srst.detection_saliency):
        z_son = to_saliency(z_son, cfg.srst.saliency_method)
        x_son = to_saliency(x_son, cfg.srst.saliency_method)
    return TrainingExample(z_rgb, x_rgb, z_son, x_son, gt_rgb, gt_son)


class SourceMixer:
    """Draws a record from the SOT pool or the detection pool by configured weight."""

    def __init__(
        self,
        sot: list[SequenceRecord],
        detection: list[SequenceRecord],
        mix_sot: float = 0.85,
        mix_detection: float = 0.15,
    ) -> None:
        self.sot = [r for r in sot if r.valid_indices()]
        self.detection = [r for r in detection if r.valid_indices()]
        skipped = len(sot) + len(detection) - len(self.sot) - len(self.detection)
        if skipped:
            logger.warning(f"Skipping {skipped} records without any annotated frame")
        weight_sot = mix_sot if self.sot else 0.0
        weight_det = mix_detection if self.detection else 0.0
        if weight_sot + weight_det <= 0.0:
            raise DataError("No training records available for the configured mixing weights")
        self.p_sot = weight_sot / (weight_sot + weight_det)

    def pick(self, rng: np.random.Generator) -> SequenceRecord:
        pool = self.sot if rng.random() < self.p_sot else self.detection
        return pool[int(rng.integers(len(pool)))]


class SrstDataset(Dataset):
    """Map-style dataset; item i of epoch e is a pure function of (seed, e, i)."""

    def __init__(self, mixer: SourceMixer, cfg: RunConfig, epoch: int = 0) -> None:
        self.mixer = mixer
        self.cfg = cfg
        self.epoch = epoch

    def set_epoch(self, epoch: int) -> None:
        self.epoch = epoch

    def __len__(self) -> int:
        return self.cfg.train.fixed_pool or self.cfg.train.samples_per_epoch

    def example(self, index: int) -> TrainingExample:
        # a fixed pool replays the same examples every epoch
        epoch = 0 if self.cfg.train.fixed_pool else self.epoch
        rng = example_rng(self.cfg.seed, epoch, index)
        return make_training_example(self.mixer.pick(rng), rng, self.cfg)

    def __getitem__(self, index: int) -> dict[str, torch.Tensor]:
        ex = self.example(index)
        return {
            "z_r": to_tensor(ex.z_rgb)[0],
            "x_r": to_tensor(ex.x_rgb)[0],
            "z_s": to_tensor(ex.z_son)[0],
            "x_s": to_tensor(ex.x_son)[0],
            "gt_r": torch.tensor(ex.gt_rgb.as_list(), dtype=torch.float64),
            "gt_s": torch.tensor(ex.gt_son.as_list(), dtype=torch.float64),
        }


def boxes_from_batch(gt: torch.Tensor) -> list[BBox]:
    return [BBox.from_xywh(row.tolist()) for row in gt]


def steps_per_epoch(cfg: RunConfig) -> int:
    size = cfg.train.fixed_pool or cfg.train.samples_per_epoch
    return math.ceil(size / cfg.train.batch_size)
