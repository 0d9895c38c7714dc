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

"""Training objective: focal classification plus GIoU and L1 regression per modality."""

import math
from dataclasses import dataclass

import torch

from rgbs_track.boxgeom import BBox
from rgbs_track.config import LossWeights
from rgbs_track.errors import NumericError
from rgbs_track.model.heads import ScoreMapBundle, encode_box, normalized_box_from_maps


def focal_loss(
    pred: torch.Tensor,
    target: torch.Tensor,
    alpha: float = 2.0,
    beta: float = 4.0,
    eps: float = 1e-4,
) -> torch.Tensor:
    """Penalty-reduced pixelwise focal loss, normalized by the positive count (or 1)."""
    if pred.shape != target.shape:
        raise ValueError(f"Prediction {tuple(pred.shape)} and target {tuple(target.shape)} differ")
    p = pred.clamp(eps, 1.0 - eps)
    pos = target.eq(1.0)
    neg = ~pos
    pos_loss = (torch.log(p) * (1.0 - p).pow(alpha))[pos].sum()
    neg_loss = (torch.log(1.0 - p) * p.pow(alpha) * (1.0 - target).pow(beta))[neg].sum()
    num_pos = int(pos.sum())
    return -(pos_loss + neg_loss) / max(num_pos, 1)


def xywh_to_corners(box: torch.Tensor) -> torch.Tensor:
    return torch.cat([box[..., :2], box[..., :2] + box[..., 2:]], dim=-1)


def giou_tensor(pred: torch.Tensor, gt: torch.Tensor) -> torch.Tensor:
    """Row-wise generalized IoU of (B, 4) xywh boxes; 0 where the enclosing box is empty."""
    p, g = xywh_to_corners(pred), xywh_to_corners(gt)
    lt = torch.maximum(p[:, :2], g[:, :2])
    rb = torch.minimum(p[:, 2:], g[:, 2:])
    inter = (rb - lt).clamp(min=0).prod(dim=1)
    union = pred[:, 2] * pred[:, 3] + gt[:, 2] * gt[:, 3] - inter
    enc = (torch.maximum(p[:, 2:], g[:, 2:]) - torch.minimum(p[:, :2], g[:, :2])).clamp(min=0).prod(dim=1)
    iou = torch.where(union > 0, inter / union.clamp(min=1e-12), torch.zeros_like(inter))
    giou = iou - torch.where(enc > 0, (enc - union) / enc.clamp(min=1e-12), torch.zeros_like(enc))
    return torch.where(enc > 0, giou, torch.zeros_like(giou))


def box_losses(pred: torch.Tensor, gt: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
    """(1 - GIoU, L1) averaged over rows of crop-normalized xywh boxes."""
    pred = pred.reshape(-1, 4)
    gt = gt.reshape(-1, 4)
    giou_loss = (1.0 - giou_tensor(pred, gt)).mean()
    l1_loss = (pred - gt).abs().mean()
    return giou_loss, l1_loss


@dataclass(frozen=True)
class BranchLoss:
    """Loss components of one modality; regression terms are None when no target is present."""

    cls: torch.Tensor
    iou: torch.Tensor | None = None
    l1: torch.Tensor | None = None


def _check_finite(name: str, value: torch.Tensor | None) -> None:
    if value is not None and not bool(torch.isfinite(value).all()):
        raise NumericError(f"Loss component {name} is not finite ({float(value)})")


def total_loss(rgb: BranchLoss, sonar: BranchLoss, w: LossWeights) -> torch.Tensor:
    """cls_r + cls_s + lambda_iou * (iou_r + iou_s) + lambda_l1 * (l1_r + l1_s)."""
    for modality, terms in (("rgb", rgb), ("sonar", sonar)):
        _check_finite(f"{modality}.cls", terms.cls)
        _check_finite(f"{modality}.iou", terms.iou)
        _check_finite(f"{modality}.l1", terms.l1)
    loss = rgb.cls + sonar.cls
    for terms in (rgb, sonar):
        if terms.iou is not None:
            loss = loss + w.lambda_iou * terms.iou
        if terms.l1 is not None:
            loss = loss + w.lambda_l1 * terms.l1
    return loss


def gaussian_radius(height: float, width: float, min_overlap: float = 0.7) -> float:
    """Largest corner shift keeping IoU >= min_overlap with the true box."""
    b1 = height + width
    c1 = width * height * (1 - min_overlap) / (1 + min_overlap)
    r1 = (b1 - math.sqrt(b1**2 - 4 * c1)) / 2

    b2 = 2 * (height + width)
    c2 = (1 - min_overlap) * width * height
    r2 = (b2 - math.sqrt(b2**2 - 16 * c2)) / 8

    a3 = 4 * min_overlap
    b3 = -2 * min_overlap * (height + width)
    c3 = (min_overlap - 1) * width * height
    r3 = (b3 + math.sqrt(b3**2 - 4 * a3 * c3)) / (2 * a3)
    return min(r1, r2, r3)


def gaussian_target(box: BBox, grid: int, min_overlap: float = 0.7) -> torch.Tensor:
    """(grid, grid) heatmap with value 1 at the box's peak cell; zeros for an absent box."""
    heat = torch.zeros(grid, grid, dtype=torch.float32)
    if box.is_absent():
        return heat
    row, col, _, _ = encode_box(box, grid)
    radius = max(0, int(gaussian_radius(box.h * grid, box.w * grid, min_overlap)))
    sigma = (2 * radius + 1) / 6.0
    ys = torch.arange(grid, dtype=torch.float32).view(-1, 1) - row
    xs = torch.arange(grid, dtype=torch.float32).view(1, -1) - col
    gauss = torch.exp(-(xs * xs + ys * ys) / (2 * sigma * sigma))
    inside = (xs.abs() <= radius) & (ys.abs() <= radius)
    heat = torch.where(inside, gauss, heat)
    heat[row, col] = 1.0
    return heat


def branch_loss(bundle: ScoreMapBundle, boxes: list[BBox], w: LossWeights) -> BranchLoss:
    """Losses of one modality's head against crop-normalized ground-truth boxes.

    Absent targets contribute to classification (all-negative heatmap) only.
    """
    grid = bundle.grid
    targets = torch.stack([gaussian_target(box, grid, w.gaussian_min_overlap) for box in boxes])
    targets = targets.to(bundle.cls.device, bundle.cls.dtype).unsqueeze(1)
    cls = focal_loss(bundle.cls, targets, w.focal_alpha, w.focal_beta, w.eps)

    present = [i for i, box in enumerate(boxes) if not box.is_absent()]
    if not present:
        return BranchLoss(cls=cls)
    cells = [encode_box(boxes[i], grid) for i in present]
    index = torch.tensor(present, device=bundle.cls.device)
    rows = torch.tensor([cell[0] for cell in cells], device=bundle.cls.device)
    cols = torch.tensor([cell[1] for cell in cells], device=bundle.cls.device)
    subset = ScoreMapBundle(bundle.cls[index], bundle.offset[index], bundle.size[index])
    pred = normalized_box_from_maps(subset, rows, cols)
    gt = torch.tensor([boxes[i].as_list() for i in present], dtype=pred.dtype, device=pred.device)
    iou, l1 = box_losses(pred, gt)
    return BranchLoss(cls=cls, iou=iou, l1=l1)
