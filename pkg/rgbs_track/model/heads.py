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

"""Fully convolutional center heads and box decoding.

Grid convention for an F x F map over a crop of normalized side 1: a center c
sits at grid coordinate g = c * F - 0.5, the peak cell is j = floor(g) and the
offset map stores g - j. A zero offset therefore decodes to the cell center.
"""

import math
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from rgbs_track.boxgeom import BBox, CropWindow
from rgbs_track.config import HeadConfig


@dataclass(frozen=True)
class ScoreMapBundle:
    """cls (B, 1, F, F), offset (B, 2, F, F) and size (B, 2, F, F), channels ordered (x, y)."""

    cls: torch.Tensor
    offset: torch.Tensor
    size: torch.Tensor

    @property
    def grid(self) -> int:
        return int(self.cls.shape[-1])

    def select(self, index: int) -> "ScoreMapBundle":
        return ScoreMapBundle(
            self.cls[index : index + 1], self.offset[index : index + 1], self.size[index : index + 1]
        )


def _conv_bn_relu(in_planes: int, out_planes: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(in_planes, out_planes, kernel_size=3, padding=1, bias=True),
        nn.BatchNorm2d(out_planes),
        nn.ReLU(inplace=True),
    )


def _tower(dim: int, channels: int, stages: int, out_planes: int) -> nn.Sequential:
    layers: list[nn.Module] = []
    in_planes, width = dim, channels
    for _ in range(stages):
        layers.append(_conv_bn_relu(in_planes, width))
        in_planes, width = width, max(width // 2, 1)
    layers.append(nn.Conv2d(in_planes, out_planes, kernel_size=1))
    return nn.Sequential(*layers)


class CenterHead(nn.Module):
    def __init__(self, dim: int, cfg: HeadConfig) -> None:
        super().__init__()
        self.cls_tower = _tower(dim, cfg.channels, cfg.stages, 1)
        self.offset_tower = _tower(dim, cfg.channels, cfg.stages, 2)
        self.size_tower = _tower(dim, cfg.channels, cfg.stages, 2)
        for module in self.modules():
            if isinstance(module, nn.Conv2d):
                nn.init.kaiming_normal_(module.weight, nonlinearity="relu")
                nn.init.zeros_(module.bias)

    def forward(self, search_tokens: torch.Tensor) -> ScoreMapBundle:
        batch, n_x, dim = search_tokens.shape
        grid = math.isqrt(n_x)
        if grid * grid != n_x:
            raise ValueError(f"{n_x} search tokens do not form a square grid")
        feat = search_tokens.transpose(1, 2).reshape(batch, dim, grid, grid)
        return ScoreMapBundle(
            cls=torch.sigmoid(self.cls_tower(feat)),
            offset=torch.sigmoid(self.offset_tower(feat)),
            size=torch.sigmoid(self.size_tower(feat)),
        )


def hanning_penalty(grid: int, weight: float) -> np.ndarray:
    """Multiplicative cosine window (1 - weight) + weight * hann2d."""
    hann = torch.hann_window(grid, periodic=False, dtype=torch.float64).numpy()
    return (1.0 - weight) + weight * np.outer(hann, hann)


def encode_box(box: BBox, grid: int) -> tuple[int, int, tuple[float, float], tuple[float, float]]:
    """Peak cell (row, col), offset and size targets of a crop-normalized box."""
    cx, cy = box.center
    gx, gy = cx * grid - 0.5, cy * grid - 0.5
    col = min(max(math.floor(gx), 0), grid - 1)
    row = min(max(math.floor(gy), 0), grid - 1)
    return row, col, (gx - col, gy - row), (box.w, box.h)


def peak_index(score: np.ndarray) -> tuple[int, int]:
    """Row-major argmax; ties resolve to the lowest flat index."""
    flat = int(np.argmax(score))
    return divmod(flat, score.shape[1])


def decode_box(
    bundle: ScoreMapBundle,
    window: CropWindow,
    penalty: np.ndarray | None = None,
) -> tuple[BBox, float]:
    """Decodes the first bundle in the batch into an image box and its confidence.

    The confidence is the raw cls peak; the penalty only moves the argmax. An
    all-zero cls map decodes at the map center with confidence 0.
    """
    cls = bundle.cls[0, 0].detach().double().cpu().numpy()
    offset = bundle.offset[0].detach().double().cpu().numpy()
    size = bundle.size[0].detach().double().cpu().numpy()
    grid = cls.shape[-1]

    confidence = float(cls.max())
    if confidence <= 0.0:
        row = col = grid // 2
        cx = cy = 0.5
        confidence = 0.0
    else:
        row, col = peak_index(cls * penalty if penalty is not None else cls)
        cx = (col + 0.5 + offset[0, row, col]) / grid
        cy = (row + 0.5 + offset[1, row, col]) / grid
    w, h = float(size[0, row, col]), float(size[1, row, col])

    out = window.out_size
    in_crop = BBox(x=(cx - w / 2.0) * out, y=(cy - h / 2.0) * out, w=w * out, h=h * out)
    box = window.to_image(in_crop)
    ex1, ey1, ex2, ey2 = window.extent().corners()
    x1, y1, x2, y2 = box.corners()
    clamped = BBox.from_corners(
        min(max(x1, ex1), ex2), min(max(y1, ey1), ey2), min(max(x2, ex1), ex2), min(max(y2, ey1), ey2)
    )
    return clamped, min(max(confidence, 0.0), 1.0)


def normalized_box_from_maps(bundle: ScoreMapBundle, rows: torch.Tensor, cols: torch.Tensor) -> torch.Tensor:
    """Differentiable (B, 4) xywh crop-normalized boxes read at the given cells."""
    grid = bundle.grid
    batch = torch.arange(bundle.cls.shape[0], device=bundle.cls.device)
    off = bundle.offset[batch, :, rows, cols]
    size = bundle.size[batch, :, rows, cols]
    cx = (cols.to(off.dtype) + 0.5 + off[:, 0]) / grid
    cy = (rows.to(off.dtype) + 0.5 + off[:, 1]) / grid
    return torch.stack([cx - size[:, 0] / 2.0, cy - size[:, 1] / 2.0, size[:, 0], size[:, 1]], dim=1)
