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

"""Box algebra shared by losses, heads, tracker cropping and metrics.

Boxes are stored as floating (x, y, w, h) with a top-left origin, the same
convention as the annotation files. The all-zero box means "target absent".
"""

import math
from collections.abc import Sequence

import cv2
import numpy as np
from pydantic import BaseModel, ConfigDict, Field

TEMPLATE_CONTEXT_FACTOR = 2.0
SEARCH_CONTEXT_FACTOR = 4.0
# Distances and overlaps are rounded to this many decimals before thresholding.
SETTLE_DECIMALS = 10


class BBox(BaseModel):
    """Axis-aligned box in pixels."""

    model_config = ConfigDict(frozen=True, allow_inf_nan=False)

    x: float = 0.0
    y: float = 0.0
    w: float = Field(default=0.0, ge=0.0)
    h: float = Field(default=0.0, ge=0.0)

    @classmethod
    def absent(cls) -> "BBox":
        return cls()

    @classmethod
    def from_xywh(cls, values: Sequence[float]) -> "BBox":
        if len(values) != 4:
            raise ValueError(f"Expected 4 box values, got {len(values)}")
        x, y, w, h = (float(v) for v in values)
        return cls(x=x, y=y, w=w, h=h)

    @classmethod
    def from_corners(cls, x1: float, y1: float, x2: float, y2: float) -> "BBox":
        return cls(x=x1, y=y1, w=max(x2 - x1, 0.0), h=max(y2 - y1, 0.0))

    def is_absent(self) -> bool:
        return self.x == 0.0 and self.y == 0.0 and self.w == 0.0 and self.h == 0.0

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def center(self) -> tuple[float, float]:
        return self.x + self.w / 2.0, self.y + self.h / 2.0

    def corners(self) -> tuple[float, float, float, float]:
        return self.x, self.y, self.x + self.w, self.y + self.h

    def scaled(self, k: float) -> "BBox":
        return BBox(x=self.x * k, y=self.y * k, w=self.w * k, h=self.h * k)

    def as_list(self) -> list[float]:
        return [self.x, self.y, self.w, self.h]


class CropWindow(BaseModel):
    """Square image region resampled to an out_size x out_size crop."""

    model_config = ConfigDict(frozen=True, allow_inf_nan=False)

    center: tuple[float, float]
    side: float = Field(gt=0.0)
    out_size: int = Field(gt=0)

    @property
    def scale(self) -> float:
        """Crop pixels per image pixel."""
        return self.out_size / self.side

    @property
    def origin(self) -> tuple[float, float]:
        cx, cy = self.center
        return cx - self.side / 2.0, cy - self.side / 2.0

    def extent(self) -> BBox:
        ox, oy = self.origin
        return BBox(x=ox, y=oy, w=self.side, h=self.side)

    def to_crop(self, box: BBox) -> BBox:
        """Maps an image-space box into crop pixel coordinates."""
        ox, oy = self.origin
        s = self.scale
        return BBox(x=(box.x - ox) * s, y=(box.y - oy) * s, w=box.w * s, h=box.h * s)

    def to_image(self, box: BBox) -> BBox:
        """Maps a crop-pixel box back into image coordinates."""
        ox, oy = self.origin
        s = self.scale
        return BBox(x=box.x / s + ox, y=box.y / s + oy, w=box.w / s, h=box.h / s)


def _check(box: BBox) -> None:
    # pydantic already rejects negative extents on construction; model_construct bypasses it
    if box.w < 0 or box.h < 0:
        raise ValueError(f"Box has negative extent: {box}")


def _settle(value: float) -> float:
    return float(np.round(value, SETTLE_DECIMALS))


def _overlap_1d(a0: float, a_len: float, b0: float, b_len: float) -> float:
    # measured from the left edge so equal spans give their exact length
    if a0 > b0:
        a0, a_len, b0, b_len = b0, b_len, a0, a_len
    return max(min(a_len - (b0 - a0), b_len), 0.0)


def _intersection_union(a: BBox, b: BBox) -> tuple[float, float]:
    inter = _overlap_1d(a.x, a.w, b.x, b.w) * _overlap_1d(a.y, a.h, b.y, b.h)
    return inter, a.area + b.area - inter


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union in [0, 1]; 0 when the union is empty, 1 for equal boxes."""
    _check(a)
    _check(b)
    inter, union = _intersection_union(a, b)
    if union <= 0.0:
        return 0.0
    if a.as_list() == b.as_list():
        return 1.0
    return _settle(min(max(inter / union, 0.0), 1.0))


def giou(a: BBox, b: BBox) -> float:
    """Generalized IoU in [-1, 1].

    A degenerate enclosing box (zero area) returns 0 by convention.
    """
    _check(a)
    _check(b)
    inter, union = _intersection_union(a, b)
    ax1, ay1, ax2, ay2 = a.corners()
    bx1, by1, bx2, by2 = b.corners()
    enclosing = (max(ax2, bx2) - min(ax1, bx1)) * (max(ay2, by2) - min(ay1, by1))
    if enclosing <= 0.0:
        return 0.0
    plain = inter / union if union > 0.0 else 0.0
    return plain - (enclosing - union) / enclosing


def center_distance(a: BBox, b: BBox) -> float:
    """Euclidean distance between box centers, in pixels."""
    _check(a)
    _check(b)
    (acx, acy), (bcx, bcy) = a.center, b.center
    return _settle(float(np.hypot(acx - bcx, acy - bcy)))


def normalized_center_distance(pred: BBox, gt: BBox) -> float:
    """Center error with each axis divided by the ground-truth extent."""
    _check(pred)
    if gt.w <= 0.0 or gt.h <= 0.0:
        raise ValueError(f"Ground-truth box is degenerate: {gt}")
    dx = ((pred.x - gt.x) + (pred.w - gt.w) / 2.0) / gt.w
    dy = ((pred.y - gt.y) + (pred.h - gt.h) / 2.0) / gt.h
    return _settle(float(np.hypot(dx, dy)))


def crop_window(box: BBox, context_factor: float, out_size: int) -> CropWindow:
    """Square window centered on the box with side = factor * sqrt(w * h)."""
    if box.is_absent():
        raise ValueError("Cannot build a crop window around an absent box; use the last known box")
    if context_factor <= 0.0:
        raise ValueError(f"context_factor must be positive, got {context_factor}")
    side = max(context_factor * math.sqrt(box.w * box.h), 1.0)
    return CropWindow(center=box.center, side=side, out_size=out_size)


def crop_image(image: np.ndarray, window: CropWindow) -> np.ndarray:
    """Resamples the window of an HxWxC image to out_size x out_size.

    Regions outside the image are filled with the per-channel mean of the part
    of the window that lies inside it (whole-image mean when none does).
    """
    height, width = image.shape[:2]
    ox, oy = window.origin
    x0 = int(np.clip(math.floor(ox), 0, width))
    y0 = int(np.clip(math.floor(oy), 0, height))
    x1 = int(np.clip(math.ceil(ox + window.side), 0, width))
    y1 = int(np.clip(math.ceil(oy + window.side), 0, height))
    inside = image[y0:y1, x0:x1]
    if inside.size == 0:
        inside = image
    mean = inside.reshape(-1, image.shape[2]).mean(axis=0)

    s = window.scale
    # pixel centers sit at index + 0.5 in box coordinates
    matrix = np.array(
        [[s, 0.0, s * (0.5 - ox) - 0.5], [0.0, s, s * (0.5 - oy) - 0.5]], dtype=np.float64
    )
    return cv2.warpAffine(
        image,
        matrix,
        (window.out_size, window.out_size),
        flags=cv2.INTER_LINEAR,
        borderMode=cv2.BORDER_CONSTANT,
        borderValue=tuple(float(v) for v in mean),
    )


def clip_to_image(box: BBox, width: int, height: int, min_size: float = 1.0) -> BBox:
    """Clips a present box into the image, keeping at least min_size pixels."""
    x1 = min(max(box.x, 0.0), width - min_size)
    y1 = min(max(box.y, 0.0), height - min_size)
    x2 = max(min(box.x + box.w, float(width)), x1 + min_size)
    y2 = max(min(box.y + box.h, float(height)), y1 + min_size)
    return BBox.from_corners(x1, y1, x2, y2)


# Vectorized forms over (n, 4) arrays of xywh rows, used by the evaluator.

def _overlap_1d_many(a0: np.ndarray, a_len: np.ndarray, b0: np.ndarray, b_len: np.ndarray) -> np.ndarray:
    a_first = a0 <= b0
    lo_len = np.where(a_first, a_len, b_len)
    hi_len = np.where(a_first, b_len, a_len)
    return np.clip(np.minimum(lo_len - np.abs(b0 - a0), hi_len), 0.0, None)


def iou_many(pred: np.ndarray, gt: np.ndarray) -> np.ndarray:
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    iw = _overlap_1d_many(pred[:, 0], pred[:, 2], gt[:, 0], gt[:, 2])
    ih = _overlap_1d_many(pred[:, 1], pred[:, 3], gt[:, 1], gt[:, 3])
    inter = iw * ih
    union = pred[:, 2] * pred[:, 3] + gt[:, 2] * gt[:, 3] - inter
    out = np.zeros(len(pred), dtype=np.float64)
    np.divide(inter, union, out=out, where=union > 0.0)
    out[(union > 0.0) & (pred == gt).all(axis=1)] = 1.0
    return np.round(np.clip(out, 0.0, 1.0), SETTLE_DECIMALS)


def center_distance_many(pred: np.ndarray, gt: np.ndarray) -> np.ndarray:
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    dx = (pred[:, 0] + pred[:, 2] / 2.0) - (gt[:, 0] + gt[:, 2] / 2.0)
    dy = (pred[:, 1] + pred[:, 3] / 2.0) - (gt[:, 1] + gt[:, 3] / 2.0)
    return np.round(np.hypot(dx, dy), SETTLE_DECIMALS)


def normalized_center_distance_many(pred: np.ndarray, gt: np.ndarray) -> np.ndarray:
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    dx = ((pred[:, 0] - gt[:, 0]) + (pred[:, 2] - gt[:, 2]) / 2.0) / gt[:, 2]
    dy = ((pred[:, 1] - gt[:, 1]) + (pred[:, 3] - gt[:, 3]) / 2.0) / gt[:, 3]
    return np.round(np.hypot(dx, dy), SETTLE_DECIMALS)
