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

"""Per-frame outcomes and the three curves: precision, normalized precision, success.

Absence semantics: a frame where prediction and ground truth are both the
all-zero box is a correct frame (distance 0, overlap 1); a frame where exactly
one of them is absent is a miss (distance inf, overlap 0). Frames whose
ground truth is present but degenerate (w or h equal to 0) are excluded.
"""

from collections.abc import Sequence
from dataclasses import dataclass
from typing import Literal, NamedTuple

import numpy as np

from rgbs_track.boxgeom import (
    BBox,
    center_distance,
    center_distance_many,
    iou,
    iou_many,
    normalized_center_distance,
    normalized_center_distance_many,
)
from rgbs_track.errors import DataError

PRECISION_GRID = np.arange(51, dtype=np.float64)
NORM_PRECISION_GRID = np.arange(51, dtype=np.float64) / 100.0
SUCCESS_GRID = np.arange(21, dtype=np.float64) / 20.0

SuccessTop = Literal["strict", "closed"]


class Outcome(NamedTuple):
    distance: float
    norm_distance: float
    overlap: float


CORRECT = Outcome(0.0, 0.0, 1.0)
MISSED = Outcome(np.inf, np.inf, 0.0)


def frame_outcome(pred: BBox, gt: BBox, both_absent_correct: bool = True) -> Outcome | None:
    """Outcome of one frame, or None when the ground truth is degenerate."""
    if gt.is_absent():
        if pred.is_absent() and both_absent_correct:
            return CORRECT
        return MISSED
    if gt.w <= 0.0 or gt.h <= 0.0:
        return None
    if pred.is_absent():
        return MISSED
    return Outcome(center_distance(pred, gt), normalized_center_distance(pred, gt), iou(pred, gt))


@dataclass(frozen=True)
class FrameOutcomes:
    distance: np.ndarray
    norm_distance: np.ndarray
    overlap: np.ndarray

    def __len__(self) -> int:
        return len(self.overlap)

    @classmethod
    def concat(cls, parts: Sequence["FrameOutcomes"]) -> "FrameOutcomes":
        if not parts:
            return cls(np.zeros(0), np.zeros(0), np.zeros(0))
        return cls(
            np.concatenate([p.distance for p in parts]),
            np.concatenate([p.norm_distance for p in parts]),
            np.concatenate([p.overlap for p in parts]),
        )

    @classmethod
    def from_outcomes(cls, outcomes: Sequence[Outcome]) -> "FrameOutcomes":
        table = np.array(outcomes, dtype=np.float64).reshape(-1, 3)
        return cls(table[:, 0], table[:, 1], table[:, 2])


def frame_outcomes(
    pred: np.ndarray,
    gt: np.ndarray,
    both_absent_correct: bool = True,
    sequence: str = "",
) -> FrameOutcomes:
    """Vectorized frame_outcome over aligned (n, 4) xywh arrays."""
    pred = np.asarray(pred, dtype=np.float64).reshape(-1, 4)
    gt = np.asarray(gt, dtype=np.float64).reshape(-1, 4)
    if len(pred) != len(gt):
        raise DataError(f"Sequence {sequence!r}: {len(pred)} result lines for {len(gt)} annotated frames")

    pred_absent = ~pred.any(axis=1)
    gt_absent = ~gt.any(axis=1)
    degenerate = ~gt_absent & ((gt[:, 2] <= 0.0) | (gt[:, 3] <= 0.0))
    keep = ~degenerate
    pred, gt = pred[keep], gt[keep]
    pred_absent, gt_absent = pred_absent[keep], gt_absent[keep]

    both_present = ~pred_absent & ~gt_absent
    distance = np.full(len(gt), np.inf)
    norm_distance = np.full(len(gt), np.inf)
    overlap = np.zeros(len(gt))
    distance[both_present] = center_distance_many(pred[both_present], gt[both_present])
    norm_distance[both_present] = normalized_center_distance_many(pred[both_present], gt[both_present])
    overlap[both_present] = iou_many(pred[both_present], gt[both_present])
    if both_absent_correct:
        both_absent = pred_absent & gt_absent
        distance[both_absent] = 0.0
        norm_distance[both_absent] = 0.0
        overlap[both_absent] = 1.0
    return FrameOutcomes(distance, norm_distance, overlap)


def apply_confidence(pred: np.ndarray, confidence: np.ndarray | None, threshold: float = 0.5) -> np.ndarray:
    """Zeroes predictions whose confidence is below the threshold."""
    pred = np.array(pred, dtype=np.float64).reshape(-1, 4)
    if confidence is None:
        return pred
    pred[np.asarray(confidence) < threshold] = 0.0
    return pred


@dataclass(frozen=True)
class MetricCurve:
    thresholds: np.ndarray
    values: np.ndarray
    summary: float

    def as_dict(self) -> dict[str, list[float]]:
        return {"thresholds": self.thresholds.tolist(), "values": self.values.tolist()}


def _require(outcomes: FrameOutcomes) -> None:
    if len(outcomes) == 0:
        raise ValueError("Cannot score an empty set of frames")


def precision_curve(outcomes: FrameOutcomes, threshold: float = 20.0) -> MetricCurve:
    """Fraction of frames with center error <= t for t = 0..50 px; summary read at threshold."""
    _require(outcomes)
    values = (outcomes.distance[:, None] <= PRECISION_GRID[None, :]).mean(axis=0)
    return MetricCurve(PRECISION_GRID, values, float((outcomes.distance <= threshold).mean()))


def norm_precision_curve(outcomes: FrameOutcomes) -> MetricCurve:
    """Fraction with normalized error <= t on 51 points over [0, 0.5]; summary = mean."""
    _require(outcomes)
    values = (outcomes.norm_distance[:, None] <= NORM_PRECISION_GRID[None, :]).mean(axis=0)
    return MetricCurve(NORM_PRECISION_GRID, values, float(values.mean()))


def success_curve(outcomes: FrameOutcomes, top: SuccessTop = "strict") -> MetricCurve:
    """Fraction with overlap > t on 21 points over [0, 1]; summary = mean.

    With top="closed" the last point counts overlap >= 1, so perfect tracking
    scores 1.0 instead of 20/21.
    """
    _require(outcomes)
    passed = outcomes.overlap[:, None] > SUCCESS_GRID[None, :]
    if top == "closed":
        passed[:, -1] = outcomes.overlap >= SUCCESS_GRID[-1]
    values = passed.mean(axis=0)
    return MetricCurve(SUCCESS_GRID, values, float(values.mean()))
