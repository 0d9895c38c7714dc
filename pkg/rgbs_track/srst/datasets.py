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

"""Training data ingestion: SOT sequence folders and category-agnostic detection images."""

import json
from functools import lru_cache
from pathlib import Path
from typing import Literal

import cv2
import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, model_validator

from rgbs_track.boxfile import read_boxes
from rgbs_track.boxgeom import BBox
from rgbs_track.errors import DataError

IMAGE_SUFFIXES = (".jpg", ".jpeg", ".png", ".bmp")


class SequenceRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    frames: tuple[Path, ...]
    boxes: tuple[BBox, ...]
    source: Literal["sot", "detection"] = "sot"

    @model_validator(mode="after")
    def _check_lengths(self) -> "SequenceRecord":
        if len(self.frames) != len(self.boxes):
            raise ValueError(f"{self.name}: {len(self.frames)} frames but {len(self.boxes)} boxes")
        if not self.frames:
            raise ValueError(f"{self.name}: a sequence needs at least one frame")
        return self

    def valid_indices(self) -> list[int]:
        return [i for i, box in enumerate(self.boxes) if box.w > 0 and box.h > 0]


def list_images(directory: Path) -> list[Path]:
    return sorted(p for p in directory.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)


def read_sequence_dir(root: str | Path) -> list[SequenceRecord]:
    """Reads <root>/<seq>/img/*.jpg + groundtruth.txt sequences."""
    root = Path(root)
    if not root.is_dir():
        raise DataError(f"SOT dataset root not found: {root}")
    records = []
    for seq_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        gt_file = seq_dir / "groundtruth.txt"
        img_dir = seq_dir / "img"
        if not gt_file.is_file() or not img_dir.is_dir():
            logger.warning(f"Skipping {seq_dir.name}: expected img/ and groundtruth.txt")
            continue
        frames = list_images(img_dir)
        boxes = read_boxes(gt_file)
        if len(frames) != len(boxes):
            raise DataError(f"{seq_dir.name}: {len(frames)} images but {len(boxes)} annotation lines")
        records.append(SequenceRecord(name=seq_dir.name, frames=tuple(frames), boxes=tuple(boxes)))
    logger.info(f"Read {len(records)} SOT sequences from {root}")
    return records


def read_detection_annotations(path: str | Path) -> list[SequenceRecord]:
    """Turns a JSON {image path: [[x, y, w, h], ...]} file into 1-frame pseudo-sequences.

    Each annotated box becomes its own record; image paths are relative to the
    JSON file's directory.
    """
    path = Path(path)
    try:
        mapping = json.loads(path.read_text())
    except FileNotFoundError as exc:
        raise DataError(f"Detection annotations not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"Detection annotations {path} are not valid JSON: {exc}") from exc
    if not isinstance(mapping, dict):
        raise DataError(f"{path} must map image paths to box lists")

    records = []
    for image_name, boxes in sorted(mapping.items()):
        for k, values in enumerate(boxes):
            box = BBox.from_xywh(values)
            if box.w <= 0 or box.h <= 0:
                continue
            records.append(
                SequenceRecord(
                    name=f"{Path(image_name).stem}#{k}",
                    frames=(path.parent / image_name,),
                    boxes=(box,),
                    source="detection",
                )
            )
    logger.info(f"Read {len(records)} detection pseudo-sequences from {path}")
    return records


def read_image(path: str | Path) -> np.ndarray | None:
    """RGB uint8 image, or None when the file cannot be decoded."""
    bgr = cv2.imread(str(path), cv2.IMREAD_COLOR)
    if bgr is None:
        return None
    return cv2.cvtColor(bgr, cv2.COLOR_BGR2RGB)


@lru_cache(maxsize=512)
def load_image(path: Path) -> np.ndarray:
    """Cached read-only RGB image for training; undecodable files raise DataError."""
    image = read_image(path)
    if image is None:
        raise DataError(f"Cannot decode image {path}")
    image.setflags(write=False)
    return image
