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

"""Benchmark ingestion.

Layout::

    <root>/<seq>/rgb/*.jpg     RGB frames
    <root>/<seq>/sonar/*.jpg   sonar frames
    <root>/<seq>/rgb.txt       one x,y,w,h line per frame, 0,0,0,0 when absent
    <root>/<seq>/sonar.txt
    <root>/<seq>/attributes.txt  comma-separated attribute tags (optional)
"""

from collections.abc import Iterator
from pathlib import Path

from immutabledict import immutabledict
from loguru import logger
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from rgbs_track.app_utils.typing import Modality, ModalityPairFrame
from rgbs_track.boxfile import read_boxes
from rgbs_track.boxgeom import BBox
from rgbs_track.errors import DataError
from rgbs_track.srst.datasets import list_images, read_image

ATTRIBUTES = immutabledict(
    {
        "OC": "Occlusion: the target is occluded in the RGB images.",
        "FOV": "Full Out-of-View: the target leaves the field of view in both modalities.",
        "SA": "Similar Appearance: surrounding objects look like the target in RGB images.",
        "SV": "Scale Variation: the box scale change rate leaves the range [0.5, 2].",
        "SC": "Sonar Crossover: surrounding objects have a similar sonar reflection.",
        "DEF": "Deformation: the target changes shape significantly in sonar images.",
        "VLR": "Visual Low Resolution: the target has low resolution in RGB images.",
        "LI": "Low Illumination: the RGB images are dark.",
        "LSR": "Low Sonar Reflection: the target has low luminance in sonar images.",
    }
)


class SequenceAnnotation(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    rgb_boxes: tuple[BBox, ...]
    sonar_boxes: tuple[BBox, ...]
    attributes: frozenset[str] = frozenset()
    rgb_frames: tuple[Path, ...] = ()
    sonar_frames: tuple[Path, ...] = ()

    @field_validator("attributes")
    @classmethod
    def _known_attributes(cls, value: frozenset[str]) -> frozenset[str]:
        unknown = sorted(value - ATTRIBUTES.keys())
        if unknown:
            raise ValueError(f"Unknown attribute tags {unknown}; vocabulary is {list(ATTRIBUTES)}")
        return value

    @model_validator(mode="after")
    def _check_counts(self) -> "SequenceAnnotation":
        if len(self.rgb_boxes) != len(self.sonar_boxes):
            raise ValueError(
                f"{self.name}: {len(self.rgb_boxes)} RGB boxes but {len(self.sonar_boxes)} sonar boxes"
            )
        for label, frames in (("rgb", self.rgb_frames), ("sonar", self.sonar_frames)):
            if frames and len(frames) != len(self.rgb_boxes):
                raise ValueError(f"{self.name}: {len(frames)} {label} frames but {len(self.rgb_boxes)} boxes")
        return self

    def __len__(self) -> int:
        return len(self.rgb_boxes)

    def boxes(self, modality: Modality) -> tuple[BBox, ...]:
        return self.rgb_boxes if modality == Modality.RGB else self.sonar_boxes

    def frames(self) -> Iterator[ModalityPairFrame]:
        """Frame pairs in order; an undecodable image comes through as None."""
        for index, (rgb_path, sonar_path) in enumerate(zip(self.rgb_frames, self.sonar_frames, strict=True)):
            yield ModalityPairFrame(
                rgb=read_image(rgb_path), sonar=read_image(sonar_path), index=index, sequence=self.name
            )


def parse_attributes(text: str) -> frozenset[str]:
    return frozenset(tag.strip().upper() for tag in text.replace("\n", ",").split(",") if tag.strip())


def read_annotation(seq_dir: Path, with_frames: bool = True) -> SequenceAnnotation:
    attr_file = seq_dir / "attributes.txt"
    attributes = parse_attributes(attr_file.read_text()) if attr_file.is_file() else frozenset()
    try:
        return SequenceAnnotation(
            name=seq_dir.name,
            rgb_boxes=tuple(read_boxes(seq_dir / "rgb.txt")),
            sonar_boxes=tuple(read_boxes(seq_dir / "sonar.txt")),
            attributes=attributes,
            rgb_frames=tuple(list_images(seq_dir / "rgb")) if with_frames else (),
            sonar_frames=tuple(list_images(seq_dir / "sonar")) if with_frames else (),
        )
    except ValueError as exc:
        raise DataError(f"Invalid annotation in {seq_dir}: {exc}") from exc


def read_benchmark(root: str | Path, with_frames: bool = True) -> list[SequenceAnnotation]:
    """All sequences under root; sequences missing a modality are skipped with a warning."""
    root = Path(root)
    if not root.is_dir():
        raise DataError(f"Benchmark root not found: {root}")
    sequences = []
    for seq_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        needed = ["rgb.txt", "sonar.txt"] + (["rgb", "sonar"] if with_frames else [])
        missing = [name for name in needed if not (seq_dir / name).exists()]
        if missing:
            logger.warning(f"Skipping sequence {seq_dir.name}: missing {', '.join(missing)}")
            continue
        sequences.append(read_annotation(seq_dir, with_frames))
    if not sequences:
        raise DataError(f"No usable sequences under {root}")
    logger.info(f"Read {len(sequences)} benchmark sequences from {root}")
    return sequences
