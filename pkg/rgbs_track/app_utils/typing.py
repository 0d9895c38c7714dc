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

from enum import StrEnum
from typing import Literal

import numpy as np
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
)

from rgbs_track.boxgeom import BBox


class Modality(StrEnum):
    RGB = "rgb"
    SONAR = "sonar"


class ModalityPairFrame(BaseModel):
    """Time-aligned RGB and sonar images of one frame.

    An image is None when its file could not be decoded.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    rgb: np.ndarray | None
    sonar: np.ndarray | None
    index: int = 0
    sequence: str = ""

    def image(self, modality: Modality) -> np.ndarray | None:
        return self.rgb if modality == Modality.RGB else self.sonar


class TrackOutput(BaseModel):
    """One modality's per-frame tracker output."""

    model_config = ConfigDict(frozen=True)

    box: BBox = Field(default_factory=BBox.absent)
    confidence: float = Field(default=0.0, ge=0.0, le=1.0)


class SummaryRecord(BaseModel):
    """One tracker's scores on one modality, as written to summary JSON."""

    schema_version: Literal[1] = 1
    tracker: str
    modality: Modality
    SR: float
    PR: float
    NPR: float
    per_attribute: dict[str, dict[str, float]] = Field(default_factory=dict)
    curves: dict[str, dict[str, list[float]]] = Field(default_factory=dict)
