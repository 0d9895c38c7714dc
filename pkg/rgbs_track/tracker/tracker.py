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

"""Online dual-modality tracking with the confidence-threshold absence rule."""

from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np
import torch
from loguru import logger
from torch import nn

from rgbs_track.app_utils.typing import Modality, ModalityPairFrame, TrackOutput
from rgbs_track.boxgeom import BBox, CropWindow, clip_to_image, crop_image, crop_window
from rgbs_track.config import RunConfig
from rgbs_track.errors import DataError
from rgbs_track.model.heads import ScoreMapBundle, decode_box, hanning_penalty
from rgbs_track.model.preprocess import to_tensor

PairOutput = tuple[TrackOutput, TrackOutput]
NetworkFn = Callable[
    [torch.Tensor, torch.Tensor, torch.Tensor, torch.Tensor], tuple[ScoreMapBundle, ScoreMapBundle]
]


class Tracker(Protocol):
    name: str

    def init(self, frame: ModalityPairFrame, boxes: tuple[BBox, BBox]) -> None: ...

    def track(self, frame: ModalityPairFrame) -> PairOutput: ...


@dataclass
class BranchState:
    template: torch.Tensor | None = None
    last_box: BBox = field(default_factory=BBox.absent)
    last_confidence: float = 0.0
    absence_anchor: BBox | None = None

    @property
    def initialized(self) -> bool:
        return self.template is not None


@dataclass
class TrackerState:
    rgb: BranchState = field(default_factory=BranchState)
    sonar: BranchState = field(default_factory=BranchState)

    def branch(self, modality: Modality) -> BranchState:
        return self.rgb if modality == Modality.RGB else self.sonar


def full_frame_window(image: np.ndarray, out_size: int) -> CropWindow:
    height, width = image.shape[:2]
    return CropWindow(center=(width / 2.0, height / 2.0), side=float(max(width, height)), out_size=out_size)


class SCANetTracker:
    """Runs one network forward per frame pair and applies the absence rule per modality."""

    name = "SCANet"

    def __init__(self, network: nn.Module | NetworkFn, cfg: RunConfig) -> None:
        self.network = network
        if isinstance(network, nn.Module):
            network.eval()
        self.cfg = cfg
        self.device = torch.device(cfg.device)
        grid = cfg.backbone.search_grid
        self.penalty = hanning_penalty(grid, cfg.heads.hanning_weight) if cfg.tracker.hanning else None
        self.state = TrackerState()

    def _template(self, image: np.ndarray, box: BBox) -> torch.Tensor:
        window = crop_window(box, self.cfg.tracker.template_factor, self.cfg.backbone.template_size)
        return to_tensor(crop_image(image, window), self.device)

    def _blank(self, size: int) -> torch.Tensor:
        # zeros after normalization equal the mean color
        return torch.zeros(1, 3, size, size, device=self.device)

    def init(self, frame: ModalityPairFrame, boxes: tuple[BBox, BBox]) -> None:
        if all(box.is_absent() for box in boxes):
            raise DataError(f"{frame.sequence}: both initial boxes are absent; nothing to track")
        self.state = TrackerState()
        for modality, box in zip(Modality, boxes, strict=True):
            if box.is_absent():
                logger.debug(f"{frame.sequence}: {modality} starts without a target")
                continue
            image = frame.image(modality)
            if image is None:
                raise DataError(f"{frame.sequence}: initial {modality} frame could not be decoded")
            branch = self.state.branch(modality)
            branch.template = self._template(image, box)
            branch.last_box = box
            branch.last_confidence = 1.0
            branch.absence_anchor = box

    def _search(self, modality: Modality, image: np.ndarray | None) -> tuple[torch.Tensor, CropWindow | None]:
        size = self.cfg.backbone.search_size
        if image is None:
            return self._blank(size), None
        branch = self.state.branch(modality)
        if branch.absence_anchor is None:
            window = full_frame_window(image, size)
        else:
            window = crop_window(branch.absence_anchor, self.cfg.tracker.search_factor, size)
        return to_tensor(crop_image(image, window), self.device), window

    def _proxy_template(self, modality: Modality) -> torch.Tensor:
        own = self.state.branch(modality)
        if own.template is not None:
            return own.template
        other = self.state.branch(Modality.SONAR if modality == Modality.RGB else Modality.RGB)
        if self.cfg.tracker.lazy_init and other.template is not None:
            return other.template
        return self._blank(self.cfg.backbone.template_size)

    @torch.no_grad()
    def track(self, frame: ModalityPairFrame) -> PairOutput:
        x_r, window_r = self._search(Modality.RGB, frame.rgb)
        x_s, window_s = self._search(Modality.SONAR, frame.sonar)
        z_r = self._proxy_template(Modality.RGB)
        z_s = self._proxy_template(Modality.SONAR)
        bundle_r, bundle_s = self.network(z_r, x_r, z_s, x_s)

        decoded: dict[Modality, tuple[BBox, float] | None] = {}
        for modality, bundle, window in (
            (Modality.RGB, bundle_r, window_r),
            (Modality.SONAR, bundle_s, window_s),
        ):
            if window is None:
                logger.warning(f"{frame.sequence}#{frame.index}: {modality} frame could not be decoded")
                decoded[modality] = None
            else:
                decoded[modality] = decode_box(bundle, window, self.penalty)

        outputs = {modality: self._update(modality, frame, decoded) for modality in Modality}
        return outputs[Modality.RGB], outputs[Modality.SONAR]

    def _update(
        self,
        modality: Modality,
        frame: ModalityPairFrame,
        decoded: Mapping[Modality, tuple[BBox, float] | None],
    ) -> TrackOutput:
        result = decoded[modality]
        branch = self.state.branch(modality)
        if result is None:
            return TrackOutput()
        box, confidence = result
        image = frame.image(modality)
        if image is None:
            return TrackOutput()
        threshold = self.cfg.tracker.confidence_threshold

        if not branch.initialized:
            other = decoded[Modality.SONAR if modality == Modality.RGB else Modality.RGB]
            if not self.cfg.tracker.lazy_init or other is None:
                return TrackOutput()
            if other[1] < threshold or confidence < threshold:
                return TrackOutput()
            logger.info(f"{frame.sequence}#{frame.index}: lazily initializing the {modality} branch")
            box = clip_to_image(box, image.shape[1], image.shape[0])
            branch.template = self._template(image, box)

        branch.last_confidence = confidence
        if confidence < threshold:
            branch.last_box = BBox.absent()
            return TrackOutput(box=BBox.absent(), confidence=confidence)
        box = clip_to_image(box, image.shape[1], image.shape[0])
        branch.last_box = box
        branch.absence_anchor = box
        return TrackOutput(box=box, confidence=confidence)


def _echo(box: BBox) -> TrackOutput:
    return TrackOutput(box=box, confidence=0.0 if box.is_absent() else 1.0)


class OracleTracker:
    """Echoes ground truth; present boxes get confidence 1 and absent ones 0."""

    name = "Oracle"

    def __init__(self, ground_truth: Mapping[str, tuple[Sequence[BBox], Sequence[BBox]]]) -> None:
        self.ground_truth = ground_truth

    def init(self, frame: ModalityPairFrame, boxes: tuple[BBox, BBox]) -> None:
        if frame.sequence not in self.ground_truth:
            raise DataError(f"Oracle has no ground truth for sequence {frame.sequence!r}")

    def track(self, frame: ModalityPairFrame) -> PairOutput:
        rgb, sonar = self.ground_truth[frame.sequence]
        return _echo(rgb[frame.index]), _echo(sonar[frame.index])


class ConstantAbsentTracker:
    name = "AlwaysAbsent"

    def init(self, frame: ModalityPairFrame, boxes: tuple[BBox, BBox]) -> None:
        pass

    def track(self, frame: ModalityPairFrame) -> PairOutput:
        return TrackOutput(), TrackOutput()
