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

"""Run configuration: pydantic models, layered JSON files and CLI overrides.

Every default below is the full-scale training recipe; desk-scale runs are
expressed as profiles under configs/ that override a handful of keys.
"""

import json
import os
from collections.abc import Iterable, Mapping
from pathlib import Path
from typing import Any, Literal

from immutabledict import immutabledict
from loguru import logger
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    ValidationError,
    field_validator,
    model_validator,
)

from rgbs_track.errors import ConfigError

ALIASES = immutabledict(
    {
        "scam.layers": "backbone.scam_layers",
        "srst.wsd": "srst.detection",
        "srst.tos": "srst.saliency",
    }
)


def _comma_ints(value: Any) -> Any:
    if isinstance(value, str):
        stripped = value.strip().strip("[]")
        return [int(part) for part in stripped.split(",") if part.strip()]
    if isinstance(value, int):
        return [value]
    return value


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", validate_assignment=True)


class BackboneConfig(_Section):
    depth: int = Field(default=12, ge=1)
    dim: int = Field(default=192, ge=1)
    heads: int = Field(default=3, ge=1)
    patch: int = Field(default=16, ge=1)
    mlp_ratio: float = Field(default=4.0, gt=0.0)
    scam_layers: list[int] = Field(default_factory=lambda: [4, 7, 10])
    template_size: int = 128
    search_size: int = 256
    share_branches: bool = False

    split_layers = field_validator("scam_layers", mode="before")(_comma_ints)

    @model_validator(mode="after")
    def _check_geometry(self) -> "BackboneConfig":
        if self.dim % self.heads:
            raise ValueError(f"dim {self.dim} is not divisible by heads {self.heads}")
        for name in ("template_size", "search_size"):
            size = getattr(self, name)
            if size <= 0 or size % self.patch:
                raise ValueError(f"{name}={size} is not a positive multiple of patch={self.patch}")
        bad = [layer for layer in self.scam_layers if not 1 <= layer <= self.depth]
        if bad:
            raise ValueError(f"scam_layers {bad} fall outside [1, {self.depth}]")
        if len(set(self.scam_layers)) != len(self.scam_layers):
            raise ValueError(f"scam_layers contains duplicates: {self.scam_layers}")
        return self

    @property
    def template_grid(self) -> int:
        return self.template_size // self.patch

    @property
    def search_grid(self) -> int:
        return self.search_size // self.patch


class ScamConfig(_Section):
    mode: Literal["relu_gim", "relu_nogim", "softmax_gim", "softmax_nogim"] = "relu_gim"
    gim_residual: Literal["input", "attn"] = "input"
    heads: int = Field(default=1, ge=1)
    hidden_ratio: float = Field(default=4.0, gt=0.0)
    pre_norm: bool = False
    lr_scale: float = Field(default=0.1, gt=0.0)
    zero_init: bool = True

    @property
    def gate(self) -> Literal["relu", "softmax"]:
        return "relu" if self.mode.startswith("relu") else "softmax"

    @property
    def use_gim(self) -> bool:
        return self.mode.endswith("_gim")


class HeadConfig(_Section):
    channels: int = Field(default=256, ge=1)
    stages: int = Field(default=4, ge=1)
    hanning_weight: float = Field(default=0.49, ge=0.0, le=1.0)


class LossWeights(_Section):
    lambda_iou: float = Field(default=2.0, gt=0.0)
    lambda_l1: float = Field(default=5.0, gt=0.0)
    focal_alpha: float = 2.0
    focal_beta: float = 4.0
    eps: float = Field(default=1e-4, gt=0.0, lt=0.5)
    gaussian_min_overlap: float = Field(default=0.7, gt=0.0, lt=1.0)


class OptimConfig(_Section):
    lr: float = Field(default=1e-5, gt=0.0)
    weight_decay: float = Field(default=1e-4, ge=0.0)
    betas: tuple[float, float] = (0.9, 0.999)
    grad_clip_norm: float | None = 0.1
    lr_drop_step: int | None = Field(default=None, ge=1)
    lr_drop_factor: float = Field(default=0.1, gt=0.0, le=1.0)


class TrainConfig(_Section):
    epochs: int = Field(default=10, ge=1)
    samples_per_epoch: int = Field(default=60_000, ge=1)
    batch_size: int = Field(default=64, ge=1)
    max_steps: int | None = None
    fixed_pool: int | None = None
    num_workers: int = Field(default=0, ge=0)
    log_every: int = Field(default=10, ge=1)
    sot_root: str = "data/toy/train"
    detection_annotations: str | None = "data/toy/detection/annotations.json"
    init_checkpoint: str | None = None
    out_dir: str = "runs/train"


class SrstConfig(_Section):
    max_gap: int = Field(default=200, ge=0)
    misalign: bool = True
    saliency: bool = True
    saliency_method: str = "spectral_residual"
    detection: bool = True
    detection_saliency: bool = True
    mix_sot: float = Field(default=0.85, ge=0.0)
    mix_detection: float = Field(default=0.15, ge=0.0)
    search_scale_range: tuple[float, float] = (0.85, 1.18)
    search_shift: float = Field(default=0.1, ge=0.0)
    max_resample: int = Field(default=8, ge=0)

    @model_validator(mode="after")
    def _check_mix(self) -> "SrstConfig":
        if self.mix_sot + self.mix_detection <= 0.0:
            raise ValueError("mix_sot and mix_detection cannot both be zero")
        low, high = self.search_scale_range
        if not 0.0 < low <= high:
            raise ValueError(f"search_scale_range must satisfy 0 < low <= high, got {low}, {high}")
        return self


class TrackerConfig(_Section):
    template_factor: float = Field(default=2.0, gt=0.0)
    search_factor: float = Field(default=4.0, gt=0.0)
    confidence_threshold: float = Field(default=0.5, ge=0.0, le=1.0)
    hanning: bool = True
    lazy_init: bool = False


class EvalProtocol(_Section):
    both_absent_correct: bool = True
    aggregation: Literal["frame_pool", "sequence_mean"] = "frame_pool"
    success_top: Literal["strict", "closed"] = "strict"
    precision_threshold: float = 20.0
    confidence_threshold: float = Field(default=0.5, ge=0.0, le=1.0)
    top_k: int = Field(default=8, ge=1)


class DatagenConfig(_Section):
    out_dir: str = "data/toy"
    sequences: int = Field(default=4, ge=1)
    frames: int = Field(default=40, ge=2)
    width: int = Field(default=256, ge=64)
    height: int = Field(default=192, ge=64)
    detection_images: int = Field(default=12, ge=0)
    preview_examples: int = Field(default=4, ge=1)


class RunConfig(_Section):
    backbone: BackboneConfig = Field(default_factory=BackboneConfig)
    scam: ScamConfig = Field(default_factory=ScamConfig)
    heads: HeadConfig = Field(default_factory=HeadConfig)
    loss: LossWeights = Field(default_factory=LossWeights)
    optim: OptimConfig = Field(default_factory=OptimConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    srst: SrstConfig = Field(default_factory=SrstConfig)
    tracker: TrackerConfig = Field(default_factory=TrackerConfig)
    eval: EvalProtocol = Field(default_factory=EvalProtocol)
    datagen: DatagenConfig = Field(default_factory=DatagenConfig)
    seed: int = 0
    deterministic: bool = True
    device: str = Field(default_factory=lambda: os.environ.get("RGBS_DEVICE", "cpu"))


def _deep_merge(base: dict[str, Any], update: Mapping[str, Any]) -> dict[str, Any]:
    merged = dict(base)
    for key, value in update.items():
        if isinstance(value, Mapping) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def parse_value(raw: str) -> Any:
    """Parses an override value: on/off, then JSON, then the raw string."""
    lowered = raw.strip().lower()
    if lowered in ("on", "true", "yes"):
        return True
    if lowered in ("off", "false", "no"):
        return False
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def parse_overrides(args: Iterable[str]) -> dict[str, Any]:
    """Turns ["--srst.saliency=off", "--scam.layers", "4,7"] into a dotted-key dict."""
    overrides: dict[str, Any] = {}
    pending: str | None = None
    for arg in args:
        if pending is not None:
            overrides[pending] = parse_value(arg)
            pending = None
            continue
        if not arg.startswith("--"):
            raise ConfigError(f"Unexpected argument {arg!r}; overrides look like --section.key=value")
        key, sep, value = arg[2:].partition("=")
        if "." not in key:
            raise ConfigError(f"Override {arg!r} must name a section, e.g. --train.batch_size=8")
        if sep:
            overrides[key] = parse_value(value)
        else:
            pending = key
    if pending is not None:
        raise ConfigError(f"Override --{pending} has no value")
    return overrides


def _nest(dotted: Mapping[str, Any]) -> dict[str, Any]:
    nested: dict[str, Any] = {}
    for key, value in dotted.items():
        key = ALIASES.get(key, key)
        node = nested
        *parents, leaf = key.split(".")
        for part in parents:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"Override {key!r} conflicts with another override")
        node[leaf] = value
    return nested


def load_config(
    paths: Iterable[str | Path] = (),
    overrides: Mapping[str, Any] | None = None,
    base: Mapping[str, Any] | None = None,
) -> RunConfig:
    """Builds a RunConfig from JSON profiles applied in order, then dotted overrides.

    base, when given, is the bottom layer (e.g. the config stored in a checkpoint).
    """
    data: dict[str, Any] = dict(base or {})
    for path in paths:
        path = Path(path)
        try:
            layer = json.loads(path.read_text())
        except FileNotFoundError as exc:
            raise ConfigError(f"Config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"Config file {path} is not valid JSON: {exc}") from exc
        if not isinstance(layer, dict):
            raise ConfigError(f"Config file {path} must hold a JSON object")
        logger.debug(f"Applying config layer {path}")
        data = _deep_merge(data, layer)
    if overrides:
        data = _deep_merge(data, _nest(overrides))
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(f"Invalid configuration:\n{exc}") from exc


def _flatten(prefix: str, value: Any) -> Iterable[tuple[str, Any]]:
    if isinstance(value, dict):
        for key, item in value.items():
            yield from _flatten(f"{prefix}.{key}" if prefix else key, item)
    else:
        yield prefix, value


def config_reference() -> str:
    """Every configuration key with its default, one per line."""
    defaults = RunConfig().model_dump(mode="json")
    defaults["device"] = "cpu (or $RGBS_DEVICE)"
    lines = ["\b", "Configuration keys (override with --section.key=value):"]
    lines += [f"  {key} = {json.dumps(value)}" for key, value in _flatten("", defaults)]
    lines += [f"  {alias} -> {target}" for alias, target in ALIASES.items()]
    return "\n".join(lines)
