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

"""Versioned checkpoint archive.

Layout (torch.save of a dict)::

    {"format": "rgbs-track-checkpoint", "version": 1,
     "config": RunConfig as JSON-compatible dict,
     "tensors": {"backbone.rgb.blocks.0.attn.qkv.weight": tensor, ...}}

Tensor names follow the SCANet submodules: backbone.*, scam.<layer>.*,
head_rgb.* and head_sonar.*.
"""

import math
from collections.abc import Mapping
from pathlib import Path
from typing import Any

import torch
from loguru import logger

from rgbs_track.errors import CheckpointMismatchError, DataError
from rgbs_track.model.backbone import resize_pos_embed
from rgbs_track.model.network import SCANet

CHECKPOINT_FORMAT = "rgbs-track-checkpoint"
CHECKPOINT_VERSION = 1

# fields that change tensor shapes, the module tree or what the weights compute
MODEL_FIELDS = (
    ("backbone", "depth"),
    ("backbone", "dim"),
    ("backbone", "heads"),
    ("backbone", "patch"),
    ("backbone", "mlp_ratio"),
    ("backbone", "share_branches"),
    ("heads", "channels"),
    ("heads", "stages"),
)
# only compared when both sides have SCAM layers
SCAM_FIELDS = (
    ("scam", "mode"),
    ("scam", "gim_residual"),
    ("scam", "heads"),
    ("scam", "hidden_ratio"),
    ("scam", "pre_norm"),
)


def save_checkpoint(network: SCANet, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    archive = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "config": network.cfg.model_dump(mode="json"),
        "tensors": {name: tensor.detach().cpu() for name, tensor in network.state_dict().items()},
    }
    torch.save(archive, path)
    logger.info(f"Saved checkpoint with {len(archive['tensors'])} tensors to {path}")
    return path


def read_checkpoint(path: str | Path) -> dict[str, Any]:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"Checkpoint not found: {path}")
    archive = torch.load(path, map_location="cpu", weights_only=True)
    if not isinstance(archive, dict) or archive.get("format") != CHECKPOINT_FORMAT:
        raise DataError(f"{path} is not an rgbs-track checkpoint")
    if archive.get("version") != CHECKPOINT_VERSION:
        raise DataError(f"{path} has unsupported checkpoint version {archive.get('version')}")
    return archive


def _mismatches(stored: Mapping[str, Any], network: SCANet) -> dict[str, tuple[object, object]]:
    wanted = network.cfg.model_dump(mode="json")
    found: dict[str, tuple[object, object]] = {}
    fields: tuple[tuple[str, str], ...] = MODEL_FIELDS
    if stored.get("backbone", {}).get("scam_layers") and wanted["backbone"]["scam_layers"]:
        fields += SCAM_FIELDS
    for section, key in fields:
        have = stored.get(section, {}).get(key)
        want = wanted[section][key]
        if have != want:
            found[f"{section}.{key}"] = (have, want)
    return found


def _fit_pos_embed(name: str, tensor: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    if tensor.shape == target.shape or "pos_embed" not in name:
        return tensor
    logger.info(f"Interpolating {name} from {tuple(tensor.shape)} to {tuple(target.shape)}")
    return resize_pos_embed(tensor, math.isqrt(target.shape[1]))


def load_tensors(network: SCANet, tensors: Mapping[str, torch.Tensor]) -> None:
    """Loads tensors into the network; scam.* entries load wherever layer and shape agree."""
    own = network.state_dict()
    state: dict[str, torch.Tensor] = {}
    skipped_scam: list[str] = []
    for name, tensor in tensors.items():
        if name.startswith("scam."):
            if name in own and own[name].shape == tensor.shape:
                state[name] = tensor
            else:
                skipped_scam.append(name)
            continue
        if name not in own:
            raise DataError(f"Checkpoint tensor {name} has no counterpart in the network")
        state[name] = _fit_pos_embed(name, tensor, own[name])

    missing = [name for name in own if name not in state and not name.startswith("scam.")]
    if missing:
        raise DataError(f"Checkpoint lacks {len(missing)} tensors, e.g. {missing[:3]}")
    fresh_scam = [name for name in own if name.startswith("scam.") and name not in state]
    if skipped_scam or fresh_scam:
        logger.warning(
            f"Partial SCAM load: {len(skipped_scam)} checkpoint tensors skipped, "
            f"{len(fresh_scam)} network tensors keep their initialization"
        )
    network.load_state_dict(state, strict=False)


def load_checkpoint(network: SCANet, path: str | Path) -> dict[str, Any]:
    """Loads a checkpoint into a network built from a compatible config; returns the stored config."""
    archive = read_checkpoint(path)
    mismatches = _mismatches(archive["config"], network)
    if mismatches:
        raise CheckpointMismatchError(mismatches)
    load_tensors(network, archive["tensors"])
    logger.info(f"Loaded checkpoint {path}")
    return archive["config"]


def inherit_single_branch(network: SCANet, tensors: Mapping[str, torch.Tensor]) -> None:
    """Starts both branches and both heads from one single-modality model.

    branch.* tensors go to backbone.rgb.* and backbone.sonar.*; head.* tensors
    go to head_rgb.* and head_sonar.*. Any other tensor is ignored.
    """
    mapped: dict[str, torch.Tensor] = {}
    for name, tensor in tensors.items():
        if name.startswith("branch."):
            rest = name.removeprefix("branch.")
            mapped[f"backbone.rgb.{rest}"] = tensor
            mapped[f"backbone.sonar.{rest}"] = tensor
        elif name.startswith("head."):
            rest = name.removeprefix("head.")
            mapped[f"head_rgb.{rest}"] = tensor
            mapped[f"head_sonar.{rest}"] = tensor
    own = network.state_dict()
    unknown = [name for name in mapped if name not in own]
    if unknown:
        raise DataError(f"Single-branch tensors do not fit the network, e.g. {unknown[:3]}")
    network.load_state_dict(
        {name: _fit_pos_embed(name, tensor, own[name]) for name, tensor in mapped.items()}, strict=False
    )
    logger.info(f"Initialized both branches and heads from {len(mapped) // 2} single-branch tensors")
