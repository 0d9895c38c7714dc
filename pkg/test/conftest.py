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

import json
import sys
from collections.abc import Iterator
from pathlib import Path

import pytest
import torch
from loguru import logger

from rgbs_track.config import RunConfig, load_config
from rgbs_track.synthetic.generator import generate

TOY_OVERRIDES = {
    "backbone.depth": 2,
    "backbone.dim": 16,
    "backbone.heads": 2,
    "backbone.patch": 16,
    "backbone.mlp_ratio": 2.0,
    "backbone.scam_layers": [1],
    "backbone.template_size": 32,
    "backbone.search_size": 64,
    "heads.channels": 16,
    "heads.stages": 2,
    "train.batch_size": 2,
    "train.fixed_pool": 4,
    "train.max_steps": 2,
    "train.epochs": 1,
    "srst.max_gap": 5,
    "datagen.sequences": 2,
    "datagen.frames": 8,
    "datagen.width": 96,
    "datagen.height": 64,
    "datagen.detection_images": 3,
    "datagen.preview_examples": 2,
}


@pytest.fixture
def tiny_cfg() -> RunConfig:
    """A RunConfig small enough to build and run a network in milliseconds."""
    return load_config(overrides=TOY_OVERRIDES)


@pytest.fixture
def log_messages() -> Iterator[list[str]]:
    """Collects loguru messages emitted during the test."""
    messages: list[str] = []
    handler_id = logger.add(lambda message: messages.append(str(message)), level="DEBUG", format="{level} {message}")
    yield messages
    logger.remove(handler_id)


@pytest.fixture(autouse=True)
def _seed_torch() -> None:
    torch.manual_seed(0)


@pytest.fixture(scope="session")
def toy_root(tmp_path_factory: pytest.TempPathFactory) -> Path:
    """Generated toy data with three sequences; toy_002 has no absent frame."""
    cfg = load_config(overrides={**TOY_OVERRIDES, "datagen.sequences": 3})
    return generate(cfg, tmp_path_factory.mktemp("toy"))


@pytest.fixture
def toy_args() -> list[str]:
    """TOY_OVERRIDES spelled as command-line overrides."""
    return [f"--{key}={json.dumps(value)}" for key, value in TOY_OVERRIDES.items()]


@pytest.fixture
def restore_logging() -> Iterator[None]:
    """Puts loguru back on a plain stderr sink after a CLI run replaced its sinks."""
    yield
    logger.remove()
    logger.add(sys.stderr)
