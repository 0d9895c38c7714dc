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

import os
import random

import numpy as np
import torch
from loguru import logger


def seed_everything(seed: int, deterministic: bool = True) -> None:
    """Seeds python, numpy and torch; optionally forces bit-stable kernels."""
    random.seed(seed)
    np.random.seed(seed % 2**32)
    torch.manual_seed(seed)
    if deterministic:
        os.environ.setdefault("CUBLAS_WORKSPACE_CONFIG", ":4096:8")
        torch.backends.cudnn.benchmark = False
        torch.backends.cudnn.deterministic = True
        torch.use_deterministic_algorithms(True)
    logger.debug(f"Seeded run with seed={seed} deterministic={deterministic}")


def example_rng(seed: int, *stream: int) -> np.random.Generator:
    """Independent generator for one (epoch, index) draw of the data pipeline."""
    return np.random.default_rng([seed, *stream])
