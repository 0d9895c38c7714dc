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

import copy

import torch
from loguru import logger
from torch import nn

from rgbs_track.config import RunConfig
from rgbs_track.model.backbone import DualBranchBackbone
from rgbs_track.model.heads import CenterHead, ScoreMapBundle
from rgbs_track.model.scam import ScamStack


class SCANet(nn.Module):
    """Two-branch tracker network: backbone stacks, SCAM stack and per-modality heads.

    Submodule names are the checkpoint namespaces: backbone, scam, head_rgb and
    head_sonar.
    """

    def __init__(self, cfg: RunConfig) -> None:
        super().__init__()
        self.cfg = cfg
        self.backbone = DualBranchBackbone(cfg.backbone)
        self.scam = ScamStack(cfg.backbone.dim, cfg.backbone.scam_layers, cfg.scam)
        self.head_rgb = CenterHead(cfg.backbone.dim, cfg.heads)
        self.head_sonar = copy.deepcopy(self.head_rgb)

    def forward(
        self, z_r: torch.Tensor, x_r: torch.Tensor, z_s: torch.Tensor, x_s: torch.Tensor
    ) -> tuple[ScoreMapBundle, ScoreMapBundle]:
        h_r, h_s = self.backbone(z_r, x_r, z_s, x_s, self.scam.ordered(self.cfg.backbone.scam_layers))
        return self.head_rgb(h_r.search), self.head_sonar(h_s.search)

    def param_groups(self) -> list[dict[str, object]]:
        """AdamW groups: SCAM parameters run at lr * scam.lr_scale."""
        scam_params = list(self.scam.parameters())
        scam_ids = {id(p) for p in scam_params}
        rest = [p for p in self.parameters() if id(p) not in scam_ids]
        groups: list[dict[str, object]] = [{"params": rest, "lr": self.cfg.optim.lr, "name": "backbone+heads"}]
        if scam_params:
            groups.append(
                {"params": scam_params, "lr": self.cfg.optim.lr * self.cfg.scam.lr_scale, "name": "scam"}
            )
        return groups


def build_network(cfg: RunConfig) -> SCANet:
    network = SCANet(cfg).to(cfg.device)
    n_params = sum(p.numel() for p in network.parameters())
    logger.info(
        f"Built SCANet depth={cfg.backbone.depth} C={cfg.backbone.dim} "
        f"scam_layers={cfg.backbone.scam_layers} mode={cfg.scam.mode} ({n_params:,} parameters)"
    )
    return network
