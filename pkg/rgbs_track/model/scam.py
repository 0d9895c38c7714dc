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

"""Spatial cross-attention between spatially misaligned modalities.

Each branch queries the other modality's keys with its own tokens (no query
projection) and reads its own values, so the attention map is cross-modal
while the content stays within the modality. A ReLU gate replaces the softmax
so that background positions can be switched off entirely.
"""

import math
from collections.abc import Sequence
from typing import Literal

import torch
import torch.nn.functional as F
from torch import nn

from rgbs_track.config import ScamConfig
from rgbs_track.model.backbone import TokenSeq

Gate = Literal["relu", "softmax"]


def _heads_split(x: torch.Tensor, heads: int) -> torch.Tensor:
    batch, n, dim = x.shape
    return x.reshape(batch, n, heads, dim // heads).transpose(1, 2)


def _heads_merge(x: torch.Tensor) -> torch.Tensor:
    batch, heads, n, head_dim = x.shape
    return x.transpose(1, 2).reshape(batch, n, heads * head_dim)


def cross_attend(q: torch.Tensor, k_other: torch.Tensor, v_own: torch.Tensor, gate: Gate, heads: int = 1) -> torch.Tensor:
    """gate(Q K_other^T / sqrt(d)) V_own for (B, N, C) inputs, d = C / heads."""
    dim = q.shape[-1]
    if dim % heads:
        raise ValueError(f"C={dim} is not divisible by {heads} heads")
    scale = 1.0 / math.sqrt(dim // heads)
    scores = _heads_split(q, heads) @ _heads_split(k_other, heads).transpose(-2, -1) * scale
    weights = F.relu(scores) if gate == "relu" else scores.softmax(dim=-1)
    return _heads_merge(weights @ _heads_split(v_own, heads))


def sca_forward(
    h_r: torch.Tensor,
    h_s: torch.Tensor,
    kv_r: nn.Linear,
    kv_s: nn.Linear,
    gate: Gate = "relu",
    heads: int = 1,
) -> tuple[torch.Tensor, torch.Tensor]:
    """Spatial cross-attention layer; returns the attended tokens with residual."""
    if h_r.shape != h_s.shape:
        raise ValueError(f"Modalities disagree on token shape: {tuple(h_r.shape)} vs {tuple(h_s.shape)}")
    k_r, v_r = kv_r(h_r).chunk(2, dim=-1)
    k_s, v_s = kv_s(h_s).chunk(2, dim=-1)
    attn_r = cross_attend(h_r, k_s, v_r, gate, heads) + h_r
    attn_s = cross_attend(h_s, k_r, v_s, gate, heads) + h_s
    return attn_r, attn_s


class GlobalIntegration(nn.Module):
    """Two linear maps with a GELU between; the residual is added by the caller."""

    def __init__(self, dim: int, hidden: int) -> None:
        super().__init__()
        self.fc1 = nn.Linear(dim, hidden)
        self.act = nn.GELU()
        self.fc2 = nn.Linear(hidden, dim)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.fc2(self.act(self.fc1(x)))


def gim_forward(h_attn: torch.Tensor, residual: torch.Tensor, gim: GlobalIntegration) -> torch.Tensor:
    return gim(h_attn) + residual


class SCAM(nn.Module):
    """One spatial cross-attention module inserted between two backbone layers."""

    def __init__(self, dim: int, cfg: ScamConfig) -> None:
        super().__init__()
        if dim % cfg.heads:
            raise ValueError(f"C={dim} is not divisible by scam.heads={cfg.heads}")
        self.cfg = cfg
        self.kv_r = nn.Linear(dim, 2 * dim, bias=False)
        self.kv_s = nn.Linear(dim, 2 * dim, bias=False)
        hidden = int(dim * cfg.hidden_ratio)
        self.gim_r = GlobalIntegration(dim, hidden) if cfg.use_gim else None
        self.gim_s = GlobalIntegration(dim, hidden) if cfg.use_gim else None
        self.norm_r = nn.LayerNorm(dim) if cfg.pre_norm else None
        self.norm_s = nn.LayerNorm(dim) if cfg.pre_norm else None
        self.reset_parameters()

    def reset_parameters(self) -> None:
        for module in self.modules():
            if isinstance(module, nn.Linear):
                nn.init.trunc_normal_(module.weight, std=0.02)
                if module.bias is not None:
                    nn.init.zeros_(module.bias)
        if not self.cfg.zero_init:
            return
        # every output path must start as the identity
        if self.gim_r is not None and self.gim_s is not None:
            for gim in (self.gim_r, self.gim_s):
                nn.init.zeros_(gim.fc2.weight)
                nn.init.zeros_(gim.fc2.bias)
        if self.gim_r is None or self.cfg.gim_residual == "attn":
            dim = self.kv_r.in_features
            with torch.no_grad():
                self.kv_r.weight[dim:].zero_()
                self.kv_s.weight[dim:].zero_()

    def forward(self, h_r: TokenSeq, h_s: TokenSeq) -> tuple[TokenSeq, TokenSeq]:
        x_r, x_s = h_r.tokens, h_s.tokens
        if self.norm_r is not None and self.norm_s is not None:
            q_r, q_s = self.norm_r(x_r), self.norm_s(x_s)
            k_r, v_r = self.kv_r(q_r).chunk(2, dim=-1)
            k_s, v_s = self.kv_s(q_s).chunk(2, dim=-1)
            attn_r = cross_attend(q_r, k_s, v_r, self.cfg.gate, self.cfg.heads) + x_r
            attn_s = cross_attend(q_s, k_r, v_s, self.cfg.gate, self.cfg.heads) + x_s
        else:
            attn_r, attn_s = sca_forward(x_r, x_s, self.kv_r, self.kv_s, self.cfg.gate, self.cfg.heads)

        if self.gim_r is None or self.gim_s is None:
            return h_r.replace(attn_r), h_s.replace(attn_s)
        res_r, res_s = (x_r, x_s) if self.cfg.gim_residual == "input" else (attn_r, attn_s)
        return (
            h_r.replace(gim_forward(attn_r, res_r, self.gim_r)),
            h_s.replace(gim_forward(attn_s, res_s, self.gim_s)),
        )


class ScamStack(nn.ModuleDict):
    """SCAM modules keyed by their insertion layer ("4", "7", ...)."""

    def __init__(self, dim: int, layers: Sequence[int], cfg: ScamConfig) -> None:
        super().__init__({str(layer): SCAM(dim, cfg) for layer in layers})

    def ordered(self, layers: Sequence[int]) -> list[SCAM]:
        return [self[str(layer)] for layer in layers]
