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

"""Patch embedding and the two per-modality transformer stacks.

Template and search tokens are concatenated as [Z; X] and attend to each other
jointly inside every block. Cross-modal coupling happens only through the SCAM
stack passed to forward_dual.
"""

import copy
import math
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Protocol

import torch
import torch.nn.functional as F
from torch import nn

from rgbs_track.config import BackboneConfig


@dataclass(frozen=True)
class TokenSeq:
    """Batched token matrix (B, N, C) laid out as template tokens then search tokens."""

    tokens: torch.Tensor
    n_z: int
    n_x: int

    def __post_init__(self) -> None:
        if self.tokens.dim() != 3:
            raise ValueError(f"TokenSeq expects (B, N, C) tokens, got shape {tuple(self.tokens.shape)}")
        if self.tokens.shape[1] != self.n_z + self.n_x:
            raise ValueError(
                f"Token count {self.tokens.shape[1]} != n_z + n_x = {self.n_z} + {self.n_x}"
            )

    @property
    def dim(self) -> int:
        return int(self.tokens.shape[-1])

    @property
    def template(self) -> torch.Tensor:
        return self.tokens[:, : self.n_z]

    @property
    def search(self) -> torch.Tensor:
        return self.tokens[:, self.n_z :]

    def replace(self, tokens: torch.Tensor) -> "TokenSeq":
        if tokens.shape != self.tokens.shape:
            raise ValueError(f"Shape changed from {tuple(self.tokens.shape)} to {tuple(tokens.shape)}")
        return TokenSeq(tokens, self.n_z, self.n_x)


class PatchEmbed(nn.Module):
    """Non-overlapping S x S patches projected to C channels."""

    def __init__(self, patch: int, dim: int, in_chans: int = 3) -> None:
        super().__init__()
        self.patch = patch
        self.proj = nn.Conv2d(in_chans, dim, kernel_size=patch, stride=patch)

    def forward(self, image: torch.Tensor) -> torch.Tensor:
        height, width = image.shape[-2:]
        if height % self.patch or width % self.patch:
            raise ValueError(f"Image size {height}x{width} is not divisible by patch stride {self.patch}")
        return self.proj(image).flatten(2).transpose(1, 2)


def resize_pos_embed(pos: torch.Tensor, grid: int) -> torch.Tensor:
    """Bicubic resize of a (1, g*g, C) positional table to (1, grid*grid, C)."""
    old = math.isqrt(pos.shape[1])
    if old == grid:
        return pos
    table = pos.reshape(1, old, old, -1).permute(0, 3, 1, 2)
    table = F.interpolate(table, size=(grid, grid), mode="bicubic", align_corners=False)
    return table.permute(0, 2, 3, 1).reshape(1, grid * grid, -1)


class TokenEmbedding(nn.Module):
    """Patch embedding plus learned positional tables, one per role."""

    def __init__(self, cfg: BackboneConfig) -> None:
        super().__init__()
        self.patch_embed = PatchEmbed(cfg.patch, cfg.dim)
        self.pos_embed_z = nn.Parameter(torch.zeros(1, cfg.template_grid**2, cfg.dim))
        self.pos_embed_x = nn.Parameter(torch.zeros(1, cfg.search_grid**2, cfg.dim))
        nn.init.trunc_normal_(self.pos_embed_z, std=0.02)
        nn.init.trunc_normal_(self.pos_embed_x, std=0.02)

    def embed(self, image: torch.Tensor, role: str) -> torch.Tensor:
        tokens = self.patch_embed(image)
        grid = image.shape[-1] // self.patch_embed.patch
        table = self.pos_embed_z if role == "template" else self.pos_embed_x
        return tokens + resize_pos_embed(table, grid)

    def forward(self, z: torch.Tensor, x: torch.Tensor) -> TokenSeq:
        tz = self.embed(z, "template")
        tx = self.embed(x, "search")
        return TokenSeq(torch.cat([tz, tx], dim=1), tz.shape[1], tx.shape[1])


class Attention(nn.Module):
    def __init__(self, dim: int, heads: int) -> None:
        super().__init__()
        if dim % heads:
            raise ValueError(f"dim {dim} is not divisible by heads {heads}")
        self.heads = heads
        self.scale = (dim // heads) ** -0.5
        self.qkv = nn.Linear(dim, dim * 3)
        self.proj = nn.Linear(dim, dim)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        batch, n, dim = x.shape
        qkv = self.qkv(x).reshape(batch, n, 3, self.heads, dim // self.heads).permute(2, 0, 3, 1, 4)
        q, k, v = qkv.unbind(0)
        attn = (q @ k.transpose(-2, -1) * self.scale).softmax(dim=-1)
        out = (attn @ v).transpose(1, 2).reshape(batch, n, dim)
        return self.proj(out)


class Mlp(nn.Module):
    def __init__(self, dim: int, hidden: int) -> None:
        super().__init__()
        self.fc1 = nn.Linear(dim, hidden)
        self.act = nn.GELU()
        self.fc2 = nn.Linear(hidden, dim)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.fc2(self.act(self.fc1(x)))


class JointAttentionBlock(nn.Module):
    """Pre-norm transformer block attending over all template and search tokens."""

    def __init__(self, dim: int, heads: int, mlp_ratio: float = 4.0) -> None:
        super().__init__()
        self.dim = dim
        self.norm1 = nn.LayerNorm(dim)
        self.attn = Attention(dim, heads)
        self.norm2 = nn.LayerNorm(dim)
        self.mlp = Mlp(dim, int(dim * mlp_ratio))

    def forward(self, h: TokenSeq) -> TokenSeq:
        if h.dim != self.dim:
            raise ValueError(f"Block expects C={self.dim}, got C={h.dim}")
        x = h.tokens
        x = x + self.attn(self.norm1(x))
        x = x + self.mlp(self.norm2(x))
        return h.replace(x)


class PairModule(Protocol):
    def __call__(self, h_r: TokenSeq, h_s: TokenSeq) -> tuple[TokenSeq, TokenSeq]: ...


def forward_dual(
    h_r: TokenSeq,
    h_s: TokenSeq,
    blocks_r: Sequence[nn.Module],
    blocks_s: Sequence[nn.Module],
    scam_layers: Sequence[int],
    scam_stack: Sequence[PairModule],
) -> tuple[TokenSeq, TokenSeq]:
    """Runs both stacks layer by layer, applying SCAM k after layer scam_layers[k].

    Layer indices are 1-based, so scam_layers=[4, 7, 10] couples the branches
    after the 4th, 7th and 10th blocks.
    """
    if len(scam_stack) != len(scam_layers):
        raise ValueError(f"{len(scam_stack)} SCAM modules given for {len(scam_layers)} insertion layers")
    if len(blocks_r) != len(blocks_s):
        raise ValueError(f"Branch depths differ: {len(blocks_r)} vs {len(blocks_s)}")
    if h_r.tokens.shape != h_s.tokens.shape:
        raise ValueError(
            f"Modalities disagree on token shape: {tuple(h_r.tokens.shape)} vs {tuple(h_s.tokens.shape)}"
        )
    after = dict(zip(scam_layers, scam_stack, strict=True))
    for layer, (block_r, block_s) in enumerate(zip(blocks_r, blocks_s, strict=True), start=1):
        h_r = block_r(h_r)
        h_s = block_s(h_s)
        if layer in after:
            h_r, h_s = after[layer](h_r, h_s)
    return h_r, h_s


class Branch(nn.Module):
    """One modality's embedding, block stack and final norm."""

    def __init__(self, cfg: BackboneConfig) -> None:
        super().__init__()
        self.embed = TokenEmbedding(cfg)
        self.blocks = nn.ModuleList(
            JointAttentionBlock(cfg.dim, cfg.heads, cfg.mlp_ratio) for _ in range(cfg.depth)
        )
        self.norm = nn.LayerNorm(cfg.dim)
        self.apply(_init_weights)


def _init_weights(module: nn.Module) -> None:
    if isinstance(module, nn.Linear):
        nn.init.trunc_normal_(module.weight, std=0.02)
        if module.bias is not None:
            nn.init.zeros_(module.bias)
    elif isinstance(module, nn.LayerNorm):
        nn.init.ones_(module.weight)
        nn.init.zeros_(module.bias)


class DualBranchBackbone(nn.Module):
    """Two stacks with a common initialization.

    With share_branches the sonar branch is the RGB branch object itself, so
    both modalities run the same parameters.
    """

    def __init__(self, cfg: BackboneConfig) -> None:
        super().__init__()
        self.cfg = cfg
        self.rgb = Branch(cfg)
        self.sonar = self.rgb if cfg.share_branches else copy.deepcopy(self.rgb)

    def forward(
        self,
        z_r: torch.Tensor,
        x_r: torch.Tensor,
        z_s: torch.Tensor,
        x_s: torch.Tensor,
        scam_stack: Sequence[PairModule],
    ) -> tuple[TokenSeq, TokenSeq]:
        h_r = self.rgb.embed(z_r, x_r)
        h_s = self.sonar.embed(z_s, x_s)
        h_r, h_s = forward_dual(
            h_r, h_s, self.rgb.blocks, self.sonar.blocks, self.cfg.scam_layers, scam_stack
        )
        return h_r.replace(self.rgb.norm(h_r.tokens)), h_s.replace(self.sonar.norm(h_s.tokens))
