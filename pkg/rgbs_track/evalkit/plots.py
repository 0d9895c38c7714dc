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

"""Success / precision / normalized-precision plots and attribute radar charts."""

from collections.abc import Sequence
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from loguru import logger  # noqa: E402

from rgbs_track.app_utils.typing import Modality, SummaryRecord  # noqa: E402
from rgbs_track.errors import DataError  # noqa: E402

CURVES = (
    ("success", "SR", "Success plots of OPE", "Overlap threshold", "Success rate"),
    ("precision", "PR", "Precision plots of OPE", "Location error threshold (px)", "Precision"),
    ("norm_precision", "NPR", "Normalized precision plots of OPE", "Normalized error threshold", "Normalized precision"),
)
# no timestamps or version strings in the files
PNG_METADATA = {"Software": None}


def _top(records: Sequence[SummaryRecord], metric: str, top_k: int) -> list[SummaryRecord]:
    ranked = sorted(records, key=lambda r: (-getattr(r, metric), r.tracker))
    return ranked[:top_k]


def plot_curve(
    records: Sequence[SummaryRecord],
    curve: str,
    metric: str,
    title: str,
    xlabel: str,
    ylabel: str,
    path: Path,
    top_k: int = 8,
) -> Path:
    fig, ax = plt.subplots(figsize=(7, 5))
    lines = []
    legends = []
    for record in _top(records, metric, top_k):
        data = record.curves[curve]
        (line,) = ax.plot(data["thresholds"], data["values"], linewidth=2)
        lines.append(line)
        legends.append(f"{record.tracker}: [{getattr(record, metric):.3f}]")
    ax.legend(lines, legends, loc="lower left" if curve == "success" else "lower right", fontsize=9)
    ax.set(xlabel=xlabel, ylabel=ylabel, title=title, ylim=(0.0, 1.0))
    ax.grid(True, linestyle="--", linewidth=0.5)
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata=PNG_METADATA)
    plt.close(fig)
    return path


def plot_radar(records: Sequence[SummaryRecord], metric: str, path: Path, top_k: int = 8) -> Path | None:
    tags = sorted({tag for record in records for tag in record.per_attribute})
    if len(tags) < 3:
        logger.warning(f"Radar chart needs at least 3 attributes, found {tags}; skipping {path.name}")
        return None
    angles = np.linspace(0.0, 2.0 * np.pi, len(tags), endpoint=False)
    closed = np.append(angles, angles[0])
    fig, ax = plt.subplots(figsize=(6, 6), subplot_kw={"projection": "polar"})
    for record in _top(records, metric, top_k):
        values = [record.per_attribute.get(tag, {}).get(metric, 0.0) for tag in tags]
        ax.plot(closed, values + values[:1], linewidth=2, label=f"{record.tracker}: [{getattr(record, metric):.3f}]")
    ax.set_xticks(angles)
    ax.set_xticklabels(tags)
    ax.set_ylim(0.0, 1.0)
    ax.legend(loc="upper right", bbox_to_anchor=(1.3, 1.1), fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata=PNG_METADATA)
    plt.close(fig)
    return path


def emit_plots(records: Sequence[SummaryRecord], out_dir: str | Path, top_k: int = 8) -> list[Path]:
    """One plot per metric and modality, plus SR and NPR radar charts per modality."""
    if not records:
        raise DataError("At least one tracker summary is needed to plot")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for modality in Modality:
        subset = [r for r in records if r.modality == modality]
        if not subset:
            continue
        for curve, metric, title, xlabel, ylabel in CURVES:
            path = out_dir / f"{curve}_{modality}.png"
            written.append(plot_curve(subset, curve, metric, f"{title} ({modality})", xlabel, ylabel, path, top_k))
        for metric in ("SR", "NPR"):
            radar = plot_radar(subset, metric, out_dir / f"radar_{metric.lower()}_{modality}.png", top_k)
            if radar is not None:
                written.append(radar)
    logger.info(f"Wrote {len(written)} figures to {out_dir}")
    return written
