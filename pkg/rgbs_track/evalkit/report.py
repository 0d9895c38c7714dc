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

"""Aggregated scores, attribute tables and summary JSON."""

import json
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd
from loguru import logger

from rgbs_track.app_utils.typing import Modality, SummaryRecord
from rgbs_track.config import EvalProtocol
from rgbs_track.errors import DataError
from rgbs_track.evalkit.datasets import ATTRIBUTES, SequenceAnnotation
from rgbs_track.evalkit.metrics import (
    FrameOutcomes,
    MetricCurve,
    norm_precision_curve,
    precision_curve,
    success_curve,
)

SequenceOutcomes = Mapping[str, Mapping[Modality, FrameOutcomes]]


@dataclass(frozen=True)
class Scores:
    success: MetricCurve
    precision: MetricCurve
    norm_precision: MetricCurve

    @property
    def SR(self) -> float:
        return self.success.summary

    @property
    def PR(self) -> float:
        return self.precision.summary

    @property
    def NPR(self) -> float:
        return self.norm_precision.summary

    def row(self) -> dict[str, float]:
        return {"SR": self.SR, "PR": self.PR, "NPR": self.NPR}

    def curves(self) -> dict[str, dict[str, list[float]]]:
        return {
            "success": self.success.as_dict(),
            "precision": self.precision.as_dict(),
            "norm_precision": self.norm_precision.as_dict(),
        }


def _mean_curve(curves: Sequence[MetricCurve], summary: float) -> MetricCurve:
    return MetricCurve(curves[0].thresholds, np.mean([c.values for c in curves], axis=0), summary)


def score(parts: Sequence[FrameOutcomes], protocol: EvalProtocol) -> Scores:
    """Scores a set of sequences, pooling frames or averaging per-sequence scores."""
    parts = [p for p in parts if len(p)]
    if not parts:
        raise ValueError("No frames to score")
    if protocol.aggregation == "frame_pool":
        pooled = FrameOutcomes.concat(parts)
        return Scores(
            success_curve(pooled, protocol.success_top),
            precision_curve(pooled, protocol.precision_threshold),
            norm_precision_curve(pooled),
        )
    per_seq = [score([p], protocol.model_copy(update={"aggregation": "frame_pool"})) for p in parts]
    return Scores(
        _mean_curve([s.success for s in per_seq], float(np.mean([s.SR for s in per_seq]))),
        _mean_curve([s.precision for s in per_seq], float(np.mean([s.PR for s in per_seq]))),
        _mean_curve([s.norm_precision for s in per_seq], float(np.mean([s.NPR for s in per_seq]))),
    )


def attribute_report(
    outcomes: SequenceOutcomes,
    annotations: Mapping[str, SequenceAnnotation],
    protocol: EvalProtocol,
) -> dict[Modality, pd.DataFrame]:
    """Per modality, a table indexed by ALL plus every attribute that tags a sequence.

    Attribute rows recompute the metrics over the frames of the sequences that
    carry the attribute.
    """
    missing = sorted(set(outcomes) - set(annotations))
    if missing:
        raise DataError(f"Results for unannotated sequences: {missing}")
    for name in outcomes:
        unknown = sorted(annotations[name].attributes - ATTRIBUTES.keys())
        if unknown:
            raise DataError(f"Sequence {name} carries unknown attribute tags {unknown}")

    names = sorted(outcomes)
    groups: dict[str, list[str]] = {"ALL": names}
    empty = []
    for tag in ATTRIBUTES:
        tagged = [name for name in names if tag in annotations[name].attributes]
        if tagged:
            groups[tag] = tagged
        else:
            empty.append(tag)
    if empty:
        logger.warning(f"No evaluated sequence carries attributes {empty}; omitting their rows")

    tables = {}
    for modality in Modality:
        rows = {
            group: score([outcomes[name][modality] for name in members], protocol).row()
            for group, members in groups.items()
        }
        table = pd.DataFrame.from_dict(rows, orient="index", columns=["SR", "PR", "NPR"])
        table.index.name = "attribute"
        tables[modality] = table
    return tables


def sequence_table(outcomes: SequenceOutcomes, protocol: EvalProtocol) -> pd.DataFrame:
    records = []
    for name in sorted(outcomes):
        for modality in Modality:
            part = outcomes[name][modality]
            if not len(part):
                continue
            records.append(
                {"sequence": name, "modality": str(modality), "frames": len(part), **score([part], protocol).row()}
            )
    return pd.DataFrame.from_records(records)


def summarize(
    tracker: str,
    outcomes: SequenceOutcomes,
    annotations: Mapping[str, SequenceAnnotation],
    protocol: EvalProtocol,
) -> list[SummaryRecord]:
    tables = attribute_report(outcomes, annotations, protocol)
    records = []
    for modality in Modality:
        overall = score([outcomes[name][modality] for name in sorted(outcomes)], protocol)
        per_attribute = {
            tag: {metric: float(value) for metric, value in row.items()}
            for tag, row in tables[modality].drop(index="ALL").to_dict(orient="index").items()
        }
        records.append(
            SummaryRecord(
                tracker=tracker,
                modality=modality,
                SR=overall.SR,
                PR=overall.PR,
                NPR=overall.NPR,
                per_attribute=per_attribute,
                curves=overall.curves(),
            )
        )
    return records


def write_summary(records: Sequence[SummaryRecord], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = [record.model_dump(mode="json") for record in records]
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


def read_summary(path: str | Path) -> list[SummaryRecord]:
    path = Path(path)
    try:
        payload = json.loads(path.read_text())
    except FileNotFoundError as exc:
        raise DataError(f"Summary file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"Summary file {path} is not valid JSON: {exc}") from exc
    try:
        return [SummaryRecord.model_validate(item) for item in payload]
    except (TypeError, ValueError) as exc:
        raise DataError(f"Summary file {path} does not follow the summary schema: {exc}") from exc


def ranking_table(records: Sequence[SummaryRecord]) -> pd.DataFrame:
    """Trackers as rows, (modality, metric) as columns, sorted by mean SR."""
    rows: dict[str, dict[tuple[str, str], float]] = {}
    for record in records:
        row = rows.setdefault(record.tracker, {})
        for metric in ("SR", "PR", "NPR"):
            row[(str(record.modality), metric)] = getattr(record, metric)
    table = pd.DataFrame.from_dict(rows, orient="index")
    table.columns = pd.MultiIndex.from_tuples(table.columns, names=["modality", "metric"])
    table.index.name = "tracker"
    sr_columns = [column for column in table.columns if column[1] == "SR"]
    order = table[sr_columns].mean(axis=1).sort_values(ascending=False, kind="stable").index
    return table.loc[order]
