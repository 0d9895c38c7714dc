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

"""One-pass evaluation: initialize on frame 0, track every frame once, never reset."""

from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd
from loguru import logger

from rgbs_track.app_utils.typing import Modality, SummaryRecord
from rgbs_track.boxfile import boxes_to_array, read_box_table, write_box_file
from rgbs_track.boxgeom import BBox
from rgbs_track.config import EvalProtocol
from rgbs_track.errors import DataError
from rgbs_track.evalkit.datasets import SequenceAnnotation
from rgbs_track.evalkit.metrics import FrameOutcomes, apply_confidence, frame_outcomes
from rgbs_track.evalkit.report import attribute_report, sequence_table, summarize, write_summary
from rgbs_track.tracker.tracker import Tracker

SUMMARY_FILE = "summary.json"


def track_sequence(tracker: Tracker, sequence: SequenceAnnotation) -> tuple[list[BBox], list[BBox]]:
    frames = sequence.frames()
    first = next(frames)
    tracker.init(first, (sequence.rgb_boxes[0], sequence.sonar_boxes[0]))
    rgb: list[BBox] = []
    sonar: list[BBox] = []
    for frame in (first, *frames):
        out_rgb, out_sonar = tracker.track(frame)
        rgb.append(out_rgb.box)
        sonar.append(out_sonar.box)
    return rgb, sonar


def write_sequence_results(out_dir: Path, name: str, rgb: Sequence[BBox], sonar: Sequence[BBox]) -> None:
    write_box_file(out_dir / name / "rgb.txt", rgb)
    write_box_file(out_dir / name / "sonar.txt", sonar)


def read_result_file(path: Path, threshold: float) -> np.ndarray:
    """(n, 4) predictions; a fifth confidence column applies the absence threshold."""
    table = read_box_table(path)
    confidence = table["conf"].to_numpy() if "conf" in table else None
    return apply_confidence(table[["x", "y", "w", "h"]].to_numpy(), confidence, threshold)


@dataclass(frozen=True)
class EvalResult:
    tracker: str
    records: list[SummaryRecord]
    attributes: dict[Modality, pd.DataFrame]
    sequences: pd.DataFrame


def evaluate_results(
    results_dir: str | Path,
    annotations: Sequence[SequenceAnnotation],
    protocol: EvalProtocol,
    tracker: str | None = None,
) -> EvalResult:
    """Scores <results_dir>/<seq>/{rgb,sonar}.txt against the annotations."""
    results_dir = Path(results_dir)
    if not results_dir.is_dir():
        raise DataError(f"Results directory not found: {results_dir}")
    by_name = {seq.name: seq for seq in annotations}
    result_names = sorted(p.name for p in results_dir.iterdir() if (p / "rgb.txt").is_file())
    unknown = [name for name in result_names if name not in by_name]
    if unknown:
        raise DataError(f"Results for sequences without annotation: {unknown}")
    if not result_names:
        raise DataError(f"No result sequences under {results_dir}")
    not_run = sorted(set(by_name) - set(result_names))
    if not_run:
        logger.warning(f"No results for {len(not_run)} annotated sequences: {not_run}")

    outcomes: dict[str, dict[Modality, FrameOutcomes]] = {}
    for name in result_names:
        seq = by_name[name]
        outcomes[name] = {}
        for modality in Modality:
            path = results_dir / name / f"{modality}.txt"
            if not path.is_file():
                raise DataError(f"Sequence {name!r} has no {modality} results ({path})")
            pred = read_result_file(path, protocol.confidence_threshold)
            outcomes[name][modality] = frame_outcomes(
                pred, boxes_to_array(seq.boxes(modality)), protocol.both_absent_correct, name
            )

    name = tracker or results_dir.name
    records = summarize(name, outcomes, by_name, protocol)
    return EvalResult(
        tracker=name,
        records=records,
        attributes=attribute_report(outcomes, by_name, protocol),
        sequences=sequence_table(outcomes, protocol),
    )


def write_eval_outputs(result: EvalResult, out_dir: str | Path) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = write_summary(result.records, out_dir / SUMMARY_FILE)
    for modality, table in result.attributes.items():
        table.to_csv(out_dir / f"attributes_{modality}.csv", float_format="%.6f")
    result.sequences.to_csv(out_dir / "sequences.csv", index=False, float_format="%.6f")
    for record in result.records:
        logger.info(
            f"{record.tracker} [{record.modality}] SR={record.SR:.4f} PR={record.PR:.4f} NPR={record.NPR:.4f}"
        )
    return summary


def run_ope(
    sequences: Sequence[SequenceAnnotation],
    tracker: Tracker,
    out_dir: str | Path,
    protocol: EvalProtocol,
) -> EvalResult:
    """Tracks every sequence, writes result files and the evaluation summary under out_dir."""
    out_dir = Path(out_dir)
    results_dir = out_dir / "results"
    ran = []
    for seq in sequences:
        if not seq.rgb_frames or not seq.sonar_frames:
            logger.warning(f"Skipping {seq.name}: no frames for one modality")
            continue
        try:
            rgb, sonar = track_sequence(tracker, seq)
        except DataError as exc:
            logger.warning(f"Skipping {seq.name}: {exc}")
            continue
        write_sequence_results(results_dir, seq.name, rgb, sonar)
        ran.append(seq)
        logger.info(f"Tracked {seq.name} ({len(seq)} frames) with {tracker.name}")
    if not ran:
        raise DataError("No sequence could be tracked")
    result = evaluate_results(results_dir, ran, protocol, tracker.name)
    write_eval_outputs(result, out_dir)
    return result
