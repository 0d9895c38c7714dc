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

"""Reading and writing per-frame box files ("x,y,w,h" per line, "0,0,0,0" for absence)."""

from collections.abc import Iterable, Sequence
from pathlib import Path

import numpy as np
import pandas as pd

from rgbs_track.boxgeom import BBox
from rgbs_track.errors import DataError


def format_value(value: float) -> str:
    """Integer-valued floats print without a decimal point; others use repr."""
    value = float(value)
    if value.is_integer():
        return str(int(value))
    return repr(value)


def format_box(box: BBox) -> str:
    return ",".join(format_value(v) for v in box.as_list())


def write_box_file(path: str | Path, boxes: Iterable[BBox]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(f"{format_box(box)}\n" for box in boxes))
    return path


def read_box_table(path: str | Path) -> pd.DataFrame:
    """Parses a box file into columns x, y, w, h and, when present, conf.

    Commas, tabs and spaces are all accepted as separators.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"Box file not found: {path}")
    if not path.read_text().strip():
        return pd.DataFrame(columns=["x", "y", "w", "h"], dtype=np.float64)
    try:
        table = pd.read_csv(path, header=None, sep=r"[,\s]+", engine="python", skip_blank_lines=True)
    except (pd.errors.ParserError, ValueError) as exc:
        raise DataError(f"Cannot parse box file {path}: {exc}") from exc
    if table.shape[1] not in (4, 5):
        raise DataError(f"{path} has {table.shape[1]} columns; expected 4 (x,y,w,h) or 5 (x,y,w,h,conf)")
    table.columns = ["x", "y", "w", "h", "conf"][: table.shape[1]]
    try:
        table = table.astype(np.float64)
    except ValueError as exc:
        raise DataError(f"{path} contains non-numeric values") from exc
    if not np.isfinite(table.to_numpy()).all():
        raise DataError(f"{path} contains non-finite values")
    if (table[["w", "h"]] < 0).any().any():
        raise DataError(f"{path} contains negative box extents")
    return table


def read_boxes(path: str | Path) -> list[BBox]:
    table = read_box_table(path)
    return [BBox.from_xywh(row) for row in table[["x", "y", "w", "h"]].to_numpy()]


def boxes_to_array(boxes: Sequence[BBox]) -> np.ndarray:
    if not boxes:
        return np.zeros((0, 4), dtype=np.float64)
    return np.array([box.as_list() for box in boxes], dtype=np.float64)
