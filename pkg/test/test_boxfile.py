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

import numpy as np
import pytest

from rgbs_track.boxfile import boxes_to_array, format_box, read_box_table, read_boxes, write_box_file
from rgbs_track.boxgeom import BBox
from rgbs_track.errors import DataError


def test_format_box():
    assert format_box(BBox.absent()) == "0,0,0,0"
    assert format_box(BBox(x=1.5, y=2.0, w=3.25, h=4.0)) == "1.5,2,3.25,4"


def test_write_then_read(tmp_path):
    boxes = [BBox(x=1, y=2, w=3, h=4), BBox.absent(), BBox(x=0.1, y=0.2, w=5.5, h=6)]
    path = write_box_file(tmp_path / "nested" / "rgb.txt", boxes)
    assert path.read_text().splitlines()[1] == "0,0,0,0"
    assert read_boxes(path) == boxes


def test_mixed_separators_and_confidence(tmp_path):
    path = tmp_path / "boxes.txt"
    path.write_text("1,2,3,4,0.9\n5\t6 7,8,0.1\n\n")
    table = read_box_table(path)
    assert list(table.columns) == ["x", "y", "w", "h", "conf"]
    np.testing.assert_array_equal(table["conf"].to_numpy(), [0.9, 0.1])
    assert read_boxes(path)[1] == BBox(x=5, y=6, w=7, h=8)


def test_empty_file(tmp_path):
    path = tmp_path / "empty.txt"
    path.write_text("")
    assert read_boxes(path) == []
    assert boxes_to_array([]).shape == (0, 4)


@pytest.mark.parametrize(
    "content",
    ["1,2,3\n", "1,2,3,4,5,6\n", "a,b,c,d\n", "1,2,-3,4\n", "1,2,nan,4\n"],
)
def test_malformed_files(tmp_path, content):
    path = tmp_path / "bad.txt"
    path.write_text(content)
    with pytest.raises(DataError):
        read_box_table(path)


def test_missing_file(tmp_path):
    with pytest.raises(DataError, match="not found"):
        read_boxes(tmp_path / "nope.txt")
