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
from pathlib import Path

import cv2
import numpy as np
import pytest
import torch

from rgbs_track.app_utils.determinism import example_rng
from rgbs_track.boxfile import write_box_file
from rgbs_track.boxgeom import BBox
from rgbs_track.errors import DataError
from rgbs_track.srst.datasets import (
    SequenceRecord,
    load_image,
    read_detection_annotations,
    read_image,
    read_sequence_dir,
)
from rgbs_track.srst.sampler import (
    SourceMixer,
    SrstDataset,
    boxes_from_batch,
    jittered_search,
    make_training_example,
    sample_pair,
    steps_per_epoch,
)


def write_frame(path: Path, box: BBox, size: tuple[int, int] = (96, 64), seed: int = 0) -> Path:
    width, height = size
    rng = np.random.default_rng(seed)
    image = rng.integers(0, 80, (height, width, 3), dtype=np.uint8)
    if not box.is_absent():
        x1, y1, x2, y2 = (int(round(v)) for v in box.corners())
        image[y1:y2, x1:x2] = (220, 60, 40)
    path.parent.mkdir(parents=True, exist_ok=True)
    cv2.imwrite(str(path), cv2.cvtColor(image, cv2.COLOR_RGB2BGR))
    return path


def write_sequence(root: Path, name: str, boxes: list[BBox]) -> Path:
    seq_dir = root / name
    for i, box in enumerate(boxes):
        write_frame(seq_dir / "img" / f"{i + 1:06d}.png", box, seed=i)
    write_box_file(seq_dir / "groundtruth.txt", boxes)
    return seq_dir


def synthetic_record(length: int) -> SequenceRecord:
    return SequenceRecord(
        name="long",
        frames=tuple(Path(f"{i:06d}.jpg") for i in range(length)),
        boxes=tuple(BBox(x=1, y=1, w=4, h=4) for _ in range(length)),
    )


@pytest.fixture
def sot_root(tmp_path) -> Path:
    root = tmp_path / "train"
    boxes = [BBox(x=20 + 2 * i, y=16 + i, w=18, h=14) for i in range(6)]
    write_sequence(root, "seq_a", boxes)
    write_sequence(root, "seq_b", [BBox.absent(), *boxes[1:4]])
    return root


@pytest.fixture
def detection_file(tmp_path) -> Path:
    folder = tmp_path / "detection"
    write_frame(folder / "images" / "img0.png", BBox(x=10, y=10, w=20, h=16))
    write_frame(folder / "images" / "img1.png", BBox(x=40, y=20, w=12, h=12))
    annotations = {
        "images/img0.png": [[10, 10, 20, 16], [50, 30, 10, 10]],
        "images/img1.png": [[40, 20, 12, 12], [0, 0, 0, 0]],
    }
    path = folder / "annotations.json"
    path.write_text(json.dumps(annotations))
    return path


def test_read_sequence_dir(sot_root):
    records = read_sequence_dir(sot_root)
    assert [r.name for r in records] == ["seq_a", "seq_b"]
    assert len(records[0].frames) == 6
    assert records[1].valid_indices() == [1, 2, 3]


def test_read_sequence_dir_errors(tmp_path, sot_root, log_messages):
    with pytest.raises(DataError, match="not found"):
        read_sequence_dir(tmp_path / "missing")
    (sot_root / "no_gt" / "img").mkdir(parents=True)
    read_sequence_dir(sot_root)
    assert any("Skipping no_gt" in m for m in log_messages)
    write_box_file(sot_root / "seq_a" / "groundtruth.txt", [BBox(x=1, y=1, w=2, h=2)])
    with pytest.raises(DataError, match="annotation lines"):
        read_sequence_dir(sot_root)


def test_read_detection_annotations(detection_file):
    records = read_detection_annotations(detection_file)
    assert [r.name for r in records] == ["img0#0", "img0#1", "img1#0"]
    assert all(r.source == "detection" and len(r.frames) == 1 for r in records)
    assert records[0].frames[0] == detection_file.parent / "images/img0.png"
    assert read_image(records[0].frames[0]).shape == (64, 96, 3)


def test_read_detection_annotations_errors(tmp_path):
    with pytest.raises(DataError):
        read_detection_annotations(tmp_path / "none.json")
    bad = tmp_path / "bad.json"
    bad.write_text("[1, 2]")
    with pytest.raises(DataError):
        read_detection_annotations(bad)


def test_sequence_record_lengths_must_match():
    with pytest.raises(ValueError):
        SequenceRecord(name="x", frames=(Path("a.jpg"),), boxes=())


def test_undecodable_image(tmp_path):
    broken = tmp_path / "broken.jpg"
    broken.write_bytes(b"not an image")
    assert read_image(broken) is None
    with pytest.raises(DataError, match="Cannot decode"):
        load_image(broken)


def test_single_frame_record_pairs_frame_zero():
    record = SequenceRecord(name="det", frames=(Path("a.jpg"),), boxes=(BBox(x=1, y=1, w=3, h=3),), source="detection")
    assert sample_pair(record, np.random.default_rng(0)) == ((0, 0), (0, 0))


def test_sample_pair_is_seeded():
    record = synthetic_record(50)
    assert sample_pair(record, np.random.default_rng(4)) == sample_pair(record, np.random.default_rng(4))


def test_sample_pair_respects_gap():
    record = synthetic_record(300)
    rng = np.random.default_rng(0)
    for _ in range(10_000):
        (a, b), (c, d) = sample_pair(record, rng, max_gap=200)
        assert max(a, b, c, d) - min(a, b, c, d) <= 200


def test_sample_pair_skips_unannotated_frames():
    boxes = tuple(BBox(x=1, y=1, w=4, h=4) if i % 3 == 0 else BBox.absent() for i in range(30))
    record = SequenceRecord(name="sparse", frames=tuple(Path(f"{i}.jpg") for i in range(30)), boxes=boxes)
    rng = np.random.default_rng(1)
    for _ in range(200):
        for index in sum(sample_pair(record, rng, max_gap=5), ()):
            assert index % 3 == 0


def test_sample_pair_without_valid_frames():
    record = SequenceRecord(name="empty", frames=(Path("a.jpg"),), boxes=(BBox.absent(),))
    with pytest.raises(DataError):
        sample_pair(record, np.random.default_rng(0))


def test_aligned_pair_reuses_rgb_frames():
    rgb, sonar = sample_pair(synthetic_record(20), np.random.default_rng(2), misalign=False)
    assert rgb == sonar


def test_jittered_search_target_inside_crop(tiny_cfg):
    rng = np.random.default_rng(3)
    for _ in range(100):
        window, gt = jittered_search(BBox(x=30, y=20, w=12, h=9), rng, tiny_cfg)
        assert not gt.is_absent()
        x1, y1, x2, y2 = gt.corners()
        assert 0.0 <= x1 <= x2 <= 1.0 and 0.0 <= y1 <= y2 <= 1.0
        assert window.out_size == tiny_cfg.backbone.search_size


def test_jittered_search_marks_unfittable_target_absent(tiny_cfg):
    cfg = tiny_cfg.model_copy(deep=True)
    cfg.tracker.search_factor = 0.5
    cfg.srst.search_shift = 0.0
    _, gt = jittered_search(BBox(x=30, y=20, w=12, h=9), np.random.default_rng(0), cfg)
    assert gt.is_absent()


def test_zero_jitter_same_frame_gives_identical_targets(tiny_cfg, detection_file):
    cfg = tiny_cfg.model_copy(deep=True)
    cfg.srst.search_scale_range = (1.0, 1.0)
    cfg.srst.search_shift = 0.0
    record = read_detection_annotations(detection_file)[0]
    example = make_training_example(record, np.random.default_rng(0), cfg)
    assert example.gt_rgb == example.gt_son
    assert not np.array_equal(example.x_rgb, example.x_son)
    np.testing.assert_array_equal(example.x_son[..., 0], example.x_son[..., 2])


def test_detection_images_feed_sonar_raw_without_detection_saliency(tiny_cfg, detection_file, sot_root):
    cfg = tiny_cfg.model_copy(deep=True)
    cfg.srst.search_scale_range = (1.0, 1.0)
    cfg.srst.search_shift = 0.0
    cfg.srst.detection_saliency = False
    record = read_detection_annotations(detection_file)[0]
    example = make_training_example(record, np.random.default_rng(0), cfg)
    np.testing.assert_array_equal(example.x_son, example.x_rgb)
    np.testing.assert_array_equal(example.z_son, example.z_rgb)

    sot = read_sequence_dir(sot_root)[0]
    example = make_training_example(sot, np.random.default_rng(0), cfg)
    np.testing.assert_array_equal(example.x_son[..., 0], example.x_son[..., 2])
    assert not np.array_equal(example.x_son, example.x_rgb)


def test_training_example_shapes_and_grayscale(tiny_cfg, sot_root):
    record = read_sequence_dir(sot_root)[0]
    example = make_training_example(record, np.random.default_rng(5), tiny_cfg)
    size_z, size_x = tiny_cfg.backbone.template_size, tiny_cfg.backbone.search_size
    assert example.z_rgb.shape == example.z_son.shape == (size_z, size_z, 3)
    assert example.x_rgb.shape == example.x_son.shape == (size_x, size_x, 3)
    for crop in (example.z_son, example.x_son):
        np.testing.assert_array_equal(crop[..., 0], crop[..., 1])
        np.testing.assert_array_equal(crop[..., 1], crop[..., 2])


def test_saliency_switch_off_keeps_rgb(tiny_cfg, sot_root):
    cfg = tiny_cfg.model_copy(deep=True)
    cfg.srst.saliency = False
    cfg.srst.misalign = False
    record = read_sequence_dir(sot_root)[0]
    example = make_training_example(record, np.random.default_rng(5), cfg)
    np.testing.assert_array_equal(example.x_rgb, example.x_son)


def test_training_example_is_reproducible(tiny_cfg, sot_root):
    record = read_sequence_dir(sot_root)[0]
    first = make_training_example(record, example_rng(0, 1, 7), tiny_cfg)
    second = make_training_example(record, example_rng(0, 1, 7), tiny_cfg)
    for name in ("z_rgb", "x_rgb", "z_son", "x_son"):
        assert getattr(first, name).tobytes() == getattr(second, name).tobytes()
    assert first.gt_rgb == second.gt_rgb and first.gt_son == second.gt_son


def test_mixer_ratio():
    sot = [synthetic_record(5)]
    detection = [SequenceRecord(name="d", frames=(Path("d.jpg"),), boxes=(BBox(x=0, y=0, w=2, h=2),), source="detection")]
    mixer = SourceMixer(sot, detection, mix_sot=0.8, mix_detection=0.2)
    rng = np.random.default_rng(9)
    draws = [mixer.pick(rng).source for _ in range(50_000)]
    assert abs(draws.count("sot") / len(draws) - 0.8) <= 0.02


def test_mixer_without_records():
    empty = SequenceRecord(name="e", frames=(Path("e.jpg"),), boxes=(BBox.absent(),))
    with pytest.raises(DataError):
        SourceMixer([empty], [])
    only_sot = SourceMixer([synthetic_record(3)], [], mix_sot=0.1, mix_detection=0.9)
    assert only_sot.p_sot == 1.0


def test_dataset_items(tiny_cfg, sot_root, detection_file):
    mixer = SourceMixer(read_sequence_dir(sot_root), read_detection_annotations(detection_file))
    dataset = SrstDataset(mixer, tiny_cfg)
    assert len(dataset) == tiny_cfg.train.fixed_pool
    item = dataset[1]
    assert item["z_r"].shape == (3, 32, 32) and item["x_s"].shape == (3, 64, 64)
    assert item["z_r"].dtype == torch.float32
    torch.testing.assert_close(dataset[1]["x_r"], item["x_r"], rtol=0, atol=0)

    dataset.set_epoch(3)
    torch.testing.assert_close(dataset[1]["x_r"], item["x_r"], rtol=0, atol=0)
    assert boxes_from_batch(item["gt_r"][None])[0].as_list() == pytest.approx(item["gt_r"].tolist())


def test_steps_per_epoch(tiny_cfg):
    assert steps_per_epoch(tiny_cfg) == 2
    cfg = tiny_cfg.model_copy(deep=True)
    cfg.train.fixed_pool = None
    cfg.train.samples_per_epoch = 9
    assert steps_per_epoch(cfg) == 5
