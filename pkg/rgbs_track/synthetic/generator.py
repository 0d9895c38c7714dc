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

"""Deterministic toy RGB-sonar data.

RGB frames show a colored shape moving over a textured background. Sonar
frames show a bright reflection blob on dark speckle, following its own path,
so the two boxes of a frame are unrelated in pixel coordinates. Sequence 0
loses the sonar target for a stretch of frames and sequence 1 loses the RGB
target, giving single-modality absence to evaluate.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import cv2
import numpy as np
from loguru import logger
from PIL import Image, ImageDraw

from rgbs_track.app_utils.determinism import example_rng
from rgbs_track.boxfile import write_box_file
from rgbs_track.boxgeom import BBox
from rgbs_track.config import DatagenConfig, RunConfig
from rgbs_track.srst.datasets import SequenceRecord, read_sequence_dir
from rgbs_track.srst.sampler import make_training_example

JPEG_QUALITY = 95


@dataclass
class SequenceScript:
    name: str
    rgb_boxes: list[BBox] = field(default_factory=list)
    sonar_boxes: list[BBox] = field(default_factory=list)
    rgb_frames: list[np.ndarray] = field(default_factory=list)
    sonar_frames: list[np.ndarray] = field(default_factory=list)
    attributes: set[str] = field(default_factory=set)


def textured_background(rng: np.random.Generator, width: int, height: int, brightness: float) -> np.ndarray:
    coarse = rng.uniform(0, 255, size=(height // 16 + 1, width // 16 + 1, 3)).astype(np.float32)
    smooth = cv2.resize(coarse, (width, height), interpolation=cv2.INTER_CUBIC)
    fine = rng.normal(0.0, 12.0, size=(height, width, 3)).astype(np.float32)
    return np.clip((0.6 * smooth + 40.0 + fine) * brightness, 0, 255).astype(np.uint8)


def sonar_background(rng: np.random.Generator, width: int, height: int) -> np.ndarray:
    speckle = rng.rayleigh(18.0, size=(height, width)).astype(np.float32)
    speckle = cv2.GaussianBlur(speckle, (3, 3), 0.8)
    return np.clip(speckle, 0, 255)


def draw_reflector(sonar: np.ndarray, cx: float, cy: float, w: float, h: float, intensity: float) -> np.ndarray:
    """Adds a Gaussian acoustic return of the given box size to a float sonar image."""
    height, width = sonar.shape
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float32)
    blob = np.exp(-(((xx - cx) / (w / 2.5)) ** 2 + ((yy - cy) / (h / 2.5)) ** 2))
    return np.maximum(sonar, intensity * blob)


def _path(rng: np.random.Generator, frames: int, width: int, height: int, size: float) -> np.ndarray:
    """(frames, 2) centers on a smooth path that keeps a size-wide margin."""
    start = rng.uniform([size, size], [width - size, height - size])
    velocity = rng.uniform(-2.0, 2.0, size=2)
    wobble = rng.uniform(0.5, 1.5)
    t = np.arange(frames)[:, None]
    centers = start + velocity * t + np.stack([np.sin(t[:, 0] / 7.0), np.cos(t[:, 0] / 9.0)], axis=1) * wobble * 4
    lo, hi = np.array([size, size]), np.array([width - size, height - size])
    span = hi - lo
    # reflect at the borders
    folded = np.mod(centers - lo, 2 * span)
    return lo + np.where(folded > span, 2 * span - folded, folded)


def _clip_box(cx: float, cy: float, w: float, h: float, width: int, height: int) -> BBox:
    x1, y1 = max(cx - w / 2.0, 0.0), max(cy - h / 2.0, 0.0)
    x2, y2 = min(cx + w / 2.0, float(width)), min(cy + h / 2.0, float(height))
    x1, y1 = round(x1, 2), round(y1, 2)
    return BBox(x=x1, y=y1, w=round(round(x2, 2) - x1, 2), h=round(round(y2, 2) - y1, 2))


def make_sequence(index: int, cfg: DatagenConfig, seed: int) -> SequenceScript:
    rng = example_rng(seed, 1, index)
    width, height, frames = cfg.width, cfg.height, cfg.frames
    script = SequenceScript(name=f"toy_{index:03d}")

    brightness = 0.35 if index % 4 == 3 else 1.0
    scale_growth = 2.4 if index % 4 == 2 else 1.2
    reflection = 120.0 if index % 4 == 1 else 230.0
    distractor = index % 4 == 0
    if brightness < 0.5:
        script.attributes.add("LI")
    if scale_growth > 2.0:
        script.attributes.add("SV")
    if reflection < 150.0:
        script.attributes.add("LSR")
    if distractor:
        script.attributes.add("SA")

    absent_rgb = range(frames // 2, frames // 2 + max(frames // 8, 2)) if index == 1 else range(0)
    absent_sonar = range(frames // 3, frames // 3 + max(frames // 8, 2)) if index == 0 else range(0)
    if len(absent_rgb):
        script.attributes.add("OC")

    base = float(rng.uniform(0.11, 0.16) * min(width, height))
    aspect = float(rng.uniform(0.7, 1.4))
    color = tuple(int(c) for c in rng.integers(40, 256, size=3))
    shape_path = _path(rng, frames, width, height, base * scale_growth)
    blob_path = _path(rng, frames, width, height, base)
    distractor_path = _path(rng, frames, width, height, base)
    background = textured_background(rng, width, height, brightness)

    for t in range(frames):
        scale = 1.0 + (scale_growth - 1.0) * t / max(frames - 1, 1)
        w, h = base * scale * aspect, base * scale / aspect
        frame = np.roll(background, shift=t, axis=1).copy()
        if distractor:
            dx, dy = distractor_path[t]
            cv2.rectangle(
                frame, (int(dx - w / 3), int(dy - h / 3)), (int(dx + w / 3), int(dy + h / 3)), color, -1
            )
        cx, cy = shape_path[t]
        if t in absent_rgb:
            # a background-colored occluder hides the target
            cv2.ellipse(frame, (int(cx), int(cy)), (int(w), int(h)), 0, 0, 360, (90, 90, 90), -1)
            script.rgb_boxes.append(BBox.absent())
        else:
            cv2.ellipse(frame, (int(cx), int(cy)), (int(w / 2), int(h / 2)), 0, 0, 360, color, -1)
            script.rgb_boxes.append(_clip_box(cx, cy, w, h, width, height))
        script.rgb_frames.append(frame)

        sonar = sonar_background(rng, width, height)
        sx, sy = blob_path[t]
        sw, sh = base * 1.2, base * 0.8
        if t in absent_sonar:
            script.sonar_boxes.append(BBox.absent())
        else:
            sonar = draw_reflector(sonar, sx, sy, sw, sh, reflection)
            script.sonar_boxes.append(_clip_box(sx, sy, sw, sh, width, height))
        gray = np.clip(sonar, 0, 255).astype(np.uint8)
        script.sonar_frames.append(np.repeat(gray[:, :, None], 3, axis=2))
    return script


def _save(image: np.ndarray, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(image).save(path, quality=JPEG_QUALITY)


def write_benchmark(scripts: list[SequenceScript], root: Path) -> None:
    for script in scripts:
        seq_dir = root / script.name
        for t, (rgb, sonar) in enumerate(zip(script.rgb_frames, script.sonar_frames, strict=True)):
            _save(rgb, seq_dir / "rgb" / f"{t + 1:06d}.jpg")
            _save(sonar, seq_dir / "sonar" / f"{t + 1:06d}.jpg")
        write_box_file(seq_dir / "rgb.txt", script.rgb_boxes)
        write_box_file(seq_dir / "sonar.txt", script.sonar_boxes)
        (seq_dir / "attributes.txt").write_text(",".join(sorted(script.attributes)) + "\n")


def write_sot(scripts: list[SequenceScript], root: Path) -> None:
    """The RGB stream of each sequence in single-object tracking layout."""
    for script in scripts:
        seq_dir = root / script.name
        for t, rgb in enumerate(script.rgb_frames):
            _save(rgb, seq_dir / "img" / f"{t + 1:06d}.jpg")
        write_box_file(seq_dir / "groundtruth.txt", script.rgb_boxes)


def write_detection(cfg: DatagenConfig, seed: int, root: Path) -> Path:
    """Sonar-like detection images: speckle with one to three reflectors, each box annotated.

    They play the part of a SAR detection set for the sonar branch.
    """
    annotations: dict[str, list[list[float]]] = {}
    short = min(cfg.width, cfg.height)
    for k in range(cfg.detection_images):
        rng = example_rng(seed, 2, k)
        sonar = sonar_background(rng, cfg.width, cfg.height)
        boxes = []
        for _ in range(int(rng.integers(1, 4))):
            base = float(rng.uniform(0.1, 0.2) * short)
            w, h = base * float(rng.uniform(1.0, 1.4)), base * float(rng.uniform(0.6, 1.0))
            cx = float(rng.uniform(w, cfg.width - w))
            cy = float(rng.uniform(h, cfg.height - h))
            sonar = draw_reflector(sonar, cx, cy, w, h, float(rng.uniform(100.0, 240.0)))
            boxes.append(_clip_box(cx, cy, w, h, cfg.width, cfg.height).as_list())
        gray = np.clip(sonar, 0, 255).astype(np.uint8)
        name = f"images/{k + 1:06d}.jpg"
        _save(np.repeat(gray[:, :, None], 3, axis=2), root / name)
        annotations[name] = boxes
    path = root / "annotations.json"
    path.write_text(json.dumps(annotations, indent=2, sort_keys=True) + "\n")
    return path


def _tile(image: np.ndarray, box: BBox | None, side: int) -> Image.Image:
    tile = Image.fromarray(np.ascontiguousarray(image)).resize((side, side), Image.Resampling.BILINEAR)
    if box is not None and not box.is_absent():
        draw = ImageDraw.Draw(tile)
        x1, y1, x2, y2 = (v * side for v in box.corners())
        draw.rectangle((x1, y1, x2, y2), outline=(0, 255, 0), width=2)
    return tile


def write_preview(records: list[SequenceRecord], cfg: RunConfig, path: Path, side: int = 128) -> Path:
    """Grid of training examples: one row each, columns z_rgb, x_rgb, z_sonar, x_sonar."""
    rows = cfg.datagen.preview_examples
    grid = Image.new("RGB", (4 * side, rows * side), (0, 0, 0))
    for row in range(rows):
        rng = example_rng(cfg.seed, 3, row)
        record = records[row % len(records)]
        example = make_training_example(record, rng, cfg)
        tiles = (
            _tile(example.z_rgb, None, side),
            _tile(example.x_rgb, example.gt_rgb, side),
            _tile(example.z_son, None, side),
            _tile(example.x_son, example.gt_son, side),
        )
        for col, tile in enumerate(tiles):
            grid.paste(tile, (col * side, row * side))
    grid.save(path)
    return path


def generate(cfg: RunConfig, out_dir: str | Path | None = None) -> Path:
    """Writes benchmark/, train/, detection/ and srst_preview.png under out_dir."""
    root = Path(out_dir or cfg.datagen.out_dir)
    scripts = [make_sequence(i, cfg.datagen, cfg.seed) for i in range(cfg.datagen.sequences)]
    write_benchmark(scripts, root / "benchmark")
    write_sot(scripts, root / "train")
    if cfg.datagen.detection_images:
        write_detection(cfg.datagen, cfg.seed, root / "detection")
    write_preview(read_sequence_dir(root / "train"), cfg, root / "srst_preview.png")
    logger.info(f"Wrote {len(scripts)} toy sequences of {cfg.datagen.frames} frames to {root}")
    return root
