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

import pytest

from rgbs_track.config import RunConfig, config_reference, load_config, parse_overrides, parse_value
from rgbs_track.errors import ConfigError

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def test_defaults_are_the_full_scale_recipe():
    cfg = RunConfig()
    assert cfg.backbone.scam_layers == [4, 7, 10]
    assert (cfg.backbone.template_grid, cfg.backbone.search_grid) == (8, 16)
    assert cfg.scam.mode == "relu_gim"
    assert cfg.scam.lr_scale == 0.1
    assert cfg.heads.hanning_weight == 0.49
    assert (cfg.loss.lambda_iou, cfg.loss.lambda_l1) == (2.0, 5.0)
    assert (cfg.srst.mix_sot, cfg.srst.mix_detection) == (0.85, 0.15)
    assert cfg.eval.confidence_threshold == 0.5


@pytest.mark.parametrize(
    ("raw", "expected"),
    [("on", True), ("OFF", False), ("3", 3), ("0.25", 0.25), ("[4, 7]", [4, 7]), ("null", None), ("abc", "abc")],
)
def test_parse_value(raw, expected):
    assert parse_value(raw) == expected


def test_parse_overrides_accepts_both_spellings():
    overrides = parse_overrides(["--srst.saliency=off", "--scam.layers", "4,7", "--train.batch_size=8"])
    assert overrides == {"srst.saliency": False, "scam.layers": "4,7", "train.batch_size": 8}


@pytest.mark.parametrize(
    ("args", "message"),
    [(["batch_size=8"], "Unexpected argument"), (["--seed=1"], "must name a section"), (["--train.epochs"], "no value")],
)
def test_parse_overrides_errors(args, message):
    with pytest.raises(ConfigError, match=message):
        parse_overrides(args)


def test_aliases_reach_their_targets():
    cfg = load_config(overrides={"scam.layers": "4,7", "srst.wsd": False, "srst.tos": False})
    assert cfg.backbone.scam_layers == [4, 7]
    assert cfg.srst.detection is False
    assert cfg.srst.saliency is False


def test_single_layer_and_empty_layer_list():
    assert load_config(overrides={"scam.layers": 4}).backbone.scam_layers == [4]
    assert load_config(overrides={"scam.layers": ""}).backbone.scam_layers == []


def test_unknown_key_is_rejected():
    with pytest.raises(ConfigError, match="Invalid configuration"):
        load_config(overrides={"train.batchsize": 8})


@pytest.mark.parametrize(
    "overrides",
    [
        {"backbone.dim": 10, "backbone.heads": 3},
        {"backbone.search_size": 100},
        {"backbone.scam_layers": [0]},
        {"backbone.scam_layers": [13]},
        {"backbone.scam_layers": [4, 4]},
        {"srst.mix_sot": 0.0, "srst.mix_detection": 0.0},
        {"srst.search_scale_range": [1.2, 0.9]},
        {"tracker.confidence_threshold": 1.5},
        {"scam.mode": "tanh_gim"},
    ],
)
def test_invalid_values_are_rejected(overrides):
    with pytest.raises(ConfigError):
        load_config(overrides=overrides)


def test_layers_apply_in_order(tmp_path: Path):
    first = tmp_path / "first.json"
    second = tmp_path / "second.json"
    first.write_text(json.dumps({"train": {"batch_size": 4, "epochs": 3}}))
    second.write_text(json.dumps({"train": {"batch_size": 6}}))
    cfg = load_config([first, second], overrides={"train.epochs": 5}, base={"seed": 9, "train": {"epochs": 1}})
    assert (cfg.train.batch_size, cfg.train.epochs, cfg.seed) == (6, 5, 9)


def test_config_file_errors(tmp_path: Path):
    with pytest.raises(ConfigError, match="not found"):
        load_config([tmp_path / "missing.json"])
    broken = tmp_path / "broken.json"
    broken.write_text("{")
    with pytest.raises(ConfigError, match="not valid JSON"):
        load_config([broken])
    listed = tmp_path / "list.json"
    listed.write_text("[]")
    with pytest.raises(ConfigError, match="JSON object"):
        load_config([listed])


def test_device_comes_from_environment(monkeypatch):
    monkeypatch.setenv("RGBS_DEVICE", "cuda:1")
    assert RunConfig().device == "cuda:1"


@pytest.mark.parametrize("profile", sorted(CONFIGS.glob("*.json")), ids=lambda p: p.stem)
def test_shipped_profiles_load(profile: Path):
    load_config([profile])


def test_config_reference_lists_every_key():
    reference = config_reference()
    for key in ("backbone.scam_layers", "scam.gim_residual", "srst.max_gap", "eval.aggregation", "seed"):
        assert f"  {key} = " in reference
    assert "scam.layers -> backbone.scam_layers" in reference
