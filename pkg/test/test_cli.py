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

from pathlib import Path

import pandas as pd
import pytest
from click.testing import CliRunner
from loguru import logger

from rgbs_track.cli import main
from rgbs_track.config import RunConfig
from rgbs_track.errors import EXIT_DATA, EXIT_NUMERIC, EXIT_USAGE, NumericError
from rgbs_track.evalkit.report import read_summary, write_summary
from rgbs_track.model.checkpoint import save_checkpoint
from rgbs_track.model.network import SCANet
from rgbs_track.training import trainer

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


pytestmark = pytest.mark.usefixtures("restore_logging")


@pytest.fixture
def runner() -> CliRunner:
    return CliRunner()


def test_help_lists_commands_and_config_keys(runner: CliRunner):
    result = runner.invoke(main, ["--help"])
    assert result.exit_code == 0
    for command in ("datagen", "train", "track", "eval", "plot"):
        assert command in result.output
    result = runner.invoke(main, ["train", "--help"])
    assert result.exit_code == 0
    assert "backbone.scam_layers" in result.output
    assert "scam.layers -> backbone.scam_layers" in result.output


def test_track_needs_exactly_one_source(runner: CliRunner, toy_root: Path, tmp_path: Path):
    result = runner.invoke(main, ["track", "--dataset", str(toy_root / "benchmark"), "--out", str(tmp_path)])
    assert result.exit_code == EXIT_USAGE
    assert "exactly one of --checkpoint or --oracle" in result.output


def test_missing_required_option_is_a_usage_error(runner: CliRunner, tmp_path: Path):
    result = runner.invoke(main, ["eval", "--results", str(tmp_path)])
    assert result.exit_code == EXIT_USAGE


def test_unknown_config_key_is_a_usage_error(runner: CliRunner, toy_root: Path, tmp_path: Path):
    result = runner.invoke(
        main, ["eval", "--results", str(tmp_path), "--dataset", str(toy_root / "benchmark"), "--eval.agg=pool"]
    )
    assert result.exit_code == EXIT_USAGE


def test_eval_without_results_is_a_data_error(runner: CliRunner, toy_root: Path, tmp_path: Path):
    result = runner.invoke(main, ["eval", "--results", str(tmp_path), "--dataset", str(toy_root / "benchmark")])
    assert result.exit_code == EXIT_DATA


def test_datagen_track_eval_plot(runner: CliRunner, toy_args: list[str], tmp_path: Path):
    data = tmp_path / "data"
    result = runner.invoke(main, ["datagen", "--out", str(data), *toy_args])
    assert result.exit_code == 0, result.output
    assert (data / "srst_preview.png").is_file()

    run = tmp_path / "oracle"
    result = runner.invoke(
        main,
        ["track", "--oracle", "--dataset", str(data / "benchmark"), "--out", str(run), "--eval.success_top=closed"],
    )
    assert result.exit_code == 0, result.output
    assert "rgb: SR=1.0000 PR=1.0000 NPR=1.0000" in result.output
    assert "sonar: SR=1.0000 PR=1.0000 NPR=1.0000" in result.output

    scored = tmp_path / "scored"
    result = runner.invoke(
        main,
        [
            "eval",
            "--results", str(run / "results"),
            "--dataset", str(data / "benchmark"),
            "--out", str(scored),
            "--tracker", "Echo",
        ],
    )
    assert result.exit_code == 0, result.output
    records = read_summary(scored / "summary.json")
    assert {r.tracker for r in records} == {"Echo"}
    assert (scored / "attributes_rgb.csv").is_file()
    assert (scored / "sequences.csv").is_file()

    weaker = [r.model_copy(update={"tracker": "Weaker", "SR": r.SR / 2}) for r in records]
    write_summary(weaker, tmp_path / "weaker.json")
    figures = tmp_path / "figures"
    result = runner.invoke(
        main, ["plot", str(scored / "summary.json"), str(tmp_path / "weaker.json"), "--out", str(figures)]
    )
    assert result.exit_code == 0, result.output
    ranking = (figures / "ranking.csv").read_text().splitlines()
    assert ranking[-2].startswith("Echo")
    assert ranking[-1].startswith("Weaker")
    assert (figures / "success_rgb.png").is_file()


def tree_bytes(root: Path) -> dict[str, bytes]:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_track_eval_and_plot_reruns_are_byte_identical(
    runner: CliRunner, tiny_cfg: RunConfig, toy_root: Path, tmp_path: Path
):
    checkpoint = save_checkpoint(SCANet(tiny_cfg), tmp_path / "model.pt")
    bench = str(toy_root / "benchmark")
    for run in ("a", "b"):
        out = tmp_path / run
        commands = [
            ["track", "--checkpoint", str(checkpoint), "--dataset", bench, "--out", str(out / "track")],
            ["eval", "--results", str(out / "track" / "results"), "--dataset", bench, "--out", str(out / "eval")],
            ["plot", str(out / "eval" / "summary.json"), "--out", str(out / "plot")],
        ]
        for command in commands:
            result = runner.invoke(main, command)
            assert result.exit_code == 0, result.output

    for stage in ("track", "eval", "plot"):
        first, second = tree_bytes(tmp_path / "a" / stage), tree_bytes(tmp_path / "b" / stage)
        assert first, stage
        assert first == second, stage


def test_track_with_checkpoint_uses_its_config(
    runner: CliRunner, tiny_cfg: RunConfig, toy_root: Path, tmp_path: Path
):
    checkpoint = save_checkpoint(SCANet(tiny_cfg), tmp_path / "model.pt")
    sequences = tmp_path / "bench"
    sequences.mkdir()
    (sequences / "toy_002").symlink_to(toy_root / "benchmark" / "toy_002", target_is_directory=True)
    result = runner.invoke(
        main, ["track", "--checkpoint", str(checkpoint), "--dataset", str(sequences), "--out", str(tmp_path / "run")]
    )
    assert result.exit_code == 0, result.output
    assert (tmp_path / "run" / "results" / "toy_002" / "sonar.txt").is_file()


def test_checkpoint_dimension_mismatch_exits_with_usage_code(
    runner: CliRunner, tiny_cfg: RunConfig, toy_root: Path, tmp_path: Path
):
    checkpoint = save_checkpoint(SCANet(tiny_cfg), tmp_path / "model.pt")
    result = runner.invoke(
        main,
        [
            "track",
            "--checkpoint", str(checkpoint),
            "--dataset", str(toy_root / "benchmark"),
            "--out", str(tmp_path / "run"),
            "--backbone.dim=32",
        ],
    )
    assert result.exit_code == EXIT_USAGE
    assert "backbone.dim" in result.output


def test_non_finite_training_loss_exits_with_numeric_code(
    runner: CliRunner, toy_args: list[str], toy_root: Path, tmp_path: Path, monkeypatch
):
    def exploding_total(rgb, sonar, weights):
        raise NumericError("Non-finite loss term rgb.cls")

    monkeypatch.setattr(trainer, "total_loss", exploding_total)
    result = runner.invoke(
        main,
        [
            "train",
            "--out", str(tmp_path / "run"),
            *toy_args,
            f"--train.sot_root={toy_root / 'train'}",
            f"--train.detection_annotations={toy_root / 'detection' / 'annotations.json'}",
        ],
    )
    assert result.exit_code == EXIT_NUMERIC
    assert (tmp_path / "run" / "checkpoint.pt").is_file()


def test_log_file_receives_json_lines(runner: CliRunner, toy_root: Path, tmp_path: Path):
    log_file = tmp_path / "run.jsonl"
    result = runner.invoke(
        main, ["--log-file", str(log_file), "eval", "--results", str(tmp_path), "--dataset", str(toy_root / "benchmark")]
    )
    assert result.exit_code == EXIT_DATA
    logger.remove()
    lines = log_file.read_text().splitlines()
    assert any('"level"' in line and "No result sequences" in line for line in lines)


@pytest.mark.slow
def test_toy_profile_trains_tracks_and_beats_the_scam_ablation(runner: CliRunner, tmp_path: Path):
    profile = str(CONFIGS / "toy.json")
    data = tmp_path / "data"
    result = runner.invoke(main, ["datagen", "--config", profile, "--out", str(data)])
    assert result.exit_code == 0, result.output

    scores: dict[str, dict[str, float]] = {}
    for name, extra in (("full", []), ("no_scam", ["--scam.layers=[]"])):
        run = tmp_path / "runs" / name
        result = runner.invoke(
            main,
            [
                "train",
                "--config", profile,
                "--out", str(run),
                f"--train.sot_root={data / 'train'}",
                f"--train.detection_annotations={data / 'detection' / 'annotations.json'}",
                *extra,
            ],
        )
        assert result.exit_code == 0, result.output
        result = runner.invoke(
            main,
            [
                "track",
                "--checkpoint", str(run / "checkpoint.pt"),
                "--dataset", str(data / "benchmark"),
                "--out", str(tmp_path / "eval" / name),
            ],
        )
        assert result.exit_code == 0, result.output
        scores[name] = {r.modality: r.SR for r in read_summary(tmp_path / "eval" / name / "summary.json")}

    log = pd.read_csv(tmp_path / "runs" / "full" / "loss_log.csv")
    assert log["total"].iloc[-1] < 0.1 * log["total"].iloc[0]
    assert scores["full"]["rgb"] >= 0.5
    assert scores["full"]["sonar"] >= 0.5
    assert scores["no_scam"]["sonar"] < scores["full"]["sonar"]
