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

"""rgbs command line: datagen, train, track, eval and plot.

Any --section.key=value argument after the command overrides that
configuration key, e.g. `rgbs train --config configs/toy.json --scam.mode=softmax_nogim`.
"""

import sys
from collections.abc import Callable
from pathlib import Path
from typing import Any

import click
from dotenv import load_dotenv
from loguru import logger

from rgbs_track.app_utils.determinism import seed_everything
from rgbs_track.app_utils.telemetry import setup_telemetry
from rgbs_track.config import RunConfig, config_reference, load_config, parse_overrides
from rgbs_track.errors import EXIT_OK, EXIT_USAGE, RgbsError
from rgbs_track.evalkit.datasets import read_benchmark
from rgbs_track.evalkit.ope import evaluate_results, run_ope, write_eval_outputs
from rgbs_track.evalkit.plots import emit_plots
from rgbs_track.evalkit.report import ranking_table, read_summary
from rgbs_track.model.checkpoint import read_checkpoint
from rgbs_track.synthetic.generator import generate
from rgbs_track.tracker.tracker import OracleTracker, Tracker
from rgbs_track.training.trainer import train
from rgbs_track.wiring import build_tracker

OVERRIDE_CONTEXT = {"ignore_unknown_options": True, "allow_extra_args": True}


class RgbsGroup(click.Group):
    """Maps library errors to exit codes: 1 usage/config, 2 data, 3 numeric."""

    def main(self, *args: Any, standalone_mode: bool = True, **kwargs: Any) -> Any:
        try:
            result = super().main(*args, standalone_mode=False, **kwargs)
        except click.ClickException as exc:
            exc.show()
            code = EXIT_USAGE
        except click.Abort:
            click.echo("Aborted!", err=True)
            code = EXIT_USAGE
        except RgbsError as exc:
            logger.error(f"{type(exc).__name__}: {exc}")
            code = exc.exit_code
        else:
            code = result if isinstance(result, int) else EXIT_OK
        if standalone_mode:
            sys.exit(code)
        return code


def common_options(fn: Callable[..., Any]) -> Callable[..., Any]:
    fn = click.option(
        "--deterministic/--no-deterministic",
        default=None,
        help="Bit-stable kernels (default from config: on).",
    )(fn)
    fn = click.option("--seed", type=int, default=None, help="Global seed (default from config: 0).")(fn)
    fn = click.option(
        "--config",
        "configs",
        multiple=True,
        type=click.Path(dir_okay=False, path_type=Path),
        help="JSON config profile; repeat to layer several, later files win.",
    )(fn)
    return fn


def resolve_config(
    ctx: click.Context,
    configs: tuple[Path, ...],
    seed: int | None,
    deterministic: bool | None,
    base: dict[str, Any] | None = None,
) -> RunConfig:
    overrides = parse_overrides(ctx.args)
    if seed is not None:
        overrides["seed"] = seed
    if deterministic is not None:
        overrides["deterministic"] = deterministic
    cfg = load_config(configs, overrides, base=base)
    seed_everything(cfg.seed, cfg.deterministic)
    logger.debug(f"Resolved configuration: {cfg.model_dump_json()}")
    return cfg


@click.group(cls=RgbsGroup)
@click.option("--log-level", default=None, help="Log level (default: $RGBS_LOG_LEVEL or INFO).")
@click.option(
    "--log-file",
    default=None,
    type=click.Path(dir_okay=False),
    help="Also write JSON-lines logs here (default: $RGBS_LOG_FILE).",
)
def main(log_level: str | None, log_file: str | None) -> None:
    """RGB-sonar tracking: toy data, SRST training, OPE tracking and evaluation."""
    load_dotenv()
    setup_telemetry(log_level, log_file)


@main.command(context_settings=OVERRIDE_CONTEXT, epilog=config_reference())
@common_options
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), default=None, help="Output directory.")
@click.pass_context
def datagen(
    ctx: click.Context, configs: tuple[Path, ...], seed: int | None, deterministic: bool | None, out: Path | None
) -> None:
    """Write the synthetic benchmark, SOT training set, detection set and SRST preview."""
    cfg = resolve_config(ctx, configs, seed, deterministic)
    root = generate(cfg, out)
    click.echo(f"Synthetic data written to {root}")


@main.command(name="train", context_settings=OVERRIDE_CONTEXT, epilog=config_reference())
@common_options
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), default=None, help="Run directory.")
@click.pass_context
def train_cmd(
    ctx: click.Context, configs: tuple[Path, ...], seed: int | None, deterministic: bool | None, out: Path | None
) -> None:
    """Train SCANet on SRST pseudo pairs; writes checkpoint.pt and loss_log.csv."""
    cfg = resolve_config(ctx, configs, seed, deterministic)
    result = train(cfg, out)
    click.echo(
        f"Trained {result.steps} steps: loss {result.initial_loss:.4f} -> {result.final_loss:.4f}; "
        f"checkpoint {result.checkpoint}"
    )


@main.command(context_settings=OVERRIDE_CONTEXT, epilog=config_reference())
@common_options
@click.option("--checkpoint", type=click.Path(dir_okay=False, path_type=Path), default=None)
@click.option("--oracle", is_flag=True, help="Echo ground truth instead of running a network.")
@click.option("--dataset", required=True, type=click.Path(file_okay=False, path_type=Path))
@click.option("--out", required=True, type=click.Path(file_okay=False, path_type=Path))
@click.pass_context
def track(
    ctx: click.Context,
    configs: tuple[Path, ...],
    seed: int | None,
    deterministic: bool | None,
    checkpoint: Path | None,
    oracle: bool,
    dataset: Path,
    out: Path,
) -> None:
    """One-pass evaluation of a checkpoint (or the oracle) on a benchmark."""
    if oracle == (checkpoint is not None):
        raise click.UsageError("Pass exactly one of --checkpoint or --oracle")
    base = None
    if checkpoint is not None:
        base = read_checkpoint(checkpoint)["config"]
        base.pop("device", None)
    cfg = resolve_config(ctx, configs, seed, deterministic, base=base)
    sequences = read_benchmark(dataset)

    tracker: Tracker
    if oracle:
        tracker = OracleTracker({s.name: (s.rgb_boxes, s.sonar_boxes) for s in sequences})
    else:
        tracker = build_tracker(cfg, checkpoint)
    result = run_ope(sequences, tracker, out, cfg.eval)
    for record in result.records:
        click.echo(f"{record.modality}: SR={record.SR:.4f} PR={record.PR:.4f} NPR={record.NPR:.4f}")


@main.command(name="eval", context_settings=OVERRIDE_CONTEXT, epilog=config_reference())
@common_options
@click.option("--results", required=True, type=click.Path(file_okay=False, path_type=Path))
@click.option("--dataset", required=True, type=click.Path(file_okay=False, path_type=Path))
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), default=None)
@click.option("--tracker", "tracker_name", default=None, help="Name in the summary (default: results dir name).")
@click.pass_context
def eval_cmd(
    ctx: click.Context,
    configs: tuple[Path, ...],
    seed: int | None,
    deterministic: bool | None,
    results: Path,
    dataset: Path,
    out: Path | None,
    tracker_name: str | None,
) -> None:
    """Score result files; writes summary.json plus attribute and sequence tables."""
    cfg = resolve_config(ctx, configs, seed, deterministic)
    annotations = read_benchmark(dataset, with_frames=False)
    result = evaluate_results(results, annotations, cfg.eval, tracker_name)
    summary = write_eval_outputs(result, out or results)
    for modality, table in result.attributes.items():
        click.echo(f"[{modality}]\n{table.to_string(float_format=lambda v: f'{v:.4f}')}")
    click.echo(f"Summary written to {summary}")


@main.command(context_settings=OVERRIDE_CONTEXT, epilog=config_reference())
@common_options
@click.argument("summaries", nargs=-1, required=True, type=click.Path(dir_okay=False, path_type=Path))
@click.option("--out", required=True, type=click.Path(file_okay=False, path_type=Path))
@click.pass_context
def plot(
    ctx: click.Context,
    configs: tuple[Path, ...],
    seed: int | None,
    deterministic: bool | None,
    summaries: tuple[Path, ...],
    out: Path,
) -> None:
    """Success, precision and normalized precision plots plus radar charts for several trackers."""
    cfg = resolve_config(ctx, configs, seed, deterministic)
    records = [record for path in summaries for record in read_summary(path)]
    written = emit_plots(records, out, cfg.eval.top_k)
    ranking = ranking_table(records)
    ranking.to_csv(out / "ranking.csv", float_format="%.6f")
    click.echo(ranking.to_string(float_format=lambda v: f"{v:.4f}"))
    click.echo(f"Wrote {len(written)} figures to {out}")


if __name__ == "__main__":
    main()
