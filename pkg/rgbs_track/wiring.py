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

"""Object graph for tracking runs: RunConfig -> SCANet -> SCANetTracker."""

from collections.abc import Callable
from pathlib import Path

from injector import Binder, CallableProvider, Injector, SingletonScope

from rgbs_track.config import RunConfig
from rgbs_track.model.checkpoint import load_checkpoint
from rgbs_track.model.network import SCANet, build_network
from rgbs_track.tracker.tracker import SCANetTracker


def configure_tracking(cfg: RunConfig, checkpoint: str | Path | None = None) -> Callable[[Binder], None]:
    def provide_network() -> SCANet:
        network = build_network(cfg)
        if checkpoint is not None:
            load_checkpoint(network, checkpoint)
        return network

    def configure(binder: Binder) -> None:
        binder.bind(RunConfig, to=cfg, scope=SingletonScope)
        binder.bind(SCANet, to=CallableProvider(provide_network), scope=SingletonScope)

    return configure


def create_tracker(injector: Injector) -> SCANetTracker:
    return SCANetTracker(injector.get(SCANet), injector.get(RunConfig))


def build_tracker(cfg: RunConfig, checkpoint: str | Path | None = None) -> SCANetTracker:
    return create_tracker(Injector(configure_tracking(cfg, checkpoint)))
