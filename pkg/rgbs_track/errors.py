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

"""Error types shared by the library and mapped to CLI exit codes."""

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class RgbsError(Exception):
    """Base class for every error raised on purpose by rgbs_track."""

    exit_code: int = EXIT_USAGE


class ConfigError(RgbsError, ValueError):
    """Invalid or unknown configuration."""

    exit_code = EXIT_USAGE


class CheckpointMismatchError(ConfigError):
    """A checkpoint was built with different model dimensions."""

    def __init__(self, mismatches: dict[str, tuple[object, object]]) -> None:
        self.mismatches = mismatches
        fields = ", ".join(
            f"{name} (checkpoint={stored!r}, config={wanted!r})"
            for name, (stored, wanted) in sorted(mismatches.items())
        )
        super().__init__(f"Checkpoint does not match the configured model: {fields}")


class DataError(RgbsError, ValueError):
    """Dataset, annotation or result files are missing or inconsistent."""

    exit_code = EXIT_DATA


class NumericError(RgbsError, ArithmeticError):
    """Non-finite values appeared where finite ones are required."""

    exit_code = EXIT_NUMERIC
