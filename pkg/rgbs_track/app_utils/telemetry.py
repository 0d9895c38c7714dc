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

import os
import sys

from loguru import logger

DEFAULT_FORMAT = (
    "<green>{time:YYYY-MM-DD HH:mm:ss.SSS}</green> | <level>{level: <8}</level> | "
    "<cyan>{name}</cyan>:<cyan>{function}</cyan> - <level>{message}</level>"
)


def setup_telemetry(level: str | None = None, log_file: str | None = None) -> str:
    """Configure loguru sinks for a CLI run.

    The stderr sink level comes from the argument, then RGBS_LOG_LEVEL, then INFO.
    When a log file is given (or RGBS_LOG_FILE is set) every record is also
    written there as one JSON object per line.
    """
    resolved = (level or os.environ.get("RGBS_LOG_LEVEL") or "INFO").upper()
    logger.remove()
    logger.add(sys.stderr, level=resolved, format=DEFAULT_FORMAT)

    log_file = log_file or os.environ.get("RGBS_LOG_FILE")
    if log_file:
        logger.add(log_file, level="DEBUG", serialize=True)
        logger.info(f"Structured logging enabled - writing JSON lines to {log_file}")
    else:
        logger.debug("Structured file logging disabled (set RGBS_LOG_FILE to enable)")
    return resolved
