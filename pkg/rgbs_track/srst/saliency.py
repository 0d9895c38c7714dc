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

"""Grayscale saliency conversion that turns RGB crops into sonar-like inputs."""

from collections.abc import Callable

import cv2
import numpy as np
from immutabledict import immutabledict

from rgbs_track.errors import ConfigError

SaliencyFn = Callable[[np.ndarray], np.ndarray]


def spectral_residual(image: np.ndarray) -> np.ndarray:
    """Spectral-residual saliency of an RGB uint8 image as a single uint8 channel.

    The log-amplitude spectrum minus its 3x3 local average is recombined with
    the original phase, inverse transformed, squared, smoothed and min-max
    stretched to [0, 255]. A constant image has no residual and maps to zeros.
    """
    if image.size == 0:
        raise ValueError("Cannot compute saliency of an empty image")
    gray = cv2.cvtColor(image, cv2.COLOR_RGB2GRAY) if image.ndim == 3 else image
    gray = gray.astype(np.float64)
    if gray.max() == gray.min():
        return np.zeros(gray.shape, dtype=np.uint8)

    spectrum = np.fft.fft2(gray - gray.mean())
    log_amplitude = np.log1p(np.abs(spectrum))
    residual = log_amplitude - cv2.blur(log_amplitude, (3, 3))
    recombined = np.exp(residual) * np.exp(1j * np.angle(spectrum))
    saliency = np.abs(np.fft.ifft2(recombined)) ** 2
    saliency = cv2.GaussianBlur(saliency, (9, 9), 2.5)

    low, high = saliency.min(), saliency.max()
    if high - low <= 1e-12 * max(abs(high), 1.0):
        return np.zeros(gray.shape, dtype=np.uint8)
    return np.round((saliency - low) / (high - low) * 255.0).astype(np.uint8)


SALIENCY_METHODS: immutabledict[str, SaliencyFn] = immutabledict({"spectral_residual": spectral_residual})


def to_saliency(image: np.ndarray, method: str = "spectral_residual") -> np.ndarray:
    """Saliency map replicated to three identical channels (HxWx3 uint8)."""
    try:
        fn = SALIENCY_METHODS[method]
    except KeyError as exc:
        raise ConfigError(f"Unknown saliency method {method!r}; choose from {sorted(SALIENCY_METHODS)}") from exc
    single = fn(image)
    return np.repeat(single[:, :, None], 3, axis=2)
