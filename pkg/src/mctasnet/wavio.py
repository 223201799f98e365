"""16-bit PCM WAV I/O.

Floats map to integers as ``round(x * 32768)`` clipped to the int16 range,
and back as ``q / 32768``.  Reading a file and writing the result again
reproduces it byte for byte.
"""

from __future__ import annotations

from pathlib import Path
from typing import Tuple

import numpy as np
from scipy.io import wavfile

from .errors import InvalidArgument

SCALE = 32768.0


def quantize(x: np.ndarray) -> np.ndarray:
    return np.clip(np.round(np.asarray(x, dtype=np.float64) * SCALE), -32768, 32767).astype("<i2")


def write_wav(path, data: np.ndarray, fs: int = 8000) -> None:
    """Write a ``channels x samples`` (or 1-D) float array as interleaved PCM16."""
    arr = np.asarray(data)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise InvalidArgument(f"expected channels x samples, got shape {arr.shape}")
    path = Path(path)
    try:
        wavfile.write(path, fs, quantize(arr).T.copy() if arr.shape[0] > 1 else quantize(arr[0]))
    except OSError as exc:
        raise OSError(f"{path}: {exc}") from exc


def read_wav(path) -> Tuple[np.ndarray, int]:
    """Return ``(channels x samples float64 array, sample_rate)``."""
    path = Path(path)
    try:
        fs, data = wavfile.read(path)
    except (OSError, ValueError) as exc:
        raise OSError(f"{path}: {exc}") from exc
    if data.dtype != np.int16:
        raise InvalidArgument(f"{path}: expected 16-bit PCM, got {data.dtype}")
    data = data.astype(np.float64) / SCALE
    return (data[None, :] if data.ndim == 1 else data.T.copy()), int(fs)
