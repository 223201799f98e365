"""Noise-free multichannel mixing of dry sources through a scene."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.signal import fftconvolve

from ..errors import InvalidArgument
from .geometry import Scene, angle_difference, azimuths

SNR_RANGE = (-5.0, 5.0)


@dataclass
class MixtureSample:
    """One training/evaluation example.

    ``mixture`` is ``M x n``; ``references`` are the ``K x n`` reverberant
    images at microphone 1 (the separation targets) and ``dry`` the scaled
    anechoic sources they came from.
    """

    mixture: np.ndarray
    references: np.ndarray
    dry: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def num_samples(self) -> int:
        return self.mixture.shape[1]

    def replace(self, **changes) -> "MixtureSample":
        return replace(self, **changes)


def source_images(dry: np.ndarray, scene: Scene) -> np.ndarray:
    """``K x M x n`` array of each source convolved with each impulse response."""
    if scene.rirs is None:
        raise InvalidArgument("scene has no impulse responses; run simulate_rir first")
    n = dry.shape[1]
    return np.stack(
        [np.stack([fftconvolve(dry[k], h)[:n] for h in scene.rirs[k]]) for k in range(len(dry))]
    )


def mix(dry_sources, scene: Scene, target_snr_db=0.0) -> MixtureSample:
    """Spatialise ``dry_sources`` (``K x n``) and add them at every microphone.

    Sources 2..K are rescaled so that, at microphone 1, the power of source 1's
    image over source k's image equals ``target_snr_db`` (one value, or one per
    rescaled source).  Sources of unequal length are cut to the shortest.
    """
    dry = [np.asarray(s, dtype=np.float64).reshape(-1) for s in dry_sources]
    if len(dry) != scene.num_speakers:
        raise InvalidArgument(f"{len(dry)} sources for a {scene.num_speakers}-speaker scene")
    n = min(len(s) for s in dry)
    dry = np.stack([s[:n] for s in dry])
    if np.any(~dry.any(axis=1)):
        raise InvalidArgument("a dry source is silent")
    snrs = np.broadcast_to(np.asarray(target_snr_db, dtype=float), (len(dry) - 1,))
    if np.any(snrs < SNR_RANGE[0]) or np.any(snrs > SNR_RANGE[1]):
        raise InvalidArgument(f"target SNR {target_snr_db} dB outside {SNR_RANGE}")

    images = source_images(dry, scene)
    power = np.mean(images[:, 0, :] ** 2, axis=1)
    if np.any(power == 0):
        raise InvalidArgument("a source image at microphone 1 is silent")
    gains = np.ones(len(dry))
    gains[1:] = np.sqrt(power[0] / (power[1:] * 10.0 ** (snrs / 10.0)))
    images *= gains[:, None, None]
    dry = dry * gains[:, None]

    meta = {
        "snr_db": float(snrs[0]) if len(snrs) == 1 else [float(s) for s in snrs],
        "t60": float(scene.t60),
        "azimuths": [float(a) for a in azimuths(scene)],
        "gains": [float(g) for g in gains],
    }
    if scene.num_speakers == 2:
        meta["angle_diff"] = angle_difference(scene)
    return MixtureSample(
        mixture=images.sum(axis=0),
        references=images[:, 0, :].copy(),
        dry=dry,
        metadata=meta,
    )
