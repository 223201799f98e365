"""Dry source providers: synthetic speech-like talkers or a folder of mono WAVs."""

from __future__ import annotations

from pathlib import Path
from typing import Dict, List, Sequence

import numpy as np
from scipy.signal import lfilter

from ..errors import InvalidArgument
from ..wavio import read_wav

FS = 8000
SPLITS = ("train", "valid", "test")


class SyntheticSpeech:
    """Band-limited, amplitude-modulated harmonic "talkers".

    A speaker is a fixed pitch range and formant set derived from its integer
    id; an utterance is a gliding harmonic excitation plus breath noise,
    shaped by the speaker's formant resonators and gated by a random
    syllable-rate envelope with pauses.  Train/valid speakers come from ids
    below ``pool_size * 2``; test speakers from a disjoint block, mirroring
    the speaker-independent split of the real corpus.
    """

    def __init__(self, pool_size: int = 50, fs: int = FS):
        self.pool_size = pool_size
        self.fs = fs

    def speakers(self, split: str) -> List[int]:
        if split not in SPLITS:
            raise InvalidArgument(f"unknown split {split!r}")
        if split == "test":
            return list(range(100_000, 100_000 + self.pool_size))
        return list(range(self.pool_size))

    def _voice(self, speaker: int) -> Dict[str, np.ndarray]:
        rng = np.random.default_rng([7919, speaker])
        return {
            "f0": rng.uniform(85.0, 255.0),
            "formants": np.sort(
                [rng.uniform(300, 900), rng.uniform(900, 2300), rng.uniform(2300, 3500)]
            ),
            "breath": rng.uniform(0.02, 0.15),
        }

    def utterance(self, speaker: int, rng: np.random.Generator, seconds: float) -> np.ndarray:
        fs = self.fs
        n = int(round(seconds * fs))
        voice = self._voice(speaker)
        t = np.arange(n) / fs

        # pitch: slow random glide within +-25% of the speaker's f0
        knots = rng.uniform(-0.25, 0.25, size=int(seconds * 4) + 2)
        drift = np.interp(t, np.linspace(0, seconds, len(knots)), knots)
        f0 = voice["f0"] * (1.0 + drift)
        phase = 2 * np.pi * np.cumsum(f0) / fs
        excitation = np.zeros(n)
        for h in range(1, int((fs / 2) / (voice["f0"] * 1.25))):
            excitation += np.where(h * f0 < fs / 2 * 0.95, np.sin(h * phase), 0.0) / h
        excitation += voice["breath"] * rng.standard_normal(n) * np.abs(excitation).max()

        shaped = np.zeros(n)
        for i, fc in enumerate(voice["formants"]):
            fc_i = fc * rng.uniform(0.9, 1.1)
            r = np.exp(-np.pi * (60.0 + 40.0 * i) / fs)
            a = [1.0, -2 * r * np.cos(2 * np.pi * fc_i / fs), r * r]
            shaped += lfilter([1.0 - r], a, excitation) / (i + 1)

        # syllables: raised-cosine bursts at 3-6 Hz with occasional pauses
        env = np.zeros(n)
        pos = int(rng.uniform(0, 0.1) * fs)
        while pos < n:
            dur = int(rng.uniform(0.08, 0.3) * fs)
            seg = np.hanning(dur) * rng.uniform(0.4, 1.0)
            end = min(n, pos + dur)
            env[pos:end] = np.maximum(env[pos:end], seg[: end - pos])
            pos += int(dur * rng.uniform(0.6, 1.0))
            if rng.uniform() < 0.15:
                pos += int(rng.uniform(0.1, 0.3) * fs)
        out = shaped * env
        peak = np.abs(out).max()
        return out / peak if peak > 0 else out


class WavFolder:
    """User-supplied dry speech laid out as ``root/<split>/<speaker>/*.wav`` (mono, 8 kHz)."""

    def __init__(self, root, fs: int = FS):
        self.root = Path(root)
        self.fs = fs

    def speakers(self, split: str) -> List[str]:
        base = self.root / split
        if not base.is_dir():
            raise InvalidArgument(f"{base}: missing split directory")
        return sorted(p.name for p in base.iterdir() if p.is_dir())

    def utterance(self, speaker, rng: np.random.Generator, seconds: float) -> np.ndarray:
        files = sorted((self.root).glob(f"*/{speaker}/*.wav"))
        if not files:
            raise InvalidArgument(f"no WAV files for speaker {speaker!r} under {self.root}")
        data, fs = read_wav(files[int(rng.integers(len(files)))])
        if fs != self.fs or data.shape[0] != 1:
            raise InvalidArgument(f"dry sources must be mono {self.fs} Hz, got {data.shape[0]} ch @ {fs} Hz")
        x = data[0]
        n = int(round(seconds * self.fs))
        if len(x) > n:
            start = int(rng.integers(len(x) - n + 1))
            x = x[start : start + n]
        return x
