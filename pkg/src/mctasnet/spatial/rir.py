"""Image-source room impulse responses for shoebox rooms."""

from __future__ import annotations

import math
from typing import List

import numpy as np
from scipy.signal import butter, sosfilt

from ..errors import InvalidArgument
from .geometry import Scene

SOUND_SPEED = 343.0
SABINE_CONSTANT = 0.161
SINC_HALF_WIDTH = 20  # taps each side of the fractional-delay kernel
HIGHPASS_HZ = 100.0
T20_RANGE = (-5.0, -25.0)
_CHUNK = 200_000


def _octant_directions(count: int = 4000) -> np.ndarray:
    # Fibonacci points on the upper hemisphere, folded into the positive octant
    i = np.arange(count) + 0.5
    z = 1.0 - i / count
    phi = np.pi * (1.0 + 5.0**0.5) * i
    r = np.sqrt(1.0 - z * z)
    return np.abs(np.column_stack([r * np.cos(phi), r * np.sin(phi), z]))


_DIRECTIONS = _octant_directions()


def sabine_absorption(room, t60: float) -> float:
    """Uniform absorption coefficient giving ``t60`` by Sabine's formula."""
    lx, ly, lz = room
    volume = lx * ly * lz
    surface = 2.0 * (lx * ly + lx * lz + ly * lz)
    alpha = SABINE_CONSTANT * volume / (surface * t60)
    if not 0.0 < alpha <= 1.0:
        raise InvalidArgument(f"T60={t60} s is unreachable in a {lx:.2f}x{ly:.2f}x{lz:.2f} m room")
    return alpha


def calibrated_absorption(room, t60: float, fs: int = 8000, c: float = SOUND_SPEED,
                          fit_range=T20_RANGE) -> float:
    """Uniform absorption whose image-source decay has reverberation time ``t60``.

    In a shoebox every image at distance ``c*t`` along direction ``u`` has
    undergone about ``c*t*sum(|u_i| / L_i)`` reflections, so the late energy
    envelope is the direction average of ``exp(-kappa*c*t*sum(|u_i|/L_i))``
    with ``kappa = -ln(1 - alpha)``.  Flat rooms decay slower than Sabine's
    diffuse-field estimate predicts; this fits the same T20 line as
    :func:`schroeder_t60` to that envelope and rescales ``kappa`` (the fitted
    time is exactly proportional to ``1/kappa``).  Sabine's value seeds it.
    """
    room = np.asarray(room, dtype=float)
    kappa0 = -math.log(1.0 - min(sabine_absorption(room, t60), 0.999))
    rate = (_DIRECTIONS / room).sum(axis=1)
    t = np.arange(0.0, 3.0 * t60, 1.0 / fs)
    decay = np.exp(-np.outer(c * t * kappa0, rate))
    edc = (decay / rate).mean(axis=1)  # closed-form backward integral
    fitted = _fit_decay(10.0 * np.log10(edc / edc[0]), fs, fit_range)
    kappa = kappa0 * fitted / t60
    alpha = 1.0 - math.exp(-kappa)
    if not 0.0 < alpha < 1.0:
        raise InvalidArgument(f"T60={t60} s is unreachable in room {room}")
    return alpha


def fractional_delay_kernel(delays: np.ndarray, half_width: int = SINC_HALF_WIDTH):
    """Hann-windowed sinc taps for each (possibly fractional) delay.

    Returns ``(start, taps)``: integer first-tap index per delay and a
    ``len(delays) x (2*half_width + 2)`` tap matrix.
    """
    start = np.floor(delays).astype(np.int64) - half_width
    offsets = np.arange(2 * half_width + 2)
    t = (start[:, None] + offsets[None, :]) - delays[:, None]
    window = np.where(np.abs(t) < half_width + 1, 0.5 * (1.0 + np.cos(np.pi * t / (half_width + 1))), 0.0)
    return start, window * np.sinc(t)


def _image_sources(source: np.ndarray, room: np.ndarray, max_dist: float, mic: np.ndarray):
    """Image positions and reflection counts within ``max_dist`` of ``mic``."""
    orders = [int(math.ceil(max_dist / (2.0 * room[i]))) + 1 for i in range(3)]
    axes = []
    for i in range(3):
        n = np.arange(-orders[i], orders[i] + 1)
        # two mirror parities per axis: (1-2u) * s + 2 n L, reflections |n - u| + |n|
        pos = np.concatenate([source[i] + 2 * n * room[i], -source[i] + 2 * n * room[i]])
        refl = np.concatenate([2 * np.abs(n), np.abs(n - 1) + np.abs(n)])
        axes.append((pos - mic[i], refl))
    dx, rx = axes[0]
    dy, ry = axes[1]
    dz, rz = axes[2]
    dist2 = dx[:, None, None] ** 2 + dy[None, :, None] ** 2 + dz[None, None, :] ** 2
    refl = rx[:, None, None] + ry[None, :, None] + rz[None, None, :]
    keep = dist2 <= max_dist**2
    return np.sqrt(dist2[keep]), refl[keep]


def simulate_rir(scene: Scene, fs: int = 8000, c: float = SOUND_SPEED,
                 absorption: str = "calibrated") -> Scene:
    """Fill ``scene.rirs`` with image-source responses and return the scene.

    Walls share one absorption coefficient (amplitude reflection
    ``sqrt(1 - alpha)``), from :func:`calibrated_absorption` by default or
    plain :func:`sabine_absorption` with ``absorption="sabine"``.  Every
    image closer than ``c * length`` contributes ``beta^reflections / (4 pi d)``
    at a windowed-sinc fractional delay of ``d / c * fs`` samples.
    Reverberant responses last ``T60 * fs`` samples and pass through a
    100 Hz high-pass, which removes the DC build-up of the all-positive image
    pulses.  Anechoic responses hold the direct path only, unfiltered.
    """
    room = np.asarray(scene.room, dtype=float)
    mics = np.asarray(scene.mics, dtype=float)
    speakers = np.asarray(scene.speakers, dtype=float)
    dists = np.linalg.norm(speakers[:, None, :] - mics[None, :, :], axis=-1)
    if dists.min() < 1e-3:
        raise InvalidArgument("a speaker coincides with a microphone")
    direct_max = dists.max() / c * fs
    if scene.t60 > 0:
        if absorption == "sabine":
            alpha = sabine_absorption(room, scene.t60)
        elif absorption == "calibrated":
            alpha = calibrated_absorption(room, scene.t60, fs, c)
        else:
            raise InvalidArgument(f"unknown absorption model {absorption!r}")
        beta = math.sqrt(1.0 - alpha)
        length = max(int(math.ceil(scene.t60 * fs)), int(math.ceil(direct_max)) + 2 * SINC_HALF_WIDTH + 2)
    else:
        beta = 0.0
        length = int(math.ceil(direct_max)) + 2 * SINC_HALF_WIDTH + 2
    max_dist = length / fs * c
    rirs: List[List[np.ndarray]] = []
    for src in speakers:
        per_mic = []
        for mic in mics:
            if beta == 0.0:
                d = np.array([np.linalg.norm(src - mic)])
                gain = 1.0 / (4.0 * np.pi * d)
            else:
                d, refl = _image_sources(src, room, max_dist, mic)
                gain = beta**refl / (4.0 * np.pi * d)
            h = _render(d / c * fs, gain, length)
            if beta > 0.0:
                h = sosfilt(butter(2, HIGHPASS_HZ / (fs / 2), "high", output="sos"), h)
            per_mic.append(h)
        rirs.append(per_mic)
    scene.rirs = rirs
    return scene


def _render(delays: np.ndarray, gains: np.ndarray, length: int) -> np.ndarray:
    h = np.zeros(length + 2 * SINC_HALF_WIDTH + 2)
    for lo in range(0, len(delays), _CHUNK):
        dl, gl = delays[lo : lo + _CHUNK], gains[lo : lo + _CHUNK]
        start, taps = fractional_delay_kernel(dl)
        idx = start[:, None] + np.arange(taps.shape[1])[None, :]
        w = taps * gl[:, None]
        ok = (idx >= 0) & (idx < len(h))
        h += np.bincount(idx[ok], weights=w[ok], minlength=len(h))
    return h[:length]


def energy_decay_curve(rir: np.ndarray) -> np.ndarray:
    """Schroeder backward-integrated energy in dB, normalised to 0 dB at t=0."""
    energy = np.cumsum((np.asarray(rir, dtype=float) ** 2)[::-1])[::-1]
    return 10.0 * np.log10(np.maximum(energy / energy[0], 1e-300))


def schroeder_t60(rir: np.ndarray, fs: int = 8000, fit_range=T20_RANGE) -> float:
    """Reverberation time from a line fit to the decay curve (T20 by default)."""
    return _fit_decay(energy_decay_curve(rir), fs, fit_range)


def _fit_decay(edc: np.ndarray, fs: int, fit_range) -> float:
    hi, lo = fit_range
    sel = np.nonzero((edc <= hi) & (edc >= lo))[0]
    if sel.size < 2:
        raise InvalidArgument("decay curve does not span the fit range")
    t = sel / fs
    slope, _ = np.polyfit(t, edc[sel], 1)
    return -60.0 / slope
