"""Random room / array / speaker layouts."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..errors import InvalidArgument, SamplingFailure

ROOM_RANGES = ((5.0, 10.0), (5.0, 10.0), (2.8, 4.0))
MIC_MIN_DIST = 0.05
MIC_MAX_DIST = 0.25
SPEAKER_MIN_DIST = 1.0
SPEAKER_ARRAY_MIN_DIST = 0.5
T60_RANGE = (0.2, 0.6)
MAX_TRIES = 100_000

WALL_MARGIN = 0.5
ARRAY_HEIGHT = (1.0, 2.0)
SPEAKER_HEIGHT = (1.2, 2.0)


@dataclass
class Scene:
    """Room geometry plus (after :func:`simulate_rir`) impulse responses.

    ``rirs[k][m]`` is the response from speaker ``k`` to microphone ``m``.
    Microphone index 0 is the reference channel.
    """

    room: np.ndarray
    mics: np.ndarray
    speakers: np.ndarray
    t60: float
    rirs: Optional[List[List[np.ndarray]]] = field(default=None, repr=False)

    @property
    def num_mics(self) -> int:
        return len(self.mics)

    @property
    def num_speakers(self) -> int:
        return len(self.speakers)

    @property
    def array_center(self) -> np.ndarray:
        return self.mics.mean(axis=0)


def _pairwise(points: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - points[None, :, :]
    d = np.sqrt((diff**2).sum(-1))
    iu = np.triu_indices(len(points), 1)
    return d[iu]


def scene_violations(scene: Scene) -> List[str]:
    """Human-readable list of broken layout constraints (empty when valid)."""
    problems = []
    room = np.asarray(scene.room)
    for label, pts in (("microphone", scene.mics), ("speaker", scene.speakers)):
        if np.any(pts <= 0) or np.any(pts >= room):
            problems.append(f"{label} outside the room")
    md = _pairwise(scene.mics)
    if md.size and (md.min() < MIC_MIN_DIST or md.max() > MIC_MAX_DIST):
        problems.append(f"mic spacing {md.min():.3f}..{md.max():.3f} m outside [0.05, 0.25]")
    sd = _pairwise(scene.speakers)
    if sd.size and sd.min() < SPEAKER_MIN_DIST:
        problems.append(f"speakers {sd.min():.3f} m apart")
    ad = np.linalg.norm(scene.speakers - scene.array_center, axis=1)
    if ad.min() < SPEAKER_ARRAY_MIN_DIST:
        problems.append(f"speaker {ad.min():.3f} m from array centre")
    if not (scene.t60 == 0 or T60_RANGE[0] <= scene.t60 <= T60_RANGE[1]):
        problems.append(f"T60 {scene.t60} outside {{0}} U [0.2, 0.6]")
    return problems


def _ball(rng: np.random.Generator, radius: float, count: int) -> np.ndarray:
    direction = rng.normal(size=(count, 3))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    r = radius * rng.uniform(size=(count, 1)) ** (1.0 / 3.0)
    return direction * r


def sample_geometry(
    rng: np.random.Generator,
    M: int,
    K: int = 2,
    reverberant: bool = False,
    room_ranges: Sequence[Tuple[float, float]] = ROOM_RANGES,
    t60_range: Tuple[float, float] = T60_RANGE,
    max_tries: int = MAX_TRIES,
) -> Scene:
    """Rejection-sample a layout satisfying every distance constraint.

    Microphones fall in a ball of diameter 0.25 m around a random array
    position, so the maximum spacing holds by construction and only the
    5 cm minimum is rejected on.  A fresh array geometry is drawn every call.
    """
    if M < 1 or K < 2:
        raise InvalidArgument(f"need M >= 1 and K >= 2, got M={M}, K={K}")
    if reverberant and not (T60_RANGE[0] <= t60_range[0] <= t60_range[1] <= T60_RANGE[1]):
        raise InvalidArgument(f"T60 range {t60_range} must lie within {T60_RANGE}")
    tries = 0
    while tries < max_tries:
        room = np.array([rng.uniform(lo, hi) for lo, hi in room_ranges])
        hi_z = min(ARRAY_HEIGHT[1], room[2] - WALL_MARGIN)
        centre = np.array(
            [
                rng.uniform(WALL_MARGIN, room[0] - WALL_MARGIN),
                rng.uniform(WALL_MARGIN, room[1] - WALL_MARGIN),
                rng.uniform(ARRAY_HEIGHT[0], hi_z),
            ]
        )
        while True:
            tries += 1
            mics = centre + _ball(rng, MIC_MAX_DIST / 2, M)
            d = _pairwise(mics)
            if not d.size or d.min() >= MIC_MIN_DIST or tries >= max_tries:
                break
        hi_z = min(SPEAKER_HEIGHT[1], room[2] - WALL_MARGIN)
        speakers = np.column_stack(
            [
                rng.uniform(WALL_MARGIN, room[0] - WALL_MARGIN, K),
                rng.uniform(WALL_MARGIN, room[1] - WALL_MARGIN, K),
                rng.uniform(SPEAKER_HEIGHT[0], hi_z, K),
            ]
        )
        t60 = float(rng.uniform(*t60_range)) if reverberant else 0.0
        scene = Scene(room=room, mics=mics, speakers=speakers, t60=t60)
        if not scene_violations(scene):
            return scene
        tries += 1
    raise SamplingFailure(f"no valid scene after {max_tries} attempts")


def azimuths(scene: Scene) -> np.ndarray:
    """Horizontal-plane azimuth (degrees in [0, 360)) of each speaker seen from the array centre."""
    d = scene.speakers - scene.array_center
    return np.degrees(np.arctan2(d[:, 1], d[:, 0])) % 360.0


def angle_between(az1: float, az2: float) -> float:
    diff = abs(az1 - az2) % 360.0
    return 360.0 - diff if diff > 180.0 else diff


def angle_difference(scene: Scene) -> float:
    """Speaker separation angle in [0, 180] degrees (two-speaker scenes)."""
    if scene.num_speakers != 2:
        raise InvalidArgument(f"angle difference is defined for K=2, got K={scene.num_speakers}")
    a = azimuths(scene)
    return angle_between(float(a[0]), float(a[1]))
