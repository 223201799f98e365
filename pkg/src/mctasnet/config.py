"""JSON run configuration files.

Training file keys (all optional)::

    variant, M, K, L, N, B, H, P, X, R          model architecture
    lr, batch_size, patience, seed, zero_mean,  optimisation
    clamp_db, max_epochs, max_steps, segment_seconds

Spatialisation file keys (all optional)::

    count, seed, M, K, reverberant, seconds, split,
    t60_min, t60_max, pool_size, source_dir, workers
"""

from __future__ import annotations

import json
from pathlib import Path

from .errors import InvalidArgument
from .spatial.geometry import T60_RANGE

MODEL_KEYS = ("variant", "M", "K", "L", "N", "B", "H", "P", "X", "R")
TRAIN_KEYS = {
    "lr": "learning_rate",
    "batch_size": "batch_size",
    "patience": "patience_epochs",
    "seed": "seed",
    "zero_mean": "zero_mean",
    "clamp_db": "clamp_db",
    "max_epochs": "max_epochs",
    "max_steps": "max_steps",
    "segment_seconds": "segment_seconds",
}
SPATIAL_DEFAULTS = {
    "count": 100,
    "seed": 0,
    "M": 2,
    "K": 2,
    "reverberant": False,
    "seconds": 4.0,
    "split": "train",
    "t60_min": T60_RANGE[0],
    "t60_max": T60_RANGE[1],
    "pool_size": 50,
    "source_dir": None,
    "workers": 1,
}


def read_config(path) -> dict:
    if path is None:
        return {}
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InvalidArgument(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise InvalidArgument(f"{path}: expected a JSON object")
    return doc


def split_train_config(doc: dict):
    """Return ``(model kwargs, TrainConfig kwargs)``; unknown keys are rejected."""
    unknown = sorted(set(doc) - set(MODEL_KEYS) - set(TRAIN_KEYS))
    if unknown:
        raise InvalidArgument(f"unknown config key {unknown[0]!r}")
    model = {k: doc[k] for k in MODEL_KEYS if k in doc}
    train = {TRAIN_KEYS[k]: doc[k] for k in TRAIN_KEYS if k in doc}
    return model, train


def spatial_config(doc: dict) -> dict:
    unknown = sorted(set(doc) - set(SPATIAL_DEFAULTS))
    if unknown:
        raise InvalidArgument(f"unknown config key {unknown[0]!r}")
    cfg = {**SPATIAL_DEFAULTS, **doc}
    lo, hi = float(cfg["t60_min"]), float(cfg["t60_max"])
    if not (T60_RANGE[0] <= lo <= hi <= T60_RANGE[1]):
        raise InvalidArgument(f"config key 't60_min'/'t60_max': range [{lo}, {hi}] outside {list(T60_RANGE)}")
    if int(cfg["count"]) < 1:
        raise InvalidArgument("config key 'count' must be positive")
    return cfg
