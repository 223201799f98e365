"""Waveform segmentation into overlapping frames and its exact inverse."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument
from .tensor import Tensor, as_tensor


@dataclass
class SegmentMatrix:
    """``L x T`` frame matrix; column ``t`` covers samples ``[t*hop, t*hop + L)``."""

    data: Tensor
    segment_length: int
    hop: int
    original_length: int

    @property
    def num_frames(self) -> int:
        return self.data.shape[1]

    def with_data(self, data: Tensor) -> "SegmentMatrix":
        """Same framing, different ``L x T`` contents (e.g. a decoder output)."""
        if data.shape != self.data.shape:
            raise InvalidArgument(f"expected shape {self.data.shape}, got {data.shape}")
        return SegmentMatrix(data, self.segment_length, self.hop, self.original_length)


def num_frames(length: int, segment_length: int, hop: int) -> int:
    return math.ceil(max(length - segment_length, 0) / hop) + 1


def _frame_index(segment_length: int, hop: int, frames: int) -> np.ndarray:
    return np.arange(segment_length)[:, None] + hop * np.arange(frames)[None, :]


def segment(waveform, segment_length: int, hop: int) -> SegmentMatrix:
    """Cut a 1-D waveform into zero-padded overlapping frames."""
    x = as_tensor(waveform)
    if x.data.ndim != 1:
        raise InvalidArgument(f"segment expects a 1-D waveform, got shape {x.shape}")
    if segment_length < 1 or hop < 1 or hop > segment_length:
        raise InvalidArgument(f"need 1 <= hop <= L, got L={segment_length}, hop={hop}")
    n = x.shape[0]
    frames = num_frames(n, segment_length, hop)
    padded = (frames - 1) * hop + segment_length
    idx = _frame_index(segment_length, hop, frames)
    xp = np.zeros(padded, dtype=x.dtype)
    xp[:n] = x.data

    def vjp(g):
        acc = np.bincount(idx.ravel(), weights=g.ravel(), minlength=padded)
        return (acc[:n].astype(g.dtype),)

    out = Tensor._from_op(xp[idx], (x,), vjp, "segment")
    return SegmentMatrix(out, segment_length, hop, n)


def overlap_counts(segment_length: int, hop: int, frames: int) -> np.ndarray:
    padded = (frames - 1) * hop + segment_length
    return np.bincount(_frame_index(segment_length, hop, frames).ravel(), minlength=padded)


def overlap_add(segments: SegmentMatrix) -> Tensor:
    """Sum overlapping columns, divide by per-sample overlap count, truncate.

    Count normalisation makes ``overlap_add(segment(x, L, hop))`` return ``x``
    exactly, edges included.
    """
    s = segments.data
    L, hop, n = segments.segment_length, segments.hop, segments.original_length
    if s.data.ndim != 2 or s.shape[0] != L:
        raise InvalidArgument(f"expected an {L} x T matrix, got {s.shape}")
    frames = s.shape[1]
    padded = (frames - 1) * hop + L
    if padded < n:
        raise InvalidArgument("segment matrix is too short for its original length")
    idx = _frame_index(L, hop, frames)
    scale = 1.0 / overlap_counts(L, hop, frames)[:n]
    total = np.bincount(idx.ravel(), weights=s.data.ravel(), minlength=padded)[:n]
    out = (total * scale).astype(s.dtype)

    def vjp(g):
        gp = np.zeros(padded, dtype=g.dtype)
        gp[:n] = g * scale
        return (gp[idx],)

    return Tensor._from_op(out, (s,), vjp, "overlap_add")
