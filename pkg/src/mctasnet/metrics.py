"""Evaluation: SI-SNR improvement, ideal-binary-mask oracle, angle-bucketed reports."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Callable, Dict, List, Mapping, Sequence, Tuple

import numpy as np
from scipy.signal import istft, stft
from scipy.signal.windows import hann

from .errors import InvalidArgument
from .losses import CLAMP_DB, pit_loss, si_snr
from .model import ParameterSet, separate
from .spatial.mixing import MixtureSample

BUCKET_WIDTH = 15.0
NUM_BUCKETS = 12

IBM_WINDOW = 256
IBM_HOP = 64


def si_snri(mixture_ref_channel, estimates, references, zero_mean: bool = True,
            clamp_db: float = CLAMP_DB) -> Tuple[np.ndarray, float, Tuple[int, ...]]:
    """PIT-aligned SI-SNR of the estimates minus that of the unprocessed mixture.

    Returns ``(per-speaker improvement in dB, mean, permutation)`` where
    ``permutation[i]`` is the estimate matched to reference ``i``.
    """
    est = [np.asarray(getattr(e, "data", e), dtype=np.float64) for e in estimates]
    _, perm = pit_loss(est, references, zero_mean, clamp_db)
    per = np.array(
        [
            si_snr(est[perm[i]], ref, zero_mean, clamp_db) - si_snr(mixture_ref_channel, ref, zero_mean, clamp_db)
            for i, ref in enumerate(references)
        ]
    )
    return per, float(per.mean()), perm


def _stft(x, fs):
    window = np.sqrt(hann(IBM_WINDOW, sym=False))
    return stft(x, fs, window=window, nperseg=IBM_WINDOW, noverlap=IBM_WINDOW - IBM_HOP)[2]


def ibm_masks(references, fs: int = 8000) -> np.ndarray:
    """``K x F x T`` one-hot masks selecting the loudest reference in each bin."""
    mags = np.abs(np.stack([_stft(np.asarray(r, dtype=np.float64), fs) for r in references]))
    winner = np.argmax(mags, axis=0)
    return (np.arange(len(references))[:, None, None] == winner[None]).astype(np.float64)


def ibm_separate(mixture_ch1, references, fs: int = 8000) -> List[np.ndarray]:
    """Oracle ideal-binary-mask separation of the reference channel.

    STFT with a 256-sample sqrt-Hann window and 64-sample hop; the windowed
    overlap-add inverse reconstructs unmasked input exactly.
    """
    x = np.asarray(mixture_ch1, dtype=np.float64)
    spec = _stft(x, fs)
    window = np.sqrt(hann(IBM_WINDOW, sym=False))
    out = []
    for mask in ibm_masks(references, fs):
        _, y = istft(spec * mask, fs, window=window, nperseg=IBM_WINDOW, noverlap=IBM_WINDOW - IBM_HOP)
        y = y[: len(x)]
        out.append(np.pad(y, (0, len(x) - len(y))))
    return out


# ---------------------------------------------------------------------------
# systems: callables mapping a MixtureSample to K estimated waveforms

System = Callable[[MixtureSample], Sequence[np.ndarray]]


def model_system(params: ParameterSet) -> System:
    M = params.config.M

    def run(sample: MixtureSample):
        if sample.mixture.shape[0] < M:
            raise InvalidArgument(f"model expects {M} channels, sample has {sample.mixture.shape[0]}")
        return [e.data.astype(np.float64) for e in separate(sample.mixture[:M], params)]

    return run


def ibm_system(sample: MixtureSample):
    return ibm_separate(sample.mixture[0], sample.references)


def passthrough_system(sample: MixtureSample):
    return [sample.mixture[0].copy() for _ in sample.references]


# ---------------------------------------------------------------------------
# reports


@dataclass
class UtteranceRecord:
    utterance_id: str
    si_snri_db: float
    permutation: Tuple[int, ...]
    angle_diff: float


@dataclass
class Bucket:
    lower: float
    upper: float
    count: int
    mean_si_snri: float


@dataclass
class MetricsReport:
    records: List[UtteranceRecord]
    buckets: List[Bucket]
    global_mean: float

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["utterance_id", "angle_diff_deg", "si_snri_db", "permutation"])
        for r in self.records:
            w.writerow([r.utterance_id, f"{r.angle_diff:.4f}", f"{r.si_snri_db:.4f}",
                        " ".join(str(p) for p in r.permutation)])
        return buf.getvalue()

    def to_text(self, buckets: bool = True) -> str:
        lines = [f"utterances: {len(self.records)}   mean SI-SNRi: {self.global_mean:.2f} dB"]
        if buckets:
            lines.append(f"{'angle (deg)':>12}  {'count':>5}  {'SI-SNRi (dB)':>12}")
            for b in self.buckets:
                val = f"{b.mean_si_snri:12.2f}" if b.count else f"{'-':>12}"
                lines.append(f"{b.lower:5.0f}-{b.upper:<6.0f}  {b.count:5d}  {val}")
        return "\n".join(lines)


def bucket_index(angle: float) -> int:
    """Left-closed 15-degree buckets over [0, 180]; 180 itself joins the last one."""
    if not 0.0 <= angle <= 180.0:
        raise InvalidArgument(f"angle difference {angle} outside [0, 180]")
    return min(int(angle // BUCKET_WIDTH), NUM_BUCKETS - 1)


def bucket_report(records: Sequence[UtteranceRecord]) -> MetricsReport:
    groups: List[List[float]] = [[] for _ in range(NUM_BUCKETS)]
    for r in records:
        groups[bucket_index(r.angle_diff)].append(r.si_snri_db)
    buckets = [
        Bucket(i * BUCKET_WIDTH, (i + 1) * BUCKET_WIDTH, len(g), float(np.mean(g)) if g else float("nan"))
        for i, g in enumerate(groups)
    ]
    mean = float(np.mean([r.si_snri_db for r in records])) if records else float("nan")
    return MetricsReport(list(records), buckets, mean)


def evaluate_system(system: System, samples: Sequence[MixtureSample], zero_mean: bool = True) -> MetricsReport:
    records = []
    for i, s in enumerate(samples):
        _, mean, perm = si_snri(s.mixture[0], system(s), s.references, zero_mean)
        uid = str(s.metadata.get("id", i))
        records.append(UtteranceRecord(uid, mean, perm, float(s.metadata.get("angle_diff", 0.0))))
    return bucket_report(records)


def _cell(bucket: Bucket, width: int) -> str:
    return f"{bucket.mean_si_snri:{width}.2f}" if bucket.count else "-".rjust(width)


@dataclass
class Comparison:
    reports: Dict[str, MetricsReport]

    def to_text(self, buckets: bool = False) -> str:
        names = list(self.reports)
        width = max(12, *(len(n) for n in names))
        lines = ["".ljust(14) + "".join(n.rjust(width + 2) for n in names)]
        lines.append("mean".ljust(14) + "".join(f"{self.reports[n].global_mean:{width + 2}.2f}" for n in names))
        if buckets:
            for i in range(NUM_BUCKETS):
                b0 = self.reports[names[0]].buckets[i]
                label = f"{b0.lower:.0f}-{b0.upper:.0f} (n={b0.count})"
                cells = "".join(_cell(self.reports[n].buckets[i], width + 2) for n in names)
                lines.append(label.ljust(14) + cells)
        return "\n".join(lines)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        names = list(self.reports)
        w.writerow(["row", *names])
        w.writerow(["mean", *(f"{self.reports[n].global_mean:.4f}" for n in names)])
        for i in range(NUM_BUCKETS):
            b0 = self.reports[names[0]].buckets[i]
            w.writerow([f"{b0.lower:.0f}-{b0.upper:.0f}", *(f"{self.reports[n].buckets[i].mean_si_snri:.4f}" for n in names)])
        return buf.getvalue()


def compare_reports(reports: Mapping[str, MetricsReport]) -> Comparison:
    """Align reports that must cover exactly the same utterances."""
    if not reports:
        raise InvalidArgument("nothing to compare")
    ids = None
    for name, rep in reports.items():
        these = [r.utterance_id for r in rep.records]
        if not these:
            raise InvalidArgument(f"{name}: empty report")
        if ids is None:
            ids = these
        elif these != ids:
            raise InvalidArgument(f"{name}: evaluated on a different manifest")
    return Comparison(dict(reports))


def compare_systems(samples: Sequence[MixtureSample], systems: Mapping[str, System],
                    zero_mean: bool = True) -> Comparison:
    if not samples:
        raise InvalidArgument("empty evaluation set")
    return compare_reports({name: evaluate_system(fn, samples, zero_mean) for name, fn in systems.items()})
