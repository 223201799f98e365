"""Corpus generation and tab-separated manifests."""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence

import numpy as np

from ..errors import InvalidArgument
from ..wavio import read_wav, write_wav
from .geometry import T60_RANGE, sample_geometry
from .mixing import SNR_RANGE, MixtureSample, mix
from .rir import simulate_rir

MANIFEST_NAME = "manifest.tsv"
PEAK = 0.9


@dataclass
class ManifestRow:
    mixture: Path
    references: List[Path]
    snr_db: float
    t60: float
    angle_diff: float
    seed: int
    speakers: List[str]

    @property
    def utterance_id(self) -> str:
        return self.mixture.stem


def child_seed(seed: int, index: int) -> int:
    """Per-sample seed derived from the corpus seed and the sample index."""
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def synthesize_sample(
    sample_seed: int,
    provider,
    split: str = "train",
    M: int = 2,
    K: int = 2,
    reverberant: bool = False,
    seconds: float = 4.0,
    t60_range=T60_RANGE,
    fs: int = 8000,
):
    """One mixture from one seed; returns ``(sample, speaker ids)``."""
    rng = np.random.default_rng(sample_seed)
    pool = provider.speakers(split)
    if len(pool) < K:
        raise InvalidArgument(f"split {split!r} has {len(pool)} speakers, need {K}")
    picks = [pool[i] for i in rng.choice(len(pool), size=K, replace=False)]
    dry = [provider.utterance(s, rng, seconds) for s in picks]
    scene = sample_geometry(rng, M, K, reverberant, t60_range=t60_range)
    simulate_rir(scene, fs)
    snr = rng.uniform(*SNR_RANGE)
    sample = mix(dry, scene, snr)
    peak = max(np.abs(sample.mixture).max(), np.abs(sample.references).max())
    scale = PEAK / peak
    sample = sample.replace(
        mixture=sample.mixture * scale, references=sample.references * scale, dry=sample.dry * scale
    )
    sample.metadata["seed"] = sample_seed
    sample.metadata["speakers"] = [str(s) for s in picks]
    return sample, picks


def generate_corpus(
    seed: int,
    count: int,
    provider,
    out_dir,
    split: str = "train",
    M: int = 2,
    K: int = 2,
    reverberant: bool = False,
    seconds: float = 4.0,
    t60_range=T60_RANGE,
    fs: int = 8000,
    workers: int = 1,
) -> Path:
    """Write ``count`` samples plus ``manifest.tsv`` under ``out_dir``.

    Sample ``i`` is built only from :func:`child_seed(seed, i) <child_seed>`,
    so any worker count yields the same files.
    """
    if count < 1:
        raise InvalidArgument("count must be positive")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    def build(i: int) -> list:
        s = child_seed(seed, i)
        sample, picks = synthesize_sample(s, provider, split, M, K, reverberant, seconds, t60_range, fs)
        stem = f"{split}_{i:05d}"
        mix_name = f"{stem}_mix.wav"
        write_wav(out / mix_name, sample.mixture, fs)
        ref_names = []
        for k, ref in enumerate(sample.references):
            name = f"{stem}_s{k + 1}.wav"
            write_wav(out / name, ref, fs)
            ref_names.append(name)
        return [
            mix_name,
            *ref_names,
            f"{sample.metadata['snr_db']:.4f}",
            f"{sample.metadata['t60']:.4f}",
            f"{sample.metadata.get('angle_diff', float('nan')):.4f}",
            str(s),
            ",".join(sample.metadata["speakers"]),
        ]

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            rows = list(pool.map(build, range(count)))
    else:
        rows = [build(i) for i in range(count)]

    header = ["mixture", *[f"ref{k + 1}" for k in range(K)], "snr_db", "t60", "angle_diff", "seed", "speakers"]
    path = out / MANIFEST_NAME
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return path


def read_manifest(path) -> List[ManifestRow]:
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    try:
        with open(path, newline="") as fh:
            records = list(csv.DictReader(fh, delimiter="\t"))
    except OSError as exc:
        raise OSError(f"{path}: {exc}") from exc
    base = path.parent
    rows = []
    for rec in records:
        refs = sorted((k for k in rec if k.startswith("ref")), key=lambda k: int(k[3:]))
        rows.append(
            ManifestRow(
                mixture=base / rec["mixture"],
                references=[base / rec[k] for k in refs],
                snr_db=float(rec["snr_db"]),
                t60=float(rec["t60"]),
                angle_diff=float(rec["angle_diff"]),
                seed=int(rec["seed"]),
                speakers=rec.get("speakers", "").split(",") if rec.get("speakers") else [],
            )
        )
    return rows


def load_sample(row: ManifestRow) -> MixtureSample:
    mixture, _ = read_wav(row.mixture)
    refs = np.concatenate([read_wav(p)[0] for p in row.references])
    return MixtureSample(
        mixture=mixture,
        references=refs,
        metadata={
            "id": row.utterance_id,
            "snr_db": row.snr_db,
            "t60": row.t60,
            "angle_diff": row.angle_diff,
            "seed": row.seed,
        },
    )


def load_corpus(path) -> List[MixtureSample]:
    return [load_sample(r) for r in read_manifest(path)]
