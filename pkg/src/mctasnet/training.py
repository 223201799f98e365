"""Training loop: uPIT SI-SNR objective, Adam, validation-based early stopping."""

from __future__ import annotations

import logging
import math
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from .checkpoint import save_checkpoint
from .errors import InvalidArgument
from .losses import CLAMP_DB, pit_loss, pit_loss_tensor
from .model import ModelConfig, ParameterSet, init_parameters, separate
from .optim import OptimizerState, adam_step
from .spatial.mixing import MixtureSample

log = logging.getLogger(__name__)


def named_seed(seed: int, name: str) -> int:
    """Independent integer seed for the stream called ``name``."""
    return int(np.random.SeedSequence([seed, zlib.crc32(name.encode())]).generate_state(1)[0])


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    segment_seconds: float = 4.0
    patience_epochs: int = 6
    batch_size: int = 4
    max_epochs: int = 100
    max_steps: Optional[int] = None
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    zero_mean: bool = True
    clamp_db: float = CLAMP_DB
    sample_rate: int = 8000

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise InvalidArgument("learning_rate must be positive")
        if self.patience_epochs < 1:
            raise InvalidArgument("patience_epochs must be >= 1")
        if self.batch_size < 1 or self.max_epochs < 1:
            raise InvalidArgument("batch_size and max_epochs must be >= 1")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    valid_loss: float


@dataclass
class TrainResult:
    params: ParameterSet
    history: List[EpochRecord]
    best_epoch: int
    steps: int
    stop_reason: str


class EarlyStopping:
    """Tracks the best validation loss; ``update`` returns True when training should stop."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best = math.inf
        self.best_epoch = 0
        self.bad_epochs = 0

    def update(self, epoch: int, loss: float) -> bool:
        if loss < self.best:
            self.best, self.best_epoch, self.bad_epochs = loss, epoch, 0
        else:
            self.bad_epochs += 1
        return self.bad_epochs >= self.patience


def compute_crop(sample: MixtureSample, segment_seconds: float, rng: np.random.Generator,
                 fs: int = 8000) -> MixtureSample:
    """Same random window on every channel and reference; zero-pad short samples."""
    n = int(round(segment_seconds * fs))
    length = sample.num_samples
    if length > n:
        start = int(rng.integers(0, length - n + 1))

        def cut(a):
            return None if a is None else a[:, start : start + n]

    else:

        def cut(a):
            return None if a is None else np.pad(a, ((0, 0), (0, n - length)))

    return sample.replace(mixture=cut(sample.mixture), references=cut(sample.references), dry=cut(sample.dry))


def _inputs(sample: MixtureSample, M: int) -> np.ndarray:
    if sample.mixture.shape[0] < M:
        raise InvalidArgument(f"sample has {sample.mixture.shape[0]} channels, model needs {M}")
    return sample.mixture[:M]


def evaluate_loss(params: ParameterSet, samples: Sequence[MixtureSample], zero_mean: bool = True,
                  clamp_db: float = CLAMP_DB) -> float:
    """Mean uPIT loss over full-length samples (no gradient)."""
    losses = []
    for s in samples:
        est = separate(_inputs(s, params.config.M), params)
        losses.append(pit_loss([e.data for e in est], s.references, zero_mean, clamp_db)[0])
    return float(np.mean(losses))


def train_step(params: ParameterSet, batch: Sequence[MixtureSample], state: OptimizerState,
               cfg: TrainConfig) -> float:
    """One Adam update on the mean per-utterance PIT loss of ``batch``."""
    params.zero_grad()
    total = 0.0
    for s in batch:
        est = separate(_inputs(s, params.config.M), params)
        loss, _ = pit_loss_tensor(est, s.references, cfg.zero_mean, cfg.clamp_db)
        value = loss.item()
        if not math.isfinite(value):
            raise FloatingPointError(f"non-finite training loss {value} at step {state.step + 1}")
        (loss * (1.0 / len(batch))).backward()
        total += value
    adam_step(
        params.tensors,
        {k: t.grad for k, t in params.items()},
        state,
        lr=cfg.learning_rate,
        beta1=cfg.beta1,
        beta2=cfg.beta2,
        eps=cfg.eps,
    )
    return total / len(batch)


def train(
    model_config: ModelConfig,
    train_set: Sequence[MixtureSample],
    valid_set: Sequence[MixtureSample],
    cfg: TrainConfig,
    init: Optional[ParameterSet] = None,
    checkpoint_path=None,
    history_path=None,
) -> TrainResult:
    """Train until validation loss stalls for ``patience_epochs`` epochs.

    Returns the best-validation parameters.  When ``checkpoint_path`` is given
    the best model is also written there whenever it improves; the loss
    history is written as ``epoch,train_loss,valid_loss`` CSV to
    ``history_path``.
    """
    if not train_set or not valid_set:
        raise InvalidArgument("training and validation sets must be non-empty")
    rng = np.random.default_rng(named_seed(cfg.seed, "batches"))
    if init is not None:
        params = init.copy()
    else:
        params = init_parameters(model_config, seed=named_seed(cfg.seed, "init"))
    if params.config != model_config:
        raise InvalidArgument(f"initial parameters are for {params.config}, expected {model_config}")
    state = OptimizerState()
    stopper = EarlyStopping(cfg.patience_epochs)
    best_arrays = params.arrays()
    history: List[EpochRecord] = []
    stop_reason = "max_epochs"
    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(len(train_set))
        losses = []
        for lo in range(0, len(order), cfg.batch_size):
            batch = [compute_crop(train_set[i], cfg.segment_seconds, rng, cfg.sample_rate)
                     for i in order[lo : lo + cfg.batch_size]]
            losses.append(train_step(params, batch, state, cfg))
            if cfg.max_steps is not None and state.step >= cfg.max_steps:
                break
        valid = evaluate_loss(params, valid_set, cfg.zero_mean, cfg.clamp_db)
        history.append(EpochRecord(epoch, float(np.mean(losses)), valid))
        log.info("epoch %d  train %.4f  valid %.4f", epoch, history[-1].train_loss, valid)
        stop = stopper.update(epoch, valid)
        if stopper.best_epoch == epoch:
            best_arrays = {k: v.copy() for k, v in params.arrays().items()}
            if checkpoint_path is not None:
                save_checkpoint(checkpoint_path, params, {"epoch": epoch, "valid_loss": valid})
        if history_path is not None:
            write_history(history_path, history)
        if stop:
            stop_reason = "early_stopping"
            break
        if cfg.max_steps is not None and state.step >= cfg.max_steps:
            stop_reason = "max_steps"
            break
    best = ParameterSet.from_arrays(model_config, best_arrays, dtype=params["encoder.U"].dtype)
    return TrainResult(best, history, stopper.best_epoch, state.step, stop_reason)


def write_history(path, history: Sequence[EpochRecord]) -> None:
    lines = ["epoch,train_loss,valid_loss"]
    lines += [f"{r.epoch},{r.train_loss:.6f},{r.valid_loss:.6f}" for r in history]
    Path(path).write_text("\n".join(lines) + "\n")
