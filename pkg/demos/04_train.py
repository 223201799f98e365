"""Overfit a single-channel separator on four synthetic mixtures.

About a minute on one core; the 15 dB mark usually arrives within 300 steps.
"""

import time

import numpy as np

from mctasnet.metrics import evaluate_system, model_system
from mctasnet.model import ModelConfig, init_parameters
from mctasnet.optim import OptimizerState
from mctasnet.spatial.corpus import synthesize_sample
from mctasnet.spatial.sources import SyntheticSpeech
from mctasnet.training import TrainConfig, train_step

talkers = SyntheticSpeech()
mixtures = [synthesize_sample(seed, talkers, M=1, seconds=1.0)[0] for seed in range(4)]

params = init_parameters(ModelConfig(), seed=0)
cfg = TrainConfig(batch_size=4, segment_seconds=1.0)
state = OptimizerState()

t0 = time.time()
while state.step < 400:
    loss = train_step(params, mixtures, state, cfg)
    if state.step % 50 == 0:
        score = evaluate_system(model_system(params), mixtures).global_mean
        print(f"step {state.step:4d}  loss {loss:7.2f}  SI-SNRi {score:5.1f} dB  ({time.time() - t0:.0f} s)")
        if score >= 15:
            break
