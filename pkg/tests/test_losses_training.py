import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mctasnet.errors import InvalidArgument
from mctasnet.gradcheck import finite_diff_check
from mctasnet.losses import best_permutation, pairwise_si_snr, pit_loss, pit_loss_tensor, si_snr, si_snr_tensor
from mctasnet.model import ModelConfig
from mctasnet.optim import OptimizerState, adam_step
from mctasnet.spatial.corpus import synthesize_sample
from mctasnet.spatial.sources import SyntheticSpeech
from mctasnet.tensor import Tensor, precision
from mctasnet.training import EarlyStopping, TrainConfig, compute_crop, train, write_history


# --- SI-SNR -----------------------------------------------------------------

def test_orthogonal_mixture_is_zero_db():
    s = np.array([1.0, 0, 0, 0])
    n = np.array([0, 1.0, 0, 0])
    assert si_snr(s + n, s, zero_mean=False) == pytest.approx(0.0, abs=1e-12)


def test_half_amplitude_interferer_is_six_db():
    s = np.array([1.0, -1, 1, -1])
    n = np.array([1.0, 1, -1, -1])
    assert round(si_snr(s + 0.5 * n, s), 4) == 6.0206


def test_exact_estimate_hits_clamp():
    s = np.random.default_rng(0).standard_normal(100)
    assert si_snr(3 * s, s) == 60.0


def test_zero_reference_rejected():
    with pytest.raises(InvalidArgument):
        si_snr(np.ones(4), np.zeros(4), zero_mean=False)


def test_length_mismatch_rejected():
    with pytest.raises(InvalidArgument):
        si_snr(np.ones(4), np.ones(5))


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10_000), scale=st.floats(1e-3, 1e3), sign=st.sampled_from([-1.0, 1.0]))
def test_si_snr_scale_and_sign_invariant(seed, scale, sign):
    rng = np.random.default_rng(seed)
    s, e = rng.standard_normal(64), rng.standard_normal(64)
    assert abs(si_snr(sign * scale * e, s) - si_snr(e, s)) < 1e-9


def test_zero_mean_removes_dc_offset():
    rng = np.random.default_rng(1)
    s, e = rng.standard_normal(64), rng.standard_normal(64)
    assert si_snr(e + 5.0, s) == pytest.approx(si_snr(e, s), abs=1e-9)
    assert si_snr(e + 5.0, s, zero_mean=False) != pytest.approx(si_snr(e, s, zero_mean=False), abs=1e-3)


@pytest.mark.parametrize("zero_mean", [True, False])
def test_si_snr_gradient(zero_mean):
    rng = np.random.default_rng(2)
    s, e = rng.standard_normal(30), rng.standard_normal(30)
    assert finite_diff_check(lambda x: si_snr_tensor(x, s, zero_mean), [e]) < 1e-5


def test_si_snr_gradient_zero_when_clamped():
    s = np.random.default_rng(3).standard_normal(30)
    with precision(np.float64):
        x = Tensor(s * 2, requires_grad=True)
        si_snr_tensor(x, s).backward()
    assert not np.any(x.grad)


# --- PIT ------------------------------------------------------------------

def brute_force(scores):
    K = scores.shape[0]
    return min(-np.mean([scores[i, p[i]] for i in range(K)]) for p in itertools.permutations(range(K)))


@pytest.mark.parametrize("K", [2, 3, 4])
def test_pit_matches_enumeration(K):
    rng = np.random.default_rng(K)
    for _ in range(20):
        refs = rng.standard_normal((K, 50))
        ests = refs[rng.permutation(K)] + 0.5 * rng.standard_normal((K, 50))
        loss, perm = pit_loss(ests, refs)
        assert loss == pytest.approx(brute_force(pairwise_si_snr(ests, refs)), abs=1e-12)
        assert sorted(perm) == list(range(K))


def test_pit_recovers_swapped_order():
    rng = np.random.default_rng(4)
    refs = rng.standard_normal((3, 40))
    _, perm = pit_loss(refs[[2, 0, 1]], refs)
    assert perm == (1, 2, 0)


def test_pit_ties_pick_first_permutation():
    assert best_permutation(np.zeros((3, 3)))[1] == (0, 1, 2)
    assert best_permutation(np.array([[1.0, 1.0], [1.0, 1.0]]))[1] == (0, 1)


def test_pit_needs_matching_counts():
    with pytest.raises(InvalidArgument):
        pit_loss([np.ones(4)] * 2, [np.ones(4)] * 3)


def test_pit_tensor_gradient():
    rng = np.random.default_rng(5)
    refs = rng.standard_normal((2, 20))
    ests = [rng.standard_normal(20), rng.standard_normal(20)]
    assert finite_diff_check(lambda a, b: pit_loss_tensor([a, b], refs)[0], ests) < 1e-5


# --- Adam ----------------------------------------------------------------------

def test_adam_first_step_moves_by_lr():
    p = {"w": Tensor(np.array([1.0, -2.0]), requires_grad=True)}
    state = adam_step(p, {"w": np.array([0.3, -5.0])}, OptimizerState(), lr=0.1)
    np.testing.assert_allclose(p["w"].data, [0.9, -1.9], atol=1e-6)
    assert state.step == 1


def test_adam_minimises_quadratic():
    with precision(np.float64):
        p = {"w": Tensor(np.array([5.0, -3.0]), requires_grad=True)}
    state = OptimizerState()
    for _ in range(2000):
        adam_step(p, {"w": 2 * p["w"].data}, state, lr=0.05)
    assert np.abs(p["w"].data).max() < 1e-2


# --- training loop ------------------------------------------------------------

def test_early_stopping_counter():
    stopper = EarlyStopping(6)
    losses = [5, 4, 4.1, 4.2, 4.3, 4.4, 4.5, 4.6]
    stops = [stopper.update(e, l) for e, l in enumerate(losses, start=1)]
    assert stops == [False] * 7 + [True]
    assert stopper.best_epoch == 2


def test_train_config_validation():
    with pytest.raises(InvalidArgument):
        TrainConfig(learning_rate=0)
    with pytest.raises(InvalidArgument):
        TrainConfig(patience_epochs=0)


@pytest.fixture(scope="module")
def small_corpus():
    prov = SyntheticSpeech()
    return [synthesize_sample(s, prov, seconds=0.25)[0] for s in range(6)]


def test_crop_is_shared_across_channels(small_corpus):
    sample = small_corpus[0]
    crop = compute_crop(sample, 0.1, np.random.default_rng(0))
    assert crop.mixture.shape == (2, 800) and crop.references.shape == (2, 800)
    idx = next(i for i in range(sample.num_samples - 799) if np.array_equal(sample.mixture[0, i : i + 800], crop.mixture[0]))
    np.testing.assert_array_equal(sample.references[:, idx : idx + 800], crop.references)


def test_short_sample_is_padded(small_corpus):
    crop = compute_crop(small_corpus[0], 1.0, np.random.default_rng(0))
    assert crop.mixture.shape == (2, 8000)
    assert not np.any(crop.mixture[:, 2000:])


TINY = dict(L=8, N=16, B=8, H=16, X=2, R=1)


def _run(corpus, **kw):
    cfg = TrainConfig(segment_seconds=0.2, batch_size=2, max_epochs=3, seed=11, **kw)
    return train(ModelConfig(variant="single", **TINY), corpus[:4], corpus[4:], cfg)


def test_training_is_deterministic(small_corpus):
    a, b = _run(small_corpus), _run(small_corpus)
    assert [(h.train_loss, h.valid_loss) for h in a.history] == [(h.train_loss, h.valid_loss) for h in b.history]


def test_training_returns_best_epoch(small_corpus, tmp_path):
    res = _run(small_corpus, max_steps=4)
    assert res.steps == 4
    assert res.stop_reason == "max_steps"
    best = min(res.history, key=lambda h: h.valid_loss)
    assert res.best_epoch == best.epoch
    write_history(tmp_path / "h.csv", res.history)
    assert (tmp_path / "h.csv").read_text().splitlines()[0] == "epoch,train_loss,valid_loss"


def test_training_rejects_empty_sets(small_corpus):
    with pytest.raises(InvalidArgument):
        train(ModelConfig(**TINY), [], small_corpus, TrainConfig())
