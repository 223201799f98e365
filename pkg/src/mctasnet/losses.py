"""Scale-invariant SNR and utterance-level permutation-invariant loss."""

from __future__ import annotations

import itertools
from typing import List, Sequence, Tuple

import numpy as np

from .errors import InvalidArgument
from .tensor import Tensor

CLAMP_DB = 60.0
_DB = 10.0 / np.log(10.0)


def _prepare(estimate: np.ndarray, reference: np.ndarray, zero_mean: bool):
    est = np.asarray(estimate, dtype=np.float64).reshape(-1)
    ref = np.asarray(reference, dtype=np.float64).reshape(-1)
    if est.shape != ref.shape:
        raise InvalidArgument(f"length mismatch: estimate {est.size}, reference {ref.size}")
    if zero_mean:
        est = est - est.mean()
        ref = ref - ref.mean()
    ref_energy = ref @ ref
    if ref_energy == 0.0:
        raise InvalidArgument("reference signal is all zeros")
    return est, ref, ref_energy


def _si_snr_parts(est, ref, ref_energy, clamp_db):
    """SI-SNR in dB plus the pieces its gradient needs."""
    dot = ref @ est
    target_energy = dot * dot / ref_energy  # ||alpha s||^2
    noise_energy = est @ est - target_energy  # ||alpha s - est||^2
    lo, hi = 10.0 ** (-clamp_db / 10.0), 10.0 ** (clamp_db / 10.0)
    if target_energy <= lo * noise_energy or target_energy == 0.0:
        return -clamp_db, None
    if noise_energy <= target_energy / hi:
        return clamp_db, None
    return 10.0 * np.log10(target_energy / noise_energy), (dot, target_energy, noise_energy)


def si_snr(estimate, reference, zero_mean: bool = True, clamp_db: float = CLAMP_DB) -> float:
    """SI-SNR of ``estimate`` against ``reference`` in dB.

    The reference is rescaled by ``alpha = <s, s_hat> / ||s||^2`` and the
    result is clamped to ``±clamp_db``.  With ``zero_mean`` both signals are
    mean-subtracted first.
    """
    est, ref, ref_energy = _prepare(estimate, reference, zero_mean)
    return float(_si_snr_parts(est, ref, ref_energy, clamp_db)[0])


def si_snr_tensor(estimate: Tensor, reference, zero_mean: bool = True, clamp_db: float = CLAMP_DB) -> Tensor:
    """Differentiable SI-SNR (gradient flows into ``estimate`` only).

    Inside the clamp region the gradient is zero.
    """
    est, ref, ref_energy = _prepare(estimate.data, reference, zero_mean)
    value, parts = _si_snr_parts(est, ref, ref_energy, clamp_db)
    dtype = estimate.dtype

    def vjp(g):
        if parts is None:
            return (np.zeros(estimate.shape, dtype=dtype),)
        dot, target_energy, noise_energy = parts
        target = (dot / ref_energy) * ref
        noise = est - target
        grad = _DB * (2.0 * target / target_energy - 2.0 * noise / noise_energy)
        if zero_mean:
            grad = grad - grad.mean()
        return ((float(g) * grad).astype(dtype).reshape(estimate.shape),)

    return Tensor._from_op(np.asarray(value, dtype=dtype), (estimate,), vjp, "si_snr")


def pairwise_si_snr(estimates: Sequence, references: Sequence, zero_mean: bool = True,
                    clamp_db: float = CLAMP_DB) -> np.ndarray:
    """``K x K`` matrix; entry ``[i, j]`` scores estimate ``j`` against reference ``i``."""
    est = [e.data if isinstance(e, Tensor) else e for e in estimates]
    return np.array([[si_snr(e, r, zero_mean, clamp_db) for e in est] for r in references])


def best_permutation(scores: np.ndarray) -> Tuple[float, Tuple[int, ...]]:
    """Minimum mean negative SI-SNR over all assignments.

    ``perm[i]`` is the estimate assigned to reference ``i``.  Permutations
    are scanned in lexicographic order and only a strictly smaller loss
    replaces the incumbent, so ties resolve to the lexicographically first
    permutation.
    """
    K = scores.shape[0]
    if K < 2 or scores.shape != (K, K):
        raise InvalidArgument(f"need a square score matrix with K >= 2, got {scores.shape}")
    best_loss, best_perm = np.inf, None
    rows = np.arange(K)
    for perm in itertools.permutations(range(K)):
        loss = -float(np.mean(scores[rows, perm]))
        if loss < best_loss:
            best_loss, best_perm = loss, perm
    return best_loss, tuple(int(p) for p in best_perm)


def pit_loss(estimates: Sequence, references: Sequence, zero_mean: bool = True,
             clamp_db: float = CLAMP_DB) -> Tuple[float, Tuple[int, ...]]:
    """Utterance-level PIT: ``(loss, permutation)`` with loss = -mean SI-SNR."""
    if len(estimates) != len(references) or len(estimates) < 2:
        raise InvalidArgument(f"need K >= 2 estimates and references, got {len(estimates)}/{len(references)}")
    return best_permutation(pairwise_si_snr(estimates, references, zero_mean, clamp_db))


def pit_loss_tensor(estimates: List[Tensor], references: Sequence, zero_mean: bool = True,
                    clamp_db: float = CLAMP_DB) -> Tuple[Tensor, Tuple[int, ...]]:
    """Differentiable PIT loss at the best permutation."""
    _, perm = pit_loss(estimates, references, zero_mean, clamp_db)
    terms = [si_snr_tensor(estimates[j], references[i], zero_mean, clamp_db) for i, j in enumerate(perm)]
    total = terms[0]
    for t in terms[1:]:
        total = total + t
    return total * (-1.0 / len(terms)), perm
