"""Central finite-difference verification of analytic gradients."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor, precision


def finite_diff_check(
    fn: Callable[..., Tensor],
    inputs: Sequence,
    epsilon: float = 1e-6,
    wrt: Sequence[int] | None = None,
) -> float:
    """Worst relative error between backprop and central differences.

    ``fn`` maps tensors to a scalar tensor.  ``inputs`` are arrays (or
    tensors) that become float64 leaves; ``wrt`` restricts which of them are
    perturbed (default: all).  Each coordinate is compared as
    ``|a - n| / max(|a|, |n|, 1e-8)``.
    """
    with precision(np.float64):
        arrays = [np.array(x.data if isinstance(x, Tensor) else x, dtype=np.float64) for x in inputs]
        which = range(len(arrays)) if wrt is None else wrt
        leaves = [Tensor(a, requires_grad=True) for a in arrays]
        out = fn(*leaves)
        out.backward()
        worst = 0.0
        for i in which:
            analytic = leaves[i].grad if leaves[i].grad is not None else np.zeros_like(arrays[i])
            flat = arrays[i].reshape(-1)
            for j in range(flat.size):
                keep = flat[j]
                flat[j] = keep + epsilon
                up = fn(*[Tensor(a) for a in arrays]).item()
                flat[j] = keep - epsilon
                down = fn(*[Tensor(a) for a in arrays]).item()
                flat[j] = keep
                numeric = (up - down) / (2.0 * epsilon)
                a = float(analytic.reshape(-1)[j])
                denom = max(abs(a), abs(numeric), 1e-8)
                worst = max(worst, abs(a - numeric) / denom)
        return worst
