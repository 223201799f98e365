"""Differentiable operations on 2-D ``C x T`` tensors.

Every function takes and returns :class:`~mctasnet.tensor.Tensor` objects and
registers a vector-Jacobian product so :func:`~mctasnet.tensor.backward` can
push gradients through it.  Plain numpy arrays and Python scalars are
accepted wherever a constant operand makes sense.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np
from scipy.special import expit

from .errors import InvalidArgument
from .tensor import Tensor, as_tensor


def _const(x, like: Tensor) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=like.dtype), dtype=like.dtype)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def add(a, b) -> Tensor:
    if not isinstance(a, Tensor):
        a, b = b, a
    b = _const(b, a)
    sa, sb = a.shape, b.shape

    def vjp(g):
        return _unbroadcast(g, sa), _unbroadcast(g, sb)

    return Tensor._from_op(a.data + b.data, (a, b), vjp, "add")


def mul(a, b) -> Tensor:
    if not isinstance(a, Tensor):
        a, b = b, a
    b = _const(b, a)
    ad, bd = a.data, b.data

    def vjp(g):
        return _unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)

    return Tensor._from_op(ad * bd, (a, b), vjp, "mul")


def sum(x: Tensor) -> Tensor:  # noqa: A001 - mirrors numpy naming
    shape = x.shape

    def vjp(g):
        return (np.broadcast_to(g, shape).copy(),)

    return Tensor._from_op(np.asarray(x.data.sum(), dtype=x.dtype), (x,), vjp, "sum")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product of a ``p x q`` and a ``q x r`` tensor."""
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise InvalidArgument(f"matmul shape mismatch: {a.shape} x {b.shape}")
    ad, bd = a.data, b.data

    def vjp(g):
        return g @ bd.T, ad.T @ g

    return Tensor._from_op(ad @ bd, (a, b), vjp, "matmul")


def conv1d(
    x: Tensor,
    weight: Tensor,
    bias: Optional[Tensor] = None,
    dilation: int = 1,
    groups: int = 1,
) -> Tensor:
    """Non-causal "same" 1-D convolution.

    ``x`` is ``C_in x T`` and ``weight`` is ``C_out x (C_in/groups) x P`` with
    odd ``P``.  Both ends are zero-padded by ``dilation*(P-1)/2`` samples so
    the output keeps length ``T``.  ``groups == C_in`` is a depthwise
    convolution; ``P == 1`` is plain channel mixing.
    """
    x, weight = as_tensor(x), as_tensor(weight)
    if x.data.ndim != 2 or weight.data.ndim != 3:
        raise InvalidArgument("conv1d expects a C x T input and a C_out x C_in/g x P kernel")
    c_in, n = x.shape
    c_out, cig, taps = weight.shape
    if groups < 1 or c_in % groups or c_out % groups:
        raise InvalidArgument(f"channels ({c_in} in, {c_out} out) not divisible by groups={groups}")
    if cig != c_in // groups:
        raise InvalidArgument(f"kernel expects {cig * groups} input channels, got {c_in}")
    if taps % 2 == 0:
        raise InvalidArgument(f"'same' padding needs an odd kernel size, got {taps}")
    if dilation < 1:
        raise InvalidArgument("dilation must be >= 1")
    cog = c_out // groups
    xd, wd = x.data, weight.data

    if taps == 1 and groups == 1:
        w2 = wd[:, :, 0]
        out = w2 @ xd

        def vjp_x_w(g):
            return w2.T @ g, (g @ xd.T)[:, :, None]

    else:
        pad = dilation * (taps - 1) // 2
        xp = np.pad(xd, ((0, 0), (pad, pad)))
        cols = np.stack([xp[:, p * dilation : p * dilation + n] for p in range(taps)], axis=1)
        cols = cols.reshape(groups, cig * taps, n)
        wg = wd.reshape(groups, cog, cig * taps)
        out = np.matmul(wg, cols).reshape(c_out, n)

        def vjp_x_w(g):
            gg = g.reshape(groups, cog, n)
            gw = np.matmul(gg, cols.transpose(0, 2, 1)).reshape(wd.shape)
            gcols = np.matmul(wg.transpose(0, 2, 1), gg).reshape(c_in, taps, n)
            gxp = np.zeros_like(xp)
            for p in range(taps):
                gxp[:, p * dilation : p * dilation + n] += gcols[:, p, :]
            return gxp[:, pad : pad + n], gw

    parents = [x, weight]
    if bias is not None:
        bias = as_tensor(bias)
        if bias.size != c_out:
            raise InvalidArgument(f"bias has {bias.size} entries, expected {c_out}")
        out = out + bias.data.reshape(c_out, 1)
        parents.append(bias)
        bshape = bias.shape

    def vjp(g):
        gx, gw = vjp_x_w(g)
        if bias is None:
            return gx, gw
        return gx, gw, g.sum(axis=1).reshape(bshape)

    return Tensor._from_op(out, parents, vjp, "conv1d")


def global_layer_norm(
    x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-8, blocks: int = 1
) -> Tensor:
    """gLN: normalise by the mean/variance of all ``C*T`` elements.

    With ``blocks > 1`` the rows are split into that many equal groups and
    each group is normalised with its own statistics (the gain and bias stay
    per-row).  ``blocks=1`` is the usual global layer norm.
    """
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    c, n = x.shape
    if eps <= 0:
        raise InvalidArgument("eps must be positive")
    if c % blocks:
        raise InvalidArgument(f"{c} channels cannot be split into {blocks} blocks")
    xb = x.data.reshape(blocks, -1)
    mean = xb.mean(axis=1, keepdims=True)
    centred = xb - mean
    var = np.mean(centred * centred, axis=1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (centred * inv).reshape(c, n)
    gd = gamma.data.reshape(c, 1)
    out = gd * xhat + beta.data.reshape(c, 1)
    gshape, bshape = gamma.shape, beta.shape

    def vjp(g):
        ggamma = (g * xhat).sum(axis=1).reshape(gshape)
        gbeta = g.sum(axis=1).reshape(bshape)
        gxhat = (g * gd).reshape(blocks, -1)
        xh = xhat.reshape(blocks, -1)
        gx = inv * (
            gxhat
            - gxhat.mean(axis=1, keepdims=True)
            - xh * (gxhat * xh).mean(axis=1, keepdims=True)
        )
        return gx.reshape(c, n), ggamma, gbeta

    return Tensor._from_op(out, (x, gamma, beta), vjp, "gln")


def prelu(x: Tensor, slope: Tensor) -> Tensor:
    """``x`` where ``x >= 0`` else ``slope * x``; ``slope`` is a 1-element tensor."""
    x, slope = as_tensor(x), as_tensor(slope)
    a = slope.data.reshape(())
    xd = x.data
    neg = xd < 0
    out = np.where(neg, a * xd, xd)
    sshape = slope.shape

    def vjp(g):
        gx = np.where(neg, a * g, g)
        ga = np.asarray(np.sum(g * xd, where=neg), dtype=xd.dtype).reshape(sshape)
        return gx, ga

    return Tensor._from_op(out, (x, slope), vjp, "prelu")


def sigmoid(x: Tensor) -> Tensor:
    x = as_tensor(x)
    s = expit(x.data)

    def vjp(g):
        return (g * s * (1.0 - s),)

    return Tensor._from_op(s, (x,), vjp, "sigmoid")


def concat_channels(inputs: Sequence[Tensor]) -> Tensor:
    """Stack ``C_i x T`` tensors along the channel axis, in order."""
    inputs = [as_tensor(t) for t in inputs]
    if not inputs:
        raise InvalidArgument("concat_channels needs at least one input")
    frames = {t.shape[1] for t in inputs}
    if len(frames) != 1:
        raise InvalidArgument(f"frame counts differ: {sorted(frames)}")
    if len(inputs) == 1:
        return inputs[0]
    bounds = np.cumsum([t.shape[0] for t in inputs])[:-1]

    def vjp(g):
        return np.split(g, bounds, axis=0)

    out = np.concatenate([t.data for t in inputs], axis=0)
    return Tensor._from_op(out, inputs, vjp, "concat")


def slice_rows(x: Tensor, start: int, stop: int) -> Tensor:
    x = as_tensor(x)
    shape = x.shape

    def vjp(g):
        full = np.zeros(shape, dtype=g.dtype)
        full[start:stop] = g
        return (full,)

    return Tensor._from_op(x.data[start:stop], (x,), vjp, "slice")
