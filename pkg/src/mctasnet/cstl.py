"""Channel-sequential transfer: grow an (M-1)-channel model to M channels."""

from __future__ import annotations

from collections import OrderedDict

import numpy as np

from .errors import InvalidArgument
from .model import ModelConfig, ParameterSet, parameter_shapes


def cstl_expand(source: ParameterSet, target: ModelConfig, init: str = "zero", seed: int = 0,
                sigma: float = 1e-3) -> ParameterSet:
    """Initial parameters for ``target`` taken from a one-channel-smaller model.

    Tensors that do not depend on the channel count are copied verbatim.  The
    fused layer (bottleneck for early fusion, mask convolutions for late
    fusion) keeps the source weights on channels ``1..M-1`` and gets a new
    input slice for channel ``M``: zeros by default, or ``N(0, sigma^2)`` with
    ``init="gaussian"``.  New early-fusion gLN rows start at gain 1, bias 0.
    """
    src = source.config
    if target.variant not in ("early_fusion", "late_fusion"):
        raise InvalidArgument(f"transfer targets a multi-channel variant, got {target.variant!r}")
    if src.variant not in (target.variant, "single"):
        raise InvalidArgument(f"source variant {src.variant!r} does not match target {target.variant!r}")
    fixed = ("K", "L", "N", "B", "H", "P", "X", "R", "Sc")
    diffs = [k for k in fixed if getattr(src, k) != getattr(target, k)]
    if diffs:
        raise InvalidArgument(f"source and target differ in {diffs}")
    if target.M != src.M + 1:
        raise InvalidArgument(
            f"transfer goes one channel at a time; source has M={src.M}, target M={target.M} "
            f"(expected {src.M + 1}); expand and train an M={src.M + 1} model first, then expand that"
        )
    if init not in ("zero", "gaussian"):
        raise InvalidArgument(f"unknown init {init!r}")
    rng = np.random.default_rng(seed)

    def new_slice(shape):
        if init == "zero":
            return np.zeros(shape)
        return rng.normal(0.0, sigma, size=shape)

    old = source.arrays()
    out: "OrderedDict[str, np.ndarray]" = OrderedDict()
    for name, shape in parameter_shapes(target).items():
        prev = np.asarray(old[name], dtype=np.float64)
        if prev.shape == shape:
            out[name] = prev.copy()
        elif name == "bnl.gln.gamma":
            out[name] = np.concatenate([prev, np.ones((target.N, 1))])
        elif name == "bnl.gln.beta":
            out[name] = np.concatenate([prev, np.zeros((target.N, 1))])
        elif name == "bnl.conv.weight":
            out[name] = np.concatenate([prev, new_slice((target.B, target.N, 1))], axis=1)
        elif name.startswith("me.") and name.endswith("conv.weight"):
            out[name] = np.concatenate([prev, new_slice((target.N, target.Sc, 1))], axis=1)
        else:
            raise InvalidArgument(f"{name}: cannot map shape {prev.shape} to {shape}")
    return ParameterSet.from_arrays(target, out, dtype=source["encoder.U"].dtype)
