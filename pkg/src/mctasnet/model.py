"""Conv-TasNet separator with early- and late-fusion multi-channel variants.

All three variants share the same building blocks:

``encode``      W_m = U · frames(x_m)       (one encoder for every channel)
``bottleneck``  gLN + 1x1 conv to B channels
``tcn``         X·R dilated depthwise-separable blocks, skip outputs summed
``masks``       per speaker PReLU → 1x1 conv → sigmoid
``decode``      V · (M_k ⊙ W_1), then overlap-add

Early fusion concatenates the encoded channels before the bottleneck; late
fusion runs the bottleneck and TCN per channel (shared weights) and
concatenates before mask estimation.  Masks always apply to channel 1.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import asdict, dataclass, replace
from typing import Dict, Iterator, List, Tuple

import numpy as np

from . import ops
from .errors import InvalidArgument
from .framing import SegmentMatrix, overlap_add, segment
from .tensor import Tensor, as_tensor, default_dtype

VARIANTS = ("single", "early_fusion", "late_fusion")
_ALIASES = {"ef": "early_fusion", "lf": "late_fusion", "sc": "single"}

GLN_EPS = 1e-8


def canonical_variant(name: str) -> str:
    name = _ALIASES.get(name, name)
    if name not in VARIANTS:
        raise InvalidArgument(f"unknown variant {name!r}; expected one of {VARIANTS}")
    return name


@dataclass(frozen=True)
class ModelConfig:
    """Architecture hyperparameters.

    Defaults are the desk-scale configuration; :meth:`full_scale` gives the
    full-size network (L=16, N=512, B=128, H=512, P=3, X=8, R=3).
    """

    variant: str = "single"
    M: int = 1
    K: int = 2
    L: int = 16
    N: int = 64
    B: int = 32
    H: int = 64
    P: int = 3
    X: int = 4
    R: int = 2
    Sc: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "variant", canonical_variant(self.variant))
        if self.Sc is None:
            object.__setattr__(self, "Sc", self.B)
        for key in ("M", "L", "N", "B", "H", "P", "X", "R", "Sc"):
            if int(getattr(self, key)) < 1:
                raise InvalidArgument(f"{key} must be positive, got {getattr(self, key)}")
        if self.K < 2:
            raise InvalidArgument(f"K must be >= 2, got {self.K}")
        if self.P % 2 == 0:
            raise InvalidArgument(f"P must be odd, got {self.P}")
        if self.L < 2 or self.L % 2:
            raise InvalidArgument(f"L must be even so the hop L/2 is whole, got {self.L}")
        if self.variant == "single" and self.M != 1:
            raise InvalidArgument("the single-channel variant requires M=1")

    @classmethod
    def full_scale(cls, variant: str = "single", M: int = 1, K: int = 2) -> "ModelConfig":
        return cls(variant=variant, M=M, K=K, L=16, N=512, B=128, H=512, P=3, X=8, R=3)

    @property
    def hop(self) -> int:
        return self.L // 2

    @property
    def bnl_channels(self) -> int:
        return self.M * self.N if self.variant == "early_fusion" else self.N

    @property
    def me_channels(self) -> int:
        return self.M * self.Sc if self.variant == "late_fusion" else self.Sc

    def with_mics(self, M: int) -> "ModelConfig":
        return replace(self, M=M)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {k: d[k] for k in cls.__dataclass_fields__ if k in d}
        return cls(**known)


def parameter_shapes(config: ModelConfig) -> "OrderedDict[str, tuple]":
    """Name → shape for every trainable tensor, in canonical order."""
    c = config
    shapes: "OrderedDict[str, tuple]" = OrderedDict()
    shapes["encoder.U"] = (c.N, c.L)
    shapes["decoder.V"] = (c.L, c.N)
    shapes["bnl.gln.gamma"] = (c.bnl_channels, 1)
    shapes["bnl.gln.beta"] = (c.bnl_channels, 1)
    shapes["bnl.conv.weight"] = (c.B, c.bnl_channels, 1)
    shapes["bnl.conv.bias"] = (c.B,)
    for j in range(c.R * c.X):
        p = f"tcn.{j}."
        shapes[p + "conv_in.weight"] = (c.H, c.B, 1)
        shapes[p + "conv_in.bias"] = (c.H,)
        shapes[p + "prelu1"] = (1,)
        shapes[p + "gln1.gamma"] = (c.H, 1)
        shapes[p + "gln1.beta"] = (c.H, 1)
        shapes[p + "dconv.weight"] = (c.H, 1, c.P)
        shapes[p + "dconv.bias"] = (c.H,)
        shapes[p + "prelu2"] = (1,)
        shapes[p + "gln2.gamma"] = (c.H, 1)
        shapes[p + "gln2.beta"] = (c.H, 1)
        shapes[p + "res.weight"] = (c.B, c.H, 1)
        shapes[p + "res.bias"] = (c.B,)
        shapes[p + "skip.weight"] = (c.Sc, c.H, 1)
        shapes[p + "skip.bias"] = (c.Sc,)
    for k in range(c.K):
        shapes[f"me.{k}.prelu"] = (1,)
        shapes[f"me.{k}.conv.weight"] = (c.N, c.me_channels, 1)
        shapes[f"me.{k}.conv.bias"] = (c.N,)
    return shapes


def count_parameters(config: ModelConfig) -> int:
    """Closed-form trainable parameter count."""
    c = config
    block = (
        c.B * c.H + c.H  # conv_in
        + 1 + 2 * c.H  # prelu1, gln1
        + c.H * c.P + c.H  # depthwise
        + 1 + 2 * c.H  # prelu2, gln2
        + c.H * c.B + c.B  # residual
        + c.H * c.Sc + c.Sc  # skip
    )
    return (
        2 * c.N * c.L
        + 2 * c.bnl_channels + c.B * c.bnl_channels + c.B
        + c.R * c.X * block
        + c.K * (1 + c.N * c.me_channels + c.N)
    )


class ParameterSet:
    """Named trainable tensors for one variant and channel count."""

    def __init__(self, config: ModelConfig, tensors: Dict[str, Tensor]):
        expected = parameter_shapes(config)
        if list(tensors) != list(expected):
            missing = set(expected) ^ set(tensors)
            if missing:
                raise InvalidArgument(f"parameter names do not match config: {sorted(missing)[:5]}")
            tensors = OrderedDict((k, tensors[k]) for k in expected)
        for name, shape in expected.items():
            if tuple(tensors[name].shape) != shape:
                raise InvalidArgument(f"{name}: expected shape {shape}, got {tensors[name].shape}")
        self.config = config
        self.tensors: "OrderedDict[str, Tensor]" = OrderedDict(tensors)

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self.tensors)

    def __len__(self) -> int:
        return len(self.tensors)

    def items(self):
        return self.tensors.items()

    def num_elements(self) -> int:
        return int(sum(t.size for t in self.tensors.values()))

    def zero_grad(self) -> None:
        for t in self.tensors.values():
            t.zero_grad()

    def arrays(self) -> "OrderedDict[str, np.ndarray]":
        return OrderedDict((k, t.data) for k, t in self.tensors.items())

    def copy(self, dtype=None) -> "ParameterSet":
        return ParameterSet.from_arrays(self.config, self.arrays(), dtype=dtype)

    @classmethod
    def from_arrays(cls, config: ModelConfig, arrays: Dict[str, np.ndarray], dtype=None) -> "ParameterSet":
        dtype = dtype or default_dtype()
        return cls(
            config,
            OrderedDict((k, Tensor(v, requires_grad=True, dtype=dtype, name=k)) for k, v in arrays.items()),
        )


def init_parameters(config: ModelConfig, seed: int = 0, dtype=None) -> ParameterSet:
    """Random initial parameters.

    Convolution/linear weights and biases are uniform in ``±1/sqrt(fan_in)``,
    PReLU slopes start at 0.25 and gLN gains/biases at 1/0.
    """
    rng = np.random.default_rng(seed)
    arrays: "OrderedDict[str, np.ndarray]" = OrderedDict()
    shapes = parameter_shapes(config)
    for name, shape in shapes.items():
        if "prelu" in name:
            arrays[name] = np.full(shape, 0.25)
        elif name.endswith("gamma"):
            arrays[name] = np.ones(shape)
        elif name.endswith("beta"):
            arrays[name] = np.zeros(shape)
        else:
            weight = name[: -len("bias")] + "weight" if name.endswith(".bias") else name
            bound = 1.0 / np.sqrt(np.prod(shapes[weight][1:]))
            arrays[name] = rng.uniform(-bound, bound, size=shape)
    return ParameterSet.from_arrays(config, arrays, dtype=dtype)


# ---------------------------------------------------------------------------
# forward pass


def _encode(x: Tensor, params: ParameterSet) -> Tuple[Tensor, SegmentMatrix]:
    c = params.config
    if x.data.ndim != 1:
        raise InvalidArgument(f"encoder expects a 1-D waveform, got {x.shape}")
    if x.shape[0] < c.L:
        raise InvalidArgument(f"input has {x.shape[0]} samples, fewer than L={c.L}")
    frames = segment(x, c.L, c.hop)
    return ops.matmul(params["encoder.U"], frames.data), frames


def encode(mixture_channel, params: ParameterSet) -> Tensor:
    """``N x T`` encoder representation of one channel."""
    return _encode(as_tensor(mixture_channel), params)[0]


def _bottleneck(w: Tensor, params: ParameterSet, blocks: int = 1) -> Tensor:
    h = ops.global_layer_norm(w, params["bnl.gln.gamma"], params["bnl.gln.beta"], GLN_EPS, blocks)
    return ops.conv1d(h, params["bnl.conv.weight"], params["bnl.conv.bias"])


def _tcn(b: Tensor, params: ParameterSet) -> Tensor:
    c = params.config
    out, skip_sum = b, None
    for j in range(c.R * c.X):
        p = f"tcn.{j}."
        h = ops.conv1d(out, params[p + "conv_in.weight"], params[p + "conv_in.bias"])
        h = ops.prelu(h, params[p + "prelu1"])
        h = ops.global_layer_norm(h, params[p + "gln1.gamma"], params[p + "gln1.beta"], GLN_EPS)
        h = ops.conv1d(
            h, params[p + "dconv.weight"], params[p + "dconv.bias"], dilation=2 ** (j % c.X), groups=c.H
        )
        h = ops.prelu(h, params[p + "prelu2"])
        h = ops.global_layer_norm(h, params[p + "gln2.gamma"], params[p + "gln2.beta"], GLN_EPS)
        out = out + ops.conv1d(h, params[p + "res.weight"], params[p + "res.bias"])
        skip = ops.conv1d(h, params[p + "skip.weight"], params[p + "skip.bias"])
        skip_sum = skip if skip_sum is None else skip_sum + skip
    return skip_sum


def estimate_masks(y: Tensor, params: ParameterSet) -> List[Tensor]:
    """One ``N x T`` mask in (0, 1) per speaker from the TCN embedding."""
    masks = []
    for k in range(params.config.K):
        h = ops.prelu(y, params[f"me.{k}.prelu"])
        h = ops.conv1d(h, params[f"me.{k}.conv.weight"], params[f"me.{k}.conv.bias"])
        masks.append(ops.sigmoid(h))
    return masks


def _decode(masks: List[Tensor], w_ref: Tensor, frames: SegmentMatrix, params: ParameterSet) -> List[Tensor]:
    v = params["decoder.V"]
    return [overlap_add(frames.with_data(ops.matmul(v, m * w_ref))) for m in masks]


def _channels(x, params: ParameterSet) -> List[Tensor]:
    c = params.config
    arr = x.data if isinstance(x, Tensor) else np.asarray(x)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[0] != c.M:
        raise InvalidArgument(f"expected {c.M} input channel(s), got array of shape {arr.shape}")
    return [Tensor(ch, dtype=params["encoder.U"].dtype) for ch in arr]


def _check_variant(params: ParameterSet, variant: str) -> None:
    if params.config.variant != variant:
        raise InvalidArgument(f"parameters are for {params.config.variant!r}, not {variant!r}")


def separate_single(x, params: ParameterSet) -> List[Tensor]:
    _check_variant(params, "single")
    (ch,) = _channels(x, params)
    w, frames = _encode(ch, params)
    y = _tcn(_bottleneck(w, params), params)
    return _decode(estimate_masks(y, params), w, frames, params)


def separate_ef(x, params: ParameterSet) -> List[Tensor]:
    _check_variant(params, "early_fusion")
    encoded = [_encode(ch, params) for ch in _channels(x, params)]
    w0 = ops.concat_channels([w for w, _ in encoded])
    y = _tcn(_bottleneck(w0, params, blocks=params.config.M), params)
    w1, frames = encoded[0]
    return _decode(estimate_masks(y, params), w1, frames, params)


def separate_lf(x, params: ParameterSet) -> List[Tensor]:
    _check_variant(params, "late_fusion")
    encoded = [_encode(ch, params) for ch in _channels(x, params)]
    y0 = ops.concat_channels([_tcn(_bottleneck(w, params), params) for w, _ in encoded])
    w1, frames = encoded[0]
    return _decode(estimate_masks(y0, params), w1, frames, params)


_DISPATCH = {"single": separate_single, "early_fusion": separate_ef, "late_fusion": separate_lf}


def separate(x, params: ParameterSet) -> List[Tensor]:
    """K estimated waveforms (each the input's length) for any variant."""
    return _DISPATCH[params.config.variant](x, params)
