import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mctasnet import ops
from mctasnet.errors import InvalidArgument, NonFiniteError
from mctasnet.framing import overlap_add, overlap_counts, segment
from mctasnet.gradcheck import finite_diff_check
from mctasnet.tensor import Tensor, default_dtype, precision, set_debug


def rand(rng, *shape):
    return rng.standard_normal(shape)


# --- Tensor basics ---------------------------------------------------------

def test_default_dtype_is_float32_and_precision_switches():
    assert default_dtype() == np.float32
    assert Tensor([1.0, 2.0]).dtype == np.float32
    with precision(np.float64):
        assert Tensor([1.0]).dtype == np.float64
    assert default_dtype() == np.float32


def test_zero_dimension_rejected():
    with pytest.raises(InvalidArgument):
        Tensor(np.zeros((0, 3)))


def test_backward_needs_scalar_root():
    x = Tensor(np.ones((2, 2)), requires_grad=True)
    with pytest.raises(InvalidArgument):
        (x * 2.0).backward()


def test_leaf_gradients_accumulate_across_backward_calls():
    x = Tensor([1.0, 2.0], requires_grad=True)
    ops.sum(x * 3.0).backward()
    ops.sum(x * 3.0).backward()
    np.testing.assert_allclose(x.grad, [6.0, 6.0])
    x.zero_grad()
    assert x.grad is None


def test_shared_subexpression_gradient_sums_both_paths():
    x = Tensor([2.0], requires_grad=True)
    y = x * x
    ops.sum(y + y).backward()
    np.testing.assert_allclose(x.grad, [8.0])


def test_debug_mode_flags_nan():
    set_debug(True)
    try:
        x = Tensor([1e38], requires_grad=True)
        with pytest.raises(NonFiniteError), np.errstate(over="ignore"):
            x * 1e10
    finally:
        set_debug(False)


# --- conv1d oracles ---------------------------------------------------------

def test_conv_same_padding_oracle():
    with precision(np.float64):
        y = ops.conv1d(Tensor([[1.0, 2.0, 3.0, 4.0]]), Tensor(np.ones((1, 1, 3))))
    np.testing.assert_allclose(y.data, [[3.0, 6.0, 9.0, 7.0]])


def test_dilated_conv_oracle():
    # taps at t-2 and t+2 with zero padding
    with precision(np.float64):
        y = ops.conv1d(Tensor([[1.0, 2.0, 3.0, 4.0, 5.0]]), Tensor([[[1.0, 0.0, 1.0]]]), dilation=2)
    np.testing.assert_allclose(y.data, [[3.0, 4.0, 6.0, 2.0, 3.0]])


def test_depthwise_conv_keeps_channels_separate():
    rng = np.random.default_rng(0)
    x = rand(rng, 3, 10)
    w = rand(rng, 3, 1, 3)
    with precision(np.float64):
        y = ops.conv1d(Tensor(x), Tensor(w), dilation=2, groups=3).data
        for c in range(3):
            yc = ops.conv1d(Tensor(x[c : c + 1]), Tensor(w[c : c + 1]), dilation=2).data
            np.testing.assert_allclose(y[c], yc[0], atol=1e-12)


def test_conv_rejects_even_kernel():
    with pytest.raises(InvalidArgument):
        ops.conv1d(Tensor(np.ones((1, 5))), Tensor(np.ones((1, 1, 2))))


@settings(max_examples=25, deadline=None)
@given(T=st.integers(1, 12), d=st.integers(1, 4), P=st.sampled_from([1, 3, 5]))
def test_conv_output_length_always_matches_input(T, d, P):
    y = ops.conv1d(Tensor(np.ones((2, T))), Tensor(np.ones((4, 2, P))), dilation=d)
    assert y.shape == (4, T)


# --- gLN --------------------------------------------------------------------

def test_gln_output_statistics():
    rng = np.random.default_rng(1)
    with precision(np.float64):
        y = ops.global_layer_norm(Tensor(5 + 3 * rand(rng, 4, 50)), Tensor(np.ones((4, 1))), Tensor(np.zeros((4, 1)))).data
    assert abs(y.mean()) < 1e-12
    assert abs(y.var() - 1) < 1e-6


def test_gln_blocks_normalise_each_group():
    rng = np.random.default_rng(2)
    x = np.vstack([rand(rng, 2, 30), 100 + 10 * rand(rng, 2, 30)])
    with precision(np.float64):
        y = ops.global_layer_norm(Tensor(x), Tensor(np.ones((4, 1))), Tensor(np.zeros((4, 1))), blocks=2).data
    for block in (y[:2], y[2:]):
        assert abs(block.mean()) < 1e-12 and abs(block.var() - 1) < 1e-6


# --- per-op gradients ---------------------------------------------------------

PER_OP_TOL = 1e-5


def _weighted(t, w):
    return ops.sum(t * Tensor(w))


GRAD_CASES = {
    "add": lambda r: ((r(3, 4), r(3, 1)), lambda a, b: _weighted(a + b, WEIGHT(3, 4))),
    "mul": lambda r: ((r(3, 4), r(1, 4)), lambda a, b: _weighted(a * b, WEIGHT(3, 4))),
    "matmul": lambda r: ((r(3, 5), r(5, 4)), lambda a, b: _weighted(a @ b, WEIGHT(3, 4))),
    "conv1d": lambda r: ((r(2, 9), r(3, 2, 3), r(3, 1)),
                         lambda x, w, b: _weighted(ops.conv1d(x, w, b, dilation=2), WEIGHT(3, 9))),
    "depthwise": lambda r: ((r(3, 9), r(3, 1, 3)),
                            lambda x, w: _weighted(ops.conv1d(x, w, dilation=4, groups=3), WEIGHT(3, 9))),
    "pointwise": lambda r: ((r(4, 6), r(2, 4, 1), r(2, 1)),
                            lambda x, w, b: _weighted(ops.conv1d(x, w, b), WEIGHT(2, 6))),
    "gln": lambda r: ((r(4, 7), r(4, 1), r(4, 1)),
                      lambda x, g, b: _weighted(ops.global_layer_norm(x, g, b), WEIGHT(4, 7))),
    "gln_blocks": lambda r: ((r(4, 7), r(4, 1), r(4, 1)),
                             lambda x, g, b: _weighted(ops.global_layer_norm(x, g, b, blocks=2), WEIGHT(4, 7))),
    "prelu": lambda r: ((r(3, 6), np.full((1, 1), 0.25)),
                        lambda x, a: _weighted(ops.prelu(x, a), WEIGHT(3, 6))),
    "sigmoid": lambda r: ((r(3, 6),), lambda x: _weighted(ops.sigmoid(x), WEIGHT(3, 6))),
    "concat": lambda r: ((r(2, 5), r(3, 5)),
                         lambda a, b: _weighted(ops.concat_channels([a, b]), WEIGHT(5, 5))),
    "slice": lambda r: ((r(5, 4),), lambda x: _weighted(ops.slice_rows(x, 1, 4), WEIGHT(3, 4))),
    "segment+ola": lambda r: ((r(23),),
                              lambda x: ops.sum(overlap_add(segment(x, 6, 3)) * Tensor(WEIGHT(1, 23)[0]))),
}


def WEIGHT(*shape):
    return np.random.default_rng(99).standard_normal(shape)


@pytest.mark.parametrize("name", sorted(GRAD_CASES))
def test_per_op_gradients(name):
    rng = np.random.default_rng(3)
    inputs, fn = GRAD_CASES[name](lambda *s: rng.standard_normal(s))
    assert finite_diff_check(fn, inputs) < PER_OP_TOL


# --- framing ---------------------------------------------------------------

def test_segment_pads_final_frame():
    x = np.arange(1, 21, dtype=np.float64)
    with precision(np.float64):
        seg = segment(x, 16, 8)
    assert seg.data.shape == (16, 2)
    np.testing.assert_array_equal(seg.data.data[:, 1], np.r_[np.arange(9, 21), np.zeros(4)])


def test_overlap_counts_half_overlap():
    counts = overlap_counts(4, 2, 3)
    np.testing.assert_array_equal(counts, [1, 1, 2, 2, 2, 2, 1, 1])


@settings(max_examples=100, deadline=None)
@given(n=st.integers(1, 400), L=st.integers(1, 32), data=st.data())
def test_segment_overlap_add_roundtrip(n, L, data):
    hop = data.draw(st.integers(1, L))
    x = np.random.default_rng(n * 31 + L).standard_normal(n)
    with precision(np.float64):
        y = overlap_add(segment(x, L, hop)).data
    assert y.shape == (n,)
    assert np.max(np.abs(y - x)) < 1e-12


def test_segment_rejects_bad_hop():
    with pytest.raises(InvalidArgument):
        segment(np.ones(10), 4, 5)
