import numpy as np
import pytest

from mctasnet.checkpoint import load_checkpoint, save_checkpoint
from mctasnet.cstl import cstl_expand
from mctasnet.errors import InvalidArgument
from mctasnet.gradcheck import finite_diff_check
from mctasnet.losses import pit_loss_tensor
from mctasnet.model import (
    ModelConfig,
    ParameterSet,
    count_parameters,
    encode,
    init_parameters,
    parameter_shapes,
    separate,
)
from mctasnet.tensor import precision

TINY = dict(L=4, N=8, B=4, H=8, P=3, X=2, R=1)


def tiny(variant="single", M=1, K=2):
    return ModelConfig(variant=variant, M=M, K=K, **TINY)


def test_config_validation():
    with pytest.raises(InvalidArgument):
        ModelConfig(variant="single", M=2)
    with pytest.raises(InvalidArgument):
        ModelConfig(P=4)
    with pytest.raises(InvalidArgument):
        ModelConfig(L=15)
    with pytest.raises(InvalidArgument):
        ModelConfig(variant="mid_fusion")
    assert ModelConfig(variant="ef", M=2).variant == "early_fusion"
    assert ModelConfig().Sc == ModelConfig().B


def test_config_dict_roundtrip():
    cfg = ModelConfig(variant="lf", M=3, K=3, N=32)
    assert ModelConfig.from_dict(cfg.to_dict()) == cfg


@pytest.mark.parametrize("variant,M", [("single", 1), ("early_fusion", 3), ("late_fusion", 2)])
def test_closed_form_count_matches_shapes(variant, M):
    cfg = ModelConfig(variant=variant, M=M)
    assert count_parameters(cfg) == sum(int(np.prod(s)) for s in parameter_shapes(cfg).values())
    assert init_parameters(cfg).num_elements() == count_parameters(cfg)


def test_full_scale_counts():
    counts = {(v, M): count_parameters(ModelConfig.full_scale(v, M)) for v in ("ef", "lf") for M in (2, 3, 4)}
    assert count_parameters(ModelConfig.full_scale()) == 5_050_546
    assert [counts["lf", M] for M in (2, 3, 4)] == [5_181_618, 5_312_690, 5_443_762]
    assert [counts["ef", M] for M in (2, 3, 4)] == [5_117_106, 5_183_666, 5_250_226]


def test_output_shapes_and_lengths():
    for variant, M in (("single", 1), ("early_fusion", 2), ("late_fusion", 3)):
        params = init_parameters(tiny(variant, M, K=3))
        x = np.random.default_rng(0).standard_normal((M, 101))
        est = separate(x, params)
        assert len(est) == 3
        assert all(e.shape == (101,) for e in est)


def test_encoder_frame_count():
    params = init_parameters(ModelConfig())
    w = encode(np.zeros(8000), params)
    assert w.shape == (64, 999)


def test_wrong_channel_count_rejected():
    params = init_parameters(tiny("early_fusion", 2))
    with pytest.raises(InvalidArgument, match="2 input channel"):
        separate(np.zeros((3, 50)), params)


def test_too_short_input_rejected():
    with pytest.raises(InvalidArgument):
        separate(np.zeros(3), init_parameters(tiny()))


def test_masks_scale_outputs_of_silence_to_zero():
    est = separate(np.zeros(64), init_parameters(tiny()))
    assert all(np.all(e.data == 0) for e in est)


def test_same_seed_same_init():
    a = init_parameters(tiny(), seed=4).arrays()
    b = init_parameters(tiny(), seed=4).arrays()
    assert all(np.array_equal(a[k], b[k]) for k in a)


def _tiny_loss_fn(cfg, x, refs):
    names = list(parameter_shapes(cfg))

    def fn(*leaves):
        params = ParameterSet(cfg, dict(zip(names, leaves)))
        return pit_loss_tensor(separate(x, params), refs)[0]

    return fn, names


@pytest.mark.parametrize("variant,M", [("single", 1), ("early_fusion", 2), ("late_fusion", 2)])
def test_end_to_end_gradient_spot_check(variant, M):
    cfg = tiny(variant, M)
    rng = np.random.default_rng(5)
    x = rng.standard_normal((M, 24))
    refs = rng.standard_normal((2, 24))
    with precision(np.float64):
        params = init_parameters(cfg, seed=1)
    fn, names = _tiny_loss_fn(cfg, x, refs)
    arrays = [params[n].data for n in names]
    wrt = [names.index(n) for n in ("encoder.U", "decoder.V", "bnl.conv.weight", "tcn.0.dconv.weight", "me.1.prelu")]
    assert finite_diff_check(fn, arrays, wrt=wrt) < 1e-4


# --- checkpoints ---------------------------------------------------------------

def test_checkpoint_roundtrip_is_bit_exact(tmp_path):
    params = init_parameters(ModelConfig(variant="lf", M=2, K=3), seed=2)
    path = tmp_path / "m.ckpt"
    save_checkpoint(path, params, {"epoch": 3})
    loaded, meta = load_checkpoint(path)
    assert loaded.config == params.config
    assert meta == {"epoch": 3}
    for name, arr in params.arrays().items():
        assert np.array_equal(loaded[name].data, arr)
    assert path.read_bytes()[:6] == b"MCSEP1"


def test_checkpoint_bad_magic(tmp_path):
    path = tmp_path / "bad.ckpt"
    path.write_bytes(b"NOTCKPT0000")
    with pytest.raises(InvalidArgument):
        load_checkpoint(path)


# --- channel-sequential transfer ---------------------------------------------------

@pytest.mark.parametrize("variant", ["early_fusion", "late_fusion"])
def test_transfer_preserves_function(variant):
    rng = np.random.default_rng(6)
    src = init_parameters(tiny(variant, 2), seed=3)
    dst = cstl_expand(src, tiny(variant, 3))
    x = rng.standard_normal((3, 80)).astype(np.float32)
    for a, b in zip(separate(x[:2], src), separate(x, dst)):
        assert np.max(np.abs(a.data - b.data)) < 1e-6


def test_transfer_from_single_channel():
    src = init_parameters(tiny(), seed=3)
    x = np.random.default_rng(7).standard_normal((2, 60)).astype(np.float32)
    for variant in ("early_fusion", "late_fusion"):
        dst = cstl_expand(src, tiny(variant, 2))
        for a, b in zip(separate(x[:1], src), separate(x, dst)):
            assert np.max(np.abs(a.data - b.data)) < 1e-6


def test_transfer_shapes_and_new_slices():
    src = init_parameters(tiny("early_fusion", 2), seed=3)
    dst = cstl_expand(src, tiny("early_fusion", 3), init="gaussian", seed=1)
    w = dst["bnl.conv.weight"].data
    assert w.shape == (4, 24, 1)
    np.testing.assert_array_equal(w[:, :16], src["bnl.conv.weight"].data)
    assert 0 < np.abs(w[:, 16:]).max() < 1e-2
    np.testing.assert_array_equal(dst["bnl.gln.gamma"].data[16:], 1.0)


def test_transfer_rejects_arity_gap():
    src = init_parameters(tiny("late_fusion", 2))
    with pytest.raises(InvalidArgument, match="one channel at a time"):
        cstl_expand(src, tiny("late_fusion", 4))


def test_transfer_rejects_architecture_change():
    src = init_parameters(tiny("late_fusion", 2))
    with pytest.raises(InvalidArgument):
        cstl_expand(src, ModelConfig(variant="late_fusion", M=3, **{**TINY, "H": 16}))
