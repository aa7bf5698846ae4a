"""Curve mapping, the mutual-attention convolution, and the HIE/AIEM blocks."""

import numpy as np
import pytest

from vqcnir import ops
from vqcnir.aiem import AIEM, HIE, CurveEstimator, HIEConfig, IMAConv, IMAConvConfig, curve_map
from vqcnir.errors import ConfigError
from vqcnir.rng import Rng
from vqcnir.tensor import Tensor, tensor


def curve_map_oracle(x, coeffs):
    """Independent sequential re-evaluation of the iterated quadratic."""
    c = x.copy()
    for a in coeffs:
        c = c + a * c * (1.0 - c)
    return c


def test_zero_coefficients_identity_bitexact():
    rng = Rng(0)
    x = tensor(rng.uniform((1, 3, 4, 4), -2.0, 2.0))
    for order in (1, 3, 5):
        zeros = [tensor(np.zeros_like(x.data)) for _ in range(order)]
        assert np.array_equal(curve_map(x, zeros).data, x.data)


def test_direct_evaluation_order_one():
    x = tensor(np.full((1, 1, 1, 1), 0.5))
    a = tensor(np.full((1, 1, 1, 1), 0.4))
    assert abs(curve_map(x, [a]).item() - 0.6) < 1e-15


def test_zero_and_one_are_fixed_points():
    rng = Rng(1)
    x = np.zeros((1, 2, 3, 3))
    x[0, 1] = 1.0
    for order in (1, 4):
        coeffs = [tensor(rng.uniform((1, 2, 3, 3))) for _ in range(order)]
        out = curve_map(tensor(x), coeffs).data
        assert np.array_equal(out, x)


def test_matches_loop_oracle():
    rng = Rng(2)
    x = rng.uniform((2, 3, 4, 4))
    coeffs = [rng.uniform((2, 3, 4, 4)) for _ in range(4)]
    out = curve_map(tensor(x), [tensor(a) for a in coeffs]).data
    assert np.allclose(out, curve_map_oracle(x, coeffs), atol=1e-12)


def test_range_preservation_and_monotonicity():
    rng = Rng(3)
    for order in (1, 2, 4, 8):
        x = rng.uniform((20000,)).reshape(1, 1, 100, 200)
        coeffs = [tensor(rng.uniform(x.shape)) for _ in range(order)]
        out = curve_map(tensor(x), coeffs).data
        assert out.min() >= 0.0 and out.max() <= 1.0
    # order-1 monotonicity: sorted inputs stay sorted under a constant map
    xs = np.sort(rng.uniform((10000,))).reshape(1, 1, 1, -1)
    a = tensor(np.full(xs.shape, 0.83))
    out = curve_map(tensor(xs), [a]).data.reshape(-1)
    assert np.all(np.diff(out) >= 0.0)


def test_estimator_outputs_in_open_unit_interval():
    rng = Rng(4)
    est = CurveEstimator(rng, comp_channels=6, part_channels=2, order=3)
    coeffs = est(tensor(rng.normal((2, 6, 5, 5), 0, 3)))
    assert len(coeffs) == 3
    for a in coeffs:
        assert a.data.shape == (2, 2, 5, 5)
        assert np.all(a.data > 0.0) and np.all(a.data < 1.0)


def test_estimator_zero_input_zero_bias_gives_half():
    rng = Rng(5)
    est = CurveEstimator(rng, comp_channels=4, part_channels=2, order=2)
    est.conv1.b.data[...] = 0.0  # conservative default bias off
    coeffs = est(tensor(np.zeros((1, 4, 4, 4))))
    for a in coeffs:
        assert np.allclose(a.data, 0.5, atol=1e-15)


def test_estimator_channel_count_contract():
    rng = Rng(6)
    est = CurveEstimator(rng, comp_channels=12, part_channels=4, order=4)
    raw = est.conv1(est.conv3(est.conv5(tensor(np.zeros((1, 12, 4, 4))))))
    assert raw.data.shape[1] == 16  # order * part_channels for C_in=16, S=4, N=4


def test_imaconv_complement_definition():
    rng = Rng(7)
    blk = IMAConv(rng, IMAConvConfig(4, splits=2, curve_order=1))
    seen = []
    original = blk.estimator

    def spy(complement):
        seen.append(complement.data.copy())
        return original(complement)

    blk.estimator = spy
    x = rng.normal((1, 4, 3, 3))
    blk(tensor(x))
    assert np.array_equal(seen[0], x[:, 2:4])  # part 0's complement
    assert np.array_equal(seen[1], x[:, 0:2])  # part 1's complement


def test_imaconv_forced_identity_composition():
    # near-zero coefficients plus centered identity taps reproduce the input
    rng = Rng(8)
    cfg = IMAConvConfig(4, splits=2, curve_order=2)
    blk = IMAConv(rng, cfg)
    blk.estimator.conv1.w.data[...] = 0.0
    blk.estimator.conv1.b.data[...] = -60.0  # sigmoid -> ~1e-26
    for conv in blk.part_convs:
        conv.w.data[...] = 0.0
        conv.b.data[...] = 0.0
        for c in range(cfg.part_channels):
            conv.w.data[c, c, 1, 1] = 1.0
    x = rng.uniform((1, 4, 5, 5))
    out = blk(tensor(x))
    assert np.allclose(out.data, x, atol=1e-12)


def test_imaconv_matches_naive_per_part_reference():
    rng = Rng(9)
    cfg = IMAConvConfig(6, splits=3, curve_order=2)
    blk = IMAConv(rng, cfg)
    x = rng.uniform((2, 6, 4, 4))
    out = blk(tensor(x)).data

    p = cfg.part_channels
    ref_parts = []
    for i in range(cfg.splits):
        part = x[:, i * p : (i + 1) * p]
        complement = np.concatenate(
            [x[:, j * p : (j + 1) * p] for j in range(cfg.splits) if j != i], axis=1
        )
        coeffs = [a.data for a in blk.estimator(tensor(complement))]
        mapped = curve_map_oracle(part, coeffs)
        ref_parts.append(blk.part_convs[i](tensor(mapped)).data)
    ref = np.concatenate(ref_parts, axis=1)
    assert np.allclose(out, ref, atol=1e-12)


def test_imaconv_config_validation():
    with pytest.raises(ConfigError):
        IMAConvConfig(5, splits=2)
    with pytest.raises(ConfigError):
        IMAConvConfig(4, splits=1)
    with pytest.raises(ConfigError):
        IMAConvConfig(4, splits=2, curve_order=0)


def test_hie_shape_preserved():
    rng = Rng(10)
    for c, h, w in [(4, 6, 6), (8, 5, 7)]:
        blk = HIE(rng, HIEConfig(c))
        x = rng.normal((2, c, h, w))
        assert blk(tensor(x)).data.shape == (2, c, h, w)


def test_hie_zero_final_conv_is_identity():
    rng = Rng(11)
    blk = HIE(rng, HIEConfig(4))
    blk.fuse.w.data[...] = 0.0
    blk.fuse.b.data[...] = 0.0
    x = rng.normal((1, 4, 5, 5))
    assert np.array_equal(blk(tensor(x)).data, x)


def test_hie_reduction_must_divide():
    with pytest.raises(ConfigError):
        HIEConfig(3, reduction=4)


def test_aiem_shape_and_double_zero_identity():
    rng = Rng(12)
    blk = AIEM(rng, 8)
    x = rng.normal((2, 8, 6, 6))
    assert blk(tensor(x)).data.shape == (2, 8, 6, 6)
    blk.hie.fuse.w.data[...] = 0.0
    blk.hie.fuse.b.data[...] = 0.0
    blk.pw_out.w.data[...] = 0.0
    blk.pw_out.b.data[...] = 0.0
    assert np.array_equal(blk(tensor(x)).data, x)


def test_block_gradchecks():
    from vqcnir.gradcheck import CASES

    assert CASES["curve_map"](11) < 1e-4
    assert CASES["hie_forward"](12) < 1e-4
    assert CASES["aiem_forward"](13) < 1e-4
