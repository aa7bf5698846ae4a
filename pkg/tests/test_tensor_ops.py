"""Tensor-core op semantics and the backward contract."""

import numpy as np
import pytest

from vqcnir import ops
from vqcnir.errors import ConfigError, ContractError, ShapeError
from vqcnir.rng import Rng
from vqcnir.tensor import Tape, Tensor, backward, tensor


def test_conv_identity_kernel():
    x = tensor(np.arange(9.0).reshape(1, 1, 3, 3))
    w = tensor([[[[1.0]]]])
    assert np.array_equal(ops.conv2d(x, w).data, x.data)


def test_conv_ones_kernel_counts():
    x = tensor(np.ones((1, 1, 3, 3)))
    w = tensor(np.ones((1, 1, 3, 3)))
    out = ops.conv2d(x, w, padding=1).data[0, 0]
    assert out[1, 1] == 9.0
    assert out[0, 0] == 4.0
    assert out[0, 1] == 6.0


def test_conv_shape_errors():
    x = tensor(np.zeros((1, 4, 6, 6)))
    w = tensor(np.zeros((2, 3, 3, 3)))
    with pytest.raises(ShapeError, match="axis 1"):
        ops.conv2d(x, w, padding=1)
    with pytest.raises(ConfigError, match="groups"):
        ops.conv2d(x, tensor(np.zeros((2, 4, 3, 3))), groups=3)
    with pytest.raises(ShapeError, match="spatial"):
        ops.conv2d(tensor(np.zeros((1, 1, 2, 2))), tensor(np.zeros((1, 1, 5, 5))))


def test_layer_norm_statistics():
    rng = Rng(4)
    x = tensor(rng.normal((3, 4, 5, 5), 2.0, 3.0))
    g = tensor(np.ones(4))
    b = tensor(np.zeros(4))
    out = ops.layer_norm(x, g, b).data
    for s in range(3):
        assert abs(out[s].mean()) < 1e-10
        assert abs(out[s].var() - 1.0) < 1e-8


def test_layer_norm_constant_input_is_zero():
    # the eps guard caps the degenerate 0/0 at rounding-noise scale
    x = tensor(np.full((2, 3, 4, 4), 0.7))
    out = ops.layer_norm(x, tensor(np.ones(3)), tensor(np.zeros(3))).data
    assert np.allclose(out, 0.0, atol=1e-9)


def test_softmax_trivial_cases():
    u = ops.softmax(tensor(np.zeros(4)), axis=0).data
    assert np.allclose(u, 0.25, atol=1e-15)
    v = ops.softmax(tensor([0.0, np.log(3.0)]), axis=0).data
    assert np.allclose(v, [0.25, 0.75], atol=1e-12)


def test_softmax_shift_invariance_and_normalization():
    rng = Rng(8)
    x = rng.normal((5, 7))
    a = ops.softmax(tensor(x), axis=1).data
    b = ops.softmax(tensor(x + 123.456), axis=1).data
    assert np.allclose(a, b, atol=1e-12)
    assert np.allclose(a.sum(axis=1), 1.0, atol=1e-12)


def test_split_concat_round_trip_bitexact():
    rng = Rng(13)
    x = tensor(rng.normal((2, 6, 3, 3)))
    parts = ops.channel_split(x, 3)
    back = ops.channel_concat(parts)
    assert np.array_equal(back.data, x.data)


def test_split_sizes_validation():
    x = tensor(np.zeros((1, 5, 2, 2)))
    with pytest.raises(ConfigError):
        ops.channel_split(x, 2)
    with pytest.raises(ShapeError):
        ops.channel_split(x, [2, 2])


def test_global_avg_pool_constant():
    x = tensor(np.full((2, 3, 4, 4), 2.5))
    out = ops.global_avg_pool(x).data
    assert out.shape == (2, 3, 1, 1)
    assert np.allclose(out, 2.5, atol=1e-15)


def test_nearest_upsample_values():
    x = tensor(np.array([[[[1.0, 2.0], [3.0, 4.0]]]]))
    up = ops.nearest_upsample(x, 2).data
    assert up.shape == (1, 1, 4, 4)
    assert np.array_equal(up[0, 0, :2, :2], np.ones((2, 2)))
    assert np.array_equal(up[0, 0, 2:, 2:], np.full((2, 2), 4.0))


def test_backward_sum_gives_ones():
    x = Tensor(np.arange(6.0).reshape(2, 3), requires_grad=True)
    with Tape():
        backward(ops.sum_all(x))
    assert np.array_equal(x.grad, np.ones((2, 3)))


def test_backward_quadratic_gives_2x():
    x = Tensor(np.array([1.0, -2.0, 3.5]), requires_grad=True)
    with Tape():
        backward(ops.sum_all(ops.mul(x, x)))
    assert np.allclose(x.grad, 2 * x.data, atol=1e-15)


def test_backward_requires_scalar_and_tape():
    x = Tensor(np.ones(3), requires_grad=True)
    with Tape():
        y = ops.mul(x, x)
        with pytest.raises(ContractError, match="scalar"):
            backward(y)
    with pytest.raises(ContractError, match="tape"):
        backward(ops.sum_all(Tensor(np.ones(3), requires_grad=True)))


def test_leaf_without_requires_grad_gets_no_buffer():
    x = Tensor(np.ones(4), requires_grad=True)
    c = Tensor(np.ones(4))
    with Tape():
        backward(ops.sum_all(ops.mul(x, c)))
    assert c.grad is None
    assert x.grad is not None


def test_grad_accumulates_across_uses():
    x = Tensor(np.array([2.0]), requires_grad=True)
    with Tape():
        y = ops.add(ops.mul(x, x), x)  # x^2 + x -> dy/dx = 2x + 1
        backward(ops.sum_all(y))
    assert np.allclose(x.grad, [5.0], atol=1e-15)


def test_composite_graph_gradcheck():
    from vqcnir.gradcheck import CASES

    assert CASES["composite_chain"](3) < 1e-4


def test_forward_backward_bit_identical_across_runs():
    def run():
        rng = Rng(2718)
        x = Tensor(rng.normal((1, 3, 8, 8)), requires_grad=True)
        w = Tensor(rng.normal((4, 3, 3, 3)), requires_grad=True)
        with Tape():
            h = ops.conv2d(x, w, padding=1)
            h = ops.layer_norm(h, Tensor(np.ones(4)), Tensor(np.zeros(4)))
            loss = ops.mean_all(ops.mul(h, h))
            backward(loss)
        return loss.data.copy(), x.grad.copy(), w.grad.copy()

    a = run()
    b = run()
    for u, v in zip(a, b):
        assert np.array_equal(u, v)


def test_deform_conv_offset_shape_error():
    x = tensor(np.zeros((1, 2, 5, 5)))
    w = tensor(np.zeros((2, 2, 3, 3)))
    with pytest.raises(ShapeError, match="offset"):
        ops.deform_conv2d(x, tensor(np.zeros((1, 10, 5, 5))), w)


def test_matmul_batched_matches_loop():
    rng = Rng(21)
    a = rng.normal((3, 2, 4))
    b = rng.normal((3, 4, 5))
    out = ops.matmul(tensor(a), tensor(b)).data
    for i in range(3):
        assert np.allclose(out[i], a[i] @ b[i], atol=1e-12)
