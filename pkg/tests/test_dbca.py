"""Bi-directional cross-attention and deformable fusion."""

import numpy as np

from vqcnir import ops
from vqcnir.dbca import DBCA, BidirectionalCrossAttention, OffsetEstimator, identity_deform_weights
from vqcnir.rng import Rng
from vqcnir.tensor import Tensor, tensor


def attention_oracle(blk, fd, fg):
    """Materialize the CxC attention matrix explicitly per batch element."""
    B, C, H, W = fd.shape
    ln = lambda x, g, b: (
        (x - x.mean(axis=(1, 2, 3), keepdims=True))
        / np.sqrt(x.var(axis=(1, 2, 3), keepdims=True) + 1e-12)
    ) * g[None, :, None, None] + b[None, :, None, None]
    conv1x1 = lambda x, w, b: np.einsum("oc,bchw->bohw", w[:, :, 0, 0], x) + b[None, :, None, None]
    qd = conv1x1(ln(fd, blk.norm_d.gamma.data, blk.norm_d.beta.data), blk.q_d.w.data, blk.q_d.b.data)
    qg = conv1x1(ln(fg, blk.norm_g.gamma.data, blk.norm_g.beta.data), blk.q_g.w.data, blk.q_g.b.data)
    vd = conv1x1(fd, blk.v_d.w.data, blk.v_d.b.data)
    vg = conv1x1(fg, blk.v_g.w.data, blk.v_g.b.data)
    out_d, out_g, rows = [], [], []
    for b in range(B):
        Qd = qd[b].reshape(C, H * W)
        Qg = qg[b].reshape(C, H * W)
        logits = Qd @ Qg.T / np.sqrt(C)
        m = np.exp(logits - logits.max(axis=1, keepdims=True))
        m = m / m.sum(axis=1, keepdims=True)
        rows.append(m.sum(axis=1))
        ad = (m @ vd[b].reshape(C, H * W)).reshape(C, H, W)
        ag = (m @ vg[b].reshape(C, H * W)).reshape(C, H, W)
        out_d.append(blk.gamma_d.data * ag + fd[b])
        out_g.append(blk.gamma_g.data * ad + fg[b])
    return np.stack(out_d), np.stack(out_g), np.stack(rows)


def test_gamma_zero_is_bitexact_passthrough():
    rng = Rng(0)
    blk = BidirectionalCrossAttention(rng, 4)
    fd = tensor(rng.normal((2, 4, 5, 5)))
    fg = tensor(rng.normal((2, 4, 5, 5)))
    od, og = blk(fd, fg)
    assert np.array_equal(od.data, fd.data)
    assert np.array_equal(og.data, fg.data)


def test_single_channel_attention_is_identity_on_values():
    rng = Rng(1)
    blk = BidirectionalCrossAttention(rng, 1)
    blk.gamma_d.data[...] = 1.0
    blk.gamma_g.data[...] = 0.0
    fd = tensor(rng.normal((1, 1, 3, 3)))
    fg = tensor(rng.normal((1, 1, 3, 3)))
    od, _ = blk(fd, fg)
    # M is the 1x1 matrix [1], so the G-aggregate is exactly V_G
    vg = np.einsum("oc,bchw->bohw", blk.v_g.w.data[:, :, 0, 0], fg.data) + blk.v_g.b.data[None, :, None, None]
    assert np.allclose(od.data, vg + fd.data, atol=1e-12)


def test_matches_explicit_matrix_oracle():
    rng = Rng(2)
    blk = BidirectionalCrossAttention(rng.split(0), 4)
    blk.gamma_d.data[...] = 1.0
    blk.gamma_g.data[...] = 1.0
    fd = rng.normal((1, 4, 3, 3))
    fg = rng.normal((1, 4, 3, 3))
    od, og = blk(tensor(fd), tensor(fg))
    ref_d, ref_g, rows = attention_oracle(blk, fd, fg)
    assert np.allclose(od.data, ref_d, atol=1e-10)
    assert np.allclose(og.data, ref_g, atol=1e-10)
    assert np.allclose(rows, 1.0, atol=1e-12)


def test_single_softmax_evaluation_per_forward():
    rng = Rng(3)
    blk = BidirectionalCrossAttention(rng, 3)
    ops.reset_counter("softmax")
    blk(tensor(rng.normal((2, 3, 4, 4))), tensor(rng.normal((2, 3, 4, 4))))
    assert ops.counter("softmax") == 1


def test_offset_estimator_zero_init_and_channel_count():
    rng = Rng(4)
    est = OffsetEstimator(rng, channels=5, deform_kernel=3)
    fd = tensor(rng.normal((2, 5, 6, 6)))
    fg = tensor(rng.normal((2, 5, 6, 6)))
    off = est(fd, fg)
    assert off.data.shape == (2, 18, 6, 6)
    assert np.array_equal(off.data, np.zeros_like(off.data))


def test_dbca_full_zero_init_identity():
    rng = Rng(5)
    blk = DBCA(rng, 4)
    blk.deform_w = Tensor(identity_deform_weights(4), requires_grad=True)
    fd = tensor(rng.normal((1, 4, 6, 6)))
    fg = tensor(rng.normal((1, 4, 6, 6)))
    assert np.array_equal(blk(fd, fg).data, fd.data)


def test_dbca_zero_offsets_reduce_to_conv():
    rng = Rng(6)
    blk = DBCA(rng.split(0), 3)
    # offset estimator stays zero-initialized; attention exchanges enabled
    blk.attention.gamma_d.data[...] = 0.7
    blk.attention.gamma_g.data[...] = -0.3
    fd = tensor(rng.normal((2, 3, 5, 5)))
    fg = tensor(rng.normal((2, 3, 5, 5)))
    out = blk(fd, fg)
    fd_o, _ = blk.attention(fd, fg)
    ref = ops.conv2d(fd_o, Tensor(blk.deform_w.data), Tensor(blk.deform_b.data), padding=1)
    assert np.allclose(out.data, ref.data, atol=1e-12)


def test_dbca_composed_oracle_end_to_end():
    rng = Rng(7)
    blk = DBCA(rng.split(0), 4)
    blk.attention.gamma_d.data[...] = 1.0
    blk.attention.gamma_g.data[...] = 1.0
    blk.offset.conv.w.data[...] = rng.uniform(blk.offset.conv.w.data.shape, -0.05, 0.05)
    fd = rng.normal((1, 4, 5, 5))
    fg = rng.normal((1, 4, 5, 5))
    out = blk(tensor(fd), tensor(fg)).data

    ref_d, ref_g, _ = attention_oracle(blk.attention, fd, fg)
    off = ops.conv2d(
        tensor(np.concatenate([ref_d, ref_g], axis=1)),
        Tensor(blk.offset.conv.w.data),
        Tensor(blk.offset.conv.b.data),
        padding=3,
    ).data
    ref = ops.deform_conv2d(
        tensor(ref_d), tensor(off), Tensor(blk.deform_w.data), Tensor(blk.deform_b.data)
    ).data
    assert np.allclose(out, ref, atol=1e-9)


def test_dbca_gradcheck():
    from vqcnir.gradcheck import CASES

    assert CASES["bidirectional_cross_attention"](21) < 1e-4
    assert CASES["offset_estimate"](22) < 1e-4
    assert CASES["dbca_forward"](23) < 1e-4
