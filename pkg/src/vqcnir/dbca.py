"""Deformable bi-directional cross-attention between the two decoder streams.

A single channel-to-channel attention map (C x C over flattened spatial
descriptors) is computed once per forward and applied to both value sets; the
exchanged features then drive an offset estimator whose output warps the
degraded-stream features through a deformable convolution.
"""

import numpy as np

from . import ops
from .errors import ShapeError
from .layers import Block, Conv2d, LayerNorm2d
from .tensor import Tensor


class BidirectionalCrossAttention(Block):
    """Exchange of channel-attention aggregates between two same-shape
    feature maps. The residual scales start at exactly zero, so the block is
    an exact pass-through at initialization."""

    def __init__(self, rng, channels):
        self.channels = channels
        self.norm_d = LayerNorm2d(channels)
        self.norm_g = LayerNorm2d(channels)
        self.q_d = Conv2d(rng, channels, channels, 1)
        self.q_g = Conv2d(rng, channels, channels, 1)
        self.v_d = Conv2d(rng, channels, channels, 1)
        self.v_g = Conv2d(rng, channels, channels, 1)
        self.gamma_d = Tensor(np.zeros((channels, 1, 1)), requires_grad=True)
        self.gamma_g = Tensor(np.zeros((channels, 1, 1)), requires_grad=True)

    def __call__(self, f_d, f_g):
        if f_d.data.shape != f_g.data.shape:
            raise ShapeError(f"stream shapes differ: {f_d.data.shape} vs {f_g.data.shape}")
        B, C, H, W = f_d.data.shape
        flat = (B, C, H * W)
        qd = ops.reshape(self.q_d(self.norm_d(f_d)), flat)
        qg = ops.reshape(self.q_g(self.norm_g(f_g)), flat)
        vd = ops.reshape(self.v_d(f_d), flat)
        vg = ops.reshape(self.v_g(f_g), flat)
        logits = ops.scale(ops.matmul(qd, ops.transpose(qg, (0, 2, 1))), 1.0 / np.sqrt(C))
        m = ops.softmax(logits, axis=-1)  # shared by both directions
        a_d = ops.reshape(ops.matmul(m, vd), (B, C, H, W))
        a_g = ops.reshape(ops.matmul(m, vg), (B, C, H, W))
        f_d_o = ops.add(ops.mul(self.gamma_d, a_g), f_d)
        f_g_o = ops.add(ops.mul(self.gamma_g, a_d), f_g)
        return f_d_o, f_g_o


class OffsetEstimator(Block):
    """Large-kernel offset head over the concatenated exchanged features.
    Zero-initialized so training starts in the undeformed regime."""

    def __init__(self, rng, channels, deform_kernel):
        self.conv = Conv2d(rng, 2 * channels, 2 * deform_kernel * deform_kernel, 7, padding=3, zero_init=True)

    def __call__(self, f_d_o, f_g_o):
        if f_d_o.data.shape != f_g_o.data.shape:
            raise ShapeError(f"stream shapes differ: {f_d_o.data.shape} vs {f_g_o.data.shape}")
        return self.conv(ops.channel_concat([f_d_o, f_g_o]))


class DBCA(Block):
    """Cross-attention exchange followed by offset-guided deformable fusion.

    Every learnable stage starts neutral: gamma scales and the offset head
    at zero, the deformable kernel as a centered identity tap, so the whole
    block is an exact pass-through until training engages it."""

    def __init__(self, rng, channels, deform_kernel=3):
        self.attention = BidirectionalCrossAttention(rng, channels)
        self.offset = OffsetEstimator(rng, channels, deform_kernel)
        self.deform_w = Tensor(identity_deform_weights(channels, deform_kernel), requires_grad=True)
        self.deform_b = Tensor(np.zeros(channels), requires_grad=True)

    def __call__(self, f_d, f_g):
        f_d_o, f_g_o = self.attention(f_d, f_g)
        off = self.offset(f_d_o, f_g_o)
        return ops.deform_conv2d(f_d_o, off, self.deform_w, self.deform_b)


def identity_deform_weights(channels, kernel=3):
    """Centered identity tap: deform conv becomes a per-channel copy."""
    w = np.zeros((channels, channels, kernel, kernel))
    c = (kernel - 1) // 2
    for i in range(channels):
        w[i, i, c, c] = 1.0
    return w
