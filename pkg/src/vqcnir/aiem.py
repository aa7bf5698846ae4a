"""Adaptive illumination enhancement.

Two stages: hierarchical information extraction (HIE) aggregates three
parallel receptive-field branches, then mutual-attention enhancement (IMAE)
estimates per-pixel enhancement curves for each channel group from its
complementary channels and applies an iterated quadratic remapping.
"""

from dataclasses import dataclass

import numpy as np

from . import ops
from .errors import ConfigError
from .layers import Block, Conv2d, LayerNorm2d


@dataclass
class IMAConvConfig:
    in_channels: int
    splits: int = 4
    curve_order: int = 4

    def __post_init__(self):
        if self.splits < 2:
            raise ConfigError("splits must be >= 2 so every part has a non-empty complement")
        if self.in_channels % self.splits != 0:
            raise ConfigError(f"splits={self.splits} must divide in_channels={self.in_channels}")
        if self.curve_order < 1:
            raise ConfigError("curve_order must be >= 1")

    @property
    def part_channels(self):
        return self.in_channels // self.splits


def curve_map(x, params):
    """Iterated quadratic remapping: c <- c + A_n * c * (1 - c), once per
    supplied coefficient map. Exact identity when every A_n is zero; 0 and 1
    are fixed points."""
    c = x
    for a in params:
        c = ops.add(c, ops.mul(a, ops.mul(c, ops.sub(1.0, c))))
    return c


class CurveEstimator(Block):
    """Coefficient-map network: conv5x5 -> conv3x3 -> conv1x1 with leaky-relu
    activations and a final sigmoid, emitting order * part_channels maps.

    The final bias starts negative so initial coefficients are small; large
    coefficients on features outside [0,1] would let the iterated quadratic
    grow instead of saturate."""

    CONSERVATIVE_BIAS = -2.0

    def __init__(self, rng, comp_channels, part_channels, order):
        self.order = order
        self.part_channels = part_channels
        self.conv5 = Conv2d(rng, comp_channels, comp_channels, 5, padding=2)
        self.conv3 = Conv2d(rng, comp_channels, order * part_channels, 3, padding=1)
        self.conv1 = Conv2d(rng, order * part_channels, order * part_channels, 1)
        self.conv1.b.data[...] = self.CONSERVATIVE_BIAS

    def __call__(self, complement):
        h = ops.leaky_relu(self.conv5(complement), 0.2)
        h = ops.leaky_relu(self.conv3(h), 0.2)
        raw = ops.sigmoid(self.conv1(h))
        return ops.channel_split(raw, self.order)


class IMAConv(Block):
    """Channel-split mutual enhancement: each part is remapped with curves
    estimated from all the other channels, then refined by its own 3x3 conv."""

    def __init__(self, rng, config):
        self.config = config
        p = config.part_channels
        self.estimator = CurveEstimator(rng, config.in_channels - p, p, config.curve_order)
        self.part_convs = [Conv2d(rng, p, p, 3, padding=1) for _ in range(config.splits)]

    def __call__(self, x):
        cfg = self.config
        parts = ops.channel_split(x, cfg.splits)
        outs = []
        for i in range(cfg.splits):
            complement = ops.channel_concat([parts[j] for j in range(cfg.splits) if j != i])
            coeffs = self.estimator(complement)
            enhanced = curve_map(parts[i], coeffs)
            outs.append(self.part_convs[i](enhanced))
        return ops.channel_concat(outs)


@dataclass
class HIEConfig:
    channels: int
    reduction: int = 4

    def __post_init__(self):
        expanded = 2 * self.channels
        if expanded % 2 != 0:
            raise ConfigError("expanded width must be even")
        if expanded % self.reduction != 0:
            raise ConfigError(f"reduction={self.reduction} must divide expanded width {expanded}")


class HIE(Block):
    """Three parallel aggregation branches over a widened feature map:
    simple gating, squeeze-excite channel attention, and large-kernel
    attention; the branches fuse multiplicatively and feed back residually."""

    def __init__(self, rng, config):
        c = config.channels
        e = 2 * c
        r = config.reduction
        self.norm = LayerNorm2d(c)
        self.expand = Conv2d(rng, c, e, 1)
        self.dw = Conv2d(rng, e, e, 3, padding=1, groups=e)
        # channel attention
        self.ca_reduce = Conv2d(rng, e, e // r, 1)
        self.ca_expand = Conv2d(rng, e // r, e, 1)
        self.ca_proj = Conv2d(rng, e, c, 1)
        # large-kernel attention
        self.lka_dw5 = Conv2d(rng, e, e, 5, padding=2, groups=e)
        self.lka_dw7 = Conv2d(rng, e, e, 7, padding=9, dilation=3, groups=e)
        self.lka_pw = Conv2d(rng, e, e, 1)
        self.lka_proj = Conv2d(rng, e, c, 1)
        # zero-init residual output: the block opens as an exact identity
        self.fuse = Conv2d(rng, c, c, 1, zero_init=True)

    def __call__(self, x):
        t = self.dw(self.expand(self.norm(x)))
        h1, h2 = ops.channel_split(t, 2)
        gate = ops.mul(h1, h2)
        attn = ops.sigmoid(self.ca_expand(ops.relu(self.ca_reduce(ops.global_avg_pool(t)))))
        ca = self.ca_proj(ops.mul(t, attn))
        lka = self.lka_proj(ops.mul(t, self.lka_pw(self.lka_dw7(self.lka_dw5(t)))))
        fused = self.fuse(ops.mul(ops.mul(gate, ca), lka))
        return ops.add(fused, x)


class AIEM(Block):
    """HIE followed by IMAE; both halves are residual, and pointwise convs
    bracket the mutual-attention convolution."""

    def __init__(self, rng, channels, splits=4, curve_order=4, reduction=4):
        self.hie = HIE(rng, HIEConfig(channels, reduction))
        self.norm = LayerNorm2d(channels)
        self.pw_in = Conv2d(rng, channels, channels, 1)
        self.pw_in.w.data *= 0.1  # keep curve inputs small at init
        self.imaconv = IMAConv(rng, IMAConvConfig(channels, splits, curve_order))
        # zero-init residual output, mirroring the HIE fuse conv
        self.pw_out = Conv2d(rng, channels, channels, 1, zero_init=True)

    def __call__(self, x):
        y = self.hie(x)
        z = self.pw_out(self.imaconv(self.pw_in(self.norm(y))))
        return ops.add(y, z)
