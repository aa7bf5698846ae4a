"""Parameter-holding layers and small shared blocks.

A `Block` collects its parameters reflectively: every Tensor attribute is a
parameter, child blocks (and lists of them) are walked in attribute insertion
order, so parameter iteration order is deterministic and stable across runs.
"""

import numpy as np

from . import ops
from .tensor import Tensor


class Block:
    def named_params(self, prefix=""):
        out = []
        for k, v in vars(self).items():
            name = f"{prefix}.{k}" if prefix else k
            if isinstance(v, Tensor):
                out.append((name, v))
            elif isinstance(v, Block):
                out.extend(v.named_params(name))
            elif isinstance(v, (list, tuple)):
                for i, item in enumerate(v):
                    if isinstance(item, Block):
                        out.extend(item.named_params(f"{name}.{i}"))
        return out

    def params(self):
        return [t for _, t in self.named_params()]

    def set_trainable(self, flag):
        for t in self.params():
            t.requires_grad = bool(flag)

    def zero_grads(self):
        for t in self.params():
            t.grad = None


class Conv2d(Block):
    """Cross-correlation layer. Biases start at zero; weights are uniform in
    +-sqrt(1/fan_in) unless zero_init is set."""

    def __init__(self, rng, cin, cout, k, stride=1, padding=0, dilation=1, groups=1, bias=True, zero_init=False):
        self.stride = stride
        self.padding = padding
        self.dilation = dilation
        self.groups = groups
        fan_in = (cin // groups) * k * k
        bound = float(np.sqrt(1.0 / fan_in))
        if zero_init:
            w = np.zeros((cout, cin // groups, k, k))
        else:
            w = rng.uniform((cout, cin // groups, k, k), -bound, bound)
        self.w = Tensor(w, requires_grad=True)
        self.b = Tensor(np.zeros(cout), requires_grad=True) if bias else None

    def __call__(self, x):
        return ops.conv2d(
            x, self.w, self.b, stride=self.stride, padding=self.padding, dilation=self.dilation, groups=self.groups
        )


class ConvTranspose2d(Block):
    """Stride-2 upsampling convolution; weight layout (C_in, C_out, kh, kw)."""

    def __init__(self, rng, cin, cout, k=4, stride=2, padding=1, bias=True):
        self.stride = stride
        self.padding = padding
        bound = float(np.sqrt(1.0 / (cin * k * k)))
        self.w = Tensor(rng.uniform((cin, cout, k, k), -bound, bound), requires_grad=True)
        self.b = Tensor(np.zeros(cout), requires_grad=True) if bias else None

    def __call__(self, x):
        return ops.transposed_conv2d(x, self.w, self.b, stride=self.stride, padding=self.padding)


class LayerNorm2d(Block):
    """Per-sample normalization over (C,H,W) with per-channel affine."""

    def __init__(self, channels, eps=1e-12):
        self.eps = eps
        self.gamma = Tensor(np.ones(channels), requires_grad=True)
        self.beta = Tensor(np.zeros(channels), requires_grad=True)

    def __call__(self, x):
        return ops.layer_norm(x, self.gamma, self.beta, eps=self.eps)


class ResBlock(Block):
    def __init__(self, rng, channels):
        self.conv1 = Conv2d(rng, channels, channels, 3, padding=1)
        self.conv2 = Conv2d(rng, channels, channels, 3, padding=1)

    def __call__(self, x):
        h = ops.leaky_relu(self.conv1(x), 0.2)
        return ops.add(self.conv2(h), x)


class Identity(Block):
    """Pass-through stand-in used by ablation toggles."""

    def __call__(self, x, *rest):
        return x
