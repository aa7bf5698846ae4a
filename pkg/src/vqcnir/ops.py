"""Differentiable operations over `Tensor`.

Convolution semantics are cross-correlation with zero padding. Every op
registers a backward rule on the active tape; see `tensor.backward`.
"""

import numpy as np

from . import kernels
from .errors import ConfigError, ContractError, ShapeError
from .tensor import Tensor, accumulate_grad, record

_counters = {"softmax": 0}


def reset_counter(name):
    _counters[name] = 0


def counter(name):
    return _counters[name]


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(g, shape):
    """Sum g down to `shape` (inverse of numpy broadcasting)."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# elementwise
# ---------------------------------------------------------------------------


def add(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    out_data = a.data + b.data

    def bwd(g):
        if a.requires_grad:
            accumulate_grad(a, _unbroadcast(g, a.data.shape))
        if b.requires_grad:
            accumulate_grad(b, _unbroadcast(g, b.data.shape))

    return record((a, b), out_data, bwd)


def sub(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    out_data = a.data - b.data

    def bwd(g):
        if a.requires_grad:
            accumulate_grad(a, _unbroadcast(g, a.data.shape))
        if b.requires_grad:
            accumulate_grad(b, _unbroadcast(-g, b.data.shape))

    return record((a, b), out_data, bwd)


def mul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    out_data = a.data * b.data

    def bwd(g):
        if a.requires_grad:
            accumulate_grad(a, _unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            accumulate_grad(b, _unbroadcast(g * a.data, b.data.shape))

    return record((a, b), out_data, bwd)


def scale(a, s):
    """Multiply by a python scalar."""
    a = _as_tensor(a)
    s = float(s)

    def bwd(g):
        if a.requires_grad:
            accumulate_grad(a, g * s)

    return record((a,), a.data * s, bwd)


def neg(a):
    return scale(a, -1.0)


def abs_(a):
    a = _as_tensor(a)
    out_data = np.abs(a.data)

    def bwd(g):
        if a.requires_grad:
            accumulate_grad(a, g * np.sign(a.data))

    return record((a,), out_data, bwd)


def relu(a):
    a = _as_tensor(a)
    out_data = np.maximum(a.data, 0.0)

    def bwd(g):
        if a.requires_grad:
            accumulate_grad(a, g * (a.data > 0))

    return record((a,), out_data, bwd)


def leaky_relu(a, slope=0.2):
    a = _as_tensor(a)
    out_data = np.where(a.data > 0, a.data, slope * a.data)

    def bwd(g):
        if a.requires_grad:
            accumulate_grad(a, g * np.where(a.data > 0, 1.0, slope))

    return record((a,), out_data, bwd)


def sigmoid(a):
    a = _as_tensor(a)
    x = a.data
    out_data = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))), np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))

    def bwd(g):
        if a.requires_grad:
            accumulate_grad(a, g * out_data * (1.0 - out_data))

    return record((a,), out_data, bwd)


def sum_all(a):
    a = _as_tensor(a)

    def bwd(g):
        if a.requires_grad:
            accumulate_grad(a, np.full(a.data.shape, float(g)))

    return record((a,), np.sum(a.data), bwd)


def mean_all(a):
    a = _as_tensor(a)
    n = a.data.size

    def bwd(g):
        if a.requires_grad:
            accumulate_grad(a, np.full(a.data.shape, float(g) / n))

    return record((a,), np.mean(a.data), bwd)


# ---------------------------------------------------------------------------
# shape ops
# ---------------------------------------------------------------------------


def reshape(a, shape):
    a = _as_tensor(a)
    out_data = a.data.reshape(shape)

    def bwd(g):
        if a.requires_grad:
            accumulate_grad(a, g.reshape(a.data.shape))

    return record((a,), out_data, bwd)


def transpose(a, axes):
    a = _as_tensor(a)
    axes = tuple(axes)
    inv = tuple(np.argsort(axes))
    out_data = np.ascontiguousarray(a.data.transpose(axes))

    def bwd(g):
        if a.requires_grad:
            accumulate_grad(a, g.transpose(inv))

    return record((a,), out_data, bwd)


def slice_channels(a, start, stop):
    a = _as_tensor(a)
    if not (0 <= start < stop <= a.data.shape[1]):
        raise ShapeError(f"channel slice [{start}:{stop}) out of range for axis 1 of size {a.data.shape[1]}")
    out_data = np.ascontiguousarray(a.data[:, start:stop])

    def bwd(g):
        if a.requires_grad:
            gx = np.zeros_like(a.data)
            gx[:, start:stop] = g
            accumulate_grad(a, gx)

    return record((a,), out_data, bwd)


def channel_split(a, parts):
    """Split along the channel axis into `parts` equal chunks (int) or chunks
    of the given sizes (sequence)."""
    a = _as_tensor(a)
    C = a.data.shape[1]
    if isinstance(parts, int):
        if C % parts != 0:
            raise ConfigError(f"cannot split {C} channels into {parts} equal parts")
        sizes = [C // parts] * parts
    else:
        sizes = list(parts)
        if sum(sizes) != C:
            raise ShapeError(f"split sizes {sizes} do not sum to channel count {C} on axis 1")
    out = []
    start = 0
    for s in sizes:
        out.append(slice_channels(a, start, start + s))
        start += s
    return out


def channel_concat(tensors):
    tensors = [_as_tensor(t) for t in tensors]
    sizes = [t.data.shape[1] for t in tensors]
    out_data = np.concatenate([t.data for t in tensors], axis=1)

    def bwd(g):
        start = 0
        for t, s in zip(tensors, sizes):
            if t.requires_grad:
                accumulate_grad(t, np.ascontiguousarray(g[:, start : start + s]))
            start += s

    return record(tuple(tensors), out_data, bwd)


def nearest_upsample(a, factor=2):
    a = _as_tensor(a)
    f = int(factor)
    out_data = np.repeat(np.repeat(a.data, f, axis=2), f, axis=3)

    def bwd(g):
        if a.requires_grad:
            B, C, H, W = a.data.shape
            accumulate_grad(a, g.reshape(B, C, H, f, W, f).sum(axis=(3, 5)))

    return record((a,), out_data, bwd)


def global_avg_pool(a):
    a = _as_tensor(a)
    out_data = a.data.mean(axis=(2, 3), keepdims=True)

    def bwd(g):
        if a.requires_grad:
            B, C, H, W = a.data.shape
            accumulate_grad(a, np.broadcast_to(g / (H * W), a.data.shape).copy())

    return record((a,), out_data, bwd)


# ---------------------------------------------------------------------------
# linear algebra
# ---------------------------------------------------------------------------


def matmul(a, b):
    """2-D or batched 3-D matrix product."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.ndim != b.data.ndim or a.data.ndim not in (2, 3):
        raise ShapeError(f"matmul expects matching 2-D or 3-D operands, got {a.data.shape} @ {b.data.shape}")
    if a.data.shape[-1] != b.data.shape[-2]:
        raise ShapeError(f"matmul inner axes disagree: {a.data.shape} @ {b.data.shape}")
    out_data = a.data @ b.data

    def bwd(g):
        if a.requires_grad:
            accumulate_grad(a, g @ np.swapaxes(b.data, -1, -2))
        if b.requires_grad:
            accumulate_grad(b, np.swapaxes(a.data, -1, -2) @ g)

    return record((a, b), out_data, bwd)


def softmax(a, axis=-1):
    """Max-shifted softmax along `axis`."""
    a = _as_tensor(a)
    _counters["softmax"] += 1
    m = np.max(a.data, axis=axis, keepdims=True)
    e = np.exp(a.data - m)
    out_data = e / np.sum(e, axis=axis, keepdims=True)

    def bwd(g):
        if a.requires_grad:
            dot = np.sum(g * out_data, axis=axis, keepdims=True)
            accumulate_grad(a, out_data * (g - dot))

    return record((a,), out_data, bwd)


def layer_norm(x, gamma, beta, eps=1e-12):
    """Normalize each sample over (C,H,W) then apply per-channel affine."""
    x, gamma, beta = _as_tensor(x), _as_tensor(gamma), _as_tensor(beta)
    if eps <= 0:
        raise ConfigError("layer_norm eps must be positive")
    if x.data.ndim != 4:
        raise ShapeError(f"layer_norm expects a 4-D input, got {x.data.shape}")
    C = x.data.shape[1]
    if gamma.data.shape != (C,) or beta.data.shape != (C,):
        raise ShapeError(f"affine parameters must have shape ({C},) to match axis 1")
    axes = (1, 2, 3)
    mu = x.data.mean(axis=axes, keepdims=True)
    var = x.data.var(axis=axes, keepdims=True)
    std = np.sqrt(var + eps)
    xhat = (x.data - mu) / std
    gc = gamma.data[None, :, None, None]
    out_data = xhat * gc + beta.data[None, :, None, None]

    def bwd(g):
        if gamma.requires_grad:
            accumulate_grad(gamma, np.sum(g * xhat, axis=(0, 2, 3)))
        if beta.requires_grad:
            accumulate_grad(beta, np.sum(g, axis=(0, 2, 3)))
        if x.requires_grad:
            gh = g * gc
            m1 = gh.mean(axis=axes, keepdims=True)
            m2 = (gh * xhat).mean(axis=axes, keepdims=True)
            accumulate_grad(x, (gh - m1 - xhat * m2) / std)

    return record((x, gamma, beta), out_data, bwd)


# ---------------------------------------------------------------------------
# convolutions
# ---------------------------------------------------------------------------


def conv2d(x, w, bias=None, stride=1, padding=0, dilation=1, groups=1):
    x, w = _as_tensor(x), _as_tensor(w)
    bias = _as_tensor(bias) if bias is not None else None
    if x.data.ndim != 4 or w.data.ndim != 4:
        raise ShapeError(f"conv2d expects 4-D input/weight, got {x.data.shape} and {w.data.shape}")
    B, C, H, W = x.data.shape
    O, Cg, kh, kw = w.data.shape
    if C % groups != 0 or O % groups != 0:
        raise ConfigError(f"groups={groups} must divide in_channels={C} and out_channels={O}")
    if Cg != C // groups:
        raise ShapeError(f"weight axis 1 is {Cg}, expected in_channels/groups = {C // groups}")
    if bias is not None and bias.data.shape != (O,):
        raise ShapeError(f"bias must have shape ({O},) to match weight axis 0")
    Ho = kernels.conv_out_size(H, kh, stride, padding, dilation)
    Wo = kernels.conv_out_size(W, kw, stride, padding, dilation)
    if Ho < 1 or Wo < 1:
        raise ShapeError(f"conv2d output would be empty on spatial axes ({Ho}x{Wo})")
    out_data = kernels.conv2d_forward(x.data, w.data, stride, padding, dilation, groups)
    if bias is not None:
        out_data = out_data + bias.data[None, :, None, None]

    def bwd(g):
        g = np.ascontiguousarray(g)
        if x.requires_grad:
            accumulate_grad(
                x, kernels.conv2d_backward_input(g, w.data, x.data.shape, stride, padding, dilation, groups)
            )
        if w.requires_grad:
            accumulate_grad(
                w, kernels.conv2d_backward_weight(g, x.data, w.data.shape, stride, padding, dilation, groups)
            )
        if bias is not None and bias.requires_grad:
            accumulate_grad(bias, g.sum(axis=(0, 2, 3)))

    inputs = (x, w) if bias is None else (x, w, bias)
    return record(inputs, out_data, bwd)


def transposed_conv2d(x, w, bias=None, stride=2, padding=1):
    """Fractionally-strided convolution; weight layout (C_in, C_out, kh, kw)."""
    x, w = _as_tensor(x), _as_tensor(w)
    bias = _as_tensor(bias) if bias is not None else None
    B, C, H, W = x.data.shape
    Cin, O, kh, kw = w.data.shape
    if Cin != C:
        raise ShapeError(f"weight axis 0 is {Cin}, expected in_channels {C}")
    if bias is not None and bias.data.shape != (O,):
        raise ShapeError(f"bias must have shape ({O},) to match weight axis 1")
    out_data = kernels.tconv_forward(x.data, w.data, stride, padding)
    if bias is not None:
        out_data = out_data + bias.data[None, :, None, None]

    def bwd(g):
        g = np.ascontiguousarray(g)
        if x.requires_grad:
            accumulate_grad(x, kernels.tconv_backward_input(g, w.data, x.data.shape, stride, padding))
        if w.requires_grad:
            accumulate_grad(w, kernels.tconv_backward_weight(g, x.data, w.data.shape, stride, padding))
        if bias is not None and bias.requires_grad:
            accumulate_grad(bias, g.sum(axis=(0, 2, 3)))

    inputs = (x, w) if bias is None else (x, w, bias)
    return record(inputs, out_data, bwd)


def deform_conv2d(x, offset, w, bias=None):
    """Deformable convolution, stride 1, same-size padding (kh-1)/2.

    Offsets hold per-tap (row, col) displacements: channel 2t shifts tap t
    vertically, 2t+1 horizontally. Samples use bilinear interpolation with
    zero outside the image; gradients flow to input, weight, bias and offset.
    """
    x, offset, w = _as_tensor(x), _as_tensor(offset), _as_tensor(w)
    bias = _as_tensor(bias) if bias is not None else None
    B, C, H, W = x.data.shape
    O, Cw, kh, kw = w.data.shape
    if Cw != C:
        raise ShapeError(f"weight axis 1 is {Cw}, expected in_channels {C}")
    if offset.data.shape != (B, 2 * kh * kw, H, W):
        raise ShapeError(
            f"offset must have shape ({B}, {2 * kh * kw}, {H}, {W}) for a {kh}x{kw} kernel, got {offset.data.shape}"
        )
    out_data = kernels.deform_forward(x.data, offset.data, w.data)
    if bias is not None:
        out_data = out_data + bias.data[None, :, None, None]

    def bwd(g):
        g = np.ascontiguousarray(g)
        gx, goff, gw = kernels.deform_backward(g, x.data, offset.data, w.data)
        if x.requires_grad:
            accumulate_grad(x, gx)
        if offset.requires_grad:
            accumulate_grad(offset, goff)
        if w.requires_grad:
            accumulate_grad(w, gw)
        if bias is not None and bias.requires_grad:
            accumulate_grad(bias, g.sum(axis=(0, 2, 3)))

    inputs = (x, offset, w) if bias is None else (x, offset, w, bias)
    return record(inputs, out_data, bwd)


# ---------------------------------------------------------------------------
# quantization support
# ---------------------------------------------------------------------------


def embed(table, indices):
    """Gather rows of a (K, n) table into a (B, n, h, w) map."""
    table = _as_tensor(table)
    idx = np.asarray(indices)
    out_data = np.ascontiguousarray(table.data[idx].transpose(0, 3, 1, 2))

    def bwd(g):
        if table.requires_grad:
            gt = np.zeros_like(table.data)
            np.add.at(gt, idx.reshape(-1), g.transpose(0, 2, 3, 1).reshape(-1, table.data.shape[1]))
            accumulate_grad(table, gt)

    return record((table,), out_data, bwd)


def straight_through(x, values):
    """Forward `values`, pass gradients through to x unchanged."""
    x = _as_tensor(x)
    values = np.asarray(values, dtype=np.float64)
    if values.shape != x.data.shape:
        raise ShapeError(f"straight_through values shape {values.shape} must match input {x.data.shape}")

    def bwd(g):
        if x.requires_grad:
            accumulate_grad(x, g)

    return record((x,), values, bwd)


# operator sugar on Tensor
Tensor.__add__ = lambda self, other: add(self, other)
Tensor.__radd__ = lambda self, other: add(self, other)
Tensor.__sub__ = lambda self, other: sub(self, other)
Tensor.__rsub__ = lambda self, other: sub(_as_tensor(other), self)
Tensor.__mul__ = lambda self, other: scale(self, other) if isinstance(other, (int, float)) else mul(self, other)
Tensor.__rmul__ = lambda self, other: scale(self, other) if isinstance(other, (int, float)) else mul(self, other)
Tensor.__neg__ = lambda self: neg(self)
