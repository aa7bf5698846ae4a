"""Learnable codebook and nearest-neighbor quantization of latent maps."""

from dataclasses import dataclass

import numpy as np

from . import ops
from .errors import ConfigError, ShapeError
from .layers import Block
from .tensor import Tensor


class Codebook(Block):
    """K discrete code vectors of dimension `dim`.

    Entries start uniform in [-1/K, 1/K]; they are trainable during prior
    learning and frozen afterwards (see `set_trainable`).
    """

    def __init__(self, size, dim, rng=None, entries=None):
        if size < 1 or dim < 1:
            raise ConfigError(f"codebook needs size >= 1 and dim >= 1, got ({size}, {dim})")
        if entries is not None:
            arr = np.asarray(entries, dtype=np.float64)
            if arr.shape != (size, dim):
                raise ShapeError(f"entries shape {arr.shape} does not match ({size}, {dim})")
        else:
            arr = rng.uniform((size, dim), -1.0 / size, 1.0 / size)
        self.entries = Tensor(arr, requires_grad=True)

    @property
    def size(self):
        return self.entries.data.shape[0]

    @property
    def dim(self):
        return self.entries.data.shape[1]


@dataclass
class QuantizationResult:
    quantized: Tensor  # (B, dim, h, w), exact copies of codebook rows
    indices: np.ndarray  # (B, h, w) int64 into [0, K)


def quantize(latent, codebook):
    """Replace each latent vector by its nearest codebook entry.

    Nearest is the squared Euclidean distance argmin; ties resolve to the
    lowest index. No gradient flows through the argmin; callers that need the
    pass-through training rule wrap the result with `straight_through_latent`.
    """
    if codebook.size < 1:
        raise ConfigError("codebook is empty")
    data = latent.data if isinstance(latent, Tensor) else np.asarray(latent, dtype=np.float64)
    if data.ndim != 4:
        raise ShapeError(f"latent must be 4-D (B, dim, h, w), got {data.shape}")
    B, nz, h, w = data.shape
    if nz != codebook.dim:
        raise ShapeError(f"latent axis 1 is {nz}, expected codebook dim {codebook.dim}")
    entries = codebook.entries.data
    vecs = data.transpose(0, 2, 3, 1).reshape(-1, nz)
    indices = np.empty(vecs.shape[0], dtype=np.int64)
    # chunk the (positions x K x dim) distance tensor to bound memory
    chunk = max(1, (1 << 22) // (codebook.size * nz))
    for s in range(0, vecs.shape[0], chunk):
        d = np.sum((vecs[s : s + chunk, None, :] - entries[None, :, :]) ** 2, axis=2)
        indices[s : s + chunk] = np.argmin(d, axis=1)
    idx = indices.reshape(B, h, w)
    quantized = Tensor(np.ascontiguousarray(entries[idx].transpose(0, 3, 1, 2)))
    return QuantizationResult(quantized=quantized, indices=idx)


def straight_through_latent(latent, result):
    """Quantized values forward, gradients copied through to the encoder."""
    return ops.straight_through(latent, result.quantized.data)


def codebook_learning_loss(latent, codebook, result, beta_commit=0.25):
    """Prior-learning objective: pull selected entries toward the (stopped)
    encoder output, plus a commitment term pulling the encoder toward the
    (stopped) entries."""
    z_q = ops.embed(codebook.entries, result.indices)
    d1 = ops.sub(latent.detach(), z_q)
    codebook_term = ops.mean_all(ops.mul(d1, d1))
    d2 = ops.sub(latent, result.quantized.detach())
    commit = ops.mean_all(ops.mul(d2, d2))
    return ops.add(codebook_term, ops.scale(commit, beta_commit))


def code_alignment_loss(z_night, z_gt):
    """Mean squared distance between night-branch codes and frozen clean codes."""
    gt = z_gt.detach() if isinstance(z_gt, Tensor) else Tensor(z_gt)
    if z_night.data.shape != gt.data.shape:
        raise ShapeError(f"code shapes differ: {z_night.data.shape} vs {gt.data.shape}")
    d = ops.sub(z_night, gt)
    return ops.mean_all(ops.mul(d, d))
