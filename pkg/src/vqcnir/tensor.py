"""Reverse-mode autodiff substrate: Tensor values and the recording Tape.

A `Tape` is an ordered list of recorded operations. Ops append an entry
(output tensor + backward rule) whenever a tape is active and any input
requires a gradient; `backward` replays the entries in reverse, which is a
valid topological order by construction and fixes the gradient accumulation
order, making repeated runs bit-identical.

Tensors are immutable after creation except for their gradient buffers.
Independent tapes may be used concurrently from different threads; the
active-tape stack is thread-local.
"""

import threading

import numpy as np

from .errors import ContractError

_tls = threading.local()


def _tape_stack():
    if not hasattr(_tls, "stack"):
        _tls.stack = []
    return _tls.stack


def current_tape():
    stack = _tape_stack()
    return stack[-1] if stack else None


class Tape:
    """Ordered record of operations; use as a context manager."""

    def __init__(self):
        self.entries = []

    def __enter__(self):
        _tape_stack().append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        popped = _tape_stack().pop()
        assert popped is self
        return False

    def record(self, out, backward_fn):
        self.entries.append((out, backward_fn))


class Tensor:
    """N-dimensional float64 array with an optional gradient buffer."""

    __slots__ = ("data", "requires_grad", "grad", "tape")

    def __init__(self, data, requires_grad=False, tape=None):
        arr = np.asarray(data, dtype=np.float64)
        # ascontiguousarray promotes 0-d to 1-d; keep true scalars 0-d
        self.data = arr.copy() if arr.ndim == 0 else np.ascontiguousarray(arr)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self.tape = tape

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def item(self):
        return float(self.data.reshape(-1)[0])

    def detach(self):
        """Same values, cut from the graph."""
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


def tensor(data, requires_grad=False):
    return Tensor(data, requires_grad=requires_grad)


def accumulate_grad(t, g):
    """Add g into t's gradient buffer. Copies on first write so buffers are
    never aliased between tensors."""
    if t.grad is None:
        t.grad = np.array(g, dtype=np.float64, copy=True)
    else:
        t.grad += g


def record(inputs, out_data, backward_fn):
    """Wrap an op result, registering the backward rule if a tape is active
    and any input participates in differentiation."""
    tape = current_tape()
    needs = tape is not None and any(t.requires_grad for t in inputs)
    out = Tensor(out_data, requires_grad=needs, tape=tape if needs else None)
    if needs:
        tape.record(out, backward_fn)
    return out


def backward(loss):
    """Populate gradients of every tensor the scalar `loss` depends on."""
    if not isinstance(loss, Tensor):
        raise ContractError("backward expects a Tensor")
    if loss.data.size != 1:
        raise ContractError(f"backward requires a scalar loss, got shape {loss.data.shape}")
    tape = loss.tape
    if tape is None:
        raise ContractError("loss was not produced on an active tape")
    # stale intermediate grads from an earlier backward on this tape
    for out, _ in tape.entries:
        out.grad = None
    loss.grad = np.ones_like(loss.data)
    for out, fn in reversed(tape.entries):
        if out.grad is not None:
            fn(out.grad)
