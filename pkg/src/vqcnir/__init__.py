"""Night image restoration with a vector-quantized codebook prior.

The package is self-contained: a tape-based reverse-mode autodiff core with
numba-accelerated convolution kernels, the restoration network (codebook
prior, illumination enhancement, deformable cross-attention fusion), a
synthetic paired-data factory, and a CLI for the two-stage training flow.
"""

__version__ = "0.1.0"

from .backend import active_backend, set_backend
from .tensor import Tape, Tensor, backward, tensor

__all__ = ["Tape", "Tensor", "backward", "tensor", "active_backend", "set_backend", "__version__"]
