"""Kernel backend selection: numba-jitted loops or pure numpy.

The hot kernels (convolutions and deformable sampling) exist in two
implementations. `VQCNIR_BACKEND` picks the initial one:

    VQCNIR_BACKEND=numba   jitted loops (default when numba imports)
    VQCNIR_BACKEND=numpy   vectorized numpy, no compilation step

`set_backend` switches at runtime; `benchmarks/bench_backends.py` compares.
"""

import os

from .errors import ConfigError

try:
    from numba import njit  # noqa: F401

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - depends on environment
    NUMBA_AVAILABLE = False

    def njit(*args, **kwargs):
        """Identity decorator stand-in when numba is absent."""
        if args and callable(args[0]):
            return args[0]

        def wrap(fn):
            return fn

        return wrap


_env = os.environ.get("VQCNIR_BACKEND", "auto").strip().lower()
if _env not in ("auto", "numba", "numpy", ""):
    raise ConfigError(f"VQCNIR_BACKEND must be auto|numba|numpy, got {_env!r}")
if _env == "numba" and not NUMBA_AVAILABLE:
    raise ConfigError("VQCNIR_BACKEND=numba but numba is not importable")

_active = "numpy" if _env == "numpy" else ("numba" if NUMBA_AVAILABLE else "numpy")


def active_backend():
    return _active


def set_backend(name):
    """Switch the kernel backend at runtime ('numba' or 'numpy')."""
    global _active
    name = name.strip().lower()
    if name not in ("numba", "numpy"):
        raise ConfigError(f"unknown backend {name!r}")
    if name == "numba" and not NUMBA_AVAILABLE:
        raise ConfigError("numba backend requested but numba is not importable")
    _active = name
