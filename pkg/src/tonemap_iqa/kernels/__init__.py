"""Hot numeric kernels with two interchangeable backends.

The numba backend (``@njit`` kernels, parallel over output cells) is
used when numba imports successfully. Setting the environment variable
``TONEMAP_IQA_NUMBA`` to ``0``/``false``/``off`` before import forces
the pure-numpy fallback; the same happens automatically when numba is
not installed. Both backends implement the same signatures and agree to
floating-point roundoff; ``benchmarks/bench_kernels.py`` compares their
speed.

One exception: conv2d always routes to the im2col+BLAS implementation.
Convolution is GEMM-shaped work and BLAS beats any jitted direct loop
by a wide margin (measured ~6-25x here); the jitted direct conv stays
in ``_numba_impl`` as a cross-check and benchmark subject.

Backend choice happens once at import time. Every kernel is a pure
function, safe to call from any number of threads.
"""

import os

from . import _numpy_impl

_FALSEY = {"0", "false", "off", "no"}


def _numba_wanted() -> bool:
    return os.environ.get("TONEMAP_IQA_NUMBA", "").strip().lower() not in _FALSEY


_backend = "numpy"
maxpool2d = _numpy_impl.maxpool2d
box_downsample2 = _numpy_impl.box_downsample2
channel_mean_std = _numpy_impl.channel_mean_std
if _numba_wanted():
    try:
        from . import _numba_impl
    except ImportError:
        pass
    else:
        _backend = "numba"
        maxpool2d = _numba_impl.maxpool2d
        box_downsample2 = _numba_impl.box_downsample2
        channel_mean_std = _numba_impl.channel_mean_std

conv2d = _numpy_impl.conv2d


def active_backend() -> str:
    """Name of the backend selected at import time: "numba" or "numpy"."""
    return _backend

__all__ = [
    "active_backend",
    "conv2d",
    "maxpool2d",
    "box_downsample2",
    "channel_mean_std",
]
