"""Selects the conv-kernel implementation at import time.

The compiled extension is used when it built successfully; otherwise the
numpy fallback. ``CNTNN_PURE_PYTHON=1`` forces the fallback (used by the
benchmark and the cross-backend tests). Both backends implement the same
three functions with identical signatures and agree to ~1e-14 relative
(accumulation order differs, so bit-identity is only guaranteed within one
backend).
"""

import os

from . import _conv_numpy

if os.environ.get("CNTNN_PURE_PYTHON"):
    _impl = _conv_numpy
    KERNEL_BACKEND = "numpy"
else:
    try:
        from . import _convkernels as _impl

        KERNEL_BACKEND = "compiled"
    except ImportError:
        _impl = _conv_numpy
        KERNEL_BACKEND = "numpy"


def _ascontig(a):
    import numpy as np

    return np.ascontiguousarray(a, dtype=np.float64)


def conv_forward(x, w, bias, stride):
    if KERNEL_BACKEND == "compiled":
        return _impl.conv_forward(_ascontig(x), _ascontig(w), _ascontig(bias), int(stride))
    return _impl.conv_forward(x, w, bias, stride)


def conv_grad_weights(x, gz, m, stride):
    if KERNEL_BACKEND == "compiled":
        return _impl.conv_grad_weights(_ascontig(x), _ascontig(gz), int(m), int(stride))
    return _impl.conv_grad_weights(x, gz, m, stride)


def conv_grad_input(w, gz, H, W, stride):
    if KERNEL_BACKEND == "compiled":
        return _impl.conv_grad_input(_ascontig(w), _ascontig(gz), int(H), int(W), int(stride))
    return _impl.conv_grad_input(w, gz, H, W, stride)
