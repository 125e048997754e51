"""Kernel backend selection.

The compiled Cython core is used when available; otherwise the numpy
reference kernels take over with identical semantics. Set
MINIBERT_KERNELS=python to force the fallback (useful for benchmarking and
for debugging suspected kernel issues).
"""

import os

from minibert._kernels import pyref

if os.environ.get("MINIBERT_KERNELS", "").lower() in ("python", "pyref", "numpy"):
    _impl = pyref
    BACKEND = "python"
else:
    try:
        from minibert._kernels import _fast as _impl

        BACKEND = "compiled"
    except ImportError:
        _impl = pyref
        BACKEND = "python"

gelu_forward = _impl.gelu_forward
gelu_backward = _impl.gelu_backward
softmax_forward = _impl.softmax_forward
softmax_backward = _impl.softmax_backward
log_softmax_forward = _impl.log_softmax_forward
log_softmax_backward = _impl.log_softmax_backward
layer_norm_forward = _impl.layer_norm_forward
layer_norm_backward = _impl.layer_norm_backward
adam_update = _impl.adam_update
