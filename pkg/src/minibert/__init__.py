"""Desk-scale BERT-style sentiment analysis toolkit."""

from minibert._kernels import BACKEND as kernel_backend

__version__ = "0.1.0"
__all__ = ["kernel_backend", "__version__"]
