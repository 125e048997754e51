"""Numpy reference implementations of the hot kernels.

Same contracts as the compiled `_fast` module; used as the fallback backend
and as the ground truth in the backend parity tests. All 2-D kernels expect
C-contiguous arrays with the feature/class axis last.
"""

import numpy as np
from scipy.special import erf

_INV_SQRT2 = 0.7071067811865476
_INV_SQRT2PI = 0.3989422804014327


def gelu_forward(x):
    return 0.5 * x * (1.0 + erf(x * _INV_SQRT2))


def gelu_backward(x, grad_out):
    # d/dx [x * Phi(x)] = Phi(x) + x * phi(x)
    phi = _INV_SQRT2PI * np.exp(-0.5 * x * x)
    cdf = 0.5 * (1.0 + erf(x * _INV_SQRT2))
    return grad_out * (cdf + x * phi)


def softmax_forward(x):
    """Row softmax of a 2-D array, max-subtracted for stability."""
    shifted = x - x.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def softmax_backward(y, grad_out):
    dot = (grad_out * y).sum(axis=1, keepdims=True)
    return y * (grad_out - dot)


def log_softmax_forward(x):
    shifted = x - x.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    return shifted - lse


def log_softmax_backward(y, grad_out):
    return grad_out - np.exp(y) * grad_out.sum(axis=1, keepdims=True)


def layer_norm_forward(x, gain, bias, eps):
    """Returns (y, mean, rstd); mean/rstd are cached for the backward pass."""
    mean = x.mean(axis=1)
    var = ((x - mean[:, None]) ** 2).mean(axis=1)
    rstd = 1.0 / np.sqrt(var + eps)
    xhat = (x - mean[:, None]) * rstd[:, None]
    return xhat * gain + bias, mean, rstd


def layer_norm_backward(x, gain, mean, rstd, grad_out):
    xhat = (x - mean[:, None]) * rstd[:, None]
    grad_gain = (grad_out * xhat).sum(axis=0)
    grad_bias = grad_out.sum(axis=0)
    gq = grad_out * gain
    m1 = gq.mean(axis=1, keepdims=True)
    m2 = (gq * xhat).mean(axis=1, keepdims=True)
    grad_x = rstd[:, None] * (gq - m1 - xhat * m2)
    return grad_x, grad_gain, grad_bias


def adam_update(param, grad, m, v, step, lr, beta1, beta2, eps):
    """Bias-corrected Adam step applied in place; `step` is the 1-based count."""
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * grad * grad
    mhat = m / (1.0 - beta1**step)
    vhat = v / (1.0 - beta2**step)
    param -= lr * mhat / (np.sqrt(vhat) + eps)
