# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernel core.

Mirrors `minibert._kernels.pyref` exactly: same function names, same
argument conventions, same return contracts. Arithmetic is done in double
precision and stored back in the array dtype, so float32 results agree with
the numpy fallback to rounding error.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport erf, exp, log, sqrt

cnp.import_array()

ctypedef fused floating:
    float
    double

cdef double INV_SQRT2 = 0.7071067811865476
cdef double INV_SQRT2PI = 0.3989422804014327


def _gelu_fwd(floating[::1] x, floating[::1] out):
    cdef Py_ssize_t i, n = x.shape[0]
    cdef double v
    for i in range(n):
        v = <double> x[i]
        out[i] = <floating> (0.5 * v * (1.0 + erf(v * INV_SQRT2)))


def _gelu_bwd(floating[::1] x, floating[::1] g, floating[::1] out):
    cdef Py_ssize_t i, n = x.shape[0]
    cdef double v, cdf, pdf
    for i in range(n):
        v = <double> x[i]
        cdf = 0.5 * (1.0 + erf(v * INV_SQRT2))
        pdf = INV_SQRT2PI * exp(-0.5 * v * v)
        out[i] = <floating> (<double> g[i] * (cdf + v * pdf))


def _softmax_fwd(floating[:, ::1] x, floating[:, ::1] out):
    cdef Py_ssize_t i, j, n = x.shape[0], d = x.shape[1]
    cdef double mx, s, e
    for i in range(n):
        mx = <double> x[i, 0]
        for j in range(1, d):
            if <double> x[i, j] > mx:
                mx = <double> x[i, j]
        s = 0.0
        for j in range(d):
            e = exp(<double> x[i, j] - mx)
            out[i, j] = <floating> e
            s += e
        for j in range(d):
            out[i, j] = <floating> (<double> out[i, j] / s)


def _softmax_bwd(floating[:, ::1] y, floating[:, ::1] g, floating[:, ::1] out):
    cdef Py_ssize_t i, j, n = y.shape[0], d = y.shape[1]
    cdef double dot
    for i in range(n):
        dot = 0.0
        for j in range(d):
            dot += <double> g[i, j] * <double> y[i, j]
        for j in range(d):
            out[i, j] = <floating> (<double> y[i, j] * (<double> g[i, j] - dot))


def _log_softmax_fwd(floating[:, ::1] x, floating[:, ::1] out):
    cdef Py_ssize_t i, j, n = x.shape[0], d = x.shape[1]
    cdef double mx, s, lse
    for i in range(n):
        mx = <double> x[i, 0]
        for j in range(1, d):
            if <double> x[i, j] > mx:
                mx = <double> x[i, j]
        s = 0.0
        for j in range(d):
            s += exp(<double> x[i, j] - mx)
        lse = log(s)
        for j in range(d):
            out[i, j] = <floating> (<double> x[i, j] - mx - lse)


def _log_softmax_bwd(floating[:, ::1] y, floating[:, ::1] g, floating[:, ::1] out):
    cdef Py_ssize_t i, j, n = y.shape[0], d = y.shape[1]
    cdef double gsum
    for i in range(n):
        gsum = 0.0
        for j in range(d):
            gsum += <double> g[i, j]
        for j in range(d):
            out[i, j] = <floating> (<double> g[i, j] - exp(<double> y[i, j]) * gsum)


def _layer_norm_fwd(floating[:, ::1] x, floating[::1] gain, floating[::1] bias,
                    double eps, floating[:, ::1] out,
                    floating[::1] mean, floating[::1] rstd):
    cdef Py_ssize_t i, j, n = x.shape[0], d = x.shape[1]
    cdef double mu, var, rs, diff
    for i in range(n):
        mu = 0.0
        for j in range(d):
            mu += <double> x[i, j]
        mu /= d
        var = 0.0
        for j in range(d):
            diff = <double> x[i, j] - mu
            var += diff * diff
        var /= d
        rs = 1.0 / sqrt(var + eps)
        mean[i] = <floating> mu
        rstd[i] = <floating> rs
        for j in range(d):
            out[i, j] = <floating> (((<double> x[i, j] - mu) * rs) * <double> gain[j] + <double> bias[j])


def _layer_norm_bwd(floating[:, ::1] x, floating[::1] gain,
                    floating[::1] mean, floating[::1] rstd, floating[:, ::1] g,
                    floating[:, ::1] gx, floating[::1] ggain, floating[::1] gbias):
    cdef Py_ssize_t i, j, n = x.shape[0], d = x.shape[1]
    cdef double mu, rs, xhat, gq, m1, m2
    for j in range(d):
        ggain[j] = 0
        gbias[j] = 0
    for i in range(n):
        mu = <double> mean[i]
        rs = <double> rstd[i]
        m1 = 0.0
        m2 = 0.0
        for j in range(d):
            xhat = (<double> x[i, j] - mu) * rs
            gq = <double> g[i, j] * <double> gain[j]
            ggain[j] = <floating> (<double> ggain[j] + <double> g[i, j] * xhat)
            gbias[j] = <floating> (<double> gbias[j] + <double> g[i, j])
            m1 += gq
            m2 += gq * xhat
        m1 /= d
        m2 /= d
        for j in range(d):
            xhat = (<double> x[i, j] - mu) * rs
            gq = <double> g[i, j] * <double> gain[j]
            gx[i, j] = <floating> (rs * (gq - m1 - xhat * m2))


def _adam(floating[::1] p, floating[::1] g, floating[::1] m, floating[::1] v,
          double c1, double c2, double lr, double beta1, double beta2,
          double eps):
    cdef Py_ssize_t i, n = p.shape[0]
    cdef double mi, vi, gi
    for i in range(n):
        gi = <double> g[i]
        mi = beta1 * <double> m[i] + (1.0 - beta1) * gi
        vi = beta2 * <double> v[i] + (1.0 - beta2) * gi * gi
        m[i] = <floating> mi
        v[i] = <floating> vi
        p[i] = <floating> (<double> p[i] - lr * (mi / c1) / (sqrt(vi / c2) + eps))


def gelu_forward(x):
    x = np.ascontiguousarray(x)
    out = np.empty_like(x)
    _gelu_fwd(x.ravel(), out.ravel())
    return out


def gelu_backward(x, grad_out):
    x = np.ascontiguousarray(x)
    grad_out = np.ascontiguousarray(grad_out, dtype=x.dtype)
    out = np.empty_like(x)
    _gelu_bwd(x.ravel(), grad_out.ravel(), out.ravel())
    return out


def softmax_forward(x):
    x = np.ascontiguousarray(x)
    out = np.empty_like(x)
    _softmax_fwd(x, out)
    return out


def softmax_backward(y, grad_out):
    y = np.ascontiguousarray(y)
    grad_out = np.ascontiguousarray(grad_out, dtype=y.dtype)
    out = np.empty_like(y)
    _softmax_bwd(y, grad_out, out)
    return out


def log_softmax_forward(x):
    x = np.ascontiguousarray(x)
    out = np.empty_like(x)
    _log_softmax_fwd(x, out)
    return out


def log_softmax_backward(y, grad_out):
    y = np.ascontiguousarray(y)
    grad_out = np.ascontiguousarray(grad_out, dtype=y.dtype)
    out = np.empty_like(y)
    _log_softmax_bwd(y, grad_out, out)
    return out


def layer_norm_forward(x, gain, bias, eps):
    x = np.ascontiguousarray(x)
    gain = np.ascontiguousarray(gain, dtype=x.dtype)
    bias = np.ascontiguousarray(bias, dtype=x.dtype)
    out = np.empty_like(x)
    mean = np.empty(x.shape[0], dtype=x.dtype)
    rstd = np.empty(x.shape[0], dtype=x.dtype)
    _layer_norm_fwd(x, gain, bias, float(eps), out, mean, rstd)
    return out, mean, rstd


def layer_norm_backward(x, gain, mean, rstd, grad_out):
    x = np.ascontiguousarray(x)
    gain = np.ascontiguousarray(gain, dtype=x.dtype)
    grad_out = np.ascontiguousarray(grad_out, dtype=x.dtype)
    gx = np.empty_like(x)
    ggain = np.empty_like(gain)
    gbias = np.empty_like(gain)
    _layer_norm_bwd(x, gain, mean, rstd, grad_out, gx, ggain, gbias)
    return gx, ggain, gbias


def adam_update(param, grad, m, v, step, lr, beta1, beta2, eps):
    c1 = 1.0 - beta1 ** step
    c2 = 1.0 - beta2 ** step
    _adam(param.ravel(), np.ascontiguousarray(grad, dtype=param.dtype).ravel(),
          m.ravel(), v.ravel(), c1, c2, float(lr), float(beta1), float(beta2), float(eps))
