"""Dense float tensors with reverse-mode automatic differentiation.

A forward pass records a tape (each result tensor keeps its parents and a
backward closure); `backward()` on a scalar loss walks the tape in reverse
topological order, accumulates gradients into every requires_grad ancestor,
and frees the tape afterwards. Data lives in numpy arrays: float32 for
training, float64 for gradient verification.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit

from minibert import _kernels as K

DEFAULT_DTYPE = np.float32


class ShapeError(ValueError):
    """Operand shapes violate an operation's contract."""


_grad_enabled = True


class no_grad:
    """Context manager that disables tape recording (evaluation mode)."""

    def __enter__(self):
        global _grad_enabled
        self._prev = _grad_enabled
        _grad_enabled = False
        return self

    def __exit__(self, *exc):
        global _grad_enabled
        _grad_enabled = self._prev
        return False


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward_fn")

    def __init__(self, data, requires_grad=False, dtype=None):
        if isinstance(data, Tensor):
            data = data.data
        self.data = np.asarray(data, dtype=dtype if dtype is not None else None)
        if self.data.dtype.kind != "f":
            self.data = self.data.astype(DEFAULT_DTYPE)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward_fn = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.dtype.name}, requires_grad={self.requires_grad})"

    def item(self):
        return float(self.data.reshape(()))

    def zero_grad(self):
        self.grad = None

    def detach(self):
        return Tensor(self.data, requires_grad=False)

    # -- autodiff ----------------------------------------------------------

    def backward(self, free_tape=True):
        """Accumulate d(self)/d(ancestor) into every requires_grad ancestor.

        Repeated calls (pass free_tape=False to keep the tape alive) add
        their contributions on top of existing grads.
        """
        if self.data.size != 1:
            raise ValueError(f"backward() needs a scalar loss, got shape {self.shape}")
        topo = _toposort(self)
        # local accumulation map so a second backward() is not contaminated
        # by grads stored during the first
        acc = {id(self): np.ones_like(self.data)}
        for node in reversed(topo):
            g = acc.pop(id(node), None)
            if g is None:
                continue
            if node.requires_grad:
                node.grad = g if node.grad is None else node.grad + g
            if node._backward_fn is not None:
                for parent, pg in node._backward_fn(g):
                    if not (parent.requires_grad or parent._backward_fn is not None):
                        continue
                    key = id(parent)
                    if key in acc:
                        acc[key] = acc[key] + pg
                    else:
                        acc[key] = pg
        if free_tape:
            for node in topo:
                if node._backward_fn is not None:
                    node._parents = ()
                    node._backward_fn = None

    # -- operator sugar ----------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __neg__(self):
        return mul(self, -1.0)

    def __sub__(self, other):
        return add(self, mul(_as_tensor(other, self.dtype), -1.0))

    def __rsub__(self, other):
        return add(_as_tensor(other, self.dtype), mul(self, -1.0))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return mul(self, 1.0 / float(scalar))

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return take(self, idx)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        return transpose(self, axes)

    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis=axis, keepdims=keepdims)


def _as_tensor(x, dtype):
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=dtype))


def _make(data, parents, backward_fn):
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward_fn = backward_fn
    return out


def _toposort(root):
    topo, visited, stack = [], set(), [(root, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in visited:
                stack.append((p, False))
    return topo


def _unbroadcast(g, shape):
    """Reduce a broadcasted gradient back to the operand's shape."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (gs, ss) in enumerate(zip(g.shape, shape)) if ss == 1 and gs != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# -- arithmetic -------------------------------------------------------------


def add(a, b):
    a = _as_tensor(a, getattr(b, "dtype", None))
    b = _as_tensor(b, a.dtype)
    try:
        data = a.data + b.data
    except ValueError:
        raise ShapeError(f"add: incompatible shapes {a.shape} and {b.shape}") from None

    def bw(g):
        return ((a, _unbroadcast(g, a.shape)), (b, _unbroadcast(g, b.shape)))

    return _make(data, (a, b), bw)


def mul(a, b):
    a = _as_tensor(a, getattr(b, "dtype", None))
    b = _as_tensor(b, a.dtype)
    try:
        data = a.data * b.data
    except ValueError:
        raise ShapeError(f"mul: incompatible shapes {a.shape} and {b.shape}") from None

    def bw(g):
        return (
            (a, _unbroadcast(g * b.data, a.shape)),
            (b, _unbroadcast(g * a.data, b.shape)),
        )

    return _make(data, (a, b), bw)


def matmul(a, b):
    a = _as_tensor(a, None)
    b = _as_tensor(b, None)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul needs >=2-D operands, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: inner dimensions disagree for shapes {a.shape} and {b.shape}")
    data = a.data @ b.data

    def bw(g):
        ga = g @ np.swapaxes(b.data, -1, -2)
        gb = np.swapaxes(a.data, -1, -2) @ g
        return ((a, _unbroadcast(ga, a.shape)), (b, _unbroadcast(gb, b.shape)))

    return _make(data, (a, b), bw)


# -- shape manipulation ------------------------------------------------------


def reshape(x, shape):
    old = x.shape

    def bw(g):
        return ((x, g.reshape(old)),)

    return _make(x.data.reshape(shape), (x,), bw)


def transpose(x, axes):
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))

    def bw(g):
        return ((x, g.transpose(inverse)),)

    return _make(x.data.transpose(axes), (x,), bw)


def take(x, idx):
    """Indexing/gather; backward scatter-adds, so repeated indices are safe."""
    shape = x.shape

    def bw(g):
        gx = np.zeros(shape, dtype=g.dtype)
        np.add.at(gx, idx, g)
        return ((x, gx),)

    return _make(x.data[idx], (x,), bw)


def embedding(table, ids):
    """Row lookup into a 2-D table, ids is any integer array."""
    ids = np.asarray(ids)
    width = table.shape[1]

    def bw(g):
        gt = np.zeros(table.shape, dtype=g.dtype)
        np.add.at(gt, ids.ravel(), g.reshape(-1, width))
        return ((table, gt),)

    return _make(table.data[ids], (table,), bw)


# -- reductions --------------------------------------------------------------


def sum_(x, axis=None, keepdims=False):
    data = x.data.sum(axis=axis, keepdims=keepdims)

    def bw(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return ((x, np.broadcast_to(g, x.shape).astype(x.dtype, copy=False)),)

    return _make(data, (x,), bw)


def mean(x, axis=None, keepdims=False):
    data = x.data.mean(axis=axis, keepdims=keepdims)
    count = x.size if axis is None else np.prod([x.shape[a] for a in np.atleast_1d(axis)])

    def bw(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return ((x, (np.broadcast_to(g, x.shape) / count).astype(x.dtype, copy=False)),)

    return _make(data, (x,), bw)


# -- nonlinearities ----------------------------------------------------------


def _rows_last(data, axis):
    """View `data` as 2-D with `axis` last; returns (rows, restore)."""
    moved = np.moveaxis(data, axis, -1)
    rows = np.ascontiguousarray(moved).reshape(-1, moved.shape[-1])
    shape = moved.shape

    def restore(rows2d):
        return np.moveaxis(rows2d.reshape(shape), -1, axis)

    return rows, restore


def softmax(x, axis=-1):
    if not -x.ndim <= axis < x.ndim:
        raise ShapeError(f"softmax: axis {axis} out of bounds for shape {x.shape}")
    rows, restore = _rows_last(x.data, axis)
    y2d = K.softmax_forward(rows)
    data = restore(y2d)

    def bw(g):
        g2d, _ = _rows_last(g, axis)
        return ((x, restore(K.softmax_backward(y2d, g2d))),)

    return _make(data, (x,), bw)


def log_softmax(x, axis=-1):
    if not -x.ndim <= axis < x.ndim:
        raise ShapeError(f"log_softmax: axis {axis} out of bounds for shape {x.shape}")
    rows, restore = _rows_last(x.data, axis)
    y2d = K.log_softmax_forward(rows)
    data = restore(y2d)

    def bw(g):
        g2d, _ = _rows_last(g, axis)
        return ((x, restore(K.log_softmax_backward(y2d, g2d))),)

    return _make(data, (x,), bw)


def gelu(x):
    def bw(g):
        return ((x, K.gelu_backward(x.data, g)),)

    return _make(K.gelu_forward(x.data), (x,), bw)


def sigmoid(x):
    y = expit(x.data)

    def bw(g):
        return ((x, g * y * (1.0 - y)),)

    return _make(y, (x,), bw)


def log_sigmoid(x):
    """log(sigmoid(x)), stable for large |x|."""
    data = -np.logaddexp(0.0, -x.data)

    def bw(g):
        return ((x, g * expit(-x.data)),)

    return _make(data, (x,), bw)


def log(x):
    def bw(g):
        return ((x, g / x.data),)

    return _make(np.log(x.data), (x,), bw)


def dropout(x, p, rng=None, train=True):
    """Inverted dropout; identity when p == 0 or in eval mode."""
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {p}")
    if not train or p == 0.0:
        return x
    if rng is None:
        raise ValueError("dropout in train mode needs an rng stream")
    keep = (rng.random(x.shape) >= p).astype(x.dtype)
    scale = np.asarray(1.0 / (1.0 - p), dtype=x.dtype)
    m = keep * scale

    def bw(g):
        return ((x, g * m),)

    return _make(x.data * m, (x,), bw)


def layer_norm(x, gain, bias, eps=1e-5):
    """Normalize the last axis to mean 0 / variance 1, then scale and shift."""
    if gain.shape != (x.shape[-1],) or bias.shape != (x.shape[-1],):
        raise ShapeError(
            f"layer_norm: gain/bias shapes {gain.shape}/{bias.shape} do not match feature width {x.shape[-1]}"
        )
    rows = np.ascontiguousarray(x.data).reshape(-1, x.shape[-1])
    y2d, mu, rstd = K.layer_norm_forward(rows, gain.data, bias.data, eps)

    def bw(g):
        g2d = np.ascontiguousarray(g).reshape(rows.shape)
        gx, ggain, gbias = K.layer_norm_backward(rows, gain.data, mu, rstd, g2d)
        return ((x, gx.reshape(x.shape)), (gain, ggain), (bias, gbias))

    return _make(y2d.reshape(x.shape), (x, gain, bias), bw)


# -- constructors ------------------------------------------------------------


def zeros(shape, dtype=DEFAULT_DTYPE, requires_grad=False):
    return Tensor(np.zeros(shape, dtype=dtype), requires_grad=requires_grad)


def ones(shape, dtype=DEFAULT_DTYPE, requires_grad=False):
    return Tensor(np.ones(shape, dtype=dtype), requires_grad=requires_grad)


def normal(rng, shape, std=0.02, dtype=DEFAULT_DTYPE, requires_grad=True):
    return Tensor((rng.standard_normal(shape) * std).astype(dtype), requires_grad=requires_grad)
