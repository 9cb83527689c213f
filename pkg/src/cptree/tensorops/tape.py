"""A small reverse-mode autodiff tape over numpy arrays.

Every operation returns a :class:`Var` that remembers its parents and a
closure mapping the output gradient to parent gradients. ``backward`` walks
the graph once in reverse topological order. Gradients of intermediate nodes
are kept in a local table; only leaf variables (parameters and explicit
inputs) accumulate into ``.grad``, so calling ``backward`` twice adds up.
"""
from __future__ import annotations

import numpy as np

from .. import kernels


class UsageError(ValueError):
    pass


DTYPE = np.float64


class Var:
    __slots__ = ("value", "grad", "parents", "backward_fn", "requires_grad", "name", "__weakref__")

    def __init__(self, value, requires_grad=False, name=None, parents=(), backward_fn=None):
        self.value = np.asarray(value)
        self.grad = None
        self.parents = parents
        self.backward_fn = backward_fn
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    @property
    def is_leaf(self):
        return self.backward_fn is None

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        tag = f" {self.name}" if self.name else ""
        return f"Var{tag}(shape={self.value.shape})"

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return getitem(self, key)


def param(value, name=None, dtype=None):
    return Var(np.array(value, dtype=dtype or DTYPE), requires_grad=True, name=name)


def as_var(x) -> Var:
    return x if isinstance(x, Var) else Var(x)


def value_of(x):
    return x.value if isinstance(x, Var) else np.asarray(x)


def _op(value, parents, fn):
    req = any(p.requires_grad for p in parents)
    if not req:
        return Var(value)
    return Var(value, requires_grad=True, parents=parents, backward_fn=fn)


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def backward(root: Var, grad=None):
    """Propagate d(root)/d(leaf) into the ``.grad`` of every leaf that requires it."""
    if grad is None:
        if root.value.size != 1:
            raise UsageError(f"backward needs a scalar root, got shape {root.value.shape}")
        grad = np.ones_like(root.value)
    if not root.requires_grad:
        return
    order, seen, stack = [], set(), [(root, False)]
    while stack:
        v, done = stack.pop()
        if done:
            order.append(v)
            continue
        if id(v) in seen:
            continue
        seen.add(id(v))
        stack.append((v, True))
        for p in v.parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    grads = {id(root): np.asarray(grad, dtype=root.value.dtype)}
    for v in reversed(order):
        g = grads.pop(id(v), None)
        if g is None:
            continue
        if v.backward_fn is None:
            v.grad = g.copy() if v.grad is None else v.grad + g
            continue
        for p, pg in zip(v.parents, v.backward_fn(g)):
            if pg is None or not p.requires_grad:
                continue
            k = id(p)
            if k in grads:
                grads[k] = grads[k] + pg
            else:
                grads[k] = pg


# --------------------------------------------------------------------------
# elementwise


def add(a, b):
    a, b = as_var(a), as_var(b)
    sa, sb = a.value.shape, b.value.shape
    return _op(a.value + b.value, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def sub(a, b):
    a, b = as_var(a), as_var(b)
    sa, sb = a.value.shape, b.value.shape
    return _op(a.value - b.value, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(-g, sb)))


def neg(a):
    a = as_var(a)
    return _op(-a.value, (a,), lambda g: (-g,))


def mul(a, b):
    a, b = as_var(a), as_var(b)
    av, bv = a.value, b.value
    return _op(av * bv, (a, b), lambda g: (_unbroadcast(g * bv, av.shape), _unbroadcast(g * av, bv.shape)))


elementwise_product = mul


def sigmoid_np(x):
    """Logistic function via tanh: no overflow for any finite input."""
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def sigmoid(a):
    a = as_var(a)
    x = a.value if a.value.dtype.kind == "f" else a.value.astype(DTYPE)
    s = sigmoid_np(x)
    return _op(s, (a,), lambda g: (g * s * (1.0 - s),))


def tanh(a):
    a = as_var(a)
    t = np.tanh(a.value)
    return _op(t, (a,), lambda g: (g * (1.0 - t * t),))


def relu(a):
    a = as_var(a)
    mask = a.value > 0
    return _op(a.value * mask, (a,), lambda g: (g * mask,))


def absolute(a):
    a = as_var(a)
    sign = np.sign(a.value)
    return _op(np.abs(a.value), (a,), lambda g: (g * sign,))


def log(a):
    a = as_var(a)
    v = a.value
    return _op(np.log(v), (a,), lambda g: (g / v,))


def softmax(a, axis=-1):
    a = as_var(a)
    z = a.value - a.value.max(axis=axis, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=axis, keepdims=True)

    def fn(g):
        return (s * (g - (g * s).sum(axis=axis, keepdims=True)),)

    return _op(s, (a,), fn)


def dropout(a, rate, training, rng=None):
    """Inverted dropout: survivors are scaled by 1/(1-rate) at training time."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must lie in [0, 1), got {rate}")
    a = as_var(a)
    if not training or rate == 0.0:
        return a
    rng = rng if rng is not None else np.random.default_rng()
    mask = (rng.random(a.value.shape) >= rate).astype(a.value.dtype) / (1.0 - rate)
    return mul(a, mask)


# --------------------------------------------------------------------------
# linear algebra and shape


def matmul(a, b):
    a, b = as_var(a), as_var(b)
    av, bv = a.value, b.value

    def fn(g):
        if av.ndim == 1 and bv.ndim == 1:
            return g * bv, g * av
        if av.ndim == 1 and bv.ndim == 2:
            return bv @ g, np.outer(av, g)
        if av.ndim == 2 and bv.ndim == 1:
            return np.outer(g, bv), av.T @ g
        ga = g @ np.swapaxes(bv, -1, -2)
        gb = np.swapaxes(av, -1, -2) @ g
        return _unbroadcast(ga, av.shape), _unbroadcast(gb, bv.shape)

    return _op(av @ bv, (a, b), fn)


def sum(a, axis=None, keepdims=False):  # noqa: A001 - mirrors numpy
    a = as_var(a)
    shape = a.value.shape

    def fn(g):
        if axis is None:
            return (np.broadcast_to(g, shape).copy(),)
        gg = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gg, shape).copy(),)

    return _op(a.value.sum(axis=axis, keepdims=keepdims), (a,), fn)


def reshape(a, shape):
    a = as_var(a)
    old = a.value.shape
    return _op(a.value.reshape(shape), (a,), lambda g: (g.reshape(old),))


def transpose(a, axes=None):
    a = as_var(a)
    inv = None if axes is None else np.argsort(axes)
    return _op(np.transpose(a.value, axes), (a,), lambda g: (np.transpose(g, inv),))


def getitem(a, key):
    a = as_var(a)
    shape, dtype = a.value.shape, a.value.dtype

    def fn(g):
        out = np.zeros(shape, dtype=dtype)
        np.add.at(out, key, g) if _fancy(key) else out.__setitem__(key, g)
        return (out,)

    return _op(a.value[key], (a,), fn)


def _fancy(key):
    keys = key if isinstance(key, tuple) else (key,)
    return any(isinstance(k, (list, np.ndarray)) for k in keys)


def concat(xs, axis=0):
    xs = [as_var(x) for x in xs]
    sizes = [x.value.shape[axis] for x in xs]
    cuts = np.cumsum(sizes)[:-1]
    return _op(np.concatenate([x.value for x in xs], axis=axis), tuple(xs), lambda g: tuple(np.split(g, cuts, axis=axis)))


def stack(xs, axis=0):
    xs = [as_var(x) for x in xs]
    n = len(xs)

    def fn(g):
        return tuple(np.take(g, i, axis=axis) for i in range(n))

    return _op(np.stack([x.value for x in xs], axis=axis), tuple(xs), fn)


def take_rows(a, index):
    """Gather rows ``a[index]``; the backward is a compiled scatter-add."""
    a = as_var(a)
    index = np.asarray(index, dtype=np.int64)
    n = a.value.shape[0]
    tail = a.value.shape[1:]

    def fn(g):
        g2 = g.reshape(len(index), -1)
        return (kernels.scatter_add_rows(index, g2, n).reshape((n,) + tail),)

    return _op(a.value[index], (a,), fn)


def gather_levels(sources, level, row):
    """Row gather across several source matrices: output row ``k`` is
    ``sources[level[k]][row[k]]``."""
    sources = [as_var(s) for s in sources]
    level = np.asarray(level, dtype=np.int64)
    row = np.asarray(row, dtype=np.int64)
    width = sources[0].value.shape[1]
    dtype = sources[0].value.dtype
    out = np.empty((len(level), width), dtype=dtype)
    groups = []
    for s in np.unique(level):
        pos = np.nonzero(level == s)[0]
        out[pos] = sources[s].value[row[pos]]
        groups.append((int(s), pos, row[pos]))

    def fn(g):
        res = [None] * len(sources)
        for s, pos, rows in groups:
            if sources[s].requires_grad:
                res[s] = kernels.scatter_add_rows(rows, g[pos], sources[s].value.shape[0])
        return tuple(res)

    return _op(out, tuple(sources), fn)


def segment_sum(a, offsets):
    a = as_var(a)
    offsets = np.asarray(offsets, dtype=np.int64)
    counts = np.diff(offsets)
    return _op(kernels.segment_sum(a.value, offsets), (a,), lambda g: (np.repeat(g, counts, axis=0),))


def segment_prod(a, offsets):
    """Product of the rows of each segment; the backward uses leave-one-out
    products, so zero entries are handled exactly."""
    a = as_var(a)
    offsets = np.asarray(offsets, dtype=np.int64)
    x = a.value
    return _op(kernels.segment_prod(x, offsets), (a,), lambda g: (kernels.segment_prod_grad(x, offsets, g),))


def repeat_rows(a, counts):
    a = as_var(a)
    counts = np.asarray(counts, dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(counts)])
    return _op(np.repeat(a.value, counts, axis=0), (a,), lambda g: (kernels.segment_sum(g, offsets),))


def einsum(spec, a, b):
    """Two-operand einsum with gradients (no repeated output indices)."""
    a, b = as_var(a), as_var(b)
    ins, out = spec.split("->")
    ia, ib = ins.split(",")

    def fn(g):
        return np.einsum(f"{out},{ib}->{ia}", g, b.value), np.einsum(f"{ia},{out}->{ib}", a.value, g)

    return _op(np.einsum(spec, a.value, b.value), (a, b), fn)
