"""Minimal reverse-mode autodiff over float64 numpy arrays.

Just the ops the forecaster needs: batched matmul, axis permutation,
reshape, broadcast-aware arithmetic, sigmoid, last-axis softmax, layer
norm, row gather, last-axis concat, and full-mean reduction. Every op
accepts arbitrary leading batch dimensions.
"""

from __future__ import annotations

import numpy as np

_GRAD_ENABLED = True


class no_grad:
    def __enter__(self):
        global _GRAD_ENABLED
        self._prev = _GRAD_ENABLED
        _GRAD_ENABLED = False

    def __exit__(self, *exc):
        global _GRAD_ENABLED
        _GRAD_ENABLED = self._prev
        return False


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_backward", "_parents")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._backward = None
        self._parents: tuple[Tensor, ...] = ()

    @property
    def shape(self):
        return self.data.shape

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    def backward(self, grad: np.ndarray | None = None):
        """Accumulate gradients into every tensor reachable from this one."""
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in seen:
                    stack.append((parent, False))
        self.grad = np.ones_like(self.data) if grad is None else np.asarray(grad)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)


def _accum(t: Tensor, g: np.ndarray):
    t.grad = g if t.grad is None else t.grad + g


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def _wire(out: Tensor, parents: tuple[Tensor, ...], backward) -> Tensor:
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward
    return out


def constant(data) -> Tensor:
    return Tensor(data, requires_grad=False)


def add(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data + b.data)

    def bw(g):
        if a.requires_grad:
            _accum(a, _unbroadcast(g, a.data.shape))
        if b.requires_grad:
            _accum(b, _unbroadcast(g, b.data.shape))

    return _wire(out, (a, b), bw)


def sub(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data - b.data)

    def bw(g):
        if a.requires_grad:
            _accum(a, _unbroadcast(g, a.data.shape))
        if b.requires_grad:
            _accum(b, _unbroadcast(-g, b.data.shape))

    return _wire(out, (a, b), bw)


def mul(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data * b.data)

    def bw(g):
        if a.requires_grad:
            _accum(a, _unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            _accum(b, _unbroadcast(g * a.data, b.data.shape))

    return _wire(out, (a, b), bw)


def scale(a: Tensor, s: float) -> Tensor:
    out = Tensor(a.data * s)

    def bw(g):
        if a.requires_grad:
            _accum(a, g * s)

    return _wire(out, (a,), bw)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data @ b.data)

    def bw(g):
        if a.requires_grad:
            _accum(a, _unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.data.shape))
        if b.requires_grad:
            _accum(b, _unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.data.shape))

    return _wire(out, (a, b), bw)


def transpose_last(a: Tensor) -> Tensor:
    out = Tensor(np.swapaxes(a.data, -1, -2))

    def bw(g):
        if a.requires_grad:
            _accum(a, np.swapaxes(g, -1, -2))

    return _wire(out, (a,), bw)


def permute(a: Tensor, axes: tuple[int, ...]) -> Tensor:
    out = Tensor(np.transpose(a.data, axes))
    inv = tuple(np.argsort(axes))

    def bw(g):
        if a.requires_grad:
            _accum(a, np.transpose(g, inv))

    return _wire(out, (a,), bw)


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    out = Tensor(a.data.reshape(shape))

    def bw(g):
        if a.requires_grad:
            _accum(a, g.reshape(a.data.shape))

    return _wire(out, (a,), bw)


def sigmoid(a: Tensor) -> Tensor:
    x = a.data
    y = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))), np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))

    out = Tensor(y)

    def bw(g):
        if a.requires_grad:
            _accum(a, g * y * (1.0 - y))

    return _wire(out, (a,), bw)


def softmax(a: Tensor) -> Tensor:
    """Softmax over the last axis, max-shifted for stability."""
    z = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=-1, keepdims=True)
    out = Tensor(y)

    def bw(g):
        if a.requires_grad:
            _accum(a, y * (g - (g * y).sum(axis=-1, keepdims=True)))

    return _wire(out, (a,), bw)


def layer_norm(a: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-8) -> Tensor:
    """Normalize over the last axis, then apply elementwise gain and bias."""
    mu = a.data.mean(axis=-1, keepdims=True)
    var = a.data.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (a.data - mu) * inv
    out = Tensor(xhat * gain.data + bias.data)

    def bw(g):
        if gain.requires_grad:
            _accum(gain, _unbroadcast(g * xhat, gain.data.shape))
        if bias.requires_grad:
            _accum(bias, _unbroadcast(g, bias.data.shape))
        if a.requires_grad:
            gy = g * gain.data
            m1 = gy.mean(axis=-1, keepdims=True)
            m2 = (gy * xhat).mean(axis=-1, keepdims=True)
            _accum(a, inv * (gy - m1 - xhat * m2))

    return _wire(out, (a, gain, bias), bw)


def gather_rows(a: Tensor, idx: np.ndarray) -> Tensor:
    """out[..., i, :] = a[..., idx[..., i], :] with integer idx."""
    idx = np.asarray(idx, dtype=np.int64)
    out = Tensor(np.take_along_axis(a.data, idx[..., None], axis=-2))

    def bw(g):
        if a.requires_grad:
            gx = np.zeros_like(a.data)
            sel = list(np.indices(g.shape, sparse=False))
            sel[-2] = np.broadcast_to(idx[..., None], g.shape)
            np.add.at(gx, tuple(sel), g)
            _accum(a, gx)

    return _wire(out, (a,), bw)


def concat_last(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(np.concatenate([a.data, b.data], axis=-1))
    na = a.data.shape[-1]

    def bw(g):
        if a.requires_grad:
            _accum(a, g[..., :na])
        if b.requires_grad:
            _accum(b, g[..., na:])

    return _wire(out, (a, b), bw)


def mean_all(a: Tensor) -> Tensor:
    out = Tensor(a.data.mean())

    def bw(g):
        if a.requires_grad:
            _accum(a, np.full_like(a.data, float(g) / a.data.size))

    return _wire(out, (a,), bw)
