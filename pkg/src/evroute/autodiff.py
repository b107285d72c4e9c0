"""Reverse-mode automatic differentiation over dense float64 numpy arrays.

A :class:`Tensor` wraps an ``np.ndarray`` and remembers how it was produced;
``backward()`` on a scalar walks the graph in reverse topological order and
accumulates gradients into every reachable tensor with ``requires_grad``.
Everything is 64-bit; desk-scale problem sizes make memory a non-issue and
tight finite-difference tolerances possible.
"""

from __future__ import annotations

import numpy as np

_GRAD_ENABLED = True


class no_grad:
    """Context manager that disables graph recording (pure inference)."""

    def __enter__(self):
        global _GRAD_ENABLED
        self._prev = _GRAD_ENABLED
        _GRAD_ENABLED = False
        return self

    def __exit__(self, *exc):
        global _GRAD_ENABLED
        _GRAD_ENABLED = self._prev
        return False


def grad_enabled() -> bool:
    return _GRAD_ENABLED


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum `grad` down to `shape` (reverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "_done")

    def __init__(self, data, requires_grad: bool = False, parents=(), backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = parents
        self._backward = backward
        self._done = False

    # -- introspection -------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, grad={self.requires_grad})"

    def zero_grad(self):
        self.grad = None

    # -- graph construction -------------------------------------------

    @staticmethod
    def _make(data, parents, backward):
        if _GRAD_ENABLED and any(p.requires_grad or p._parents for p in parents):
            return Tensor(data, parents=parents, backward=backward)
        return Tensor(data)

    # -- arithmetic ----------------------------------------------------

    def __add__(self, other):
        other = _as_tensor(other)
        out_data = self.data + other.data

        def bwd(g, acc):
            acc(self, _unbroadcast(g, self.data.shape))
            acc(other, _unbroadcast(g, other.data.shape))

        return Tensor._make(out_data, (self, other), bwd)

    __radd__ = __add__

    def __sub__(self, other):
        other = _as_tensor(other)
        out_data = self.data - other.data

        def bwd(g, acc):
            acc(self, _unbroadcast(g, self.data.shape))
            acc(other, _unbroadcast(-g, other.data.shape))

        return Tensor._make(out_data, (self, other), bwd)

    def __rsub__(self, other):
        return _as_tensor(other) - self

    def __mul__(self, other):
        other = _as_tensor(other)
        out_data = self.data * other.data

        def bwd(g, acc):
            acc(self, _unbroadcast(g * other.data, self.data.shape))
            acc(other, _unbroadcast(g * self.data, other.data.shape))

        return Tensor._make(out_data, (self, other), bwd)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _as_tensor(other)
        out_data = self.data / other.data

        def bwd(g, acc):
            acc(self, _unbroadcast(g / other.data, self.data.shape))
            acc(other, _unbroadcast(-g * self.data / other.data ** 2, other.data.shape))

        return Tensor._make(out_data, (self, other), bwd)

    def __neg__(self):
        def bwd(g, acc):
            acc(self, -g)

        return Tensor._make(-self.data, (self,), bwd)

    def __matmul__(self, other):
        other = _as_tensor(other)
        out_data = self.data @ other.data

        def bwd(g, acc):
            a, b = self.data, other.data
            if a.ndim == 1:
                acc(self, g @ np.swapaxes(b, -1, -2) if b.ndim > 1 else g * b)
            else:
                ga = g @ np.swapaxes(b, -1, -2) if b.ndim > 1 else np.outer(g, b)
                acc(self, _unbroadcast(ga, a.shape))
            if b.ndim == 1:
                acc(other, np.swapaxes(a, -1, -2) @ g if a.ndim > 1 else g * a)
            else:
                a2 = a if a.ndim > 1 else a[None, :]
                g2 = g if g.ndim > 1 else g[None, :]
                gb = np.swapaxes(a2, -1, -2) @ g2
                acc(other, _unbroadcast(gb, b.shape))

        return Tensor._make(out_data, (self, other), bwd)

    def __getitem__(self, idx):
        out_data = self.data[idx]

        def bwd(g, acc):
            full = np.zeros_like(self.data)
            np.add.at(full, idx, g)
            acc(self, full)

        return Tensor._make(out_data, (self,), bwd)

    # -- reductions / shape -------------------------------------------

    def sum(self, axis=None, keepdims=False):
        out_data = self.data.sum(axis=axis, keepdims=keepdims)

        def bwd(g, acc):
            if axis is None:
                acc(self, np.full_like(self.data, 1.0) * g)
            else:
                g2 = g if keepdims else np.expand_dims(g, axis)
                acc(self, np.broadcast_to(g2, self.data.shape).copy())

        return Tensor._make(out_data, (self,), bwd)

    def mean(self, axis=None, keepdims=False):
        if axis is None:
            n = self.data.size
        else:
            n = self.data.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        out_data = self.data.reshape(shape)
        src_shape = self.data.shape

        def bwd(g, acc):
            acc(self, g.reshape(src_shape))

        return Tensor._make(out_data, (self,), bwd)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        if not axes:
            axes = tuple(range(self.data.ndim - 1, -1, -1))
        out_data = self.data.transpose(axes)
        inv = np.argsort(axes)

        def bwd(g, acc):
            acc(self, g.transpose(inv))

        return Tensor._make(out_data, (self,), bwd)

    # -- backward ------------------------------------------------------

    def backward(self):
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar loss")
        if self._done:
            raise RuntimeError("backward() already called on this value")
        self._done = True

        topo: list[Tensor] = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))

        grads: dict[int, np.ndarray] = {id(self): np.ones_like(self.data)}

        def acc(t: Tensor, g: np.ndarray):
            k = id(t)
            if k in grads:
                grads[k] += g
            else:
                grads[k] = np.array(g, dtype=np.float64, copy=True)

        for node in reversed(topo):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node.requires_grad:
                if node.grad is None:
                    node.grad = np.zeros_like(node.data)
                node.grad += g
            if node._backward is not None:
                node._backward(g, acc)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


# -- elementwise nonlinearities ---------------------------------------


def relu(x: Tensor) -> Tensor:
    out_data = np.maximum(x.data, 0.0)

    def bwd(g, acc):
        acc(x, g * (x.data > 0.0))

    return Tensor._make(out_data, (x,), bwd)


def tanh(x: Tensor) -> Tensor:
    out_data = np.tanh(x.data)

    def bwd(g, acc):
        acc(x, g * (1.0 - out_data ** 2))

    return Tensor._make(out_data, (x,), bwd)


def exp(x: Tensor) -> Tensor:
    out_data = np.exp(x.data)

    def bwd(g, acc):
        acc(x, g * out_data)

    return Tensor._make(out_data, (x,), bwd)


def log(x: Tensor) -> Tensor:
    out_data = np.log(x.data)

    def bwd(g, acc):
        acc(x, g / x.data)

    return Tensor._make(out_data, (x,), bwd)


def sqrt(x: Tensor) -> Tensor:
    out_data = np.sqrt(x.data)

    def bwd(g, acc):
        acc(x, g * 0.5 / out_data)

    return Tensor._make(out_data, (x,), bwd)


# -- structural ops ---------------------------------------------------


def concat(tensors, axis: int = -1) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    out_data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def bwd(g, acc):
        for t, piece in zip(tensors, np.split(g, splits, axis=axis)):
            acc(t, piece)

    return Tensor._make(out_data, tuple(tensors), bwd)


def stack(tensors, axis: int = 0) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    out_data = np.stack([t.data for t in tensors], axis=axis)

    def bwd(g, acc):
        for i, t in enumerate(tensors):
            acc(t, np.take(g, i, axis=axis))

    return Tensor._make(out_data, tuple(tensors), bwd)


def softmax_masked(logits: Tensor, keep_mask, axis: int = -1) -> Tensor:
    """Softmax over entries where keep_mask == 1; masked entries come out
    exactly 0 (their logits are treated as -inf).

    Raises if some slice along `axis` has no unmasked entry.
    """
    keep = np.asarray(keep_mask, dtype=bool)
    keep = np.broadcast_to(keep, logits.data.shape)
    if not keep.any(axis=axis).all():
        raise ValueError("softmax_masked: a slice has every entry masked")
    z = np.where(keep, logits.data, -np.inf)
    z = z - z.max(axis=axis, keepdims=True)
    e = np.exp(z)
    e = np.where(keep, e, 0.0)
    p = e / e.sum(axis=axis, keepdims=True)

    def bwd(g, acc):
        inner = (g * p).sum(axis=axis, keepdims=True)
        acc(logits, p * (g - inner))

    return Tensor._make(p, (logits,), bwd)


def batch_norm(x: Tensor, gamma: Tensor, beta: Tensor, running_mean=None,
               running_var=None, training: bool = True, momentum: float = 0.1,
               eps: float = 1e-5):
    """Normalize over axis 0 (the batch of rows); affine transform per feature.

    Training mode computes batch statistics (and, when running buffers are
    given and gradient recording is on, updates them in place with the given
    momentum). Inference mode normalizes with the running statistics.
    """
    if training:
        if x.data.shape[0] < 2:
            raise ValueError("batch_norm needs at least 2 rows in training mode")
        mu = x.mean(axis=0, keepdims=True)
        centered = x - mu
        var = (centered * centered).mean(axis=0, keepdims=True)
        if running_mean is not None and _GRAD_ENABLED:
            running_mean *= 1.0 - momentum
            running_mean += momentum * mu.data[0]
            running_var *= 1.0 - momentum
            running_var += momentum * var.data[0]
        return centered / sqrt(var + eps) * gamma + beta
    if running_mean is None:
        raise ValueError("inference-mode batch_norm needs running statistics")
    scale = gamma.data / np.sqrt(running_var + eps)
    return x * Tensor(scale) + Tensor(beta.data - running_mean * scale)
