"""Minimal reverse-mode automatic differentiation over float64 arrays.

A :class:`Tensor` wraps a numpy array and records, per operation, a
closure that routes the output gradient back to its parents.  Calling
``backward()`` on a scalar walks the graph in reverse topological order.
Only what the models need is implemented: elementwise arithmetic with
broadcasting, matmul, transpose, relu / leaky relu, exp, log, reductions
and numerically stable (masked) softmax built from those pieces.
"""

from __future__ import annotations

from typing import Callable, Iterable

import numpy as np

Array = np.ndarray


def _unbroadcast(grad: Array, shape: tuple[int, ...]) -> Array:
    """Sum a broadcast gradient back down to `shape`."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(
        self,
        data,
        requires_grad: bool = False,
        parents: tuple["Tensor", ...] = (),
        backward: Callable[[Array], None] | None = None,
    ):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: Array | None = None
        self.requires_grad = requires_grad
        self._parents = parents
        self._backward = backward

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def T(self) -> "Tensor":
        return transpose(self)

    def item(self) -> float:
        return float(self.data)

    def backward(self) -> None:
        if self.data.size != 1:
            raise ValueError("backward() needs a scalar root")
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad:
                    stack.append((parent, False))
        for node in order:
            node.grad = np.zeros_like(node.data)
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None:
                node._backward(node.grad)

    def zero_grad(self) -> None:
        self.grad = None

    # -- operator sugar -------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __rsub__(self, other):
        return add(mul(self, -1.0), other)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def sum(self, axis=None, keepdims: bool = False):
        return tensor_sum(self, axis=axis, keepdims=keepdims)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


def lift(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data: Array, parents: Iterable[Tensor], backward) -> Tensor:
    parents = tuple(parents)
    requires = any(p.requires_grad for p in parents)
    return Tensor(data, requires, parents if requires else (), backward if requires else None)


def add(a, b) -> Tensor:
    a, b = lift(a), lift(b)
    out_data = a.data + b.data

    def backward(g: Array) -> None:
        if a.requires_grad:
            a.grad += _unbroadcast(g, a.data.shape)
        if b.requires_grad:
            b.grad += _unbroadcast(g, b.data.shape)

    return _make(out_data, (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = lift(a), lift(b)
    out_data = a.data * b.data

    def backward(g: Array) -> None:
        if a.requires_grad:
            a.grad += _unbroadcast(g * b.data, a.data.shape)
        if b.requires_grad:
            b.grad += _unbroadcast(g * a.data, b.data.shape)

    return _make(out_data, (a, b), backward)


def div(a, b) -> Tensor:
    a, b = lift(a), lift(b)
    out_data = a.data / b.data

    def backward(g: Array) -> None:
        if a.requires_grad:
            a.grad += _unbroadcast(g / b.data, a.data.shape)
        if b.requires_grad:
            b.grad += _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape)

    return _make(out_data, (a, b), backward)


def matmul(a, b) -> Tensor:
    a, b = lift(a), lift(b)
    out_data = a.data @ b.data

    def backward(g: Array) -> None:
        if a.requires_grad:
            a.grad += g @ b.data.T
        if b.requires_grad:
            b.grad += a.data.T @ g

    return _make(out_data, (a, b), backward)


def transpose(a) -> Tensor:
    a = lift(a)
    out_data = a.data.T

    def backward(g: Array) -> None:
        if a.requires_grad:
            a.grad += g.T

    return _make(out_data, (a,), backward)


def relu(a) -> Tensor:
    a = lift(a)
    mask = a.data > 0
    out_data = np.where(mask, a.data, 0.0)

    def backward(g: Array) -> None:
        if a.requires_grad:
            a.grad += g * mask

    return _make(out_data, (a,), backward)


def leaky_relu(a, negative_slope: float = 0.2) -> Tensor:
    a = lift(a)
    mask = a.data > 0
    out_data = np.where(mask, a.data, negative_slope * a.data)

    def backward(g: Array) -> None:
        if a.requires_grad:
            a.grad += g * np.where(mask, 1.0, negative_slope)

    return _make(out_data, (a,), backward)


def exp(a) -> Tensor:
    a = lift(a)
    out_data = np.exp(a.data)

    def backward(g: Array) -> None:
        if a.requires_grad:
            a.grad += g * out_data

    return _make(out_data, (a,), backward)


def log(a) -> Tensor:
    a = lift(a)
    out_data = np.log(a.data)

    def backward(g: Array) -> None:
        if a.requires_grad:
            a.grad += g / a.data

    return _make(out_data, (a,), backward)


def tensor_sum(a, axis=None, keepdims: bool = False) -> Tensor:
    a = lift(a)
    out_data = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g: Array) -> None:
        if not a.requires_grad:
            return
        if axis is None:
            a.grad += np.broadcast_to(g, a.data.shape)
        elif keepdims:
            a.grad += np.broadcast_to(g, a.data.shape)
        else:
            a.grad += np.broadcast_to(np.expand_dims(g, axis), a.data.shape)

    return _make(out_data, (a,), backward)


def mean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = lift(a)
    if axis is None:
        count = a.data.size
    else:
        count = a.data.shape[axis]
    return mul(tensor_sum(a, axis=axis, keepdims=keepdims), 1.0 / count)


def softmax(logits: Tensor, axis: int, additive_mask: Array | None = None) -> Tensor:
    """Stable softmax; masked entries get -inf-like logits and zero weight.

    The per-slice max is subtracted as a constant, which leaves gradients
    unchanged and keeps ``exp`` in range.
    """
    if additive_mask is not None:
        logits = add(logits, Tensor(additive_mask))
    shift = np.max(logits.data, axis=axis, keepdims=True)  # constant, no grad
    e = exp(add(logits, Tensor(-shift)))
    return div(e, tensor_sum(e, axis=axis, keepdims=True))


def log_softmax(logits: Tensor, axis: int) -> Tensor:
    shift = np.max(logits.data, axis=axis, keepdims=True)
    shifted = add(logits, Tensor(-shift))
    return add(shifted, mul(log(tensor_sum(exp(shifted), axis=axis, keepdims=True)), -1.0))
