"""Minimal reverse-mode autodiff over dense float64 arrays.

A Tensor wraps an immutable numpy array; ops build the graph eagerly and
``backward()`` runs one reverse-topological accumulation pass, visiting
each producing op exactly once.  Everything is 64-bit; NaN/Inf are
rejected at construction so invariance tests never compare garbage.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

Array = np.ndarray


class ShapeError(ValueError):
    pass


class NumericError(ArithmeticError):
    pass


def _unbroadcast(grad: Array, shape: tuple[int, ...]) -> Array:
    """Sum `grad` down to `shape` (reverse of numpy broadcasting)."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and grad.shape[ax] != 1:
            grad = grad.sum(axis=ax, keepdims=True)
    return grad


class Tensor:
    """Immutable dense array node in the autodiff graph."""

    __slots__ = ("data", "grad", "requires_grad", "_backward", "_parents")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.array(data, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            raise NumericError("non-finite values in tensor construction")
        arr.flags.writeable = False
        self.data: Array = arr
        self.grad: Array | None = None
        self.requires_grad = bool(requires_grad)
        self._backward: Callable[[Array], Sequence[Array | None]] | None = None
        self._parents: tuple[Tensor, ...] = ()

    @classmethod
    def _node(cls, data, parents: tuple["Tensor", ...],
              backward: Callable[[Array], Sequence[Array | None]]) -> "Tensor":
        """Internal constructor for op results."""
        out = cls.__new__(cls)
        arr = np.asarray(data, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            raise NumericError("non-finite values produced by an operation")
        arr.flags.writeable = False
        out.data = arr
        out.grad = None
        out.requires_grad = any(p.requires_grad for p in parents)
        if out.requires_grad:
            out._parents = parents
            out._backward = backward
        else:
            out._parents = ()
            out._backward = None
        return out

    # -- basic protocol -------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.size != 1:
            raise ShapeError("item() on non-scalar tensor")
        return float(self.data.reshape(-1)[0])

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # -- autodiff -------------------------------------------------------

    def backward(self) -> None:
        """Accumulate d(self)/d(leaf) into ``leaf.grad`` for all leaves."""
        if self.size != 1:
            raise ShapeError("backward() requires a scalar output")
        if not self.requires_grad:
            return
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                topo.append(node)
                continue
            if id(node) in seen or not node.requires_grad:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                stack.append((p, False))
        grads: dict[int, Array] = {id(self): np.ones_like(self.data)}
        for node in reversed(topo):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node.grad = g if node.grad is None else node.grad + g
                continue
            for p, pg in zip(node._parents, node._backward(g)):
                if pg is None or not p.requires_grad:
                    continue
                key = id(p)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg

    def zero_grad(self) -> None:
        self.grad = None

    # -- arithmetic -----------------------------------------------------

    def __add__(self, other):
        other = as_tensor(other)
        return Tensor._node(
            self.data + other.data, (self, other),
            lambda g: (_unbroadcast(g, self.shape), _unbroadcast(g, other.shape)))

    __radd__ = __add__

    def __neg__(self):
        return Tensor._node(-self.data, (self,), lambda g: (-g,))

    def __sub__(self, other):
        other = as_tensor(other)
        return Tensor._node(
            self.data - other.data, (self, other),
            lambda g: (_unbroadcast(g, self.shape), _unbroadcast(-g, other.shape)))

    def __rsub__(self, other):
        return as_tensor(other) - self

    def __mul__(self, other):
        other = as_tensor(other)
        return Tensor._node(
            self.data * other.data, (self, other),
            lambda g: (_unbroadcast(g * other.data, self.shape),
                       _unbroadcast(g * self.data, other.shape)))

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = as_tensor(other)
        return Tensor._node(
            self.data / other.data, (self, other),
            lambda g: (_unbroadcast(g / other.data, self.shape),
                       _unbroadcast(-g * self.data / other.data ** 2, other.shape)))

    def __rtruediv__(self, other):
        return as_tensor(other) / self

    def __pow__(self, exponent: float):
        e = float(exponent)
        return Tensor._node(
            self.data ** e, (self,),
            lambda g: (g * e * self.data ** (e - 1.0),))

    def __matmul__(self, other):
        return matmul(self, other)

    # -- shape ops ------------------------------------------------------

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return Tensor._node(
            self.data.reshape(shape), (self,),
            lambda g: (g.reshape(self.shape),))

    @property
    def T(self) -> "Tensor":
        return Tensor._node(self.data.T, (self,), lambda g: (g.T,))

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        def bwd(g):
            if axis is None:
                return (np.broadcast_to(g, self.shape).copy(),)
            gg = g if keepdims else np.expand_dims(g, axis)
            return (np.broadcast_to(gg, self.shape).copy(),)
        return Tensor._node(self.data.sum(axis=axis, keepdims=keepdims), (self,), bwd)

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        if axis is None:
            n = self.size
        else:
            axes = axis if isinstance(axis, tuple) else (axis,)
            n = int(np.prod([self.shape[a] for a in axes]))
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)

    def take_flat(self, indices) -> "Tensor":
        """Gather from the flattened tensor; gradient scatter-adds back."""
        idx = np.asarray(indices, dtype=np.intp)
        flat = self.data.reshape(-1)

        def bwd(g):
            out = np.zeros(self.size)
            np.add.at(out, idx.reshape(-1), np.asarray(g).reshape(-1))
            return (out.reshape(self.shape),)

        return Tensor._node(flat[idx], (self,), bwd)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def constant(x) -> Tensor:
    return Tensor(x, requires_grad=False)


def parameter(x) -> Tensor:
    return Tensor(x, requires_grad=True)


# -- elementwise functions ----------------------------------------------

def relu(t: Tensor) -> Tensor:
    t = as_tensor(t)
    mask = (t.data > 0).astype(np.float64)
    return Tensor._node(t.data * mask, (t,), lambda g: (g * mask,))


def sin(t: Tensor) -> Tensor:
    t = as_tensor(t)
    return Tensor._node(np.sin(t.data), (t,), lambda g: (g * np.cos(t.data),))


def exp(t: Tensor) -> Tensor:
    t = as_tensor(t)
    out_data = np.exp(t.data)
    return Tensor._node(out_data, (t,), lambda g: (g * out_data,))


def log(t: Tensor) -> Tensor:
    t = as_tensor(t)
    return Tensor._node(np.log(t.data), (t,), lambda g: (g / t.data,))


def sqrt(t: Tensor) -> Tensor:
    t = as_tensor(t)
    out_data = np.sqrt(t.data)
    return Tensor._node(out_data, (t,), lambda g: (g * 0.5 / out_data,))


def absval(t: Tensor) -> Tensor:
    t = as_tensor(t)
    s = np.sign(t.data)
    return Tensor._node(np.abs(t.data), (t,), lambda g: (g * s,))


def sigmoid(t: Tensor) -> Tensor:
    t = as_tensor(t)
    x = t.data
    z = np.exp(-np.abs(x))
    out_data = np.where(x >= 0, 1.0 / (1.0 + z), z / (1.0 + z))
    return Tensor._node(out_data, (t,),
                        lambda g: (g * out_data * (1.0 - out_data),))


def clip(t: Tensor, lo: float, hi: float) -> Tensor:
    """Clamp with pass-through gradient strictly inside [lo, hi]."""
    t = as_tensor(t)
    mask = ((t.data > lo) & (t.data < hi)).astype(np.float64)
    return Tensor._node(np.clip(t.data, lo, hi), (t,), lambda g: (g * mask,))


def sign_const(t: Tensor) -> Tensor:
    """Sign pattern of `t`, detached from the graph."""
    return constant(np.sign(t.data))


# -- linear algebra -----------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError("matmul expects 2-D tensors")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"inner dimensions disagree: {a.shape} @ {b.shape}")
    return Tensor._node(
        a.data @ b.data, (a, b),
        lambda g: (g @ b.data.T, a.data.T @ g))


def inv(t: Tensor) -> Tensor:
    """Matrix inverse; d(A^-1) = -A^-1 dA A^-1."""
    t = as_tensor(t)
    if t.ndim != 2 or t.shape[0] != t.shape[1]:
        raise ShapeError("inv expects a square matrix")
    out_data = np.linalg.inv(t.data)
    return Tensor._node(
        out_data, (t,),
        lambda g: (-out_data.T @ g @ out_data.T,))


def softmax_rows(t: Tensor) -> Tensor:
    """Row-wise softmax with max subtraction for stability."""
    t = as_tensor(t)
    if t.ndim != 2:
        raise ShapeError("softmax_rows expects a 2-D tensor")
    z = t.data - t.data.max(axis=1, keepdims=True)
    e = np.exp(z)
    p = e / e.sum(axis=1, keepdims=True)
    return Tensor._node(
        p, (t,),
        lambda g: (p * (g - (g * p).sum(axis=1, keepdims=True)),))


def bmm(a: Tensor, b: Tensor) -> Tensor:
    """Batched matmul: (c, n, k) @ (c, k, m) -> (c, n, m)."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 3 or b.ndim != 3 or a.shape[0] != b.shape[0] \
            or a.shape[2] != b.shape[1]:
        raise ShapeError(f"bmm shapes {a.shape} and {b.shape} incompatible")
    return Tensor._node(
        a.data @ b.data, (a, b),
        lambda g: (g @ b.data.transpose(0, 2, 1),
                   a.data.transpose(0, 2, 1) @ g))


def concat(parts: Sequence[Tensor], axis: int = 0) -> Tensor:
    parts = [as_tensor(p) for p in parts]
    sizes = [p.shape[axis] for p in parts]
    splits = np.cumsum(sizes)[:-1]

    def bwd(g):
        return tuple(np.split(g, splits, axis=axis))

    return Tensor._node(np.concatenate([p.data for p in parts], axis=axis),
                        tuple(parts), bwd)


def permute_axis(t: Tensor, perm, axis: int) -> Tensor:
    """Reorder `t` along `axis` by the permutation `perm`."""
    t = as_tensor(t)
    perm = np.asarray(perm, dtype=np.intp)
    invp = np.argsort(perm)
    return Tensor._node(np.take(t.data, perm, axis=axis), (t,),
                        lambda g: (np.take(g, invp, axis=axis),))


def stack(parts: Sequence[Tensor], axis: int = 0) -> Tensor:
    parts = [as_tensor(p) for p in parts]

    def bwd(g):
        return tuple(np.moveaxis(g, axis, 0)[i] for i in range(len(parts)))

    return Tensor._node(np.stack([p.data for p in parts], axis=axis),
                        tuple(parts), bwd)
