"""Dense float64 tensors with reverse-mode gradients.

A :class:`Tensor` wraps a numpy array. Operations whose inputs require
gradients record their parents together with a backward closure, and
:meth:`Tensor.backward` walks the recorded graph in reverse topological order,
accumulating ``.grad`` on the leaf tensors (the trainable parameters).

Only the operations needed by the trainable parts of the fusion pipeline carry
gradients; everything else in osfuse works on plain arrays.
"""

from __future__ import annotations

from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import ContractError, DimensionError

ArrayLike = Union["Tensor", np.ndarray, float, int, Sequence[float]]
BackwardFn = Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]


class Tensor:
    """An ndarray plus the bookkeeping for reverse-mode differentiation."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")
    # Let ``ndarray <op> Tensor`` fall through to the Tensor's reflected operator
    __array_ufunc__ = None

    def __init__(
        self,
        data: ArrayLike,
        requires_grad: bool = False,
        _parents: Tuple["Tensor", ...] = (),
        _backward: Optional[BackwardFn] = None,
    ):
        if isinstance(data, Tensor):
            data = data.data
        self.data: np.ndarray = np.asarray(data, dtype=np.float64)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = _backward

    # ------------------------------------------------------------------ basics
    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() needs a single value, tensor has shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    def __len__(self) -> int:
        return len(self.data)

    # --------------------------------------------------------------- autograd
    def backward(self, grad: Optional[np.ndarray] = None) -> None:
        """Accumulate d(self)/d(leaf) into every reachable leaf's ``.grad``."""
        if grad is None:
            if self.data.size != 1:
                raise ContractError(
                    f"backward() without a seed gradient needs a scalar, got shape {self.shape}"
                )
            grad = np.ones_like(self.data)
        if not self.requires_grad:
            return

        order: List[Tensor] = []
        seen = set()
        stack: List[Tuple[Tensor, bool]] = [(self, False)]
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
                if parent.requires_grad and id(parent) not in seen:
                    stack.append((parent, False))

        pending = {id(self): np.asarray(grad, dtype=np.float64)}
        for node in reversed(order):
            g = pending.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                pending[key] = pg if key not in pending else pending[key] + pg

    # -------------------------------------------------------------- operators
    def __add__(self, other: ArrayLike) -> "Tensor":
        return add(self, other)

    def __radd__(self, other: ArrayLike) -> "Tensor":
        return add(other, self)

    def __sub__(self, other: ArrayLike) -> "Tensor":
        return sub(self, other)

    def __rsub__(self, other: ArrayLike) -> "Tensor":
        return sub(other, self)

    def __mul__(self, other: ArrayLike) -> "Tensor":
        return mul(self, other)

    def __rmul__(self, other: ArrayLike) -> "Tensor":
        return mul(other, self)

    def __truediv__(self, other: ArrayLike) -> "Tensor":
        return div(self, other)

    def __rtruediv__(self, other: ArrayLike) -> "Tensor":
        return div(other, self)

    def __neg__(self) -> "Tensor":
        return neg(self)

    def __pow__(self, exponent: float) -> "Tensor":
        return power(self, exponent)

    def __matmul__(self, other: ArrayLike) -> "Tensor":
        return batched_matmul(self, other)

    def __rmatmul__(self, other: ArrayLike) -> "Tensor":
        return batched_matmul(other, self)

    def __getitem__(self, index) -> "Tensor":
        return getitem(self, index)

    # ------------------------------------------------------- method shortcuts
    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        return tmean(self, axis=axis, keepdims=keepdims)

    def max(self, axis=None, keepdims: bool = False) -> "Tensor":
        return tmax(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes) -> "Tensor":
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes or None)

    def swapaxes(self, a: int, b: int) -> "Tensor":
        axes = list(range(self.ndim))
        axes[a], axes[b] = axes[b], axes[a]
        return transpose(self, tuple(axes))

    def take(self, indices, axis: int) -> "Tensor":
        return take(self, indices, axis)

    def exp(self) -> "Tensor":
        return exp(self)

    def log(self) -> "Tensor":
        return log(self)

    def sqrt(self) -> "Tensor":
        return sqrt(self)

    def relu(self) -> "Tensor":
        return relu(self)


def as_tensor(value: ArrayLike) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def parameter(value: ArrayLike) -> Tensor:
    """A leaf tensor that collects gradients."""
    return Tensor(np.array(value, dtype=np.float64, copy=True), requires_grad=True)


def _node(data: np.ndarray, parents: Sequence[Tensor], backward: BackwardFn) -> Tensor:
    if any(p.requires_grad for p in parents):
        return Tensor(data, requires_grad=True, _parents=tuple(parents), _backward=backward)
    return Tensor(data)


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _normalize_axes(axis, ndim: int) -> Tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(a % ndim for a in axis)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return np.exp(-np.logaddexp(0.0, -x))


# ---------------------------------------------------------------- arithmetic
def add(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _node(a.data + b.data, (a, b), backward)


def sub(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _node(a.data - b.data, (a, b), backward)


def mul(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def backward(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _node(a.data * b.data, (a, b), backward)


def div(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def backward(g):
        ga = g / b.data
        gb = -g * a.data / (b.data * b.data)
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return _node(a.data / b.data, (a, b), backward)


def neg(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    return _node(-a.data, (a,), lambda g: (-g,))


def power(a: ArrayLike, exponent: float) -> Tensor:
    a = as_tensor(a)

    def backward(g):
        return (g * exponent * a.data ** (exponent - 1),)

    return _node(a.data**exponent, (a,), backward)


def matmul(a: ArrayLike, b: ArrayLike) -> Tensor:
    """Matrix product of an m×k and a k×n tensor."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul shape mismatch: {a.shape} x {b.shape}")

    def backward(g):
        return g @ b.data.T, a.data.T @ g

    return _node(a.data @ b.data, (a, b), backward)


def batched_matmul(a: ArrayLike, b: ArrayLike) -> Tensor:
    """``np.matmul`` over trailing matrix dims with broadcast batch dims."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul shape mismatch: {a.shape} x {b.shape}")

    def backward(g):
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return _node(np.matmul(a.data, b.data), (a, b), backward)


# ------------------------------------------------------------- elementwise
def exp(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.data)
    return _node(out, (a,), lambda g: (g * out,))


def log(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    return _node(np.log(a.data), (a,), lambda g: (g / a.data,))


def sqrt(a: ArrayLike) -> Tensor:
    """Square root; the gradient at 0 is taken as 0."""
    a = as_tensor(a)
    out = np.sqrt(a.data)

    def backward(g):
        safe = np.where(out > 0, out, 1.0)
        return (np.where(out > 0, g / (2.0 * safe), 0.0),)

    return _node(out, (a,), backward)


def sin(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    return _node(np.sin(a.data), (a,), lambda g: (g * np.cos(a.data),))


def cos(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    return _node(np.cos(a.data), (a,), lambda g: (-g * np.sin(a.data),))


def relu(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    return _node(np.maximum(a.data, 0.0), (a,), lambda g: (g * (a.data > 0),))


def softplus(a: ArrayLike) -> Tensor:
    """log(1 + e^x), overflow-safe."""
    a = as_tensor(a)
    return _node(np.logaddexp(0.0, a.data), (a,), lambda g: (g * _sigmoid(a.data),))


def sigmoid(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    out = _sigmoid(a.data)
    return _node(out, (a,), lambda g: (g * out * (1.0 - out),))


def clip(a: ArrayLike, lo: Optional[float] = None, hi: Optional[float] = None) -> Tensor:
    """Clamp values; gradient passes only where the input was inside the range."""
    a = as_tensor(a)
    out = np.clip(a.data, lo, hi)
    inside = np.ones(a.shape, dtype=bool)
    if lo is not None:
        inside &= a.data >= lo
    if hi is not None:
        inside &= a.data <= hi
    return _node(out, (a,), lambda g: (g * inside,))


# --------------------------------------------------------------- reductions
def tsum(a: ArrayLike, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    axes = _normalize_axes(axis, a.ndim)

    def backward(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g, a.shape).copy(),)

    return _node(a.data.sum(axis=axes, keepdims=keepdims), (a,), backward)


def tmean(a: ArrayLike, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    axes = _normalize_axes(axis, a.ndim)
    count = int(np.prod([a.shape[i] for i in axes])) if axes else 1
    return tsum(a, axis=axes, keepdims=keepdims) * (1.0 / count)


def tmax(a: ArrayLike, axis=None, keepdims: bool = False) -> Tensor:
    """Maximum; tied maxima share the gradient equally."""
    a = as_tensor(a)
    axes = _normalize_axes(axis, a.ndim)
    peak = a.data.max(axis=axes, keepdims=True)
    mask = a.data == peak
    share = mask / mask.sum(axis=axes, keepdims=True)

    def backward(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (g * share,)

    out = peak if keepdims else np.squeeze(peak, axis=axes)
    return _node(out, (a,), backward)


# ------------------------------------------------------------------- shaping
def reshape(a: ArrayLike, shape: Tuple[int, ...]) -> Tensor:
    a = as_tensor(a)
    return _node(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),))


def transpose(a: ArrayLike, axes: Optional[Tuple[int, ...]] = None) -> Tensor:
    a = as_tensor(a)
    if axes is None:
        axes = tuple(reversed(range(a.ndim)))
    inverse = tuple(np.argsort(axes))
    return _node(a.data.transpose(axes), (a,), lambda g: (g.transpose(inverse),))


def take(a: ArrayLike, indices, axis: int) -> Tensor:
    """Gather along one axis with a 1-D integer index array."""
    a = as_tensor(a)
    idx = np.asarray(indices, dtype=np.intp)
    axis = axis % a.ndim

    def backward(g):
        moved = np.moveaxis(g, axis, 0)
        acc = np.zeros((a.shape[axis],) + moved.shape[1:], dtype=np.float64)
        np.add.at(acc, idx, moved)
        return (np.moveaxis(acc, 0, axis),)

    return _node(np.take(a.data, idx, axis=axis), (a,), backward)


def getitem(a: ArrayLike, index) -> Tensor:
    a = as_tensor(a)
    parts = index if isinstance(index, tuple) else (index,)
    basic = all(p is None or p is Ellipsis or isinstance(p, (int, slice)) for p in parts)

    def backward(g):
        acc = np.zeros(a.shape, dtype=np.float64)
        if basic:
            acc[index] = g
        else:
            np.add.at(acc, index, g)
        return (acc,)

    return _node(a.data[index], (a,), backward)


def stack(tensors: Sequence[ArrayLike], axis: int = 0) -> Tensor:
    items = [as_tensor(t) for t in tensors]
    out = np.stack([t.data for t in items], axis=axis)
    norm_axis = axis % out.ndim

    def backward(g):
        return tuple(np.take(g, i, axis=norm_axis) for i in range(len(items)))

    return _node(out, items, backward)


def concat(tensors: Sequence[ArrayLike], axis: int = 0) -> Tensor:
    items = [as_tensor(t) for t in tensors]
    out = np.concatenate([t.data for t in items], axis=axis)
    cuts = np.cumsum([t.shape[axis] for t in items])[:-1]

    def backward(g):
        return tuple(np.split(g, cuts, axis=axis))

    return _node(out, items, backward)


def pad_axis(a: ArrayLike, axis: int, before: int, after: int) -> Tensor:
    """Zero-pad one axis."""
    a = as_tensor(a)
    axis = axis % a.ndim
    if before == 0 and after == 0:
        return a
    widths = [(0, 0)] * a.ndim
    widths[axis] = (before, after)
    keep = [slice(None)] * a.ndim
    keep[axis] = slice(before, before + a.shape[axis])
    keep = tuple(keep)
    return _node(np.pad(a.data, widths), (a,), lambda g: (g[keep],))


# ------------------------------------------------------------------ softmax
def softmax_lastdim(x: ArrayLike) -> Tensor:
    """Softmax over the last axis, stabilised by max subtraction."""
    x = as_tensor(x)
    if x.ndim == 0 or x.shape[-1] == 0:
        raise DimensionError(f"softmax needs a non-empty last dimension, got shape {x.shape}")
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        return (out * (g - (g * out).sum(axis=-1, keepdims=True)),)

    return _node(out, (x,), backward)


def log_softmax_lastdim(x: ArrayLike) -> Tensor:
    x = as_tensor(x)
    if x.ndim == 0 or x.shape[-1] == 0:
        raise DimensionError(f"log_softmax needs a non-empty last dimension, got shape {x.shape}")
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    out = shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    probs = np.exp(out)

    def backward(g):
        return (g - probs * g.sum(axis=-1, keepdims=True),)

    return _node(out, (x,), backward)


def custom(data: np.ndarray, parents: Sequence[Tensor], backward: BackwardFn) -> Tensor:
    """Register a fused operation whose backward is written by hand."""
    return _node(data, parents, backward)
