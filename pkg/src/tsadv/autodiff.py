"""Tape-based reverse-mode automatic differentiation over float64 numpy arrays.

Operations are recorded on the innermost active :class:`Tape` whenever one of
their operands participates in differentiation. Outside a tape, operations
just compute values, which is what evaluation-mode forward passes use.

    >>> x = Tensor([1.0, 2.0, 3.0], requires_grad=True)
    >>> with Tape() as tape:
    ...     loss = tsum(x * x)
    >>> backward(tape, loss)[x]
    array([2., 4., 6.])
"""

from __future__ import annotations

import os
from typing import Callable, Sequence

import numpy as np

# NaN/inf screening after every op; off by default because it costs a full scan.
DEBUG = os.environ.get("TSADV_DEBUG", "") not in ("", "0")

_TAPES: list["Tape"] = []


class ShapeError(ValueError):
    """Operand shapes are incompatible for the named operation."""

    def __init__(self, op: str, *shapes: tuple[int, ...]):
        self.op = op
        self.shapes = shapes
        joined = " and ".join(str(tuple(s)) for s in shapes)
        super().__init__(f"{op}: incompatible shapes {joined}")


class TapeError(RuntimeError):
    pass


class NonFiniteError(FloatingPointError):
    pass


class Tensor:
    """Dense float64 array with an optional gradient requirement.

    Tensors hash by identity, so they can key gradient maps directly.
    """

    __slots__ = ("data", "requires_grad", "name", "_tracked", "__weakref__")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.array(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.name = name
        # true once the tensor is an op output recorded on a tape
        self._tracked = False

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError("item", self.shape)
        return float(self.data.reshape(-1)[0])

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{tag})"

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
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return getitem(self, index)


class Node:
    __slots__ = ("op", "inputs", "output", "backward_fn")

    def __init__(self, op: str, inputs: tuple[Tensor, ...], output: Tensor,
                 backward_fn: Callable[[np.ndarray], Sequence[np.ndarray | None]]):
        self.op = op
        self.inputs = inputs
        self.output = output
        self.backward_fn = backward_fn


class Tape:
    """Ordered record of the primitive operations executed while active.

    Nodes are appended as operations run, so operands always precede the nodes
    consuming them. A tape supports exactly one :func:`backward` pass.
    """

    def __init__(self):
        self.nodes: list[Node] = []
        self.consumed = False

    def __enter__(self) -> "Tape":
        _TAPES.append(self)
        return self

    def __exit__(self, *exc) -> None:
        _TAPES.remove(self)

    def __len__(self) -> int:
        return len(self.nodes)


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _active_tape() -> Tape | None:
    return _TAPES[-1] if _TAPES else None


def _wants_grad(t: Tensor) -> bool:
    return t.requires_grad or t._tracked


def _check_finite(op: str, data: np.ndarray) -> None:
    if not np.all(np.isfinite(data)):
        raise NonFiniteError(f"{op}: produced NaN or infinity")


def _record(op: str, out_data: np.ndarray, inputs: tuple[Tensor, ...], backward_fn) -> Tensor:
    if DEBUG:
        _check_finite(op, out_data)
    out = Tensor.__new__(Tensor)
    out.data = out_data
    out.requires_grad = False
    out.name = None
    out._tracked = False
    tape = _active_tape()
    if tape is not None and any(_wants_grad(t) for t in inputs):
        out._tracked = True
        tape.nodes.append(Node(op, inputs, out, backward_fn))
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _broadcast_shape(op: str, a: Tensor, b: Tensor) -> tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(op, a.shape, b.shape) from None


# ---------------------------------------------------------------------------
# primitives


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("add", a, b)
    sa, sb = a.shape, b.shape
    return _record("add", a.data + b.data, (a, b),
                   lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("sub", a, b)
    sa, sb = a.shape, b.shape
    return _record("sub", a.data - b.data, (a, b),
                   lambda g: (_unbroadcast(g, sa), _unbroadcast(-g, sb)))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("mul", a, b)
    ad, bd = a.data, b.data
    return _record("mul", ad * bd, (a, b),
                   lambda g: (_unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)))


def matmul(a, b) -> Tensor:
    """Matrix product of a (..., n, k) operand with a (k, m) matrix."""
    a, b = as_tensor(a), as_tensor(b)
    if b.data.ndim != 2 or a.data.ndim < 1 or a.shape[-1] != b.shape[0]:
        raise ShapeError("matmul", a.shape, b.shape)
    ad, bd = a.data, b.data

    def grad_fn(g):
        ga = g @ bd.T if _wants_grad(a) else None
        gb = None
        if _wants_grad(b):
            gb = ad.reshape(-1, ad.shape[-1]).T @ g.reshape(-1, bd.shape[1])
        return ga, gb

    return _record("matmul", ad @ bd, (a, b), grad_fn)


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    # split by sign so exp never overflows
    xd = x.data
    z = np.exp(-np.abs(xd))
    out = np.where(xd >= 0, 1.0 / (1.0 + z), z / (1.0 + z))
    return _record("sigmoid", out, (x,), lambda g: (g * out * (1.0 - out),))


def tanh(x) -> Tensor:
    x = as_tensor(x)
    out = np.tanh(x.data)
    return _record("tanh", out, (x,), lambda g: (g * (1.0 - out * out),))


def relu(x) -> Tensor:
    x = as_tensor(x)
    mask = x.data > 0
    return _record("relu", np.where(mask, x.data, 0.0), (x,), lambda g: (g * mask,))


def dropout(x, rate: float, rng: np.random.Generator | None, train_mode: bool) -> Tensor:
    """Inverted dropout; identity unless ``train_mode`` and ``rate > 0``."""
    x = as_tensor(x)
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must lie in [0, 1), got {rate}")
    if not train_mode or rate == 0.0:
        return x
    if rng is None:
        raise ValueError("dropout in train mode needs a random generator")
    keep = 1.0 - rate
    mask = (rng.random(x.shape) < keep) / keep
    return _record("dropout", x.data * mask, (x,), lambda g: (g * mask,))


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    try:
        out = np.concatenate([t.data for t in ts], axis=axis)
    except ValueError:
        raise ShapeError("concat", *(t.shape for t in ts)) from None
    ax = axis % out.ndim
    bounds = np.cumsum([t.shape[ax] for t in ts])[:-1]
    return _record("concat", out, tuple(ts), lambda g: tuple(np.split(g, bounds, axis=ax)))


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    try:
        out = np.stack([t.data for t in ts], axis=axis)
    except ValueError:
        raise ShapeError("stack", *(t.shape for t in ts)) from None
    ax = axis % out.ndim
    return _record("stack", out, tuple(ts),
                   lambda g: tuple(np.take(g, i, axis=ax) for i in range(len(ts))))


def reshape(x, shape: tuple[int, ...]) -> Tensor:
    x = as_tensor(x)
    try:
        out = x.data.reshape(shape)
    except ValueError:
        raise ShapeError("reshape", x.shape, tuple(shape)) from None
    src = x.shape
    return _record("reshape", out, (x,), lambda g: (g.reshape(src),))


def getitem(x, index) -> Tensor:
    x = as_tensor(x)
    src = x.shape

    parts = index if isinstance(index, tuple) else (index,)
    basic = all(p is None or p is Ellipsis or isinstance(p, (int, np.integer, slice)) for p in parts)

    def grad_fn(g):
        full = np.zeros(src)
        if basic:
            full[index] = g
        else:
            np.add.at(full, index, g)
        return (full,)

    return _record("getitem", x.data[index], (x,), grad_fn)


def tsum(x) -> Tensor:
    x = as_tensor(x)
    src = x.shape
    return _record("sum", np.array(x.data.sum()), (x,), lambda g: (np.broadcast_to(g, src).copy(),))


def mean(x) -> Tensor:
    x = as_tensor(x)
    src, n = x.shape, x.size
    return _record("mean", np.array(x.data.mean()), (x,),
                   lambda g: (np.broadcast_to(g / n, src).copy(),))


def mse(pred, target, reduction: str = "mean") -> Tensor:
    """Mean squared error; ``reduction='sum'`` sums per-sample means over axis 0."""
    pred, target = as_tensor(pred), as_tensor(target)
    if pred.shape != target.shape:
        raise ShapeError("mse", pred.shape, target.shape)
    diff = pred.data - target.data
    if reduction == "mean":
        scale = 1.0 / max(diff.size, 1)
    elif reduction == "sum":
        scale = 1.0 / max(diff.size // max(diff.shape[0], 1), 1) if diff.ndim else 1.0
    else:
        raise ValueError(f"unknown reduction {reduction!r}")
    value = np.array((diff * diff).sum() * scale)
    return _record("mse", value, (pred, target),
                   lambda g: (2.0 * scale * g * diff, -2.0 * scale * g * diff))


# ---------------------------------------------------------------------------
# differentiation


class Gradients(dict):
    """Gradient map keyed by tensor; unseen tensors read as zeros."""

    def __missing__(self, key: Tensor) -> np.ndarray:
        return np.zeros(key.shape)


def backward(tape: Tape, loss: Tensor) -> Gradients:
    """Run reverse accumulation over ``tape`` from the scalar ``loss``.

    Returns gradients for every ``requires_grad`` tensor the tape touched;
    the ones the loss does not depend on get explicit zeros.
    """
    if tape.consumed:
        raise TapeError("tape already consumed by a previous backward pass")
    if not tape.nodes:
        raise TapeError("tape is empty")
    if loss.size != 1:
        raise ShapeError("backward", loss.shape)
    tape.consumed = True

    grads: dict[int, np.ndarray] = {id(loss): np.ones(loss.shape)}
    leaves: dict[int, Tensor] = {}
    for node in reversed(tape.nodes):
        g = grads.pop(id(node.output), None)
        for t in node.inputs:
            if t.requires_grad and not t._tracked:
                leaves[id(t)] = t
        if g is None:
            continue
        for t, gi in zip(node.inputs, node.backward_fn(g)):
            if gi is None or not _wants_grad(t):
                continue
            key = id(t)
            if key in grads:
                grads[key] = grads[key] + gi
            else:
                grads[key] = gi
    out = Gradients()
    for key, t in leaves.items():
        g = grads.get(key)
        out[t] = np.zeros(t.shape) if g is None else np.asarray(g, dtype=np.float64).reshape(t.shape)
    tape.nodes = []
    return out


def value_and_grad(fn: Callable[[], Tensor]) -> tuple[float, Gradients]:
    with Tape() as tape:
        loss = fn()
    return float(loss.data), backward(tape, loss)


def finite_difference_gradient(f: Callable[[np.ndarray], float], x: np.ndarray,
                               h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of scalar ``f`` at ``x``, one coordinate at a time."""
    if h <= 0:
        raise ValueError("step h must be positive")
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = float(f(x))
        flat[i] = orig - h
        fm = float(f(x))
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * h)
    return grad
