"""Dense float64 tensors with reverse-mode automatic differentiation.

Operations record a dynamic tape as they run.  Calling :func:`backward` on a
scalar result walks that tape once, in reverse topological order, and
accumulates gradients (``+=``) into every reachable tensor that has
``requires_grad`` set.  Gradients are never cleared implicitly; callers pair
each backward pass with :func:`zero_grads`.  All data is stored row-major in
double precision.
"""

from __future__ import annotations

import contextlib
from collections.abc import Sequence

import numpy as np


class ShapeError(ValueError):
    """Operand shapes do not satisfy an operation's contract."""


class NumericDomainError(ValueError):
    """Input values lie outside an operation's numeric domain."""


# Probability clamp applied inside log-based losses.
EPS_CLIP = 1e-7

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable tape recording inside the block (evaluation-only forwards)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    """A dense float64 array plus the bookkeeping needed for backprop.

    Attributes:
        data: the values, an ``np.ndarray`` of dtype float64.
        grad: same-shape gradient buffer, ``None`` until written by
            :func:`backward` or :func:`zero_grads`.
        requires_grad: whether gradients flow into (or through) this tensor.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # Small amount of operator sugar; the module-level functions do the work.
    def __add__(self, other):
        return add(self, _as_tensor(other))

    def __radd__(self, other):
        return add(_as_tensor(other), self)

    def __sub__(self, other):
        return sub(self, _as_tensor(other))

    def __rsub__(self, other):
        return sub(_as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, _as_tensor(other))

    def __rmul__(self, other):
        return mul(_as_tensor(other), self)

    def __matmul__(self, other):
        return matmul(self, _as_tensor(other))

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(()))


def _as_tensor(x) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(x)


def _make(data: np.ndarray, parents: tuple[Tensor, ...], backward) -> Tensor:
    """Wrap an op result, recording the tape edge only when gradients can flow."""
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward
    return out


# While a backward pass runs, gradients flow through pass-local buffers and
# are flushed into .grad at the end.  This keeps the contract that a second
# backward on the same tape adds the same gradient again rather than feeding
# on the remnants of the first pass.
_pass_grads: dict[int, list] | None = None


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if _pass_grads is not None:
        entry = _pass_grads.get(id(t))
        if entry is None:
            _pass_grads[id(t)] = [t, np.array(g, dtype=np.float64)]
        else:
            entry[1] += g
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _accumulate_at(t: Tensor, index: np.ndarray, g: np.ndarray) -> None:
    """Scatter-add variant of :func:`_accumulate` for row-indexed gradients."""
    full = np.zeros_like(t.data)
    np.add.at(full, index, g)
    _accumulate(t, full)


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to ``shape``."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(t) into ``t.grad`` for every reachable tensor.

    ``loss`` must be a scalar produced by recorded operations.  Each tape node
    is visited exactly once (reverse topological order), so shared
    subexpressions contribute their gradient a single time.  Repeated calls
    without :func:`zero_grads` keep accumulating.
    """
    global _pass_grads
    if loss.data.size != 1:
        raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")

    order: list[Tensor] = []
    visited: set[int] = {id(loss)}
    stack: list[tuple[Tensor, int]] = [(loss, 0)]
    while stack:
        node, i = stack.pop()
        if i < len(node._parents):
            stack.append((node, i + 1))
            parent = node._parents[i]
            if id(parent) not in visited and parent._backward is not None:
                visited.add(id(parent))
                stack.append((parent, 0))
        else:
            order.append(node)

    _pass_grads = {}
    try:
        _accumulate(loss, np.ones_like(loss.data))
        for node in reversed(order):
            entry = _pass_grads.get(id(node))
            if entry is not None and node._backward is not None:
                node._backward(entry[1])
        for t, g in _pass_grads.values():
            if t.grad is None:
                t.grad = np.zeros_like(t.data)
            t.grad += g
    finally:
        _pass_grads = None


def zero_grads(params: Sequence[Tensor]) -> None:
    """Reset gradient buffers to zero (allocating them if absent)."""
    for p in params:
        p.grad = np.zeros_like(p.data)


# ---------------------------------------------------------------------------
# linear algebra


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product of two 2-D tensors."""
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ShapeError(f"matmul needs 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul inner dimensions differ: {a.shape} vs {b.shape}")
    out_data = a.data @ b.data

    def _bw(g):
        if a.requires_grad:
            _accumulate(a, g @ b.data.T)
        if b.requires_grad:
            _accumulate(b, a.data.T @ g)

    return _make(out_data, (a, b), _bw)


# ---------------------------------------------------------------------------
# elementwise ops


def _binary(a: Tensor, b: Tensor, fwd, da, db) -> Tensor:
    try:
        out_data = fwd(a.data, b.data)
    except ValueError as exc:
        raise ShapeError(f"incompatible shapes {a.shape} and {b.shape}") from exc

    def _bw(g):
        if a.requires_grad:
            _accumulate(a, _unbroadcast(da(g), a.shape))
        if b.requires_grad:
            _accumulate(b, _unbroadcast(db(g), b.shape))

    return _make(out_data, (a, b), _bw)


def add(a: Tensor, b: Tensor) -> Tensor:
    return _binary(a, b, np.add, lambda g: g, lambda g: g)


def sub(a: Tensor, b: Tensor) -> Tensor:
    return _binary(a, b, np.subtract, lambda g: g, lambda g: -g)


def mul(a: Tensor, b: Tensor) -> Tensor:
    return _binary(a, b, np.multiply, lambda g: g * b.data, lambda g: g * a.data)


def sigmoid(x: Tensor) -> Tensor:
    """Logistic function, computed piecewise so large |x| cannot overflow."""
    d = x.data
    out_data = np.empty_like(d)
    pos = d >= 0
    out_data[pos] = 1.0 / (1.0 + np.exp(-d[pos]))
    ex = np.exp(d[~pos])
    out_data[~pos] = ex / (1.0 + ex)

    def _bw(g):
        _accumulate(x, g * out_data * (1.0 - out_data))

    return _make(out_data, (x,), _bw)


def relu(x: Tensor) -> Tensor:
    out_data = np.maximum(x.data, 0.0)

    def _bw(g):
        _accumulate(x, g * (x.data > 0.0))

    return _make(out_data, (x,), _bw)


def leaky_relu(x: Tensor, slope: float = 0.2) -> Tensor:
    out_data = np.where(x.data > 0.0, x.data, slope * x.data)

    def _bw(g):
        _accumulate(x, g * np.where(x.data > 0.0, 1.0, slope))

    return _make(out_data, (x,), _bw)


def exp(x: Tensor) -> Tensor:
    out_data = np.exp(x.data)

    def _bw(g):
        _accumulate(x, g * out_data)

    return _make(out_data, (x,), _bw)


def log(x: Tensor) -> Tensor:
    if np.any(x.data <= 0.0):
        raise NumericDomainError("log needs strictly positive inputs")
    out_data = np.log(x.data)

    def _bw(g):
        _accumulate(x, g / x.data)

    return _make(out_data, (x,), _bw)


# ---------------------------------------------------------------------------
# reductions and shape ops


def _check_axis(x: Tensor, axis: int | None) -> None:
    if axis is not None and not -x.data.ndim <= axis < x.data.ndim:
        raise ShapeError(f"axis {axis} invalid for shape {x.shape}")


def sum(x: Tensor, axis: int | None = None, keepdims: bool = False) -> Tensor:  # noqa: A001
    _check_axis(x, axis)
    out_data = x.data.sum(axis=axis, keepdims=keepdims)

    def _bw(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accumulate(x, np.broadcast_to(g, x.shape).copy())

    return _make(out_data, (x,), _bw)


def mean(x: Tensor, axis: int | None = None, keepdims: bool = False) -> Tensor:
    _check_axis(x, axis)
    out_data = x.data.mean(axis=axis, keepdims=keepdims)
    count = x.data.size if axis is None else x.shape[axis]

    def _bw(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accumulate(x, np.broadcast_to(g, x.shape) / count)

    return _make(out_data, (x,), _bw)


def concat(parts: Sequence[Tensor], axis: int = 0) -> Tensor:
    """Concatenate tensors along ``axis``; backward slices the gradient apart."""
    if not parts:
        raise ShapeError("concat needs at least one part")
    ndim = parts[0].data.ndim
    for p in parts[1:]:
        if p.data.ndim != ndim:
            raise ShapeError("concat parts must share rank")
        for ax in range(ndim):
            if ax != axis % ndim and p.shape[ax] != parts[0].shape[ax]:
                raise ShapeError(
                    f"concat parts disagree on axis {ax}: {p.shape} vs {parts[0].shape}"
                )
    out_data = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.shape[axis % ndim] for p in parts]

    def _bw(g):
        offset = 0
        for p, size in zip(parts, sizes):
            if p.requires_grad:
                index = [slice(None)] * ndim
                index[axis % ndim] = slice(offset, offset + size)
                _accumulate(p, g[tuple(index)])
            offset += size

    return _make(out_data, tuple(parts), _bw)


def narrow(x: Tensor, axis: int, start: int, length: int) -> Tensor:
    """Contiguous slice of ``length`` entries along ``axis``."""
    _check_axis(x, axis)
    if start < 0 or start + length > x.shape[axis]:
        raise ShapeError(f"narrow [{start}:{start + length}) out of range for shape {x.shape}")
    index = [slice(None)] * x.data.ndim
    index[axis] = slice(start, start + length)
    index = tuple(index)
    out_data = x.data[index].copy()

    def _bw(g):
        full = np.zeros_like(x.data)
        full[index] = g
        _accumulate(x, full)

    return _make(out_data, (x,), _bw)


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    out_data = x.data.reshape(shape)

    def _bw(g):
        _accumulate(x, g.reshape(x.shape))

    return _make(out_data, (x,), _bw)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    """Softmax along ``axis``, stabilized by max subtraction."""
    _check_axis(x, axis)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out_data = e / e.sum(axis=axis, keepdims=True)

    def _bw(g):
        inner = (g * out_data).sum(axis=axis, keepdims=True)
        _accumulate(x, out_data * (g - inner))

    return _make(out_data, (x,), _bw)


# ---------------------------------------------------------------------------
# indexed ops used by graph propagation


def gather_rows(x: Tensor, index: np.ndarray) -> Tensor:
    """Select rows of a 2-D tensor; backward scatter-adds (handles repeats)."""
    if x.data.ndim != 2:
        raise ShapeError(f"gather_rows needs a 2-D tensor, got {x.shape}")
    index = np.asarray(index, dtype=np.intp)
    out_data = x.data[index]

    def _bw(g):
        _accumulate_at(x, index, g)

    return _make(out_data, (x,), _bw)


def arc_matrix(values: Tensor, arcs: np.ndarray, scale: np.ndarray, num_nodes: int) -> Tensor:
    """Scatter per-arc values into a dense matrix: out[i, j] = value * scale.

    ``arcs`` is an (m, 2) array of distinct ordered pairs and ``scale`` a
    constant per-arc factor (the degree normalization).  Backward gathers the
    gradient back at the arc positions.
    """
    if values.data.ndim != 1:
        raise ShapeError(f"arc_matrix needs 1-D values, got {values.shape}")
    arcs = np.asarray(arcs, dtype=np.intp)
    if arcs.shape != (values.data.shape[0], 2):
        raise ShapeError(f"arcs shape {arcs.shape} does not match {values.data.shape[0]} values")
    out_data = np.zeros((num_nodes, num_nodes))
    src, dst = arcs[:, 0], arcs[:, 1]
    out_data[src, dst] = values.data * scale

    def _bw(g):
        _accumulate(values, g[src, dst] * scale)

    return _make(out_data, (values,), _bw)


# ---------------------------------------------------------------------------
# losses


def binary_cross_entropy(pred: Tensor, target) -> Tensor:
    """Mean binary cross entropy; probabilities are clamped before the log.

    ``pred`` holds probabilities in (0, 1); ``target`` is a same-shape 0/1
    array.  The clamp to [EPS_CLIP, 1 - EPS_CLIP] only guards the log; the
    gradient is evaluated at the clamped probability and keeps flowing, so a
    saturated prediction on the wrong side can still recover.
    """
    t = np.asarray(target, dtype=np.float64)
    if t.shape != pred.shape:
        raise ShapeError(f"target shape {t.shape} does not match prediction {pred.shape}")
    if np.any((t != 0.0) & (t != 1.0)):
        raise ValueError("binary_cross_entropy targets must be 0 or 1")
    p = np.clip(pred.data, EPS_CLIP, 1.0 - EPS_CLIP)
    n = p.size
    out_data = np.asarray(-(t * np.log(p) + (1.0 - t) * np.log1p(-p)).sum() / n)

    def _bw(g):
        _accumulate(pred, g * (p - t) / (p * (1.0 - p)) / n)

    return _make(out_data, (pred,), _bw)


def cross_entropy(logits: Tensor, target) -> Tensor:
    """Mean cross entropy between rows of logits and integer class labels."""
    z = logits if logits.data.ndim == 2 else reshape(logits, (1, -1))
    labels = np.atleast_1d(np.asarray(target, dtype=np.intp))
    if labels.shape != (z.shape[0],):
        raise ShapeError(f"need {z.shape[0]} labels, got shape {labels.shape}")
    if np.any(labels < 0) or np.any(labels >= z.shape[1]):
        raise ValueError("class labels out of range")
    shifted = z.data - z.data.max(axis=1, keepdims=True)
    logsumexp = np.log(np.exp(shifted).sum(axis=1)) + z.data.max(axis=1)
    n = z.shape[0]
    rows = np.arange(n)
    out_data = np.asarray((logsumexp - z.data[rows, labels]).sum() / n)

    def _bw(g):
        soft = np.exp(shifted)
        soft /= soft.sum(axis=1, keepdims=True)
        soft[rows, labels] -= 1.0
        _accumulate(z, g * soft / n)

    return _make(out_data, (z,), _bw)


def l1_loss(pred: Tensor, target) -> Tensor:
    """Mean absolute difference."""
    t = np.asarray(target, dtype=np.float64)
    if t.shape != pred.shape:
        raise ShapeError(f"target shape {t.shape} does not match prediction {pred.shape}")
    diff = pred.data - t
    out_data = np.asarray(np.abs(diff).mean())
    n = diff.size

    def _bw(g):
        _accumulate(pred, g * np.sign(diff) / n)

    return _make(out_data, (pred,), _bw)


_LOSSES = {
    "binary_cross_entropy": binary_cross_entropy,
    "cross_entropy": cross_entropy,
    "l1": l1_loss,
}


def loss(kind: str, pred: Tensor, target) -> Tensor:
    """Dispatch to one of the scalar losses by name."""
    if kind not in _LOSSES:
        raise ValueError(f"unknown loss kind {kind!r}, expected one of {sorted(_LOSSES)}")
    return _LOSSES[kind](pred, target)
