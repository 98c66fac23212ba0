"""Dense 1-D/2-D/3-D tensors with reverse-mode automatic differentiation.

Forward arithmetic runs on numpy arrays; every differentiable op attaches a
backward closure to its output, and ``Tensor.backward()`` replays the closures
in reverse topological order. Graphs are rebuilt on every forward pass
(define-by-run), so the same parameter tensors can be reused across passes.

Two precisions are in play: float32 is the training default, float64 is used
wherever gradients are compared against finite differences (float32 has too
little headroom for central differences at eps=1e-5).
"""

from __future__ import annotations

import contextlib

import numpy as np

DEFAULT_DTYPE = np.float32

# Masked softmax logits get this instead of -inf so that finite inputs always
# produce finite outputs; exp() underflows it to exactly 0.
MASK_SENTINEL = -1e30


class ShapeError(ValueError):
    """Operand shapes are incompatible with the requested operation."""


class MaskError(ValueError):
    """A position mask excludes every position."""


class LabelError(ValueError):
    """Class label lies outside the logit range."""


_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable graph construction inside the block (pure forward evaluation)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    """A numpy array plus the bookkeeping needed for reverse-mode autodiff.

    Values are immutable by convention once the tensor has entered a graph;
    optimizers update leaf ``data`` in place only between graphs.
    """

    __slots__ = ("data", "requires_grad", "grad", "_backward", "_prev")

    def __init__(self, data, requires_grad=False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(DEFAULT_DTYPE)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._backward = None
        self._prev = ()

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    def item(self):
        return self.data.item()

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype.name}, requires_grad={self.requires_grad})"

    def _acc(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def backward(self):
        """Backpropagate from a scalar and return {leaf tensor: gradient}.

        Every reachable leaf with ``requires_grad`` receives a gradient of the
        same shape as its data. Deterministic for identical graphs.
        """
        if self.data.shape != ():
            raise ShapeError(f"backward needs a scalar loss, got shape {self.data.shape}")
        order = _toposort(self)
        self.grad = np.ones((), dtype=self.data.dtype)
        leaves = {}
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)
            elif node.requires_grad and not node._prev:
                leaves[id(node)] = (node, node.grad)
        return {node: grad for node, grad in leaves.values()}

    # Small amount of sugar; library code mostly calls the named ops.
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, other)
        return mul(self, other)

    __rmul__ = __mul__


def _toposort(root):
    order = []
    visited = {id(root)}
    stack = [(root, 0)]
    while stack:
        node, idx = stack[-1]
        if idx < len(node._prev):
            stack[-1] = (node, idx + 1)
            child = node._prev[idx]
            if id(child) not in visited:
                visited.add(id(child))
                stack.append((child, 0))
        else:
            stack.pop()
            order.append(node)
    return order


def _from_op(data, parents, backward_fn):
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._prev = tuple(parents)
        out._backward = backward_fn
    return out


def zeros(shape, dtype=DEFAULT_DTYPE, requires_grad=False):
    return Tensor(np.zeros(shape, dtype=dtype), requires_grad=requires_grad)


def uniform(rng, low, high, shape, dtype=DEFAULT_DTYPE, requires_grad=True):
    return Tensor(rng.uniform(low, high, size=shape).astype(dtype), requires_grad=requires_grad)


def glorot(rng, shape, dtype=DEFAULT_DTYPE, requires_grad=True):
    """Uniform +/- sqrt(6/(fan_in+fan_out)); 3-D weights count their per-slice fans."""
    if len(shape) == 2:
        fan_in, fan_out = shape[1], shape[0]
    elif len(shape) == 3:
        fan_in, fan_out = shape[1], shape[2]
    else:
        raise ShapeError(f"glorot init expects a 2-D or 3-D shape, got {shape}")
    limit = float(np.sqrt(6.0 / (fan_in + fan_out)))
    return uniform(rng, -limit, limit, shape, dtype, requires_grad)


def matmul(a, b):
    """Matrix product with numpy 1-D/2-D semantics; inner dimensions must agree."""
    if a.ndim not in (1, 2) or b.ndim not in (1, 2):
        raise ShapeError(f"matmul supports 1-D/2-D operands, got {a.shape} and {b.shape}")
    if a.shape[-1] != (b.shape[0] if b.ndim >= 1 else None):
        raise ShapeError(f"matmul inner dimensions disagree: {a.shape} vs {b.shape}")
    data = a.data @ b.data

    def bk(g):
        if a.ndim == 2 and b.ndim == 2:
            if a.requires_grad:
                a._acc(g @ b.data.T)
            if b.requires_grad:
                b._acc(a.data.T @ g)
        elif a.ndim == 1 and b.ndim == 2:
            if a.requires_grad:
                a._acc(b.data @ g)
            if b.requires_grad:
                b._acc(np.outer(a.data, g))
        elif a.ndim == 2 and b.ndim == 1:
            if a.requires_grad:
                a._acc(np.outer(g, b.data))
            if b.requires_grad:
                b._acc(a.data.T @ g)
        else:  # 1-D dot
            if a.requires_grad:
                a._acc(g * b.data)
            if b.requires_grad:
                b._acc(g * a.data)

    return _from_op(data, (a, b), bk)


def batched_dot(m, w):
    """Row-batched product: output row i is (row i of m) @ (slice i of w).

    m is r-by-c, w is r-by-c-by-k, result is r-by-k.
    """
    if m.ndim != 2 or w.ndim != 3 or w.shape[:2] != m.shape:
        raise ShapeError(f"batched_dot needs m r*c and w r*c*k, got {m.shape} and {w.shape}")
    # row-by-row matmul rather than einsum: bit-identical to the per-slice product
    data = np.stack([m.data[i] @ w.data[i] for i in range(m.shape[0])])

    def bk(g):
        if m.requires_grad:
            m._acc(np.einsum("rk,rck->rc", g, w.data))
        if w.requires_grad:
            w._acc(np.einsum("rc,rk->rck", m.data, g))

    return _from_op(data, (m, w), bk)


def softmax_rows(x, mask=None):
    """Row-wise softmax of a 2-D tensor, stabilized by row-max subtraction.

    ``mask`` is a boolean vector over columns; masked columns come out exactly
    zero and every row still sums to 1 over the surviving columns.
    """
    if x.ndim != 2:
        raise ShapeError(f"softmax_rows expects a 2-D tensor, got shape {x.shape}")
    logits = x.data
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != (x.shape[1],):
            raise ShapeError(f"mask shape {mask.shape} does not match {x.shape[1]} columns")
        if not mask.any():
            raise MaskError("mask excludes every position")
        logits = np.where(mask, logits, logits.dtype.type(MASK_SENTINEL))
    m = logits.max(axis=1, keepdims=True)
    e = np.exp(logits - m)
    if mask is not None:
        e = np.where(mask, e, e.dtype.type(0.0))
    s = e / e.sum(axis=1, keepdims=True)

    def bk(g):
        if x.requires_grad:
            x._acc((g - (g * s).sum(axis=1, keepdims=True)) * s)

    return _from_op(s, (x,), bk)


def tanh_elem(x):
    y = np.tanh(x.data)

    def bk(g):
        if x.requires_grad:
            x._acc(g * (1.0 - y * y))

    return _from_op(y, (x,), bk)


def sigmoid(x):
    d = x.data
    y = np.where(d >= 0, 1.0 / (1.0 + np.exp(-np.abs(d))), np.exp(-np.abs(d)) / (1.0 + np.exp(-np.abs(d))))
    y = y.astype(d.dtype, copy=False)

    def bk(g):
        if x.requires_grad:
            x._acc(g * y * (1.0 - y))

    return _from_op(y, (x,), bk)


def relu(x):
    y = np.maximum(x.data, 0)

    def bk(g):
        if x.requires_grad:
            x._acc(g * (x.data > 0))

    return _from_op(y, (x,), bk)


def _same_shape(a, b, op):
    if a.shape != b.shape:
        raise ShapeError(f"{op} needs equal shapes, got {a.shape} and {b.shape}")


def add(a, b):
    _same_shape(a, b, "add")

    def bk(g):
        if a.requires_grad:
            a._acc(g)
        if b.requires_grad:
            b._acc(g)

    return _from_op(a.data + b.data, (a, b), bk)


def sub(a, b):
    _same_shape(a, b, "sub")

    def bk(g):
        if a.requires_grad:
            a._acc(g)
        if b.requires_grad:
            b._acc(-g)

    return _from_op(a.data - b.data, (a, b), bk)


def mul(a, b):
    _same_shape(a, b, "mul")

    def bk(g):
        if a.requires_grad:
            a._acc(g * b.data)
        if b.requires_grad:
            b._acc(g * a.data)

    return _from_op(a.data * b.data, (a, b), bk)


def elementwise(a, b, kind):
    ops = {"add": add, "sub": sub, "mul": mul}
    if kind not in ops:
        raise ValueError(f"unknown elementwise kind {kind!r}")
    return ops[kind](a, b)


def scale(x, c):
    c = float(c)

    def bk(g):
        if x.requires_grad:
            x._acc(g * c)

    return _from_op(x.data * c, (x,), bk)


def frobenius_sq(x):
    """Sum of squared entries, as a scalar."""
    data = (x.data * x.data).sum()

    def bk(g):
        if x.requires_grad:
            x._acc(g * 2.0 * x.data)

    return _from_op(data, (x,), bk)


def sum_all(x):
    data = x.data.sum()

    def bk(g):
        if x.requires_grad:
            x._acc(np.full_like(x.data, g))

    return _from_op(data, (x,), bk)


def concat(parts, axis=0):
    """Concatenate same-rank tensors along an existing axis."""
    parts = list(parts)
    if not parts:
        raise ShapeError("concat of zero tensors")
    data = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.shape[axis] for p in parts]

    def bk(g):
        offset = 0
        for p, size in zip(parts, sizes):
            if p.requires_grad:
                index = [slice(None)] * g.ndim
                index[axis] = slice(offset, offset + size)
                p._acc(g[tuple(index)])
            offset += size

    return _from_op(data, tuple(parts), bk)


def concat_rows(parts):
    """Stack 1-D tensors as the rows of a matrix, or vstack 2-D tensors."""
    parts = list(parts)
    if not parts:
        raise ShapeError("concat_rows of zero tensors")
    if parts[0].ndim == 1:
        data = np.stack([p.data for p in parts], axis=0)

        def bk(g):
            for i, p in enumerate(parts):
                if p.requires_grad:
                    p._acc(g[i])

        return _from_op(data, tuple(parts), bk)
    return concat(parts, axis=0)


def transpose(x):
    if x.ndim != 2:
        raise ShapeError(f"transpose expects a 2-D tensor, got shape {x.shape}")

    def bk(g):
        if x.requires_grad:
            x._acc(g.T)

    return _from_op(x.data.T, (x,), bk)


def reshape(x, shape):
    data = x.data.reshape(shape)

    def bk(g):
        if x.requires_grad:
            x._acc(g.reshape(x.data.shape))

    return _from_op(data, (x,), bk)


def flatten(x):
    """Row-major flattening to 1-D."""
    return reshape(x, (-1,))


def gather_rows(x, ids):
    """Select rows of a 2-D tensor; gradients accumulate across repeated ids."""
    ids = np.asarray(ids)
    if x.ndim != 2:
        raise ShapeError(f"gather_rows expects a 2-D tensor, got shape {x.shape}")
    if ids.size and (ids.min() < 0 or ids.max() >= x.shape[0]):
        raise IndexError(f"row id out of range [0, {x.shape[0]}): {ids.min()}..{ids.max()}")
    data = x.data[ids]

    def bk(g):
        if x.requires_grad:
            if x.grad is None:
                x.grad = np.zeros_like(x.data)
            np.add.at(x.grad, ids, g)

    return _from_op(data, (x,), bk)


def row(x, i):
    """Row i of a 2-D tensor, as a 1-D tensor."""
    if x.ndim != 2:
        raise ShapeError(f"row expects a 2-D tensor, got shape {x.shape}")
    if not 0 <= i < x.shape[0]:
        raise IndexError(f"row {i} out of range [0, {x.shape[0]})")

    def bk(g):
        if x.requires_grad:
            if x.grad is None:
                x.grad = np.zeros_like(x.data)
            x.grad[i] += g

    return _from_op(x.data[i], (x,), bk)


def slice_rows(x, start, stop):
    """Contiguous range of rows (2-D) or elements (1-D)."""
    if x.ndim not in (1, 2):
        raise ShapeError(f"slice_rows expects a 1-D/2-D tensor, got shape {x.shape}")
    if not 0 <= start < stop <= x.shape[0]:
        raise ShapeError(f"slice [{start}:{stop}] out of range for {x.shape[0]} rows")

    def bk(g):
        if x.requires_grad:
            if x.grad is None:
                x.grad = np.zeros_like(x.data)
            x.grad[start:stop] += g

    return _from_op(x.data[start:stop], (x,), bk)


def dropout(x, rate, rng, train):
    """Inverted dropout: survivors scale by 1/(1-rate); identity at eval time."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if not train or rate == 0.0:
        return x
    keep = (rng.random(x.shape) >= rate).astype(x.dtype) / x.dtype.type(1.0 - rate)
    data = x.data * keep

    def bk(g):
        if x.requires_grad:
            x._acc(g * keep)

    return _from_op(data, (x,), bk)


def cross_entropy(logits, label):
    """Negative log-likelihood of ``label`` under stabilized log-softmax."""
    if logits.ndim != 1:
        raise ShapeError(f"cross_entropy expects 1-D logits, got shape {logits.shape}")
    label = int(label)
    if not 0 <= label < logits.shape[0]:
        raise LabelError(f"label {label} out of range for {logits.shape[0]} classes")
    z = logits.data - logits.data.max()
    lse = np.log(np.exp(z).sum())
    data = lse - z[label]

    def bk(g):
        if logits.requires_grad:
            p = np.exp(z - lse)
            p[label] -= 1.0
            logits._acc(g * p)

    return _from_op(data, (logits,), bk)


def grad_check(fn, inputs, eps=1e-5):
    """Max relative error of backprop gradients against central differences.

    ``fn`` maps the given tensors to a scalar Tensor. Inputs are copied to
    float64 with requires_grad; relative error per coordinate is
    |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
    """
    xs = [Tensor(np.asarray(t.data, dtype=np.float64).copy(), requires_grad=True) for t in inputs]
    fn(*xs).backward()
    worst = 0.0
    for x in xs:
        analytic = x.grad if x.grad is not None else np.zeros_like(x.data)
        flat = x.data.reshape(-1)
        numeric = np.zeros_like(flat)
        with no_grad():
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + eps
                hi = fn(*xs).item()
                flat[i] = orig - eps
                lo = fn(*xs).item()
                flat[i] = orig
                numeric[i] = (hi - lo) / (2.0 * eps)
        a = analytic.reshape(-1)
        denom = np.maximum(np.maximum(np.abs(a), np.abs(numeric)), 1e-8)
        err = np.abs(a - numeric) / denom
        if err.size:
            worst = max(worst, float(err.max()))
    return worst
