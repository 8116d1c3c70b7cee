"""Dense-tensor reverse-mode autodiff on numpy arrays.

Each operation records its parents and a closure that maps the output
gradient to parent gradient contributions. backward() walks the graph once
in reverse topological order, accumulating across fan-out. Training runs in
float32; building the graph from float64 inputs keeps everything in float64,
which is what the finite-difference checker uses.
"""

from __future__ import annotations

import contextlib

import numpy as np

# Graph recording switch; no_grad() turns it off so inference allocates no graph.
_GRAD_ENABLED = [True]


@contextlib.contextmanager
def no_grad():
    _GRAD_ENABLED.append(False)
    try:
        yield
    finally:
        _GRAD_ENABLED.pop()


class OpShapeError(ValueError):
    """Shape mismatch, tagged with the op that rejected it."""

    def __init__(self, op: str, *shapes):
        super().__init__(f"{op}: incompatible shapes {' vs '.join(str(tuple(s)) for s in shapes)}")
        self.op = op
        self.shapes = shapes


def _as_array(data):
    arr = np.asarray(data)
    if not np.issubdtype(arr.dtype, np.floating):
        arr = arr.astype(np.float32)
    return arr


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = _as_array(data)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def __repr__(self):
        flag = ", grad" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}{flag})"

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError(f"item() on tensor of shape {self.data.shape}")
        return float(self.data.reshape(()))

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    def backward(self):
        if self.data.size != 1:
            raise ValueError(f"backward() requires a scalar loss, got shape {self.data.shape}")
        order = _toposort(self)
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # Arithmetic sugar; the ops module holds the implementations.
    def __add__(self, other):
        from . import ops
        return ops.add(self, _wrap(other))

    __radd__ = __add__

    def __mul__(self, other):
        from . import ops
        return ops.mul(self, _wrap(other))

    __rmul__ = __mul__

    def __neg__(self):
        from . import ops
        return ops.mul(self, _wrap(-1.0))

    def __sub__(self, other):
        from . import ops
        return ops.add(self, -_wrap(other))

    def __rsub__(self, other):
        from . import ops
        return ops.add(_wrap(other), -self)

    def __truediv__(self, other):
        from . import ops
        return ops.div(self, _wrap(other))

    def __rtruediv__(self, other):
        from . import ops
        return ops.div(_wrap(other), self)

    def __pow__(self, exponent):
        from . import ops
        return ops.power(self, float(exponent))

    def __matmul__(self, other):
        from . import ops
        return ops.matmul(self, _wrap(other))

    def __getitem__(self, idx):
        from . import ops
        return ops.index(self, idx)

    def reshape(self, *shape):
        from . import ops
        return ops.reshape(self, shape if len(shape) > 1 or isinstance(shape[0], int) else shape[0])

    def transpose(self, *axes):
        from . import ops
        return ops.transpose(self, axes or None)

    def sum(self, axis=None, keepdims=False):
        from . import ops
        return ops.sum_(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        from . import ops
        return ops.mean(self, axis, keepdims)


def constant(data) -> Tensor:
    return Tensor(data, requires_grad=False)


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _toposort(root: Tensor):
    order = []
    seen = set()
    stack = [(root, False)]
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
            if id(parent) not in seen:
                stack.append((parent, False))
    return order


def accumulate(t: Tensor, g: np.ndarray):
    """Add a gradient contribution; fan-out sums here."""
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.array(g, dtype=t.data.dtype)  # owned copy; g may be a view
    else:
        t.grad += g


def make_node(data: np.ndarray, parents, backward_fn) -> Tensor:
    """Wrap an op result, recording the graph only when grads are live."""
    out = Tensor(data)
    if _GRAD_ENABLED[-1] and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward_fn
    return out


def unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Reduce a broadcast gradient back to the operand's shape."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, d in enumerate(shape) if d == 1 and g.shape[i] > 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g
