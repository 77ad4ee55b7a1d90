"""Dense tensors with reverse-mode differentiation on top of numpy.

Values live in plain ndarrays (float32 for training, float64 for the
gradient-check suite; ops preserve the input dtype). Every differentiable
primitive records its parent tensors and a vector-Jacobian callback;
``Tensor.backward`` replays that record in reverse topological order and
accumulates into the ``.grad`` of requires_grad leaves.
"""

from __future__ import annotations

import contextlib

import numpy as np

# Non-finite values after a primitive mean a broken op or diverged training,
# so outputs are checked by default. Flip off only for throughput profiling.
finite_checks = True

_grad_enabled = True


def set_finite_checks(enabled):
    global finite_checks
    finite_checks = bool(enabled)


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block (inference, data prep)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def _as_data(x, dtype=None):
    arr = np.asarray(x)
    if dtype is not None:
        arr = arr.astype(dtype, copy=False)
    elif arr.dtype.kind != "f":
        arr = arr.astype(np.float32)
    return arr


def _unbroadcast(g, shape):
    """Sum g down to `shape`, undoing numpy broadcasting."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


class Tensor:
    """N-d real array plus gradient bookkeeping.

    invariants: data stays finite after every primitive; grad, when present,
    has the same shape as data; tensors are not mutated after construction
    except for grad accumulation (and optimizer updates on leaves between
    steps).
    """

    __slots__ = ("data", "requires_grad", "_grad", "_parents", "_vjp")

    def __init__(self, data, requires_grad=False, dtype=None):
        self.data = _as_data(data, dtype)
        self.requires_grad = bool(requires_grad)
        self._grad = None
        self._parents = ()
        self._vjp = None

    # -- graph construction -------------------------------------------------

    @staticmethod
    def _make(data, parents, vjp, op):
        if finite_checks and not np.isfinite(data).all():
            raise FloatingPointError(f"non-finite values produced by {op}")
        out = Tensor.__new__(Tensor)
        out.data = data
        out._grad = None
        if _grad_enabled and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = tuple(parents)
            out._vjp = vjp
        else:
            out.requires_grad = False
            out._parents = ()
            out._vjp = None
        return out

    # -- basic properties ---------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def grad(self):
        """Accumulated gradient; zeros for a requires_grad leaf that no
        backward pass has reached (a disconnected leaf is not an error)."""
        if self._grad is None and self.requires_grad:
            return np.zeros_like(self.data)
        return self._grad

    def zero_grad(self):
        self._grad = None

    def item(self):
        return float(self.data)

    def detach(self):
        return Tensor(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"

    # -- autodiff driver ----------------------------------------------------

    def backward(self):
        """Populate gradients of all requires_grad leaves reachable from a
        scalar output. Repeated calls accumulate (grads add up)."""
        if self.data.size != 1:
            raise ValueError("backward requires a scalar tensor")
        GradTape(self).run(np.ones_like(self.data))

    # -- elementwise arithmetic ----------------------------------------------

    def __add__(self, other):
        if isinstance(other, Tensor):
            a, b = self, other
            data = a.data + b.data

            def vjp(g):
                return _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)

            return Tensor._make(data, (a, b), vjp, "add")
        data = self.data + other
        return Tensor._make(data, (self,), lambda g: (g,), "add")

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Tensor):
            a, b = self, other
            data = a.data - b.data

            def vjp(g):
                return _unbroadcast(g, a.data.shape), _unbroadcast(-g, b.data.shape)

            return Tensor._make(data, (a, b), vjp, "sub")
        data = self.data - other
        return Tensor._make(data, (self,), lambda g: (g,), "sub")

    def __rsub__(self, other):
        data = other - self.data
        return Tensor._make(data, (self,), lambda g: (-g,), "rsub")

    def __neg__(self):
        return Tensor._make(-self.data, (self,), lambda g: (-g,), "neg")

    def __mul__(self, other):
        if isinstance(other, Tensor):
            a, b = self, other
            data = a.data * b.data

            def vjp(g):
                return (_unbroadcast(g * b.data, a.data.shape),
                        _unbroadcast(g * a.data, b.data.shape))

            return Tensor._make(data, (a, b), vjp, "mul")
        data = self.data * other
        return Tensor._make(data, (self,), lambda g: (g * other,), "mul")

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise TypeError("tensor/tensor division is not supported; divide by a scalar")
        return self * (1.0 / other)

    # -- reductions -----------------------------------------------------------

    def sum(self, axis=None, keepdims=False):
        data = self.data.sum(axis=axis, keepdims=keepdims)
        shape = self.data.shape
        ax = axis if axis is None or isinstance(axis, tuple) else (axis,)

        def vjp(g):
            if ax is not None and not keepdims:
                g = np.expand_dims(g, ax)
            return (np.broadcast_to(g, shape),)

        return Tensor._make(data, (self,), vjp, "sum")

    def mean(self, axis=None, keepdims=False):
        data = self.data.mean(axis=axis, keepdims=keepdims)
        shape = self.data.shape
        ax = axis if axis is None or isinstance(axis, tuple) else (axis,)
        scale = self.data.size / data.size

        def vjp(g):
            if ax is not None and not keepdims:
                g = np.expand_dims(g, ax)
            return (np.broadcast_to(g, shape) / scale,)

        return Tensor._make(data, (self,), vjp, "mean")

    # -- shape manipulation ----------------------------------------------------

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        orig = self.data.shape
        data = self.data.reshape(shape)
        return Tensor._make(data, (self,), lambda g: (g.reshape(orig),), "reshape")

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        inv = tuple(np.argsort(axes))
        data = self.data.transpose(axes)
        return Tensor._make(data, (self,), lambda g: (g.transpose(inv),), "transpose")

    def __getitem__(self, idx):
        data = self.data[idx]
        shape = self.data.shape

        def vjp(g):
            gx = np.zeros(shape, dtype=g.dtype)
            gx[idx] = g  # basic indexing only: slots are disjoint
            return (gx,)

        return Tensor._make(data, (self,), vjp, "getitem")

    def __matmul__(self, other):
        a, b = self, other
        if a.data.ndim != 2 or b.data.ndim != 2:
            raise ValueError("matmul supports 2-D tensors only")
        data = a.data @ b.data

        def vjp(g):
            return g @ b.data.T, a.data.T @ g

        return Tensor._make(data, (a, b), vjp, "matmul")


class GradTape:
    """Ordered record of the primitives reachable from a root tensor.

    ``nodes`` holds a topological order (parents before consumers); the
    backward replay walks it in reverse so every node's output gradient is
    complete before its own vector-Jacobian product runs. Gradients are
    accumulated by addition and never overwritten.
    """

    def __init__(self, root):
        # iterative post-order: a node is marked visited only when first
        # expanded, so one that is reachable both directly and through a
        # deeper chain still lands before all of its consumers
        nodes = []
        visited = set()
        stack = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                nodes.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in visited:
                    stack.append((p, False))
        self.nodes = nodes  # root is last

    def run(self, seed):
        flowing = {id(self.nodes[-1]): seed}
        for node in reversed(self.nodes):
            g = flowing.pop(id(node), None)
            if g is None:
                continue
            if not node._parents:
                if node.requires_grad:
                    node._grad = g if node._grad is None else node._grad + g
                continue
            for parent, pg in zip(node._parents, node._vjp(g)):
                if pg is None or not parent.requires_grad:
                    continue
                pid = id(parent)
                held = flowing.get(pid)
                flowing[pid] = pg if held is None else held + pg


def concat(tensors, axis=0):
    """Concatenate tensors along an axis; gradient splits back per input."""
    tensors = list(tensors)
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum(sizes)[:-1]

    def vjp(g):
        return tuple(np.split(g, offsets, axis=axis))

    return Tensor._make(data, tuple(tensors), vjp, "concat")


def stack(tensors, axis=0):
    """Stack tensors along a new axis."""
    return concat([t.reshape(t.shape[:axis] + (1,) + t.shape[axis:]) for t in tensors], axis=axis)


def weighted_sum(t, weights):
    """Scalar projection sum(t * weights) with constant weights."""
    w = np.asarray(weights, dtype=t.dtype)
    data = np.array((t.data * w).sum(), dtype=t.dtype)
    return Tensor._make(data, (t,), lambda g: (g * w,), "weighted_sum")
