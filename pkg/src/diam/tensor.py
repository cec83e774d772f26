"""Dense float64 tensors with a reverse-mode differentiation tape.

Only the operations the detector needs are provided.  Operations record
themselves on the innermost active :class:`Tape`; outside a ``with Tape()``
block they run as plain numpy and keep no history, which is what inference
uses.

    >>> w = Tensor(np.ones((2, 2)), requires_grad=True)
    >>> with Tape() as tape:
    ...     loss = (w @ Tensor(np.ones(2))).sum()
    >>> tape.backward(loss)
    >>> w.grad
    array([[1., 1.],
           [1., 1.]])
"""

import threading

import numpy as np
from scipy.special import expit

LEAKY_SLOPE = 0.2


class NumericalFault(FloatingPointError):
    """A NaN or infinity appeared in a forward value or a gradient."""


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_node")

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._node = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def __len__(self):
        return len(self.data)

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    def numpy(self):
        return self.data

    def zero_grad(self):
        self.grad = None

    def backward(self):
        if self._node is None:
            raise RuntimeError("tensor was not produced on a tape")
        self._node.tape.backward(self)

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return take(self, index)

    @property
    def T(self):
        return transpose(self)

    def sum(self):
        return total(self)


class _Node:
    __slots__ = ("tape", "out", "parents", "backward")

    def __init__(self, tape, out, parents, backward):
        self.tape = tape
        self.out = out
        self.parents = parents
        self.backward = backward


class Tape:
    """Ordered record of operations; parents always precede children."""

    _local = threading.local()

    def __init__(self):
        self.nodes = []

    @classmethod
    def _stack(cls):
        stack = getattr(cls._local, "stack", None)
        if stack is None:
            stack = cls._local.stack = []
        return stack

    def __enter__(self):
        Tape._stack().append(self)
        return self

    def __exit__(self, *exc):
        Tape._stack().pop()
        return False

    def __len__(self):
        return len(self.nodes)

    @classmethod
    def active(cls):
        stack = cls._stack()
        return stack[-1] if stack else None

    def backward(self, loss):
        """Accumulate d(loss)/d(leaf) into ``leaf.grad`` for every leaf that requires grad."""
        if loss.data.size != 1:
            raise ValueError("backward needs a scalar loss")
        if loss._node is None or loss._node.tape is not self:
            raise RuntimeError("loss was not recorded on this tape")
        grads = {id(loss): np.ones_like(loss.data)}
        for node in reversed(self.nodes):
            g = grads.pop(id(node.out), None)
            if g is None:
                continue
            parent_grads = node.backward(g)
            for parent, pg in zip(node.parents, parent_grads):
                if pg is None or not parent.requires_grad:
                    continue
                if parent._node is None:
                    if not np.isfinite(pg).all():
                        raise NumericalFault("non-finite gradient reached a leaf")
                    parent.grad = pg.copy() if parent.grad is None else parent.grad + pg
                else:
                    key = id(parent)
                    grads[key] = pg if key not in grads else grads[key] + pg


def backward(loss):
    loss.backward()


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _result(name, data, parents, backward_fn):
    if not np.isfinite(data).all():
        raise NumericalFault(f"non-finite value produced by {name}")
    out = Tensor(data)
    tape = Tape.active()
    if tape is not None and any(p.requires_grad for p in parents):
        out.requires_grad = True
        node = _Node(tape, out, parents, backward_fn)
        out._node = node
        tape.nodes.append(node)
    return out


# ---------------------------------------------------------------- linear algebra

def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim not in (1, 2) or b.ndim not in (1, 2):
        raise ValueError("matmul supports 1-D and 2-D operands only")
    if a.shape[-1] != b.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    A, B = a.data, b.data

    def back(g):
        if A.ndim == 2 and B.ndim == 2:
            return g @ B.T, A.T @ g
        if A.ndim == 2:  # matrix @ vector
            return np.outer(g, B), A.T @ g
        if B.ndim == 2:  # vector @ matrix
            return B @ g, np.outer(A, g)
        return g * B, g * A

    return _result("matmul", A @ B, (a, b), back)


def transpose(a):
    if a.ndim != 2:
        raise ValueError("transpose needs a 2-D tensor")
    return _result("transpose", a.data.T, (a,), lambda g: (g.T,))


def add(a, b):
    """Elementwise sum; ``b`` may also be a bias vector added to every row of ``a``."""
    a, b = as_tensor(a), as_tensor(b)
    if a.shape == b.shape:
        return _result("add", a.data + b.data, (a, b), lambda g: (g, g))
    if b.ndim == 0:
        return _result("add", a.data + b.data, (a, b), lambda g: (g, np.asarray(g.sum())))
    if a.ndim == 0:
        return add(b, a)
    if a.ndim == 2 and b.ndim == 1 and b.shape[0] == a.shape[1]:
        return _result("add", a.data + b.data, (a, b), lambda g: (g, g.sum(axis=0)))
    raise ValueError(f"add shape mismatch: {a.shape} + {b.shape}")


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape and b.ndim != 0 and a.ndim != 0:
        raise ValueError(f"sub shape mismatch: {a.shape} - {b.shape}")
    if a.shape == b.shape:
        return _result("sub", a.data - b.data, (a, b), lambda g: (g, -g))
    return add(a, mul(b, -1.0))


def mul(a, b):
    """Elementwise product of equal shapes.

    A constant operand (a float or a plain ndarray) may broadcast; it is the
    mechanism for masks and dropout and receives no gradient.
    """
    if not isinstance(b, Tensor):
        const = np.asarray(b, dtype=np.float64)
        a = as_tensor(a)
        if np.broadcast_shapes(a.shape, const.shape) != a.shape:
            raise ValueError(f"constant of shape {const.shape} cannot scale {a.shape}")
        return _result("mul", a.data * const, (a,), lambda g: (g * const,))
    if not isinstance(a, Tensor):
        return mul(b, a)
    if a.shape != b.shape:
        raise ValueError(f"mul shape mismatch: {a.shape} * {b.shape}")
    A, B = a.data, b.data
    return _result("mul", A * B, (a, b), lambda g: (g * B, g * A))


def scale(x, alpha):
    """``alpha * x`` for a scalar ``alpha`` (a float or a 0-d tensor)."""
    if not isinstance(alpha, Tensor):
        return mul(x, float(alpha))
    if alpha.data.size != 1:
        raise ValueError("scale needs a scalar factor")
    X, s = x.data, alpha.data.reshape(())
    return _result("scale", s * X, (x, alpha),
                   lambda g: (s * g, np.asarray(np.vdot(g, X)).reshape(alpha.shape)))


def scale_rows(x, w):
    """Multiply row ``i`` of ``x`` (n x k) by ``w[i]``."""
    if x.ndim != 2 or w.shape != (x.shape[0],):
        raise ValueError(f"scale_rows shape mismatch: {x.shape} by {w.shape}")
    X, W = x.data, w.data
    return _result("scale_rows", X * W[:, None], (x, w),
                   lambda g: (g * W[:, None], np.einsum("ij,ij->i", g, X)))


def total(x):
    return _result("sum", np.asarray(x.data.sum()), (x,),
                   lambda g: (np.broadcast_to(g, x.shape).copy(),))


# ---------------------------------------------------------------- pointwise

def sigmoid(x):
    y = expit(x.data)
    return _result("sigmoid", y, (x,), lambda g: (g * y * (1.0 - y),))


def tanh(x):
    y = np.tanh(x.data)
    return _result("tanh", y, (x,), lambda g: (g * (1.0 - y * y),))


def relu(x):
    mask = x.data > 0
    return _result("relu", np.where(mask, x.data, 0.0), (x,), lambda g: (g * mask,))


def leaky_relu(x, slope=LEAKY_SLOPE):
    slopes = np.where(x.data > 0, 1.0, slope)
    return _result("leaky_relu", x.data * slopes, (x,), lambda g: (g * slopes,))


def elementwise(name, x, slope=LEAKY_SLOPE):
    if name == "leaky_relu":
        return leaky_relu(x, slope)
    try:
        fn = {"sigmoid": sigmoid, "tanh": tanh, "relu": relu}[name]
    except KeyError:
        raise ValueError(f"unknown elementwise op {name!r}") from None
    return fn(x)


def softmax(x):
    """Softmax over the last axis, stabilised by max subtraction."""
    if x.shape[-1] < 1:
        raise ValueError("softmax over an empty axis")
    e = np.exp(x.data - x.data.max(axis=-1, keepdims=True))
    y = e / e.sum(axis=-1, keepdims=True)

    def back(g):
        return (y * (g - (g * y).sum(axis=-1, keepdims=True)),)

    return _result("softmax", y, (x,), back)


# ---------------------------------------------------------------- structure

def concat(tensors, axis=-1):
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise ValueError("concat of nothing")
    if axis == -1 and tensors[0].ndim == 1 and any(t.ndim != 1 for t in tensors):
        raise ValueError("concat mixes 1-D and higher-rank tensors")
    if any(t.ndim == 0 for t in tensors):
        raise ValueError("concat needs at least 1-D tensors")
    axis = axis % tensors[0].ndim
    sizes = [t.shape[axis] for t in tensors]
    cuts = np.cumsum(sizes)[:-1]
    data = np.concatenate([t.data for t in tensors], axis=axis)
    return _result("concat", data, tuple(tensors),
                   lambda g: tuple(np.split(g, cuts, axis=axis)))


def stack(tensors, axis=-1):
    """Stack equal-shape tensors along a new axis."""
    tensors = [as_tensor(t) for t in tensors]
    if len({t.shape for t in tensors}) != 1:
        raise ValueError("stack needs equal shapes")
    data = np.stack([t.data for t in tensors], axis=axis)
    ax = axis % data.ndim
    return _result("stack", data, tuple(tensors),
                   lambda g: tuple(np.take(g, i, axis=ax) for i in range(len(tensors))))


def take(x, index):
    """``x[index]`` for basic slices or integer-array row gathers."""
    data = x.data[index]
    fancy = isinstance(index, (np.ndarray, list)) or (
        isinstance(index, tuple) and any(isinstance(i, (np.ndarray, list)) for i in index))

    def back(g):
        full = np.zeros_like(x.data)
        if fancy:
            np.add.at(full, index, g)
        else:
            full[index] += g
        return (full,)

    return _result("take", data, (x,), back)


def segment_sum(x, segments, n):
    """Row sums grouped by ``segments``: ``out[s] = sum(x[i] for segments[i] == s)``.

    Segments that receive no rows come out as zero vectors.
    """
    segments = np.asarray(segments, dtype=np.int64)
    if x.ndim != 2 or len(segments) != x.shape[0]:
        raise ValueError("segment_sum needs an (E, k) tensor and E segment ids")
    out = np.zeros((n, x.shape[1]))
    np.add.at(out, segments, x.data)
    return _result("segment_sum", out, (x,), lambda g: (g[segments],))


def reduce_max_over_sequence(steps):
    """Elementwise max over a list of step tensors.

    Steps may be *packed*: step ``t`` may cover only the first ``rows_t`` rows
    (non-increasing in ``t``), which is how variable-length sequences sorted by
    decreasing length are pooled.  Each coordinate's gradient goes to the
    earliest step attaining the max.
    """
    if not steps:
        raise ValueError("max over an empty sequence")
    first = steps[0].data
    if first.ndim == 0:
        raise ValueError("steps must be at least 1-D")
    out = first.copy()
    arg = np.zeros(first.shape, dtype=np.int64)
    rows = first.shape[0]
    for t, s in enumerate(steps[1:], start=1):
        d = s.data
        if d.shape[1:] != first.shape[1:] or d.shape[0] > rows:
            raise ValueError("steps must share trailing shape with non-increasing rows")
        rows = d.shape[0]
        better = d > out[:rows]  # strict: ties stay with the earliest step
        out[:rows] = np.where(better, d, out[:rows])
        arg[:rows] = np.where(better, t, arg[:rows])

    def back(g):
        return tuple(np.where(arg[:s.shape[0]] == t, g[:s.shape[0]], 0.0)
                     for t, s in enumerate(steps))

    return _result("max_over_sequence", out, tuple(steps), back)


# ---------------------------------------------------------------- loss

def binary_cross_entropy(p, y, eps=1e-12):
    """Summed BCE ``-sum(y log p + (1-y) log(1-p))`` with ``p`` clamped to [eps, 1-eps]."""
    y = np.asarray(y, dtype=np.float64)
    if p.shape != y.shape:
        raise ValueError(f"probabilities {p.shape} and labels {y.shape} differ in shape")
    pc = np.clip(p.data, eps, 1.0 - eps)
    inside = (p.data >= eps) & (p.data <= 1.0 - eps)
    loss = -np.sum(y * np.log(pc) + (1.0 - y) * np.log1p(-pc))

    def back(g):
        return (g * inside * ((1.0 - y) / (1.0 - pc) - y / pc),)

    return _result("bce", np.asarray(loss), (p,), back)
