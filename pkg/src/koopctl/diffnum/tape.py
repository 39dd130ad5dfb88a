"""Reverse-mode differentiation over matrix-valued primitives.

A :class:`Tape` records every operation applied to its :class:`Var` leaves.
Operations whose inputs are all plain arrays just compute the value, so the
same model code runs with or without gradient tracking::

    tape = Tape()
    a = tape.leaf(np.eye(2))
    loss = trace(solve(a, np.eye(2)))
    grads = tape.backward(loss)      # {a: -I}
"""
import math

import numpy as np

from . import linalg
from ..errors import DimensionError, UsageError


class Var:
    __slots__ = ("value", "tape", "index", "parents", "vjp", "grad", "name")

    def __init__(self, tape, value, parents=(), vjp=None, name=None):
        self.value = value
        self.tape = tape
        self.parents = parents
        self.vjp = vjp
        self.grad = None
        self.name = name
        self.index = tape._record(self)

    @property
    def shape(self):
        return self.value.shape

    @property
    def T(self):
        return transpose(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __neg__(self):
        return neg(self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __repr__(self):
        label = f" {self.name!r}" if self.name else ""
        return f"Var{label}(shape={self.value.shape})"


class Tape:
    """Linear record of operations in topological (insertion) order."""

    def __init__(self):
        self.nodes = []

    def _record(self, var):
        self.nodes.append(var)
        return len(self.nodes) - 1

    def leaf(self, value, name=None):
        return Var(self, np.array(value, dtype=float), name=name)

    def backward(self, out):
        """Propagate adjoints from the scalar ``out`` to every node.

        Returns a dict mapping each leaf Var to its gradient; the gradient is
        also stored on ``leaf.grad``.
        """
        if not isinstance(out, Var) or out.tape is not self:
            raise UsageError("backward needs a Var recorded on this tape")
        if out.value.size != 1:
            raise UsageError(f"backward needs a scalar output, got shape {out.value.shape}")
        adjoints = {out.index: np.ones_like(out.value)}
        leaves = {}
        for node in reversed(self.nodes[: out.index + 1]):
            g = adjoints.pop(node.index, None)
            if not node.parents:
                if node.vjp is None:
                    node.grad = g if g is not None else np.zeros_like(node.value)
                    leaves[node] = node.grad
                continue
            if g is None:
                continue
            for parent, pg in zip(node.parents, node.vjp(g)):
                if parent is None or pg is None:
                    continue
                if parent.index in adjoints:
                    adjoints[parent.index] = adjoints[parent.index] + pg
                else:
                    adjoints[parent.index] = pg
        return leaves


def _tape_of(*xs):
    for x in xs:
        if isinstance(x, Var):
            return x.tape
    return None


def _val(x):
    return x.value if isinstance(x, Var) else np.asarray(x, dtype=float)


def _var(x):
    return x if isinstance(x, Var) else None


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def value(x):
    """The numeric value of a Var or array."""
    return _val(x)


def matmul(a, b):
    av, bv = _val(a), _val(b)
    out = linalg.matmul(av, bv)
    tape = _tape_of(a, b)
    if tape is None:
        return out
    return Var(tape, out, (_var(a), _var(b)), lambda g: (g @ bv.T, av.T @ g))


def add(a, b):
    av, bv = _val(a), _val(b)
    out = av + bv
    tape = _tape_of(a, b)
    if tape is None:
        return out
    return Var(tape, out, (_var(a), _var(b)),
               lambda g: (_unbroadcast(g, av.shape), _unbroadcast(g, bv.shape)))


def sub(a, b):
    av, bv = _val(a), _val(b)
    out = av - bv
    tape = _tape_of(a, b)
    if tape is None:
        return out
    return Var(tape, out, (_var(a), _var(b)),
               lambda g: (_unbroadcast(g, av.shape), -_unbroadcast(g, bv.shape)))


def neg(a):
    av = _val(a)
    tape = _tape_of(a)
    if tape is None:
        return -av
    return Var(tape, -av, (a,), lambda g: (-g,))


def mul(a, b):
    """Elementwise product with numpy broadcasting."""
    av, bv = _val(a), _val(b)
    out = av * bv
    tape = _tape_of(a, b)
    if tape is None:
        return out
    return Var(tape, out, (_var(a), _var(b)),
               lambda g: (_unbroadcast(g * bv, av.shape), _unbroadcast(g * av, bv.shape)))


def scale(a, c):
    return mul(a, float(c))


def transpose(a):
    av = _val(a)
    tape = _tape_of(a)
    if tape is None:
        return av.T
    return Var(tape, av.T.copy(), (a,), lambda g: (g.T,))


def relu(a):
    av = _val(a)
    mask = av > 0.0  # subgradient 0 at 0
    out = np.where(mask, av, 0.0)
    tape = _tape_of(a)
    if tape is None:
        return out
    return Var(tape, out, (a,), lambda g: (g * mask,))


def add_identity(a, c):
    """``a + c * I`` for a square ``a``."""
    av = _val(a)
    return add(a, c * np.eye(av.shape[0]))


def solve(a, b):
    """``X = a^{-1} b`` via LU; adjoints ``gb = a^{-T} g`` and ``ga = -gb X^T``."""
    av, bv = _val(a), _val(b)
    factors = linalg.lu_factor(av)
    x = linalg.lu_solve(factors, bv)
    tape = _tape_of(a, b)
    if tape is None:
        return x

    def vjp(g):
        gb = linalg.solve(av.T, g)
        return -gb @ x.T, gb

    return Var(tape, x, (_var(a), _var(b)), vjp)


def hstack(parts):
    vals = [_val(p) for p in parts]
    out = np.hstack(vals)
    tape = _tape_of(*parts)
    if tape is None:
        return out
    edges = np.cumsum([0] + [v.shape[1] for v in vals])

    def vjp(g):
        return tuple(g[:, edges[i]:edges[i + 1]] for i in range(len(vals)))

    return Var(tape, out, tuple(_var(p) for p in parts), vjp)


def vstack(parts):
    vals = [_val(p) for p in parts]
    out = np.vstack(vals)
    tape = _tape_of(*parts)
    if tape is None:
        return out
    edges = np.cumsum([0] + [v.shape[0] for v in vals])

    def vjp(g):
        return tuple(g[edges[i]:edges[i + 1]] for i in range(len(vals)))

    return Var(tape, out, tuple(_var(p) for p in parts), vjp)


def take_rows(a, idx):
    """Rows ``a[idx]`` (``idx`` is an integer array, repeats allowed)."""
    av = _val(a)
    idx = np.asarray(idx, dtype=int)
    out = av[idx]
    tape = _tape_of(a)
    if tape is None:
        return out

    def vjp(g):
        ga = np.zeros_like(av)
        np.add.at(ga, idx, g)
        return (ga,)

    return Var(tape, out, (a,), vjp)


def row(a, i):
    return take_rows(a, [i])


def sum_all(a):
    av = _val(a)
    out = np.array([[av.sum()]])
    tape = _tape_of(a)
    if tape is None:
        return out
    return Var(tape, out, (a,), lambda g: (np.full_like(av, g[0, 0]),))


def trace(a):
    av = _val(a)
    if av.ndim != 2 or av.shape[0] != av.shape[1]:
        raise DimensionError(f"trace needs a square matrix, got {av.shape}")
    out = np.array([[np.trace(av)]])
    tape = _tape_of(a)
    if tape is None:
        return out
    return Var(tape, out, (a,), lambda g: (g[0, 0] * np.eye(av.shape[0]),))


def gaussian_logp(x, mean, variance):
    """Elementwise log N(x; mean, variance) for a fixed positive ``variance``."""
    xv, mv = _val(x), _val(mean)
    var = float(variance)
    diff = xv - mv
    out = -diff * diff / (2.0 * var) - 0.5 * math.log(2.0 * math.pi * var)
    tape = _tape_of(x, mean)
    if tape is None:
        return out
    return Var(tape, out, (_var(x), _var(mean)),
               lambda g: (_unbroadcast(-g * diff / var, xv.shape),
                          _unbroadcast(g * diff / var, mv.shape)))
