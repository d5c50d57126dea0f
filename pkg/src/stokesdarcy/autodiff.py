"""Reverse-mode automatic differentiation over numpy arrays.

A ``Tape`` is an ordered record of primitive array operations leading from
a set of leaf variables (network parameters) to a scalar.  Replaying the
record forward reproduces the scalar bit-for-bit; the adjoint pass walks
the record once in exact reverse order and accumulates the exact
derivative of the scalar with respect to every leaf.

Plain numbers and numpy arrays flow through the same operations without
being recorded, so the identical calling code runs either as a taped
computation (parameters bound to a tape) or as straight numpy.
"""

from __future__ import annotations

import numpy as np

from .errors import NumericalError, UsageError


class Node:
    __slots__ = ("out", "inputs", "vjp", "fwd", "name")

    def __init__(self, out, inputs, vjp, fwd, name):
        self.out = out
        self.inputs = inputs
        self.vjp = vjp      # cotangent of out -> tuple of input cotangents
        self.fwd = fwd      # input values -> output value, for replay
        self.name = name


class Tape:
    """Ordered operation record; one tape serves one scalar evaluation."""

    def __init__(self):
        self.nodes: list[Node] = []

    def __len__(self) -> int:
        return len(self.nodes)

    def record(self, value, inputs, vjp, fwd, name) -> "Var":
        out = Var(value, self)
        self.nodes.append(Node(out, inputs, vjp, fwd, name))
        return out

    def replay(self):
        """Re-execute every op in recording order; returns the final value."""
        shadow: dict[int, object] = {}

        def val(x):
            if isinstance(x, Var):
                return shadow.get(id(x), x.value)
            return x

        out = None
        for node in self.nodes:
            out = node.fwd(*[val(x) for x in node.inputs])
            shadow[id(node.out)] = out
        return out


class Var:
    """Array (or scalar) value, optionally recorded on a tape.

    A Var with ``tape=None`` is a free constant; one created through
    ``Tape.record`` or bound as a leaf participates in the adjoint pass.
    """

    __slots__ = ("value", "tape", "grad")
    __array_ufunc__ = None  # force numpy to defer to the reflected dunders

    def __init__(self, value, tape: Tape | None = None):
        self.value = value
        self.tape = tape
        self.grad = None

    # -- python protocol ----------------------------------------------------
    def __float__(self) -> float:
        return float(self.value)

    def __repr__(self) -> str:
        return f"Var({self.value!r})"

    @property
    def shape(self):
        return np.shape(self.value)

    # -- arithmetic ----------------------------------------------------------
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

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, k):
        return pow_const(self, k)

    def __getitem__(self, key):
        return take(self, key)


def value_of(x):
    """Underlying numpy value of a Var, or the argument itself."""
    return x.value if isinstance(x, Var) else x


def _tape_of(*xs) -> Tape | None:
    tape = None
    for x in xs:
        if isinstance(x, Var) and x.tape is not None:
            if tape is None:
                tape = x.tape
            elif tape is not x.tape:
                raise UsageError("operands were recorded on different tapes")
    return tape


def _unbroadcast(g, shape):
    """Sum a cotangent over the axes that broadcasting expanded."""
    if np.shape(g) == shape:
        return g
    g = np.asarray(g)
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


# -- primitive operations ----------------------------------------------------
#
# Each helper accepts Vars, arrays, or scalars in any mix.  When no operand
# is taped the plain numpy result is returned.

def add(a, b):
    tape = _tape_of(a, b)
    av, bv = value_of(a), value_of(b)
    out = av + bv
    if tape is None:
        return out
    ash, bsh = np.shape(av), np.shape(bv)
    return tape.record(
        out, (a, b),
        lambda g: (_unbroadcast(g, ash), _unbroadcast(g, bsh)),
        lambda x, y: x + y, "add")


def sub(a, b):
    tape = _tape_of(a, b)
    av, bv = value_of(a), value_of(b)
    out = av - bv
    if tape is None:
        return out
    ash, bsh = np.shape(av), np.shape(bv)
    return tape.record(
        out, (a, b),
        lambda g: (_unbroadcast(g, ash), -_unbroadcast(g, bsh)),
        lambda x, y: x - y, "sub")


def mul(a, b):
    tape = _tape_of(a, b)
    av, bv = value_of(a), value_of(b)
    out = av * bv
    if tape is None:
        return out
    ash, bsh = np.shape(av), np.shape(bv)
    return tape.record(
        out, (a, b),
        lambda g: (_unbroadcast(g * bv, ash), _unbroadcast(g * av, bsh)),
        lambda x, y: x * y, "mul")


def div(a, b):
    tape = _tape_of(a, b)
    av, bv = value_of(a), value_of(b)
    out = av / bv
    if tape is None:
        return out
    ash, bsh = np.shape(av), np.shape(bv)
    return tape.record(
        out, (a, b),
        lambda g: (_unbroadcast(g / bv, ash),
                   _unbroadcast(-g * av / (bv * bv), bsh)),
        lambda x, y: x / y, "div")


def neg(a):
    tape = _tape_of(a)
    out = -value_of(a)
    if tape is None:
        return out
    return tape.record(out, (a,), lambda g: (-g,), lambda x: -x, "neg")


def pow_const(a, k):
    tape = _tape_of(a)
    av = value_of(a)
    out = av ** k
    if tape is None:
        return out
    return tape.record(
        out, (a,),
        lambda g: (g * k * av ** (k - 1),),
        lambda x: x ** k, f"pow{k}")


def matmul_t(x, w):
    """``x @ w.T`` for x of shape (..., d_in) and w of shape (d_out, d_in)."""
    tape = _tape_of(x, w)
    xv, wv = value_of(x), value_of(w)
    out = xv @ wv.T
    if tape is None:
        return out

    def vjp(g):
        gx = g @ wv
        if xv.ndim == 1:
            gw = np.outer(g, xv)
        else:
            gw = g.reshape(-1, g.shape[-1]).T @ xv.reshape(-1, xv.shape[-1])
        return gx, gw

    return tape.record(out, (x, w), vjp, lambda a, b: a @ b.T, "matmul_t")


def _unary(a, f, dfdx, name):
    tape = _tape_of(a)
    av = value_of(a)
    out = f(av)
    if tape is None:
        return out
    d = dfdx(av, out)
    return tape.record(out, (a,), lambda g: (g * d,), f, name)


def tanh(a):
    return _unary(a, np.tanh, lambda x, y: 1.0 - y * y, "tanh")


def sin(a):
    return _unary(a, np.sin, lambda x, y: np.cos(x), "sin")


def cos(a):
    return _unary(a, np.cos, lambda x, y: -np.sin(x), "cos")


def exp(a):
    return _unary(a, np.exp, lambda x, y: y, "exp")


def sqrt(a):
    return _unary(a, np.sqrt, lambda x, y: 0.5 / y, "sqrt")


def absval(a):
    # subgradient convention: d|v|/dv = sign(v), 0 at v = 0
    return _unary(a, np.abs, lambda x, y: np.sign(x), "abs")


def hypot2(a, b):
    """Pointwise Euclidean norm sqrt(a^2 + b^2) with zero subgradient at 0."""
    tape = _tape_of(a, b)
    av, bv = value_of(a), value_of(b)
    out = np.hypot(av, bv)
    if tape is None:
        return out
    safe = np.where(out == 0.0, 1.0, out)

    def vjp(g):
        s = g / safe
        return s * av, s * bv

    return tape.record(out, (a, b), vjp, np.hypot, "hypot2")


def sum_all(a):
    tape = _tape_of(a)
    av = value_of(a)
    out = np.sum(av)
    if tape is None:
        return out
    shape = np.shape(av)
    return tape.record(
        out, (a,),
        lambda g: (np.full(shape, g),),
        np.sum, "sum")


def mean_all(a):
    tape = _tape_of(a)
    av = value_of(a)
    out = np.mean(av)
    if tape is None:
        return out
    shape = np.shape(av)
    n = np.size(av)
    return tape.record(
        out, (a,),
        lambda g: (np.full(shape, g / n),),
        np.mean, "mean")


def col(a, j):
    """Column j of a 2-d array, shape (n, w) -> (n,)."""
    tape = _tape_of(a)
    av = value_of(a)
    out = av[..., j]
    if tape is None:
        return out
    shape = np.shape(av)

    def vjp(g):
        z = np.zeros(shape)
        z[..., j] = g
        return (z,)

    return tape.record(out, (a,), vjp, lambda x: x[..., j], f"col{j}")


def rows(a, i0, i1):
    """Row slice a[i0:i1] along the leading axis."""
    tape = _tape_of(a)
    av = value_of(a)
    out = av[i0:i1]
    if tape is None:
        return out
    shape = np.shape(av)

    def vjp(g):
        z = np.zeros(shape)
        z[i0:i1] = g
        return (z,)

    return tape.record(out, (a,), vjp, lambda x: x[i0:i1], f"rows[{i0}:{i1}]")


def take(a, key):
    tape = _tape_of(a)
    av = value_of(a)
    out = av[key]
    if tape is None:
        return out
    shape = np.shape(av)

    def vjp(g):
        z = np.zeros(shape)
        z[key] = g
        return (z,)

    return tape.record(out, (a,), vjp, lambda x: x[key], "take")


# -- adjoint pass -------------------------------------------------------------

def _backward(scalar: Var, check_finite: bool = False) -> int | None:
    """Accumulate cotangents into every taped Var reachable from ``scalar``.

    Returns the index of the first op (in reverse visiting order) that
    produced a non-finite cotangent when ``check_finite`` is set.
    """
    tape = scalar.tape
    scalar.grad = np.float64(1.0)
    for idx in range(len(tape.nodes) - 1, -1, -1):
        node = tape.nodes[idx]
        g = node.out.grad
        if g is None:
            continue
        gs = node.vjp(g)
        for inp, gi in zip(node.inputs, gs):
            if gi is None or not isinstance(inp, Var) or inp.tape is None:
                continue
            if check_finite and not np.all(np.isfinite(gi)):
                return idx
            if inp.grad is None:
                inp.grad = gi
            else:
                inp.grad = inp.grad + gi
    return None


def _reset_grads(tape: Tape, leaves) -> None:
    for node in tape.nodes:
        node.out.grad = None
    for leaf in leaves:
        leaf.grad = None


def gradient_of(scalar, params) -> np.ndarray:
    """Exact derivative of a taped scalar with respect to every parameter.

    ``params`` is anything exposing ``leaf_vars()`` (e.g. tape-bound network
    parameters) or an iterable of leaf Vars.  The result is flat, in the
    order the leaves are listed; leaves the scalar does not depend on get
    zero blocks.
    """
    if not isinstance(scalar, Var) or scalar.tape is None:
        raise UsageError("scalar is not rooted on an adjoint tape")
    if np.ndim(value_of(scalar)) != 0:
        raise UsageError("gradient_of expects a scalar")
    leaves = list(params.leaf_vars()) if hasattr(params, "leaf_vars") else list(params)
    tape = scalar.tape
    _reset_grads(tape, leaves)
    _backward(scalar)

    parts = []
    for leaf in leaves:
        if leaf.grad is None:
            parts.append(np.zeros(np.size(leaf.value)))
        else:
            parts.append(np.broadcast_to(leaf.grad, np.shape(leaf.value)).ravel())
    flat = np.concatenate(parts) if parts else np.zeros(0)
    if not np.all(np.isfinite(flat)):
        # locate the offending op with a second, checked pass
        _reset_grads(tape, leaves)
        idx = _backward(scalar, check_finite=True)
        raise NumericalError("non-finite adjoint", op_index=idx)
    return flat
