"""Tape-based reverse-mode automatic differentiation.

A ``Tape`` records every scalar primitive applied to its ``Var`` handles,
together with the local partial derivatives, and replays the record backward
to accumulate adjoints in a single O(#nodes) sweep.  Values may be python
floats or numpy arrays; an array-valued Var behaves like a bundle of
independent scalars (one per pixel), which keeps tape length independent of
both image size and parameter count.

Also provides the central finite-differencing oracle used to cross-check
tape gradients.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import precision


class TapeMixError(ValueError):
    """Raised when Vars from two different tapes are combined."""


# Self-test hook: when set to an op kind, the first recorded node of that
# kind gets a deliberately wrong partial so harnesses can prove they would
# catch a broken derivative.
_corrupt_kind: str | None = None


def set_corrupt_partial(kind: str | None) -> None:
    global _corrupt_kind
    _corrupt_kind = kind


class GradientNaNError(FloatingPointError):
    """Raised when a forward value on the tape is NaN; names the node kind."""

    def __init__(self, kind: str, index: int):
        super().__init__(f"NaN produced by tape node {index} ({kind})")
        self.kind = kind
        self.index = index


def _value(x):
    return x.value if isinstance(x, Var) else x


class Var:
    """Handle to one tape node: (tape, node index, forward value)."""

    __slots__ = ("tape", "index", "value")

    # Forces numpy to defer to our reflected operators instead of building
    # object arrays element by element.
    __array_ufunc__ = None

    def __init__(self, tape: "Tape", index: int, value):
        self.tape = tape
        self.index = index
        self.value = value

    # -- arithmetic ------------------------------------------------------

    def __add__(self, other):
        if isinstance(other, Var):
            t = self.tape._join(other)
            return t.record("add", (self, other), self.value + other.value, (1.0, 1.0))
        return self.tape.record("add", (self,), self.value + other, (1.0,), aux=other)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Var):
            t = self.tape._join(other)
            return t.record("sub", (self, other), self.value - other.value, (1.0, -1.0))
        return self.tape.record("sub", (self,), self.value - other, (1.0,), aux=other)

    def __rsub__(self, other):
        return self.tape.record("rsub", (self,), other - self.value, (-1.0,), aux=other)

    def __mul__(self, other):
        if isinstance(other, Var):
            t = self.tape._join(other)
            return t.record("mul", (self, other), self.value * other.value,
                            (other.value, self.value))
        return self.tape.record("mul", (self,), self.value * other, (other,), aux=other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Var):
            t = self.tape._join(other)
            val = self.value / other.value
            return t.record("div", (self, other), val,
                            (1.0 / other.value, -val / other.value))
        val = self.value / other
        return self.tape.record("div", (self,), val, (1.0 / other,), aux=other)

    def __rtruediv__(self, other):
        val = other / self.value
        return self.tape.record("rdiv", (self,), val, (-val / self.value,), aux=other)

    def __neg__(self):
        return self.tape.record("neg", (self,), -self.value, (-1.0,))

    def __pow__(self, other):
        if isinstance(other, Var):
            t = self.tape._join(other)
            val = self.value ** other.value
            return t.record("pow", (self, other), val,
                            (_pow_base_partial(self.value, other.value),
                             _pow_exp_partial(self.value, val)))
        val = self.value ** other
        return self.tape.record("pow", (self,), val,
                                (_pow_base_partial(self.value, other),), aux=other)

    def __rpow__(self, other):
        val = other ** self.value
        return self.tape.record("rpow", (self,), val,
                                (_pow_exp_partial(other, val),), aux=other)

    def sqrt(self):
        val = np.sqrt(self.value)
        return self.tape.record("sqrt", (self,), val, (0.5 / val,))

    def __abs__(self):
        return self.tape.record("abs", (self,), np.abs(self.value),
                                (np.sign(self.value),))

    def maximum(self, other):
        # Ties send the full partial to the first argument.
        if isinstance(other, Var):
            t = self.tape._join(other)
            mask = self.value >= other.value
            return t.record("maximum", (self, other),
                            np.maximum(self.value, other.value),
                            (_bool_partial(mask),
                             _bool_partial(np.logical_not(mask))))
        mask = self.value >= other
        return self.tape.record("maximum", (self,), np.maximum(self.value, other),
                                (_bool_partial(mask),), aux=other)

    def rmaximum(self, other):
        # other (plain) is the first argument: Var wins only strictly.
        mask = self.value > other
        return self.tape.record("rmaximum", (self,), np.maximum(other, self.value),
                                (_bool_partial(mask),), aux=other)

    def minimum(self, other):
        if isinstance(other, Var):
            t = self.tape._join(other)
            mask = self.value <= other.value
            return t.record("minimum", (self, other),
                            np.minimum(self.value, other.value),
                            (_bool_partial(mask),
                             _bool_partial(np.logical_not(mask))))
        mask = self.value <= other
        return self.tape.record("minimum", (self,), np.minimum(self.value, other),
                                (_bool_partial(mask),), aux=other)

    def rminimum(self, other):
        mask = self.value < other
        return self.tape.record("rminimum", (self,), np.minimum(other, self.value),
                                (_bool_partial(mask),), aux=other)

    # -- structure -------------------------------------------------------

    def take(self, indices):
        idx = np.asarray(indices, dtype=np.intp)
        return self.tape.record("take", (self,), np.asarray(self.value).take(idx),
                                None, aux=idx)

    def put(self, indices, other):
        """Copy of self with ``other`` written at ``indices`` (all distinct)."""
        idx = np.asarray(indices, dtype=np.intp)
        val = np.array(self.value, copy=True)
        if isinstance(other, Var):
            t = self.tape._join(other)
            val[idx] = other.value
            return t.record("put", (self, other), val, None, aux=(idx, None))
        val[idx] = other
        return self.tape.record("put", (self,), val, None, aux=(idx, other))

    def sum(self):
        return self.tape.record("sum", (self,), np.asarray(self.value).sum(), None)

    # -- queries (never differentiated) -----------------------------------

    def __lt__(self, other):
        return self.value < _value(other)

    def __le__(self, other):
        return self.value <= _value(other)

    def __gt__(self, other):
        return self.value > _value(other)

    def __ge__(self, other):
        return self.value >= _value(other)

    def item(self) -> float:
        return float(np.asarray(self.value).reshape(()))

    @property
    def shape(self):
        return np.shape(self.value)

    def __repr__(self):
        return f"Var(node={self.index}, value={self.value!r})"


def _bool_partial(mask):
    if isinstance(mask, np.ndarray):
        return mask.astype(precision.active_dtype())
    return 1.0 if bool(mask) else 0.0


def _pow_base_partial(base, exponent):
    # d(a^b)/da = b * a^(b-1); guarded so 0^k contributes 0, not inf/NaN.
    with np.errstate(divide="ignore", invalid="ignore"):
        p = exponent * base ** (np.asarray(exponent) - 1.0)
    return np.where(np.isfinite(p), p, 0.0) if isinstance(p, np.ndarray) else (
        p if np.isfinite(p) else 0.0)


def _pow_exp_partial(base, value):
    # d(a^b)/db = a^b * ln(a); zero where the base is not positive.
    base_arr = np.asarray(base)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = value * np.log(np.where(base_arr > 0, base_arr, 1.0))
    return p


class _Node:
    __slots__ = ("kind", "ia", "ib", "pa", "pb", "aux", "value")

    def __init__(self, kind, ia, ib, pa, pb, aux, value):
        self.kind = kind
        self.ia = ia
        self.ib = ib
        self.pa = pa
        self.pb = pb
        self.aux = aux
        self.value = value


class Tape:
    """Append-only record of forward primitives, replayable backward."""

    def __init__(self):
        self.nodes: list[_Node] = []

    def __len__(self):
        return len(self.nodes)

    def _join(self, other: Var) -> "Tape":
        if other.tape is not self:
            raise TapeMixError("cannot combine Vars from different tapes")
        return self

    def leaf(self, value) -> Var:
        """New independent input variable."""
        self.nodes.append(_Node("leaf", None, None, None, None, None, value))
        return Var(self, len(self.nodes) - 1, value)

    # Spec name for leaf creation through the operator-overloading surface.
    def var(self, value) -> Var:
        return self.leaf(value)

    def constant(self, value) -> Var:
        self.nodes.append(_Node("const", None, None, None, None, None, value))
        return Var(self, len(self.nodes) - 1, value)

    def record(self, kind: str, inputs, value, partials, aux=None) -> Var:
        """Append one node; ``inputs`` are Vars on this tape (checked)."""
        global _corrupt_kind
        if _corrupt_kind is not None and kind == _corrupt_kind and partials:
            partials = (partials[0] * 2.0 + 1.0,) + tuple(partials[1:])
            _corrupt_kind = None
        ia = ib = pa = pb = None
        if len(inputs) >= 1:
            v = inputs[0]
            if v.tape is not self:
                raise TapeMixError("cannot combine Vars from different tapes")
            ia = v.index
            if partials is not None:
                pa = partials[0]
        if len(inputs) == 2:
            v = inputs[1]
            if v.tape is not self:
                raise TapeMixError("cannot combine Vars from different tapes")
            ib = v.index
            if partials is not None:
                pb = partials[1]
        self.nodes.append(_Node(kind, ia, ib, pa, pb, aux, value))
        return Var(self, len(self.nodes) - 1, value)

    def scatter(self, src: Var, indices, size: int, fill=0.0) -> Var:
        """Array of ``size`` filled with ``fill``, with ``src`` placed at ``indices``."""
        idx = np.asarray(indices, dtype=np.intp)
        out = np.full(size, fill, dtype=precision.active_dtype())
        out[idx] = src.value
        return self.record("scatter", (src,), out, None, aux=(idx, size, fill))

    # -- reverse sweep -----------------------------------------------------

    def backward(self, output: Var, seed=1.0) -> list:
        """Adjoint of every node w.r.t. ``output``; one reverse sweep."""
        if output.tape is not self:
            raise TapeMixError("output Var does not belong to this tape")
        nodes = self.nodes
        adj: list = [None] * len(nodes)
        adj[output.index] = seed

        def accum(i, g, shape):
            gs = _sum_to(g, shape)
            if adj[i] is None:
                adj[i] = gs
            else:
                adj[i] = adj[i] + gs

        for i in range(output.index, -1, -1):
            g = adj[i]
            if g is None:
                continue
            node = nodes[i]
            kind = node.kind
            if node.ia is None:
                continue
            if kind == "sum":
                va = nodes[node.ia].value
                accum(node.ia, np.broadcast_to(g, np.shape(va)), np.shape(va))
            elif kind == "take":
                va = np.asarray(nodes[node.ia].value)
                out = np.zeros(va.shape, dtype=precision.active_dtype())
                np.add.at(out, node.aux, g)
                accum(node.ia, out, va.shape)
            elif kind == "put":
                idx = node.aux[0]
                ga = np.array(np.broadcast_to(g, np.shape(node.value)), copy=True)
                ga[idx] = 0.0
                accum(node.ia, ga, np.shape(nodes[node.ia].value))
                if node.ib is not None:
                    gb = np.asarray(g)[idx] if np.ndim(g) else np.full(
                        len(idx), g, dtype=precision.active_dtype())
                    accum(node.ib, gb, np.shape(nodes[node.ib].value))
            elif kind == "scatter":
                idx = node.aux[0]
                gb = np.asarray(g)[idx] if np.ndim(g) else np.full(
                    len(idx), g, dtype=precision.active_dtype())
                accum(node.ia, gb, np.shape(nodes[node.ia].value))
            else:
                accum(node.ia, g * node.pa, np.shape(nodes[node.ia].value))
                if node.ib is not None:
                    accum(node.ib, g * node.pb, np.shape(nodes[node.ib].value))
        return adj

    # -- diagnostics -------------------------------------------------------

    def first_nan(self):
        """(index, kind) of the first node with a NaN value, or None."""
        for i, node in enumerate(self.nodes):
            if np.isnan(node.value).any():
                return i, node.kind
        return None

    def replay(self) -> list:
        """Recompute every node value forward from its parents."""
        out: list = []
        for node in self.nodes:
            k = node.kind
            if k in ("leaf", "const"):
                out.append(node.value)
                continue
            a = out[node.ia]
            b = out[node.ib] if node.ib is not None else node.aux
            if k == "add":
                v = a + b
            elif k == "sub":
                v = a - b
            elif k == "rsub":
                v = b - a
            elif k == "mul":
                v = a * b
            elif k == "div":
                v = a / b
            elif k == "rdiv":
                v = b / a
            elif k == "neg":
                v = -a
            elif k == "pow":
                v = a ** b
            elif k == "rpow":
                v = b ** a
            elif k == "sqrt":
                v = np.sqrt(a)
            elif k == "abs":
                v = np.abs(a)
            elif k in ("maximum", "rmaximum"):
                v = np.maximum(a, b) if k == "maximum" else np.maximum(b, a)
            elif k in ("minimum", "rminimum"):
                v = np.minimum(a, b) if k == "minimum" else np.minimum(b, a)
            elif k == "sum":
                v = np.asarray(a).sum()
            elif k == "take":
                v = np.asarray(a).take(node.aux)
            elif k == "put":
                idx, const_vals = node.aux
                v = np.array(a, copy=True)
                v[idx] = out[node.ib] if node.ib is not None else const_vals
            elif k == "scatter":
                idx, size, fill = node.aux
                v = np.full(size, fill, dtype=precision.active_dtype())
                v[idx] = a
            else:
                raise AssertionError(f"unknown node kind {k!r}")
            out.append(v)
        return out


def _sum_to(g, shape):
    """Reduce a broadcast gradient back to the parent's shape."""
    gshape = np.shape(g)
    if gshape == shape:
        return g
    if shape == ():
        return np.asarray(g).sum()
    if len(shape) == 1 and shape[0] == 1:
        return np.asarray(g).sum(keepdims=True)
    return np.broadcast_to(g, shape)


@dataclass
class GradConfig:
    """Finite-difference settings; ``delta`` defaults per the active float width."""

    delta: float | None = None

    def step(self) -> float:
        d = self.delta if self.delta is not None else precision.default_fd_delta()
        if d <= 0:
            raise ValueError("finite-difference delta must be positive")
        return d


def _vector_of(params):
    return np.asarray(getattr(params, "values", params), dtype=np.float64)


def _like(params, values):
    if hasattr(params, "with_values"):
        return params.with_values(values)
    return values


def gradient(f, params):
    """All-parameter gradient of scalar ``f`` in one backward sweep.

    ``f`` receives the parameter vector with an array-valued Var in place of
    plain values; its result must be a scalar Var (or a constant, in which
    case the gradient is zero).
    """
    vals = precision.asarray(_vector_of(params))
    tape = Tape()
    leaf = tape.leaf(vals)
    out = f(_like(params, leaf))
    if not isinstance(out, Var):
        return _like(params, np.zeros_like(vals))
    if np.isnan(_value(out)).any():
        idx, kind = out.tape.first_nan()
        raise GradientNaNError(kind, idx)
    adj = tape.backward(out)
    g = adj[leaf.index]
    if g is None:
        g = np.zeros_like(vals)
    return _like(params, np.asarray(g, dtype=vals.dtype))


def finite_difference_gradient(f, params, cfg: GradConfig | None = None):
    """Central-difference gradient; exactly two evaluations of ``f`` per parameter.

    Perturbed vectors stay in float64; whatever precision ``f`` renders at
    internally is its own business.
    """
    cfg = cfg or GradConfig()
    delta = cfg.step()
    base = _vector_of(params)
    grads = np.zeros_like(base)
    for i in range(base.size):
        hi = base.copy()
        hi[i] += delta
        lo = base.copy()
        lo[i] -= delta
        f_hi = float(_value(f(_like(params, hi))))
        f_lo = float(_value(f(_like(params, lo))))
        grads[i] = (f_hi - f_lo) / (2.0 * delta)
    return _like(params, grads)
