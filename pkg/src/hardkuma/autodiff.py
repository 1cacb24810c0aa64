"""Reverse-mode automatic differentiation on dense float64 tensors.

A ``Graph`` is an append-only tape: every operation creates a new ``Tensor``
node recording its inputs and a local vector-Jacobian rule.  ``backward``
walks the tape in reverse (the tape order is already topological) and
accumulates gradients by summation over all paths.

Everything is float64.  Tensors are immutable values once created; build a
fresh graph per forward pass and throw it away after the parameter update.
There is no broadcasting beyond scalar-with-tensor: use ``expand`` when you
need an array to grow.
"""

from __future__ import annotations

import json
from typing import Callable, Iterable, Sequence

import numpy as np


class ShapeError(ValueError):
    """Raised when operand shapes do not conform to an op's signature."""


class DomainError(ValueError):
    """Raised when an input lies outside an op's mathematical domain."""


class NonFiniteError(FloatingPointError):
    """Raised when a forward pass produces NaN or Inf."""


def _as_array(value) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    if not arr.flags["C_CONTIGUOUS"]:
        arr = np.ascontiguousarray(arr)
    return arr


class Tensor:
    """One tape node: a float64 array plus the local gradient rule.

    ``vjp`` maps the incoming output gradient to a tuple of input gradients
    aligned with ``inputs`` (``None`` for inputs that need no gradient).
    """

    __slots__ = ("graph", "data", "idx", "kind", "inputs", "vjp",
                 "requires_grad", "name")

    def __init__(self, graph: "Graph", data: np.ndarray, kind: str,
                 inputs: tuple = (), vjp: Callable | None = None,
                 requires_grad: bool = False, name: str | None = None):
        self.graph = graph
        self.data = data
        self.idx = len(graph.nodes)
        self.kind = kind
        self.inputs = inputs
        self.vjp = vjp
        self.requires_grad = requires_grad
        self.name = name
        graph.nodes.append(self)
        if graph.check_finite and not np.all(np.isfinite(data)):
            raise NonFiniteError(f"op '{kind}' produced non-finite values")

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(kind={self.kind!r}, shape={self.shape})"

    # Operator sugar; python scalars are lifted to constants on the same graph.
    def __add__(self, other):
        return add(self, self.graph.lift(other))

    def __radd__(self, other):
        return add(self.graph.lift(other), self)

    def __sub__(self, other):
        return sub(self, self.graph.lift(other))

    def __rsub__(self, other):
        return sub(self.graph.lift(other), self)

    def __mul__(self, other):
        return mul(self, self.graph.lift(other))

    def __rmul__(self, other):
        return mul(self.graph.lift(other), self)

    def __truediv__(self, other):
        return div(self, self.graph.lift(other))

    def __rtruediv__(self, other):
        return div(self.graph.lift(other), self)

    def __pow__(self, other):
        return pow_(self, self.graph.lift(other))

    def __rpow__(self, other):
        return pow_(self.graph.lift(other), self)

    def __neg__(self):
        return neg(self)


class Graph:
    """Append-only operation tape plus the named trainable leaves.

    Single-threaded by contract: construction and ``backward`` must happen
    on one thread per instance.  Tensors themselves are safe to share
    read-only once created.
    """

    def __init__(self, check_finite: bool = True):
        self.nodes: list[Tensor] = []
        self.params: dict[str, Tensor] = {}
        self.check_finite = check_finite

    def constant(self, value, name: str | None = None) -> Tensor:
        return Tensor(self, _as_array(value), "const", name=name)

    def parameter(self, name: str, value) -> Tensor:
        if name in self.params:
            raise ValueError(f"duplicate parameter name: {name!r}")
        t = Tensor(self, _as_array(value), "param", requires_grad=True,
                   name=name)
        self.params[name] = t
        return t

    def lift(self, value) -> Tensor:
        if isinstance(value, Tensor):
            return value
        return self.constant(value)


def _reduce_to(grad: np.ndarray, shape: tuple) -> np.ndarray:
    # Only scalar-with-tensor mixing exists, so the sole reduction is to ().
    if shape == () and np.shape(grad) != ():
        return np.asarray(np.sum(grad))
    return grad

def _binary_check(kind: str, x: Tensor, y: Tensor) -> None:
    if x.shape == y.shape or x.shape == () or y.shape == ():
        return
    raise ShapeError(f"{kind}: shapes {x.shape} and {y.shape} do not conform"
                     " (only scalar-with-tensor mixing; use expand)")

def _node(x: Tensor, data, kind: str, inputs: Sequence[Tensor], vjp) -> Tensor:
    rg = any(t.requires_grad for t in inputs)
    return Tensor(x.graph, data, kind, tuple(inputs),
                  vjp if rg else None, rg)


def add(x: Tensor, y: Tensor) -> Tensor:
    _binary_check("add", x, y)

    def vjp(g):
        return (_reduce_to(g, x.shape) if x.requires_grad else None,
                _reduce_to(g, y.shape) if y.requires_grad else None)

    return _node(x, x.data + y.data, "add", (x, y), vjp)


def sub(x: Tensor, y: Tensor) -> Tensor:
    _binary_check("sub", x, y)

    def vjp(g):
        return (_reduce_to(g, x.shape) if x.requires_grad else None,
                _reduce_to(-g, y.shape) if y.requires_grad else None)

    return _node(x, x.data - y.data, "sub", (x, y), vjp)


def mul(x: Tensor, y: Tensor) -> Tensor:
    _binary_check("mul", x, y)

    def vjp(g):
        return (_reduce_to(g * y.data, x.shape) if x.requires_grad else None,
                _reduce_to(g * x.data, y.shape) if y.requires_grad else None)

    return _node(x, x.data * y.data, "mul", (x, y), vjp)


def div(x: Tensor, y: Tensor) -> Tensor:
    _binary_check("div", x, y)
    if np.any(y.data == 0.0):
        raise DomainError("div: zero denominator")

    def vjp(g):
        gx = _reduce_to(g / y.data, x.shape) if x.requires_grad else None
        gy = (_reduce_to(-g * x.data / (y.data * y.data), y.shape)
              if y.requires_grad else None)
        return gx, gy

    return _node(x, x.data / y.data, "div", (x, y), vjp)


def neg(x: Tensor) -> Tensor:
    return _node(x, -x.data, "neg", (x,), lambda g: (-g,))


def exp(x: Tensor) -> Tensor:
    with np.errstate(over="ignore"):
        out_data = np.exp(x.data)
    return _node(x, out_data, "exp", (x,), lambda g: (g * out_data,))


def log(x: Tensor) -> Tensor:
    if np.any(x.data <= 0.0):
        raise DomainError("log: requires strictly positive input")
    return _node(x, np.log(x.data), "log", (x,), lambda g: (g / x.data,))


def pow_(x: Tensor, y: Tensor) -> Tensor:
    """Elementwise x**y for tensor base and tensor exponent."""
    _binary_check("pow", x, y)
    base, expo = x.data, y.data
    if np.any(base < 0.0) and not np.all(expo == np.floor(expo)):
        raise DomainError("pow: negative base with non-integer exponent")
    if np.any(base == 0.0) and np.any(expo < 0.0):
        raise DomainError("pow: zero base with negative exponent")
    out_data = base ** expo

    def vjp(g):
        gx = None
        if x.requires_grad:
            gx = _reduce_to(g * expo * base ** (expo - 1.0), x.shape)
        gy = None
        if y.requires_grad:
            if np.any(base <= 0.0):
                raise DomainError(
                    "pow: gradient w.r.t. exponent needs a positive base")
            gy = _reduce_to(g * out_data * np.log(base), y.shape)
        return gx, gy

    return _node(x, out_data, "pow", (x, y), vjp)


def tanh(x: Tensor) -> Tensor:
    out_data = np.tanh(x.data)
    return _node(x, out_data, "tanh", (x,),
                 lambda g: (g * (1.0 - out_data * out_data),))


def sigmoid(x: Tensor) -> Tensor:
    out_data = _sigmoid_stable(x.data)
    return _node(x, out_data, "sigmoid", (x,),
                 lambda g: (g * out_data * (1.0 - out_data),))


def _sigmoid_stable(z: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        pos = 1.0 / (1.0 + np.exp(-z))
        ez = np.exp(z)
        negv = ez / (1.0 + ez)
    return np.where(z >= 0.0, pos, negv)


def softplus(x: Tensor) -> Tensor:
    out_data = np.logaddexp(0.0, x.data)
    return _node(x, out_data, "softplus", (x,),
                 lambda g: (g * _sigmoid_stable(x.data),))


def hard_sigmoid(x: Tensor) -> Tensor:
    """min(1, max(0, x)); derivative 1 on (0,1), 0 outside and at the kinks."""

    def vjp(g):
        mask = (x.data > 0.0) & (x.data < 1.0)
        return (g * mask,)

    return _node(x, np.clip(x.data, 0.0, 1.0), "hard_sigmoid", (x,), vjp)


def clip(x: Tensor, lo: float, hi: float) -> Tensor:
    """Clamp to [lo, hi]; same subgradient convention as hard_sigmoid."""

    def vjp(g):
        mask = (x.data > lo) & (x.data < hi)
        return (g * mask,)

    return _node(x, np.clip(x.data, lo, hi), "clip", (x,), vjp)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    if not tensors:
        raise ShapeError("concat: empty input list")
    first = tensors[0]
    ndim = first.data.ndim
    ax = axis % ndim if ndim else 0
    for t in tensors[1:]:
        if t.data.ndim != ndim or (t.shape[:ax] + t.shape[ax + 1:]
                                   != first.shape[:ax] + first.shape[ax + 1:]):
            raise ShapeError(f"concat: shapes {[t.shape for t in tensors]} "
                             f"do not conform along axis {axis}")
    sizes = [t.shape[ax] for t in tensors]
    offsets = np.cumsum(sizes)[:-1]

    def vjp(g):
        pieces = np.split(g, offsets, axis=ax)
        return tuple(p if t.requires_grad else None
                     for t, p in zip(tensors, pieces))

    return _node(first, np.concatenate([t.data for t in tensors], axis=ax),
                 "concat", tuple(tensors), vjp)


def narrow(x: Tensor, axis: int, start: int, length: int) -> Tensor:
    """Contiguous slice of ``length`` entries from ``start`` along ``axis``."""
    ax = axis % x.data.ndim
    if start < 0 or start + length > x.shape[ax]:
        raise ShapeError(f"slice: [{start}:{start + length}] out of range for "
                         f"axis {axis} of shape {x.shape}")
    index = tuple(slice(None) if d != ax else slice(start, start + length)
                  for d in range(x.data.ndim))

    def vjp(g):
        gx = np.zeros_like(x.data)
        gx[index] = g
        return (gx,)

    return _node(x, _as_array(x.data[index]), "slice", (x,), vjp)


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    out_data = _as_array(np.reshape(x.data, shape))
    return _node(x, out_data, "reshape", (x,),
                 lambda g: (np.reshape(g, x.shape),))


def expand(x: Tensor, shape: Sequence[int]) -> Tensor:
    """Explicitly broadcast size-1 axes of x up to ``shape``."""
    shape = tuple(shape)
    if len(shape) != x.data.ndim:
        raise ShapeError(f"expand: rank mismatch {x.shape} -> {shape}")
    grown = []
    for d, (have, want) in enumerate(zip(x.shape, shape)):
        if have == want:
            continue
        if have != 1:
            raise ShapeError(f"expand: cannot expand axis {d} of {x.shape} "
                             f"to {shape}")
        grown.append(d)

    def vjp(g):
        return (np.sum(g, axis=tuple(grown), keepdims=True)
                if grown else g,)

    return _node(x, _as_array(np.broadcast_to(x.data, shape)),
                 "expand", (x,), vjp)


def transpose(x: Tensor, axes: Sequence[int]) -> Tensor:
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    return _node(x, _as_array(np.transpose(x.data, axes)),
                 "transpose", (x,),
                 lambda g: (np.transpose(g, inverse),))


def matmul(x: Tensor, y: Tensor) -> Tensor:
    """2-d matrix product or batched 3-d product (leading batch axis)."""
    xd, yd = x.data, y.data
    ok = (xd.ndim == yd.ndim == 2 and xd.shape[1] == yd.shape[0]) or \
         (xd.ndim == yd.ndim == 3 and xd.shape[0] == yd.shape[0]
          and xd.shape[2] == yd.shape[1])
    if not ok:
        raise ShapeError(f"matmul: shapes {xd.shape} and {yd.shape} "
                         "do not conform")

    def vjp(g):
        gx = g @ np.swapaxes(yd, -1, -2) if x.requires_grad else None
        gy = np.swapaxes(xd, -1, -2) @ g if y.requires_grad else None
        return gx, gy

    return _node(x, xd @ yd, "matmul", (x, y), vjp)


def sum_(x: Tensor, axis: int | None = None) -> Tensor:
    if axis is None:
        return _node(x, np.asarray(np.sum(x.data)), "sum", (x,),
                     lambda g: (np.full_like(x.data, float(g)),))
    ax = axis % x.data.ndim

    def vjp(g):
        return (_as_array(np.broadcast_to(np.expand_dims(g, ax), x.shape)),)

    return _node(x, _as_array(np.sum(x.data, axis=ax)),
                 "sum", (x,), vjp)


def mean(x: Tensor, axis: int | None = None) -> Tensor:
    if axis is None:
        n = x.data.size
        return _node(x, np.asarray(np.mean(x.data)), "mean", (x,),
                     lambda g: (np.full_like(x.data, float(g) / n),))
    ax = axis % x.data.ndim
    n = x.shape[ax]

    def vjp(g):
        return (_as_array(np.broadcast_to(np.expand_dims(g / n, ax), x.shape)),)

    return _node(x, _as_array(np.mean(x.data, axis=ax)),
                 "mean", (x,), vjp)


def embedding(table: Tensor, ids) -> Tensor:
    """Row lookup: ids of any integer shape S produce output S + [dim]."""
    ids = np.asarray(ids, dtype=np.int64)
    if table.data.ndim != 2:
        raise ShapeError(f"embedding-lookup: table must be 2-d, "
                         f"got {table.shape}")
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise DomainError(f"embedding-lookup: id out of range "
                          f"[0, {table.shape[0]})")

    def vjp(g):
        gt = np.zeros_like(table.data)
        np.add.at(gt, ids, g)
        return (gt,)

    return _node(table, _as_array(table.data[ids]),
                 "embedding-lookup", (table,), vjp)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    ax = axis % x.data.ndim
    shifted = x.data - np.max(x.data, axis=ax, keepdims=True)
    e = np.exp(shifted)
    out_data = e / np.sum(e, axis=ax, keepdims=True)

    def vjp(g):
        inner = np.sum(g * out_data, axis=ax, keepdims=True)
        return (out_data * (g - inner),)

    return _node(x, out_data, "softmax", (x,), vjp)


def cross_entropy_with_logits(logits: Tensor, labels) -> Tensor:
    """Per-example -log softmax(logits)[label]; logits [B, C], labels [B]."""
    labels = np.asarray(labels, dtype=np.int64)
    if logits.data.ndim != 2 or labels.shape != (logits.shape[0],):
        raise ShapeError(f"cross-entropy-with-logits: logits {logits.shape} "
                         f"vs labels {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= logits.shape[1]):
        raise DomainError("cross-entropy-with-logits: label out of range")
    z = logits.data
    m = np.max(z, axis=1, keepdims=True)
    lse = (m + np.log(np.sum(np.exp(z - m), axis=1, keepdims=True)))[:, 0]
    rows = np.arange(z.shape[0])
    out_data = lse - z[rows, labels]

    def vjp(g):
        p = np.exp(z - m)
        p /= np.sum(p, axis=1, keepdims=True)
        p[rows, labels] -= 1.0
        return (g[:, None] * p,)

    return _node(logits, _as_array(out_data),
                 "cross-entropy-with-logits", (logits,), vjp)


def squared_error(pred: Tensor, target: Tensor) -> Tensor:
    _binary_check("squared-error", pred, target)
    diff = pred.data - target.data

    def vjp(g):
        gp = _reduce_to(2.0 * diff * g, pred.shape) \
            if pred.requires_grad else None
        gt = _reduce_to(-2.0 * diff * g, target.shape) \
            if target.requires_grad else None
        return gp, gt

    return _node(pred, diff * diff, "squared-error", (pred, target), vjp)


_OPS: dict[str, Callable] = {
    "matmul": matmul, "add": add, "mul": mul, "sub": sub, "div": div,
    "neg": neg, "exp": exp, "log": log, "pow": pow_, "tanh": tanh,
    "sigmoid": sigmoid, "softplus": softplus, "hard_sigmoid": hard_sigmoid,
    "clip": clip, "concat": concat, "slice": narrow, "reshape": reshape,
    "expand": expand, "transpose": transpose, "sum": sum_, "mean": mean,
    "embedding-lookup": embedding, "softmax": softmax,
    "cross-entropy-with-logits": cross_entropy_with_logits,
    "squared-error": squared_error,
}


def forward_op(kind: str, *inputs, **kwargs) -> Tensor:
    """Apply an op by its registered kind name."""
    try:
        fn = _OPS[kind]
    except KeyError:
        raise ValueError(f"unknown op kind {kind!r}") from None
    return fn(*inputs, **kwargs)


def backward(graph: Graph, loss: Tensor) -> dict[str, np.ndarray]:
    """Gradients of a scalar loss w.r.t. every parameter on the graph.

    Repeated calls recompute from scratch and return identical results;
    gradients accumulate (by sum over paths) only within one call.
    Parameters unreachable from the loss get zero gradients.
    """
    if loss.shape != ():
        raise ShapeError(f"backward: loss must be a scalar, "
                         f"got shape {loss.shape}")
    grads: list[np.ndarray | None] = [None] * len(graph.nodes)
    grads[loss.idx] = np.ones((), dtype=np.float64)
    for node in reversed(graph.nodes[:loss.idx + 1]):
        g = grads[node.idx]
        if g is None or node.vjp is None:
            continue
        for parent, pg in zip(node.inputs, node.vjp(g)):
            if pg is None:
                continue
            if grads[parent.idx] is None:
                grads[parent.idx] = pg
            else:
                grads[parent.idx] = grads[parent.idx] + pg
    out = {}
    for name, p in graph.params.items():
        g = grads[p.idx]
        out[name] = np.zeros_like(p.data) if g is None \
            else _as_array(g)
    return out


def params_to_doc(arrays: dict[str, np.ndarray]) -> dict:
    """JSON-ready document: name -> {shape, data}; decimal text round-trips
    bit-exactly (shortest repr of each float64)."""
    return {name: {"shape": list(np.shape(a)),
                   "data": np.ravel(np.asarray(a, dtype=np.float64)).tolist()}
            for name, a in arrays.items()}


def params_from_doc(doc: dict) -> dict[str, np.ndarray]:
    out = {}
    for name, entry in doc.items():
        arr = np.asarray(entry["data"], dtype=np.float64)
        out[name] = _as_array(arr.reshape(entry["shape"]))
    return out


def save_params(path, arrays: dict[str, np.ndarray]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(params_to_doc(arrays), fh)


def load_params(path) -> dict[str, np.ndarray]:
    with open(path, "r", encoding="utf-8") as fh:
        return params_from_doc(json.load(fh))
