"""Dense-matrix and edge-vector kernels with tape-based reverse-mode differentiation.

Tensors wrap 2-D float64 numpy arrays. While a :class:`Tape` is active (``with Tape() as tape``),
every op whose inputs need gradients appends a record holding a vector-Jacobian closure;
:func:`backward` replays those records in reverse order.

Edge vectors are ``(E, 1)`` tensors tied to a graph through its fingerprint, one value per CSR slot.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

LOG_EPS = 1e-10
LEAKY_ALPHA = 0.2

_ids = itertools.count()
_active: list["Tape"] = []


class NumericalError(FloatingPointError):
    """A forward op produced NaN or Inf."""


class FingerprintError(ValueError):
    """An edge vector was combined with a graph it does not belong to."""


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "tape_id", "id", "__weakref__")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.array(data, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(-1, 1)
        elif arr.ndim != 2:
            raise ValueError(f"tensors are 2-D, got shape {arr.shape}")
        self.data = arr
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self.tape_id: int | None = None
        self.id = next(_ids)

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError(f"item() needs a 1x1 tensor, got {self.shape}")
        return float(self.data[0, 0])

    def numpy(self) -> np.ndarray:
        return self.data

    def __repr__(self):
        return f"{type(self).__name__}(shape={self.shape}, requires_grad={self.requires_grad})"

    # arithmetic sugar; shapes must match exactly (no broadcasting)
    def __add__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)


class EdgeVector(Tensor):
    """One value per CSR slot of the graph whose fingerprint it carries."""

    __slots__ = ("fingerprint",)

    def __init__(self, data, fingerprint: str, requires_grad: bool = False):
        super().__init__(data, requires_grad)
        if self.data.shape[1] != 1:
            raise ValueError(f"edge vectors are (E, 1), got {self.data.shape}")
        self.fingerprint = fingerprint

    def values(self) -> np.ndarray:
        return self.data[:, 0]


@dataclass
class _Record:
    out: Tensor
    inputs: tuple[Tensor, ...]
    kind: str
    vjp: Callable[[np.ndarray], Sequence[np.ndarray | None]]


@dataclass
class Tape:
    """Ordered op log for one forward pass. Rebuild per pass."""

    records: list[_Record] = field(default_factory=list)
    id: int = field(default_factory=lambda: next(_ids))

    def __enter__(self) -> "Tape":
        _active.append(self)
        return self

    def __exit__(self, *exc):
        _active.remove(self)
        return False

    @property
    def kinds(self) -> list[str]:
        return [r.kind for r in self.records]


def active_tape() -> Tape | None:
    return _active[-1] if _active else None


def _check_finite(arr: np.ndarray, kind: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise NumericalError(f"{kind} produced a non-finite value")


def _emit(kind: str, data: np.ndarray, inputs: tuple[Tensor, ...], vjp, like: Tensor | None = None) -> Tensor:
    _check_finite(data, kind)
    if isinstance(like, EdgeVector):
        out: Tensor = EdgeVector(data, like.fingerprint)
    else:
        out = Tensor(data)
    tape = active_tape()
    if tape is not None and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        out.tape_id = tape.id
        tape.records.append(_Record(out, inputs, kind, vjp))
    return out


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _same_shape(a: Tensor, b: Tensor, kind: str) -> None:
    if a.shape != b.shape:
        raise ValueError(f"{kind}: shape mismatch {a.shape} vs {b.shape}")
    if isinstance(a, EdgeVector) and isinstance(b, EdgeVector) and a.fingerprint != b.fingerprint:
        raise FingerprintError(f"{kind}: edge vectors from different graphs")


# --- dense products -------------------------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul: inner dimensions differ {a.shape} @ {b.shape}")
    A, B = a.data, b.data

    def vjp(g):
        return (g @ B.T if a.requires_grad else None, A.T @ g if b.requires_grad else None)

    return _emit("matmul", A @ B, (a, b), vjp)


# --- elementwise ----------------------------------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _same_shape(a, b, "add")
    return _emit("add", a.data + b.data, (a, b), lambda g: (g, g), like=a)


def sub(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _same_shape(a, b, "sub")
    return _emit("sub", a.data - b.data, (a, b), lambda g: (g, -g), like=a)


def mul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _same_shape(a, b, "mul")
    A, B = a.data, b.data
    return _emit("mul", A * B, (a, b), lambda g: (g * B, g * A), like=a)


def neg(x: Tensor) -> Tensor:
    return _emit("neg", -x.data, (x,), lambda g: (-g,), like=x)


def scale(x: Tensor, c: float) -> Tensor:
    c = float(c)
    return _emit("scale", x.data * c, (x,), lambda g: (g * c,), like=x)


def exp(x: Tensor) -> Tensor:
    with np.errstate(over="ignore"):
        y = np.exp(x.data)
    return _emit("exp", y, (x,), lambda g: (g * y,), like=x)


def log(x: Tensor, eps: float = LOG_EPS) -> Tensor:
    """Natural log of ``max(x, eps)``; the clamp has zero gradient below ``eps``."""
    X = x.data
    clamped = np.maximum(X, eps)
    live = X >= eps
    return _emit("log", np.log(clamped), (x,), lambda g: (np.where(live, g / clamped, 0.0),), like=x)


def power(x: Tensor, gamma: float) -> Tensor:
    """``x ** gamma`` for ``x >= 0``."""
    X = x.data
    if np.any(X < 0):
        raise ValueError("power: negative base")
    gamma = float(gamma)

    def vjp(g):
        if gamma == 0.0:
            return (np.zeros_like(X),)
        # d/dx x^gamma at x = 0 is taken as 0 (1 when gamma == 1) so gradients stay finite
        with np.errstate(divide="ignore", invalid="ignore"):
            d = np.where(X > 0, gamma * np.power(X, gamma - 1.0), 1.0 if gamma == 1.0 else 0.0)
        return (g * d,)

    return _emit("pow", np.power(X, gamma), (x,), vjp, like=x)


def leaky_relu(x: Tensor, alpha: float = LEAKY_ALPHA) -> Tensor:
    X = x.data
    slope = np.where(X > 0, 1.0, alpha)
    return _emit("leaky_relu", X * slope, (x,), lambda g: (g * slope,), like=x)


def relu(x: Tensor) -> Tensor:
    X = x.data
    on = (X > 0).astype(np.float64)
    return _emit("relu", X * on, (x,), lambda g: (g * on,), like=x)


def elu(x: Tensor) -> Tensor:
    X = x.data
    neg_part = np.expm1(np.minimum(X, 0.0))
    y = np.where(X > 0, X, neg_part)
    d = np.where(X > 0, 1.0, neg_part + 1.0)
    return _emit("elu", y, (x,), lambda g: (g * d,), like=x)


def dropout(x: Tensor, rate: float, rng: np.random.Generator | None, training: bool) -> Tensor:
    """Inverted dropout; identity when not training or ``rate == 0``."""
    if not training or rate <= 0.0:
        return x
    if rng is None:
        raise ValueError("dropout in training mode needs an rng")
    keep = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return _emit("dropout", x.data * keep, (x,), lambda g: (g * keep,), like=x)


# --- reductions and reshaping --------------------------------------------------------------


def sum_all(x: Tensor) -> Tensor:
    shape = x.shape
    return _emit("sum", np.array([[x.data.sum()]]), (x,), lambda g: (np.full(shape, g[0, 0]),))


def mean_all(x: Tensor) -> Tensor:
    return scale(sum_all(x), 1.0 / x.data.size)


def concat_cols(parts: Sequence[Tensor]) -> Tensor:
    if not parts:
        raise ValueError("concat_cols: nothing to concatenate")
    rows = parts[0].shape[0]
    if any(p.shape[0] != rows for p in parts):
        raise ValueError("concat_cols: row counts differ")
    bounds = np.cumsum([0] + [p.shape[1] for p in parts])

    def vjp(g):
        return tuple(g[:, bounds[i] : bounds[i + 1]] for i in range(len(parts)))

    return _emit("concat", np.concatenate([p.data for p in parts], axis=1), tuple(parts), vjp)


def take(x: Tensor, rows: np.ndarray, cols: np.ndarray) -> Tensor:
    """Gather ``x[rows[i], cols[i]]`` into a ``(k, 1)`` column."""
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    shape = x.shape

    def vjp(g):
        out = np.zeros(shape)
        np.add.at(out, (rows, cols), g[:, 0])
        return (out,)

    return _emit("take", x.data[rows, cols].reshape(-1, 1), (x,), vjp)


def row_softmax(x: Tensor) -> Tensor:
    X = x.data
    e = np.exp(X - X.max(axis=1, keepdims=True))
    y = e / e.sum(axis=1, keepdims=True)

    def vjp(g):
        return (y * (g - (g * y).sum(axis=1, keepdims=True)),)

    return _emit("row_softmax", y, (x,), vjp)


# --- graph segment ops ----------------------------------------------------------------------


def _check_graph(ev: Tensor, graph) -> None:
    if not isinstance(ev, EdgeVector):
        raise TypeError("expected an EdgeVector")
    if ev.fingerprint != graph.fingerprint:
        raise FingerprintError("edge vector fingerprint does not match graph")
    if ev.shape[0] != graph.num_slots:
        raise ValueError(f"edge vector has {ev.shape[0]} slots, graph has {graph.num_slots}")


def _segment_sum(values: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    # segments are never empty (self-loops), so reduceat is exact per row
    return np.add.reduceat(values, offsets[:-1], axis=0)


def gather_nodes(x: Tensor, graph, end: str) -> EdgeVector:
    """Lift a ``(V, 1)`` node column to edge slots: ``end='row'`` takes the segment owner v,
    ``end='col'`` the neighbour u of slot (v, u)."""
    if x.shape != (graph.num_nodes, 1):
        raise ValueError(f"gather_nodes expects ({graph.num_nodes}, 1), got {x.shape}")
    if end == "row":
        idx = graph.slot_rows
    elif end == "col":
        idx = graph.col_indices
    else:
        raise ValueError(f"unknown end {end!r}")
    n = graph.num_nodes

    def vjp(g):
        return (np.bincount(idx, weights=g[:, 0], minlength=n).reshape(-1, 1),)

    proto = EdgeVector(np.zeros((graph.num_slots, 1)), graph.fingerprint)
    return _emit("gather_" + end, x.data[idx], (x,), vjp, like=proto)


def segment_softmax(scores: EdgeVector, graph) -> EdgeVector:
    """Softmax over each node's CSR segment, max-shifted for stability."""
    _check_graph(scores, graph)
    offsets, owner = graph.row_offsets, graph.slot_rows
    s = scores.data[:, 0]
    seg_max = np.maximum.reduceat(s, offsets[:-1])
    e = np.exp(s - seg_max[owner])
    y = e / _segment_sum(e, offsets)[owner]

    def vjp(g):
        g = g[:, 0]
        inner = _segment_sum(g * y, offsets)
        return ((y * (g - inner[owner])).reshape(-1, 1),)

    return _emit("segment_softmax", y.reshape(-1, 1), (scores,), vjp, like=scores)


def _slot_matrix(w: np.ndarray, graph) -> sp.csr_matrix:
    n = graph.num_nodes
    return sp.csr_matrix((w, graph.col_indices, graph.row_offsets), shape=(n, n))


def segment_weighted_sum(weights: EdgeVector, h: Tensor, graph) -> Tensor:
    """Row v of the output is sum over v's segment of ``weights[v, u] * h[u]``."""
    _check_graph(weights, graph)
    if h.shape[0] != graph.num_nodes:
        raise ValueError(f"h has {h.shape[0]} rows, graph has {graph.num_nodes} nodes")
    w = weights.data[:, 0]
    H = h.data
    mat = _slot_matrix(w, graph)

    def vjp(g):
        dw = None
        if weights.requires_grad:
            dw = np.einsum("ij,ij->i", g[graph.slot_rows], H[graph.col_indices]).reshape(-1, 1)
        dh = mat.T @ g if h.requires_grad else None
        return (dw, dh)

    return _emit("segment_weighted_sum", np.asarray(mat @ H), (weights, h), vjp)


# --- reverse pass ---------------------------------------------------------------------------


def backward(tape: Tape, loss: Tensor) -> dict[int, np.ndarray]:
    """Propagate d(loss)/d(.) over ``tape``; returns grads keyed by tensor id and stores each
    leaf's gradient on ``.grad``."""
    if loss.shape != (1, 1):
        raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
    if loss.tape_id != tape.id:
        raise ValueError("loss was not recorded on this tape")
    grads: dict[int, np.ndarray] = {loss.id: np.ones((1, 1))}
    leaves: dict[int, Tensor] = {}
    for rec in reversed(tape.records):
        g = grads.pop(rec.out.id, None)
        if g is None:
            continue
        for inp, gi in zip(rec.inputs, rec.vjp(g)):
            if gi is None or not inp.requires_grad:
                continue
            if inp.tape_id is None:
                leaves[inp.id] = inp
            if inp.id in grads:
                grads[inp.id] = grads[inp.id] + gi
            else:
                grads[inp.id] = np.array(gi, dtype=np.float64).reshape(inp.shape)
    out = {}
    for tid, t in leaves.items():
        t.grad = grads.get(tid, np.zeros(t.shape))
        out[tid] = t.grad
    return out


def grad_of(tape: Tape, loss: Tensor, params: Sequence[Tensor]) -> list[np.ndarray]:
    """Gradients for ``params`` in order; zeros for parameters the loss does not touch."""
    g = backward(tape, loss)
    return [g.get(p.id, np.zeros(p.shape)) for p in params]
