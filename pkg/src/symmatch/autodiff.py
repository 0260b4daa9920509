"""Small reverse-mode autodiff over dense float64 arrays.

Operations are recorded on the active :class:`Tape` (see ``with Tape():``)
whenever at least one input requires a gradient. Outside of a tape the same
functions run forward only, which is what inference uses.

Only the operators needed by the encoder and the matching losses exist here.
"""

from __future__ import annotations

import struct
import threading
from dataclasses import dataclass, field
from typing import BinaryIO, Callable, Sequence

import numpy as np

__all__ = [
    "Tensor",
    "Tape",
    "backward",
    "set_debug",
    "matmul",
    "add",
    "sub",
    "scale",
    "relu",
    "transpose",
    "concat_cols",
    "repeat_rows",
    "global_max_pool",
    "row_softmax",
    "frobenius_sq",
    "sqrt",
    "total",
    "gather_rows",
    "scatter_cols",
    "write_tensor",
    "read_tensor",
]

_state = threading.local()
_DEBUG = False


def set_debug(flag: bool) -> None:
    """Turn NaN/Inf checks at op boundaries on or off (process-wide)."""
    global _DEBUG
    _DEBUG = bool(flag)


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "name", "_node")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.name = name
        self._node: _Node | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def tape_id(self) -> int | None:
        return None if self._node is None else self._node.index

    def zero_grad(self) -> None:
        self.grad = None

    def numpy(self) -> np.ndarray:
        return self.data

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag}, requires_grad={self.requires_grad})"


@dataclass
class _Node:
    index: int
    op: str
    out: Tensor
    inputs: tuple[Tensor, ...]
    backward: Callable[[np.ndarray], Sequence[np.ndarray | None]]
    tape: "Tape"


@dataclass
class Tape:
    """Append-only op record. Use as a context manager to make it active."""

    nodes: list[_Node] = field(default_factory=list)

    def __enter__(self) -> "Tape":
        stack = _tape_stack()
        stack.append(self)
        return self

    def __exit__(self, *exc) -> None:
        _tape_stack().pop()

    def record(self, op, out, inputs, backward_fn) -> None:
        node = _Node(len(self.nodes), op, out, tuple(inputs), backward_fn, self)
        out._node = node
        self.nodes.append(node)

    def release(self) -> None:
        """Drop recorded nodes so their intermediate arrays can be freed right away.

        Outputs keep their data but can no longer be differentiated through.
        """
        for node in self.nodes:
            node.out._node = None
            node.inputs = ()
            node.backward = None
        self.nodes.clear()


def _tape_stack() -> list[Tape]:
    if not hasattr(_state, "stack"):
        _state.stack = []
    return _state.stack


def _active_tape() -> Tape | None:
    stack = _tape_stack()
    return stack[-1] if stack else None


def _tracked(t: Tensor) -> bool:
    return t.requires_grad or t._node is not None


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(op: str, data: np.ndarray, inputs: Sequence[Tensor], backward_fn, name=None) -> Tensor:
    if _DEBUG and not np.all(np.isfinite(data)):
        where = f"{op} in layer {name}" if name else op
        raise FloatingPointError(f"non-finite values produced by {where}")
    out = Tensor(data, name=name)
    tape = _active_tape()
    if tape is not None and any(_tracked(t) for t in inputs):
        tape.record(op, out, inputs, backward_fn)
    return out


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(leaf) into ``leaf.grad`` for every tracked leaf."""
    if loss.data.size != 1:
        raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
    if loss._node is None:
        raise ValueError("loss is not attached to a tape")
    tape = loss._node.tape
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    leaves: dict[int, Tensor] = {}
    for node in reversed(tape.nodes[: loss._node.index + 1]):
        g = grads.pop(id(node.out), None)
        if g is None:
            continue
        for inp, gi in zip(node.inputs, node.backward(g)):
            if gi is None or not _tracked(inp):
                continue
            key = id(inp)
            if key in grads:
                grads[key] = grads[key] + gi
            else:
                grads[key] = gi
            if inp._node is None:
                leaves[key] = inp
    for key, leaf in leaves.items():
        g = grads[key]
        leaf.grad = g.copy() if leaf.grad is None else leaf.grad + g


# ---------------------------------------------------------------- operators


def matmul(a: Tensor, b: Tensor, name: str | None = None) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    A, B = a.data, b.data

    def bw(g):
        return g @ B.T, A.T @ g

    return _make("matmul", A @ B, (a, b), bw, name)


def add(a: Tensor, b: Tensor, name: str | None = None) -> Tensor:
    """Elementwise sum. ``b`` may be a 1×d bias row added to every row of ``a``."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape == b.shape:
        return _make("add", a.data + b.data, (a, b), lambda g: (g, g), name)
    if a.data.ndim == 2 and b.shape == (1, a.shape[1]):
        return _make(
            "add_bias", a.data + b.data, (a, b), lambda g: (g, g.sum(axis=0, keepdims=True)), name
        )
    raise ValueError(f"add shape mismatch: {a.shape} + {b.shape}")


def sub(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape != b.shape:
        raise ValueError(f"sub shape mismatch: {a.shape} - {b.shape}")
    return _make("sub", a.data - b.data, (a, b), lambda g: (g, -g))


def scale(a: Tensor, c: float) -> Tensor:
    a = _as_tensor(a)
    c = float(c)
    return _make("scale", a.data * c, (a,), lambda g: (g * c,))


def relu(a: Tensor, name: str | None = None) -> Tensor:
    a = _as_tensor(a)
    mask = a.data > 0
    return _make("relu", np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,), name)


def transpose(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    if a.data.ndim != 2:
        raise ValueError("transpose expects a matrix")
    return _make("transpose", np.ascontiguousarray(a.data.T), (a,), lambda g: (g.T,))


def concat_cols(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[0] != b.shape[0]:
        raise ValueError(f"concat_cols row mismatch: {a.shape} | {b.shape}")
    d = a.shape[1]
    return _make(
        "concat_cols", np.concatenate([a.data, b.data], axis=1), (a, b), lambda g: (g[:, :d], g[:, d:])
    )


def repeat_rows(a: Tensor, n: int) -> Tensor:
    """Tile a 1×d row into an n×d matrix."""
    a = _as_tensor(a)
    if a.data.ndim != 2 or a.shape[0] != 1:
        raise ValueError(f"repeat_rows expects a single row, got {a.shape}")
    return _make(
        "repeat_rows", np.repeat(a.data, n, axis=0), (a,), lambda g: (g.sum(axis=0, keepdims=True),)
    )


def global_max_pool(a: Tensor) -> Tensor:
    """Column-wise max over rows (n×d -> 1×d). Gradient goes to the first argmax row."""
    a = _as_tensor(a)
    if a.data.ndim != 2 or a.shape[0] < 1:
        raise ValueError(f"global_max_pool expects a non-empty matrix, got {a.shape}")
    rows = np.argmax(a.data, axis=0)  # first occurrence on ties
    cols = np.arange(a.shape[1])
    shape = a.shape

    def bw(g):
        out = np.zeros(shape)
        out[rows, cols] = g[0]
        return (out,)

    return _make("global_max_pool", a.data[rows, cols][None, :], (a,), bw)


def row_softmax(logits: Tensor, tau: float) -> Tensor:
    """Softmax of ``logits / tau`` along each row, max-shifted for stability."""
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    x = _as_tensor(logits)
    if x.data.ndim != 2:
        raise ValueError("row_softmax expects a matrix")
    z = x.data / tau
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=1, keepdims=True)

    def bw(g):
        return ((g - (g * s).sum(axis=1, keepdims=True)) * s / tau,)

    return _make("row_softmax", s, (x,), bw)


def frobenius_sq(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    A = a.data
    return _make("frobenius_sq", np.asarray(np.sum(A * A)), (a,), lambda g: (2.0 * g * A,))


def sqrt(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    r = np.sqrt(a.data)
    return _make("sqrt", r, (a,), lambda g: (g * 0.5 / r,))


def total(a: Tensor) -> Tensor:
    """Sum of all entries, as a scalar tensor."""
    a = _as_tensor(a)
    shape = a.shape
    return _make("total", np.asarray(a.data.sum()), (a,), lambda g: (np.full(shape, float(g)),))


def gather_rows(a: Tensor, idx) -> Tensor:
    """Rows ``a[idx]``; the action of a 0/1 map matrix applied from the left."""
    a = _as_tensor(a)
    idx = np.asarray(idx, dtype=np.intp)
    shape = a.shape

    def bw(g):
        out = np.zeros(shape)
        np.add.at(out, idx, g)
        return (out,)

    return _make("gather_rows", a.data[idx], (a,), bw)


def scatter_cols(a: Tensor, idx, width: int) -> Tensor:
    """``a @ M`` for the 0/1 matrix with ``M[l, idx[l]] = 1``, without building M."""
    a = _as_tensor(a)
    idx = np.asarray(idx, dtype=np.intp)
    if a.data.ndim != 2 or idx.shape != (a.shape[1],):
        raise ValueError(f"scatter_cols: index length {idx.shape} does not match {a.shape}")
    out = np.zeros((a.shape[0], width))
    np.add.at(out.T, idx, a.data.T)
    return _make("scatter_cols", out, (a,), lambda g: (g[:, idx],))


# ---------------------------------------------------------------- serialization

_MAGIC = b"SMT1"


def write_tensor(f: BinaryIO, arr: np.ndarray) -> None:
    """Shape header followed by row-major little-endian doubles."""
    arr = np.array(arr, dtype="<f8", order="C")
    f.write(_MAGIC)
    f.write(struct.pack("<I", arr.ndim))
    f.write(struct.pack(f"<{arr.ndim}q", *arr.shape))
    f.write(arr.tobytes())


def read_tensor(f: BinaryIO) -> np.ndarray:
    if f.read(4) != _MAGIC:
        raise ValueError("bad tensor header")
    (ndim,) = struct.unpack("<I", f.read(4))
    shape = struct.unpack(f"<{ndim}q", f.read(8 * ndim))
    count = int(np.prod(shape)) if ndim else 1
    buf = f.read(8 * count)
    if len(buf) != 8 * count:
        raise ValueError("truncated tensor blob")
    return np.frombuffer(buf, dtype="<f8").reshape(shape).astype(np.float64)
