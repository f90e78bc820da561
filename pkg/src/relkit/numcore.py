"""Dense float64 tensors with a reverse-mode tape and an Adam optimizer.

Everything in the workbench runs on this substrate: a `Tensor` wraps a
row-major numpy array, operations executed while a `Tape` is active append
records (output, inputs, local gradient rule) in execution order, and
`backward` replays the records in reverse. Execution order is topological
order by construction, so no sorting pass is needed.

Shapes are kept deliberately rigid: 1-D/2-D arrays plus scalars, with
broadcasting allowed only for a bias row over the leading axis and a
column vector over the trailing axis. Rigid shapes keep every gradient
rule auditable against `finite_diff_grad`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np


class ShapeError(ValueError):
    """Operand shapes are incompatible with the requested operation."""


class ParameterError(ValueError):
    """An operation hyperparameter is out of its valid range."""


class NumericError(ArithmeticError):
    """A non-finite value (NaN/Inf) appeared where finite data is required."""


def _require_finite(arr: np.ndarray, op: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"{op} produced non-finite values")


class Tensor:
    """A dense float64 array with an optional gradient buffer.

    Tensors created directly by the user (parameters, inputs) are leaves;
    tensors returned by operations are interior nodes. `backward`
    accumulates into `.grad` of leaf tensors that require grad.
    """

    __slots__ = ("data", "requires_grad", "grad", "is_leaf")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim > 2:
            raise ShapeError(f"tensors are scalar, 1-D or 2-D, got shape {arr.shape}")
        _require_finite(arr, "tensor construction")
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self.is_leaf = True

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.data)

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single element, got shape {self.shape}")
        return float(self.data.reshape(()))

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


def tensor(data, requires_grad: bool = False) -> Tensor:
    return Tensor(data, requires_grad=requires_grad)


@dataclass
class _Record:
    out: Tensor
    inputs: tuple[Tensor, ...]
    # maps the output gradient onto per-input gradients (None for no flow)
    rule: Callable[[np.ndarray], tuple[np.ndarray | None, ...]]


class Tape:
    """Ordered record of differentiable operations.

    Used as a context manager; operations executed inside append records
    when any input requires grad. Records are in execution order, which is
    a valid topological order of the computation graph.
    """

    def __init__(self):
        self.records: list[_Record] = []

    def __enter__(self) -> "Tape":
        _TAPES.append(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> bool:
        popped = _TAPES.pop()
        assert popped is self, "tape stack corrupted"
        return False

    def __len__(self) -> int:
        return len(self.records)


_TAPES: list[Tape] = []


def _active_tape() -> Tape | None:
    return _TAPES[-1] if _TAPES else None


def _make(data: np.ndarray, inputs: tuple[Tensor, ...], rule, op: str) -> Tensor:
    _require_finite(data, op)
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out.is_leaf = False
    tape = _active_tape()
    needs = tape is not None and any(t.requires_grad for t in inputs)
    out.requires_grad = bool(needs)
    if needs:
        tape.records.append(_Record(out, inputs, rule))
    return out


# ---------------------------------------------------------------------------
# elementwise and structural operations


def add(a: Tensor, b: Tensor) -> Tensor:
    """a + b. b may be a bias row (broadcast over leading axis) or a column
    vector (broadcast over trailing axis) against a 2-D a."""
    mode = _broadcast_mode(a.shape, b.shape, "add")
    data = a.data + b.data

    def rule(g):
        return g, _reduce_broadcast(g, mode)

    return _make(data, (a, b), rule, "add")


def _broadcast_mode(sa, sb, op: str) -> str:
    if sa == sb:
        return "same"
    if len(sa) == 2 and len(sb) == 1 and sb[0] == sa[1]:
        return "row"
    if len(sa) == 2 and sb == (1, sa[1]):
        return "row2"
    if len(sa) == 2 and sb == (sa[0], 1):
        return "col"
    raise ShapeError(f"{op}: cannot broadcast {sb} onto {sa}")


def _reduce_broadcast(g: np.ndarray, mode: str) -> np.ndarray:
    if mode == "same":
        return g
    if mode == "row":
        return g.sum(axis=0)
    if mode == "row2":
        return g.sum(axis=0, keepdims=True)
    return g.sum(axis=1, keepdims=True)  # col


def sub(a: Tensor, b: Tensor) -> Tensor:
    mode = _broadcast_mode(a.shape, b.shape, "sub")
    data = a.data - b.data

    def rule(g):
        return g, -_reduce_broadcast(g, mode)

    return _make(data, (a, b), rule, "sub")


def neg(a: Tensor) -> Tensor:
    return _make(-a.data, (a,), lambda g: (-g,), "neg")


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise product, with the same broadcast rules as add."""
    mode = _broadcast_mode(a.shape, b.shape, "mul")
    data = a.data * b.data
    ad, bd = a.data, b.data

    def rule(g):
        return g * bd, _reduce_broadcast(g * ad, mode)

    return _make(data, (a, b), rule, "mul")


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)
    return _make(a.data * c, (a,), lambda g: (g * c,), "scale")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} x {b.shape}")
    data = a.data @ b.data
    ad, bd = a.data, b.data

    def rule(g):
        return g @ bd.T, ad.T @ g

    return _make(data, (a, b), rule, "matmul")


def transpose(a: Tensor) -> Tensor:
    if a.data.ndim != 2:
        raise ShapeError(f"transpose needs a 2-D tensor, got {a.shape}")
    return _make(a.data.T.copy(), (a,), lambda g: (g.T,), "transpose")


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(int(s) for s in shape)
    old = a.shape
    data = a.data.reshape(shape)

    def rule(g):
        return (g.reshape(old),)

    return _make(data.copy(), (a,), rule, "reshape")


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    if not tensors:
        raise ShapeError("concat of an empty sequence")
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def rule(g):
        return tuple(np.split(g, splits, axis=axis))

    return _make(data, tuple(tensors), rule, "concat")


def narrow(a: Tensor, axis: int, start: int, stop: int) -> Tensor:
    """Contiguous slice along one axis of a 2-D tensor."""
    if a.data.ndim != 2:
        raise ShapeError(f"narrow needs a 2-D tensor, got {a.shape}")
    if not (0 <= start < stop <= a.shape[axis]):
        raise ShapeError(f"narrow: [{start}:{stop}] out of range for axis {axis} of {a.shape}")
    sl = (slice(start, stop), slice(None)) if axis == 0 else (slice(None), slice(start, stop))
    full = a.shape

    def rule(g):
        buf = np.zeros(full)
        buf[sl] = g
        return (buf,)

    return _make(a.data[sl].copy(), (a,), rule, "narrow")


def gather_rows(a: Tensor, indices: Sequence[int]) -> Tensor:
    """Select rows of a 2-D tensor; repeated indices accumulate gradient."""
    if a.data.ndim != 2:
        raise ShapeError(f"gather_rows needs a 2-D tensor, got {a.shape}")
    idx = np.asarray(indices, dtype=np.intp)
    if idx.size and (idx.min() < 0 or idx.max() >= a.shape[0]):
        raise ShapeError(f"gather_rows: index out of range for {a.shape[0]} rows")
    full = a.shape

    def rule(g):
        buf = np.zeros(full)
        np.add.at(buf, idx, g)
        return (buf,)

    return _make(a.data[idx].copy(), (a,), rule, "gather_rows")


def tsum(a: Tensor, axis: int | None = None, keepdims: bool = False) -> Tensor:
    data = a.data.sum(axis=axis, keepdims=keepdims)
    shp = a.shape

    def rule(g):
        if axis is None:
            return (np.full(shp, float(g)),)
        ge = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(ge, shp).copy(),)

    return _make(np.asarray(data), (a,), rule, "sum")


def mean(a: Tensor) -> Tensor:
    return scale(tsum(a), 1.0 / a.size)


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)
    return _make(y, (a,), lambda g: (g * (1.0 - y * y),), "tanh")


def sigmoid(a: Tensor) -> Tensor:
    y = 1.0 / (1.0 + np.exp(-a.data))
    return _make(y, (a,), lambda g: (g * y * (1.0 - y),), "sigmoid")


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    return _make(np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,), "relu")


def softmax(a: Tensor, axis: int = -1, temperature: float = 1.0) -> Tensor:
    """exp(x/T) normalized along `axis`, stabilized by max subtraction."""
    if temperature <= 0:
        raise ParameterError(f"softmax temperature must be positive, got {temperature}")
    x = a.data / temperature
    m = x.max(axis=axis, keepdims=True)
    e = np.exp(x - m)
    y = e / e.sum(axis=axis, keepdims=True)

    def rule(g):
        dot = (g * y).sum(axis=axis, keepdims=True)
        return ((y * (g - dot)) / temperature,)

    return _make(y, (a,), rule, "softmax")


def layer_norm(a: Tensor, gain: Tensor, bias: Tensor, epsilon: float = 1e-5) -> Tensor:
    """Zero-mean unit-variance normalization of the last axis, then affine."""
    n = a.shape[-1]
    if gain.shape != (n,) or bias.shape != (n,):
        raise ShapeError(
            f"layer_norm: gain/bias shapes {gain.shape}/{bias.shape} do not match last axis {n}"
        )
    mu = a.data.mean(axis=-1, keepdims=True)
    xc = a.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + epsilon)
    xhat = xc * inv
    y = xhat * gain.data + bias.data
    gd = gain.data

    def rule(g):
        dxhat = g * gd
        dvar = (dxhat * xc).sum(axis=-1, keepdims=True) * (-0.5) * inv**3
        dmu = -(dxhat * inv).sum(axis=-1, keepdims=True) + dvar * (-2.0 / n) * xc.sum(
            axis=-1, keepdims=True
        )
        dx = dxhat * inv + dvar * 2.0 * xc / n + dmu / n
        axes = tuple(range(g.ndim - 1))
        return dx, (g * xhat).sum(axis=axes), g.sum(axis=axes)

    return _make(y, (a, gain, bias), rule, "layer_norm")


def cross_entropy(logits: Tensor, targets: Sequence[int]) -> Tensor:
    """Mean negative log-likelihood of integer class targets.

    Computed in log-sum-exp form so saturated logits stay finite.
    """
    x = logits.data
    if x.ndim == 1:
        x = x.reshape(1, -1)
    b, c = x.shape
    t = np.asarray(targets, dtype=np.intp)
    if t.shape != (b,):
        raise ShapeError(f"cross_entropy: {b} rows but {t.shape} targets")
    if t.size and (t.min() < 0 or t.max() >= c):
        raise ShapeError(f"cross_entropy: target out of range for {c} classes")
    m = x.max(axis=1, keepdims=True)
    lse = m[:, 0] + np.log(np.exp(x - m).sum(axis=1))
    loss = (lse - x[np.arange(b), t]).mean()
    probs = np.exp(x - m)
    probs /= probs.sum(axis=1, keepdims=True)
    orig_shape = logits.shape

    def rule(g):
        gx = probs.copy()
        gx[np.arange(b), t] -= 1.0
        gx *= float(g) / b
        return (gx.reshape(orig_shape),)

    return _make(np.asarray(loss), (logits,), rule, "cross_entropy")


# ---------------------------------------------------------------------------
# reverse pass and the finite-difference oracle


def backward(tape: Tape, loss: Tensor) -> dict[int, np.ndarray]:
    """Accumulate gradients of a scalar loss into leaf tensors' .grad.

    Walks the tape in reverse execution order; when a record's output
    gradient is popped, every later record that consumed it has already
    contributed, so each record is expanded exactly once. Leaves are never
    record outputs, so whatever remains in the map afterwards belongs to
    them (plus the loss itself when it is a bare leaf).
    """
    if loss.data.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    leaves: dict[int, Tensor] = {}
    if loss.is_leaf and loss.requires_grad:
        leaves[id(loss)] = loss
    for rec in reversed(tape.records):
        g_out = grads.pop(id(rec.out), None)
        if g_out is None:
            continue
        parts = rec.rule(g_out)
        for t, g in zip(rec.inputs, parts):
            if g is None or not t.requires_grad:
                continue
            key = id(t)
            if key in grads:
                grads[key] = grads[key] + g
            else:
                grads[key] = np.asarray(g, dtype=np.float64)
            if t.is_leaf:
                leaves[key] = t
    for key, t in leaves.items():
        g = grads.get(key)
        if g is None:
            continue
        if t.grad is None:
            t.grad = np.zeros_like(t.data)
        t.grad = t.grad + g.reshape(t.data.shape)
    return grads


def finite_diff_grad(f: Callable[[np.ndarray], float], x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient estimate of a scalar function.

    The independent oracle for `backward`: it never touches the tape.
    """
    if h <= 0:
        raise ParameterError(f"finite difference step must be positive, got {h}")
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = float(f(x))
        flat[i] = orig - h
        fm = float(f(x))
        flat[i] = orig
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NumericError("finite_diff_grad: non-finite function evaluation")
        gf[i] = (fp - fm) / (2.0 * h)
    return g


# ---------------------------------------------------------------------------
# optimizer


@dataclass
class AdamState:
    """Per-parameter moment buffers plus hyperparameters."""

    m: list[np.ndarray]
    v: list[np.ndarray]
    step_count: int = 0
    lr: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8


def adam_init(params: Sequence[Tensor], lr: float = 3e-4, beta1: float = 0.9,
              beta2: float = 0.999, epsilon: float = 1e-8) -> AdamState:
    return AdamState(
        m=[np.zeros_like(p.data) for p in params],
        v=[np.zeros_like(p.data) for p in params],
        lr=lr, beta1=beta1, beta2=beta2, epsilon=epsilon,
    )


def adam_step(params: Sequence[Tensor], grads: Sequence[np.ndarray], state: AdamState) -> AdamState:
    """One bias-corrected Adam update, applied in place to params."""
    if len(params) != len(state.m) or len(grads) != len(params):
        raise ShapeError("adam_step: params/grads/state lengths disagree")
    state.step_count += 1
    t = state.step_count
    c1 = 1.0 - state.beta1**t
    c2 = 1.0 - state.beta2**t
    for i, (p, g) in enumerate(zip(params, grads)):
        g = np.asarray(g, dtype=np.float64)
        if g.shape != p.data.shape:
            raise ShapeError(f"adam_step: grad shape {g.shape} vs param {p.data.shape}")
        _require_finite(g, "adam_step gradient")
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * (g * g)
        mhat = state.m[i] / c1
        vhat = state.v[i] / c2
        p.data -= state.lr * mhat / (np.sqrt(vhat) + state.epsilon)
    return state


def zero_grads(params: Sequence[Tensor]) -> None:
    for p in params:
        p.zero_grad()
