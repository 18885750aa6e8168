"""Dense float64 tensors with tape-based reverse-mode differentiation.

A `Tape` records operations while active (thread-local); `Tensor` wraps a
row-major numpy buffer. Ops executed with no active tape are plain numpy,
which keeps inference forwards free of autodiff overhead. Every forward
op validates that its output is finite.
"""

from __future__ import annotations

import threading

import numpy as np

_LOCAL = threading.local()


def active_tape():
    """The innermost active Tape in this thread, or None."""
    return getattr(_LOCAL, "tape", None)


def _check_finite(arr: np.ndarray, op: str) -> None:
    # sum() is finite iff all elements are (overflow of legitimately huge
    # values also trips, which is an error condition at our scales anyway)
    if not np.isfinite(np.sum(arr)):
        raise FloatingPointError(f"non-finite values produced by '{op}'")


class Tape:
    """Records the operations of one forward pass for a single backward walk.

    A tape is consumed by `backward` and must then be discarded; training
    loops open a fresh tape per optimization step. Independent tapes in
    different threads do not interact.
    """

    def __init__(self):
        self._ops = []  # (out_id, parent_ids, backward_fn)
        self._n_ids = 0
        self.consumed = False

    def __enter__(self) -> "Tape":
        stack = getattr(_LOCAL, "stack", None)
        if stack is None:
            stack = _LOCAL.stack = []
        stack.append(self)
        _LOCAL.tape = self
        return self

    def __exit__(self, *exc):
        stack = _LOCAL.stack
        stack.pop()
        _LOCAL.tape = stack[-1] if stack else None
        return False

    def _new_id(self) -> int:
        i = self._n_ids
        self._n_ids += 1
        return i

    def _record(self, out_id, parent_ids, backward_fn) -> None:
        self._ops.append((out_id, parent_ids, backward_fn))

    def backward(self, loss: "Tensor") -> dict:
        """Accumulated gradients {tape id: ndarray} of a scalar loss.

        Raises if the loss is not scalar, is not on this tape, or if the
        tape was already consumed.
        """
        if self.consumed:
            raise RuntimeError("tape already consumed by a previous backward")
        if loss.data.size != 1:
            raise ValueError(f"backward requires a scalar loss, got shape {loss.shape}")
        loss_tid = loss._tid_on(self)
        if loss_tid is None:
            raise ValueError("loss was not produced under this tape")
        self.consumed = True
        grads: dict = {loss_tid: np.ones_like(loss.data)}
        for out_id, parent_ids, backward_fn in reversed(self._ops):
            g = grads.get(out_id)
            if g is None:
                continue
            for pid, pg in zip(parent_ids, backward_fn(g)):
                if pid is None or pg is None:
                    continue
                acc = grads.get(pid)
                if acc is None:
                    grads[pid] = pg.copy() if pg.base is not None or not pg.flags.owndata else pg
                else:
                    acc += pg
        return grads

    def grad(self, loss: "Tensor", wrt) -> list:
        """Gradients of `loss` for each tensor in `wrt` (zeros if unreached)."""
        grads = self.backward(loss)
        out = []
        for t in wrt:
            tid = t._tid_on(self)
            g = grads.get(tid) if tid is not None else None
            out.append(np.zeros_like(t.data) if g is None else g)
        return out


class Tensor:
    """Shape-checked float64 buffer, optionally tracked by the active tape."""

    __slots__ = ("data", "requires_grad", "_tape", "_tid", "_bind")

    def __init__(self, data, requires_grad: bool = False):
        # ascontiguousarray would promote 0-d scalars to shape (1,)
        self.data = np.asarray(data, dtype=np.float64)
        if not self.data.flags["C_CONTIGUOUS"]:
            self.data = np.ascontiguousarray(self.data)
        _check_finite(self.data, "tensor")
        self.requires_grad = requires_grad
        self._tape = None
        self._tid = None
        self._bind = None

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.shape})"

    def _node(self, tape: Tape):
        """Tape id of this tensor, registering it as a leaf if tracked.

        Leaves (requires_grad) may be bound to several live tapes at once;
        op outputs belong to exactly the tape active at creation.
        """
        if self._tape is tape:
            return self._tid
        if not self.requires_grad:
            return None
        bind = self._bind
        if bind is None:
            bind = self._bind = {}
        tid = bind.get(tape)
        if tid is None:
            for dead in [t for t in bind if t.consumed]:
                del bind[dead]
            tid = tape._new_id()
            bind[tape] = tid
        return tid

    def _tid_on(self, tape: Tape):
        """Tape id of this tensor on `tape` without registering, or None."""
        if self._tape is tape:
            return self._tid
        bind = self._bind
        return None if bind is None else bind.get(tape)

    # --- operator sugar -------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) > 1 else shape[0])


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def _make(out_data: np.ndarray, op: str, parents, backward_fn) -> Tensor:
    """Wrap an op result, recording it when any parent lives on the tape."""
    _check_finite(out_data, op)
    out = Tensor.__new__(Tensor)
    out.data = out_data
    out.requires_grad = False
    out._tape = None
    out._tid = None
    out._bind = None
    tape = active_tape()
    if tape is not None:
        pids = [p._node(tape) for p in parents]
        if any(pid is not None for pid in pids):
            out._tape = tape
            out._tid = tape._new_id()
            tape._record(out._tid, pids, backward_fn)
    return out


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a gradient down to `shape`, undoing numpy broadcasting."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# --- elementwise -------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data + b.data

    def back(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)

    return _make(out, "add", (a, b), back)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data - b.data

    def back(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(-g, b.data.shape)

    return _make(out, "sub", (a, b), back)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data * b.data

    def back(g):
        return (_unbroadcast(g * b.data, a.data.shape),
                _unbroadcast(g * a.data, b.data.shape))

    return _make(out, "mul", (a, b), back)


def square(a) -> Tensor:
    a = as_tensor(a)

    def back(g):
        return (g * (2.0 * a.data),)

    return _make(a.data * a.data, "square", (a,), back)


def exp(a) -> Tensor:
    a = as_tensor(a)
    with np.errstate(over="ignore"):
        out = np.exp(a.data)

    def back(g):
        return (g * out,)

    return _make(out, "exp", (a,), back)


def log(a) -> Tensor:
    a = as_tensor(a)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(a.data)

    def back(g):
        return (g / a.data,)

    return _make(out, "log", (a,), back)


def relu(a) -> Tensor:
    a = as_tensor(a)
    out = np.maximum(a.data, 0.0)

    def back(g):
        return (g * (a.data > 0.0),)

    return _make(out, "relu", (a,), back)


def clip(a, lo: float, hi: float) -> Tensor:
    """Clamp with pass-through gradient inside [lo, hi], zero outside."""
    a = as_tensor(a)
    out = np.clip(a.data, lo, hi)

    def back(g):
        return (g * ((a.data >= lo) & (a.data <= hi)),)

    return _make(out, "clip", (a,), back)


def minimum(a, b) -> Tensor:
    """Elementwise min; gradient routes to `a` on ties."""
    a, b = as_tensor(a), as_tensor(b)
    take_a = a.data <= b.data
    out = np.where(take_a, a.data, b.data)

    def back(g):
        return (_unbroadcast(g * take_a, a.data.shape),
                _unbroadcast(g * ~take_a, b.data.shape))

    return _make(out, "minimum", (a, b), back)


# --- reductions / shape ------------------------------------------------

def sum_(a, axis=None) -> Tensor:
    a = as_tensor(a)
    out = np.sum(a.data, axis=axis)

    def back(g):
        if axis is None:
            return (np.broadcast_to(g, a.data.shape),)
        return (np.broadcast_to(np.expand_dims(g, axis), a.data.shape),)

    return _make(np.asarray(out), "sum", (a,), back)


def mean(a, axis=None) -> Tensor:
    a = as_tensor(a)
    out = np.mean(a.data, axis=axis)
    n = a.data.size if axis is None else a.data.shape[axis]

    def back(g):
        if axis is None:
            return (np.broadcast_to(g / n, a.data.shape),)
        return (np.broadcast_to(np.expand_dims(g, axis) / n, a.data.shape),)

    return _make(np.asarray(out), "mean", (a,), back)


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    orig = a.data.shape

    def back(g):
        return (g.reshape(orig),)

    return _make(np.ascontiguousarray(a.data.reshape(shape)), "reshape", (a,), back)


def swapaxes(a, ax1: int, ax2: int) -> Tensor:
    a = as_tensor(a)

    def back(g):
        return (np.ascontiguousarray(g.swapaxes(ax1, ax2)),)

    return _make(np.ascontiguousarray(a.data.swapaxes(ax1, ax2)), "swapaxes", (a,), back)


def concat(tensors, axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def back(g):
        return tuple(np.ascontiguousarray(p) for p in np.split(g, splits, axis=axis))

    return _make(np.concatenate([t.data for t in tensors], axis=axis),
                 "concat", tuple(tensors), back)


def take(a, idx, axis: int = 0) -> Tensor:
    """Gather along `axis` with an integer index array (scatter-add backward)."""
    a = as_tensor(a)
    idx = np.asarray(idx, dtype=np.intp)
    out = np.take(a.data, idx, axis=axis)

    def back(g):
        acc = np.zeros_like(a.data)
        if axis == 0:
            np.add.at(acc, idx, g)
        else:
            np.add.at(np.moveaxis(acc, axis, 0), idx, np.moveaxis(g, axis, 0))
        return (acc,)

    return _make(out, "take", (a,), back)


def matmul(a, b) -> Tensor:
    """numpy matmul semantics, including the 1-d vector special cases."""
    a, b = as_tensor(a), as_tensor(b)
    out = np.matmul(a.data, b.data)

    def back(g):
        ad, bd = a.data, b.data
        if ad.ndim == 1 and bd.ndim == 1:
            return g * bd, g * ad
        if ad.ndim == 1:
            ga = np.matmul(g[..., None, :], bd.swapaxes(-1, -2))[..., 0, :]
            gb = np.matmul(ad[:, None], g[..., None, :])
        elif bd.ndim == 1:
            ga = np.matmul(g[..., :, None], bd[None, :])
            gb = np.matmul(ad.swapaxes(-1, -2), g[..., :, None])[..., 0]
        else:
            ga = np.matmul(g, bd.swapaxes(-1, -2))
            gb = np.matmul(ad.swapaxes(-1, -2), g)
        return _unbroadcast(ga, ad.shape), _unbroadcast(gb, bd.shape)

    return _make(out, "matmul", (a, b), back)


# --- fused layers ------------------------------------------------------

def layer_norm(x, gain, bias, eps: float = 1e-8) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then affine.

    Zero-variance rows are safe: the epsilon keeps the denominator positive.
    """
    x, gain, bias = as_tensor(x), as_tensor(gain), as_tensor(bias)
    d = x.data.shape[-1]
    if gain.data.shape != (d,) or bias.data.shape != (d,):
        raise ValueError(f"gain/bias must have shape ({d},)")
    mu = x.data.mean(axis=-1, keepdims=True)
    var = x.data.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv
    out = xhat * gain.data + bias.data

    def back(g):
        gg = np.sum(g * xhat, axis=tuple(range(g.ndim - 1)))
        gb = np.sum(g, axis=tuple(range(g.ndim - 1)))
        gx_hat = g * gain.data
        gx = inv * (gx_hat
                    - gx_hat.mean(axis=-1, keepdims=True)
                    - xhat * (gx_hat * xhat).mean(axis=-1, keepdims=True))
        return gx, gg, gb

    return _make(out, "layer_norm", (x, gain, bias), back)


def masked_softmax(scores, mask=None) -> Tensor:
    """Softmax over the last axis; masked (False) slots get exactly zero weight.

    `mask` broadcasts against `scores`. A row with every key masked is an
    error: it has no valid distribution.
    """
    scores = as_tensor(scores)
    if mask is None:
        m = scores.data.max(axis=-1, keepdims=True)
        e = np.exp(scores.data - m)
    else:
        mask = np.broadcast_to(np.asarray(mask, dtype=bool), scores.data.shape)
        if not mask.any(axis=-1).all():
            raise ValueError("fully-masked softmax row")
        neg = np.where(mask, scores.data, -np.inf)
        m = neg.max(axis=-1, keepdims=True)
        with np.errstate(invalid="ignore"):
            e = np.where(mask, np.exp(scores.data - m), 0.0)
    w = e / e.sum(axis=-1, keepdims=True)

    def back(g):
        dot = np.sum(g * w, axis=-1, keepdims=True)
        return (w * (g - dot),)

    return _make(w, "masked_softmax", (scores,), back)
