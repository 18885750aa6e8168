"""Parameter management, attention, MLPs, and the AdamW update."""

from __future__ import annotations

import hashlib
import math

import numpy as np

from .tensor import (Tensor, add, layer_norm, masked_softmax, matmul, relu,
                     reshape, swapaxes)


def affine(x, w, b=None):
    """x @ w (+ b). Weights are stored (fan_in, fan_out)."""
    y = matmul(x, w)
    return y if b is None else add(y, b)


def attention(q, k, v, mask=None, heads: int = 1) -> Tensor:
    """Multi-head scaled dot-product attention.

    q: (..., Tq, dk), k: (..., Tk, dk), v: (..., Tk, dv). dk and dv must both
    split evenly across heads; v may have a different width than q/k. mask
    broadcasts against (..., Tq, Tk); False keys receive exactly zero weight.
    """
    dk = q.shape[-1]
    dv = v.shape[-1]
    if dk % heads or dv % heads:
        raise ValueError(f"widths dk={dk}, dv={dv} not divisible by {heads} heads")
    tq, tk = q.shape[-2], k.shape[-2]
    lead = q.shape[:-2]
    hk, hv = dk // heads, dv // heads

    def split(t, tt, hd):
        t = reshape(t, lead + (tt, heads, hd))
        return swapaxes(t, -3, -2)  # (..., heads, T, hd)

    qh, kh, vh = split(q, tq, hk), split(k, tk, hk), split(v, tk, hv)
    scores = matmul(qh, swapaxes(kh, -1, -2)) * (1.0 / math.sqrt(hk))
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        mask = np.broadcast_to(mask, lead + (tq, tk))[..., None, :, :]
    w = masked_softmax(scores, mask)
    out = swapaxes(matmul(w, vh), -3, -2)
    return reshape(out, lead + (tq, dv))


class ParameterStore:
    """Named trainable tensors plus their AdamW state.

    Each parameter keeps its own Adam step count so that freezing and later
    unfreezing a parameter does not corrupt its bias correction. Frozen
    parameters are skipped entirely by `adam_step`: no moment update, no
    weight decay, bit-identical values.
    """

    def __init__(self, rng: np.random.Generator):
        self.rng = rng
        self._params: dict = {}   # name -> Tensor(requires_grad=True)
        self._moments: dict = {}  # name -> [m, v, t]
        self._frozen: set = set()

    # --- creation -------------------------------------------------------
    def _register(self, name: str, data: np.ndarray) -> Tensor:
        if name in self._params:
            raise ValueError(f"duplicate parameter '{name}'")
        t = Tensor(data, requires_grad=True)
        self._params[name] = t
        self._moments[name] = [np.zeros_like(t.data), np.zeros_like(t.data), 0]
        return t

    def affine(self, name: str, fan_in: int, fan_out: int, bias: bool = True):
        """Affine layer params, uniform +-1/sqrt(fan_in) like the usual default."""
        bound = 1.0 / math.sqrt(max(fan_in, 1))
        w = self._register(name + ".w", self.rng.uniform(-bound, bound, (fan_in, fan_out)))
        if not bias:
            return w, None
        b = self._register(name + ".b", self.rng.uniform(-bound, bound, (fan_out,)))
        return w, b

    def table(self, name: str, rows: int, width: int, scale: float = 0.0) -> Tensor:
        """Lookup table; scale 0 gives an exactly-zero init."""
        if scale == 0.0:
            return self._register(name, np.zeros((rows, width)))
        return self._register(name, self.rng.normal(0.0, scale, (rows, width)))

    def vector(self, name: str, n: int, fill: float = 0.0) -> Tensor:
        return self._register(name, np.full((n,), fill))

    def ln(self, name: str, width: int):
        """Layer-norm gain/bias pair initialized to identity."""
        g = self._register(name + ".g", np.ones((width,)))
        b = self._register(name + ".b", np.zeros((width,)))
        return g, b

    # --- access -----------------------------------------------------------
    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def names(self) -> list:
        return sorted(self._params)

    def n_scalars(self) -> int:
        return sum(p.data.size for p in self._params.values())

    # --- freezing ---------------------------------------------------------
    def freeze(self, prefix: str) -> None:
        self._frozen.update(n for n in self._params if n.startswith(prefix))

    def unfreeze(self, prefix: str) -> None:
        self._frozen.difference_update(n for n in self._params if n.startswith(prefix))

    def is_frozen(self, name: str) -> bool:
        return name in self._frozen

    def frozen_names(self) -> list:
        return sorted(self._frozen)

    def trainable_names(self) -> list:
        return sorted(n for n in self._params if n not in self._frozen)

    def state_hash(self, prefix: str = "") -> str:
        """sha256 over the raw bytes of every parameter under `prefix`."""
        h = hashlib.sha256()
        for n in self.names():
            if n.startswith(prefix):
                h.update(n.encode())
                h.update(self._params[n].data.tobytes())
        return h.hexdigest()

    # --- gradients and update ----------------------------------------------
    def collect_grads(self, tape, loss) -> dict:
        """Backward through `tape` and map gradients back to parameter names.

        Only parameters that participated in the forward pass appear. Frozen
        parameters are dropped even when reached.
        """
        raw = tape.backward(loss)
        out = {}
        for name, p in self._params.items():
            if name in self._frozen:
                continue
            tid = p._tid_on(tape)
            if tid is not None and tid in raw:
                out[name] = raw[tid]
        return out

    def adam_step(self, grads: dict, lr: float, beta1: float = 0.9,
                  beta2: float = 0.999, eps: float = 1e-8,
                  weight_decay: float = 0.0) -> None:
        """Decoupled-weight-decay Adam over the given gradients, in place.

        Every non-frozen parameter must have a gradient: a silently
        unreached parameter almost always means a wiring bug upstream.
        """
        missing = [n for n in self._params
                   if n not in self._frozen and n not in grads]
        if missing:
            raise KeyError(f"no gradient for trainable parameters {missing[:4]}"
                           f"{' ...' if len(missing) > 4 else ''}")
        for name in sorted(grads):
            if name in self._frozen:
                continue
            p = self._params[name]
            g = grads[name]
            if g.shape != p.data.shape:
                raise ValueError(f"gradient shape {g.shape} != param {p.data.shape} for '{name}'")
            mom = self._moments[name]
            mom[2] += 1
            m, v, t = mom
            m *= beta1
            m += (1.0 - beta1) * g
            v *= beta2
            v += (1.0 - beta2) * g * g
            mhat = m / (1.0 - beta1 ** t)
            vhat = v / (1.0 - beta2 ** t)
            if weight_decay:
                p.data -= lr * weight_decay * p.data
            p.data -= lr * mhat / (np.sqrt(vhat) + eps)

    # --- raw state (checkpointing) -----------------------------------------
    def export_arrays(self) -> dict:
        return {n: self._params[n].data for n in self.names()}

    def load_arrays(self, arrays: dict, strict: bool = True) -> None:
        """Overwrite parameter values from a {name: ndarray} mapping."""
        missing = set(self._params) - set(arrays)
        extra = set(arrays) - set(self._params)
        if strict and (missing or extra):
            raise ValueError(f"parameter set mismatch: missing={sorted(missing)[:4]} "
                             f"extra={sorted(extra)[:4]}")
        for n, arr in arrays.items():
            if n not in self._params:
                continue
            p = self._params[n]
            if arr.shape != p.data.shape:
                raise ValueError(f"shape mismatch for '{n}': {arr.shape} vs {p.data.shape}")
            p.data[...] = arr


class Mlp:
    """Affine stack with layer-norm and relu between layers, bare affine last."""

    def __init__(self, store: ParameterStore, name: str, widths):
        # widths = (in, hidden..., out)
        self.layers = []
        self.norms = []
        for i in range(len(widths) - 1):
            self.layers.append(store.affine(f"{name}.l{i}", widths[i], widths[i + 1]))
            if i + 1 < len(widths) - 1:
                self.norms.append(store.ln(f"{name}.n{i}", widths[i + 1]))

    def __call__(self, x) -> Tensor:
        last = len(self.layers) - 1
        for i, (w, b) in enumerate(self.layers):
            x = affine(x, w, b)
            if i < last:
                g, nb = self.norms[i]
                x = relu(layer_norm(x, g, nb))
        return x
