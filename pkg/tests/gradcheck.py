"""Central finite-difference gradient oracle shared across test files."""

import numpy as np


def fd_grad(f, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of scalar f() w.r.t. x, perturbed in place."""
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        orig = x[i]
        x[i] = orig + h
        fp = f()
        x[i] = orig - h
        fm = f()
        x[i] = orig
        g[i] = (fp - fm) / (2.0 * h)
    return g


def rel_err(a: np.ndarray, b: np.ndarray) -> float:
    """Max elementwise relative error with an absolute floor for tiny grads."""
    denom = np.maximum(np.abs(a) + np.abs(b), 1e-6)
    return float(np.max(np.abs(a - b) / denom))


def check_grads(build_loss, params: dict, tol: float = 1e-4, h: float = 1e-5):
    """Compare tape gradients of build_loss() against finite differences.

    build_loss must consume the arrays in `params` (wrapped as tensors by the
    caller) and return a scalar Tensor; it is re-evaluated ~2*size times.
    Returns {name: rel_err} and asserts every entry is under tol.
    """
    from odm.numerics import Tape

    tensors = {k: v for k, v in params.items()}
    with Tape() as tape:
        loss = build_loss(tensors)
        grads = tape.grad(loss, list(tensors.values()))
    errs = {}
    for (name, t), g in zip(tensors.items(), grads):
        fd = fd_grad(lambda: build_loss(tensors).item(), t.data, h=h)
        errs[name] = rel_err(g, fd)
        assert errs[name] < tol, f"gradcheck '{name}': rel err {errs[name]:.3e} >= {tol}"
    return errs
