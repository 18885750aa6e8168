"""Morphology descriptions and padded/compact observation layouts.

An agent body is K joints, each with an n-slot observation row and an
m-slot action row, plus an x-dim exteroceptive vector. Bodies with fewer
per-joint features than n (or m) mark the missing slots false in the
masks; masked slots are zero-padded in the K x n layout and simply absent
from the compact flat vectors the environments and datasets speak.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class MorphologySpec:
    name: str
    K: int
    n: int
    m: int
    x: int
    state_mask: np.ndarray = None   # bool (K, n), true = slot exists
    action_mask: np.ndarray = None  # bool (K, m)

    def __post_init__(self):
        if self.K < 1 or self.n < 1 or self.m < 1 or self.x < 0:
            raise ValueError(f"bad dimensions for '{self.name}'")
        sm = self.state_mask
        am = self.action_mask
        sm = np.ones((self.K, self.n), bool) if sm is None else np.asarray(sm, bool)
        am = np.ones((self.K, self.m), bool) if am is None else np.asarray(am, bool)
        if sm.shape != (self.K, self.n) or am.shape != (self.K, self.m):
            raise ValueError(f"mask shapes {sm.shape}/{am.shape} do not match "
                             f"K={self.K}, n={self.n}, m={self.m}")
        sm.flags.writeable = False
        am.flags.writeable = False
        object.__setattr__(self, "state_mask", sm)
        object.__setattr__(self, "action_mask", am)

    # flat widths: padded grid minus missing slots, plus exteroceptive
    @property
    def n_s(self) -> int:
        return self.K * self.n - int((~self.state_mask).sum()) + self.x

    @property
    def n_a(self) -> int:
        return self.K * self.m - int((~self.action_mask).sum())

    @property
    def joint_mask(self) -> np.ndarray:
        """Joints that carry any real slot at all, bool (K,)."""
        return self.state_mask.any(axis=1) | self.action_mask.any(axis=1)

    # --- layout conversions ----------------------------------------------
    def compact_state(self, padded: np.ndarray, ext: np.ndarray) -> np.ndarray:
        """(K, n) grid + (x,) ext -> flat (n_s,), row-major over real slots."""
        padded = np.asarray(padded, float)
        ext = np.asarray(ext, float)
        if padded.shape != (self.K, self.n) or ext.shape != (self.x,):
            raise ValueError("state shape mismatch")
        return np.concatenate([padded[self.state_mask], ext])

    def pad_state(self, flat: np.ndarray):
        """Flat (n_s,) -> zero-filled (K, n) grid and (x,) ext."""
        flat = np.asarray(flat, float)
        nj = self.n_s - self.x
        if flat.shape != (self.n_s,):
            raise ValueError(f"expected ({self.n_s},), got {flat.shape}")
        grid = np.zeros((self.K, self.n))
        grid[self.state_mask] = flat[:nj]
        return grid, flat[nj:].copy()

    def compact_action(self, padded: np.ndarray) -> np.ndarray:
        padded = np.asarray(padded, float)
        if padded.shape != (self.K, self.m):
            raise ValueError("action shape mismatch")
        return padded[self.action_mask]

    def pad_action(self, flat: np.ndarray) -> np.ndarray:
        flat = np.asarray(flat, float)
        if flat.shape != (self.n_a,):
            raise ValueError(f"expected ({self.n_a},), got {flat.shape}")
        grid = np.zeros((self.K, self.m))
        grid[self.action_mask] = flat
        return grid


def _spread_mask(K: int, width: int, n_false: int) -> np.ndarray:
    """Mask with n_false slots cleared, spread over joints, trailing per row.

    Published dimension tables give only the total missing-slot counts; the
    placement here is a convention chosen so no joint loses every slot.
    """
    if n_false >= K * width:
        raise ValueError("cannot mask every slot")
    m = np.ones((K, width), bool)
    base, extra = divmod(n_false, K)
    for k in range(K):
        drop = base + (1 if k >= K - extra else 0)
        if drop:
            m[k, width - drop:] = False
    return m


def reference_registry() -> dict:
    """Benchmark body shapes whose published dimensions are self-consistent."""
    rows = [
        # name, K, n, m, x, missing state slots, missing action slots
        ("swimmer", 2, 2, 1, 4, 0, 0),
        ("reacher", 2, 3, 1, 5, 0, 0),
        ("hopper", 3, 2, 1, 5, 0, 0),
        ("halfCheetah", 6, 2, 1, 5, 0, 0),
        ("ant", 8, 2, 1, 95, 0, 0),
        ("humanoid", 9, 6, 3, 342, 20, 10),
    ]
    out = {}
    for name, K, n, m, x, ms, ma in rows:
        out[name] = MorphologySpec(
            name, K, n, m, x,
            state_mask=_spread_mask(K, n, ms),
            action_mask=_spread_mask(K, m, ma))
    return out


# prompt scalars are divided by these so every registered body lands in [0, 1]
PROMPT_SCALE = np.array([16.0, 52.0, 4.0, 1410.0])
