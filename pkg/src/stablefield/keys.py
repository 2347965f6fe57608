"""Orbit keys: reduce an index box to the distinct group elements it acts by.

Every action exposes a :class:`KeyMap`, an integer matrix ``G`` with a
per-row modulus (0 for a free row), such that ``phi_t``, its Radon-Nikodym
derivative and the cocycle depend on ``t`` only through ``G t mod mods``.
Boxes are reduced by iterated sumsets, so a box never has to be enumerated
point by point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_CODE_LIMIT = 2**62


@dataclass(frozen=True)
class KeyMap:
    G: np.ndarray
    mods: np.ndarray

    @classmethod
    def identity(cls, d: int) -> "KeyMap":
        return cls(np.eye(d, dtype=np.int64), np.zeros(d, dtype=np.int64))

    @classmethod
    def stack(cls, maps) -> "KeyMap":
        maps = list(maps)
        d = maps[0].G.shape[1]
        G = np.vstack([m.G for m in maps]) if maps else np.zeros((0, d), dtype=np.int64)
        mods = np.concatenate([m.mods for m in maps])
        return cls(G.astype(np.int64), mods.astype(np.int64))

    @property
    def width(self) -> int:
        return self.G.shape[0]

    def reduce(self, keys: np.ndarray) -> np.ndarray:
        keys = np.asarray(keys, dtype=np.int64)
        tors = self.mods > 0
        if tors.any():
            keys = keys.copy()
            keys[..., tors] = np.mod(keys[..., tors], self.mods[tors])
        return keys

    def keys(self, ts) -> np.ndarray:
        ts = np.atleast_2d(np.asarray(ts, dtype=np.int64))
        return self.reduce(ts @ self.G.T)

    def negate(self, keys):
        return self.reduce(-np.asarray(keys, dtype=np.int64))

    def bounds(self, lo: int, hi: int):
        """Coordinatewise range of the keys over the box ``[lo, hi]^d``."""
        lows = np.minimum(self.G * lo, self.G * hi).sum(axis=1)
        highs = np.maximum(self.G * lo, self.G * hi).sum(axis=1)
        tors = self.mods > 0
        lows = np.where(tors, 0, lows)
        highs = np.where(tors, self.mods - 1, highs)
        return lows, highs


def unique_rows(rows: np.ndarray, lows=None, highs=None, counts=None):
    """Unique rows of an integer array with multiplicities.

    Rows are packed into single int64 codes when the bounding box allows it.
    Returns ``(unique, inverse, summed_counts)``.
    """
    rows = np.asarray(rows, dtype=np.int64)
    n, width = rows.shape
    if counts is None:
        counts = np.ones(n, dtype=np.int64)
    if width == 0:
        return rows[:1], np.zeros(n, dtype=np.int64), np.array([counts.sum()])
    if lows is None:
        lows, highs = rows.min(axis=0), rows.max(axis=0)
    spans = (np.asarray(highs) - np.asarray(lows) + 1).astype(object)
    total = 1
    for s in spans:
        total *= int(s)
    if total < _CODE_LIMIT:
        code = np.zeros(n, dtype=np.int64)
        for j in range(width):
            code = code * int(spans[j]) + (rows[:, j] - lows[j])
        ucode, first, inverse = np.unique(code, return_index=True, return_inverse=True)
        uniq = rows[first]
    else:
        uniq, inverse = np.unique(rows, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    summed = np.bincount(inverse, weights=counts, minlength=len(uniq)).astype(np.int64)
    return uniq, inverse, summed


def box_keys(keymap: KeyMap, lo: int, hi: int):
    """Distinct keys of ``{lo..hi}^d`` and how many box points map to each."""
    if not lo <= 0 <= hi:
        raise ValueError("box must contain the origin")
    d = keymap.G.shape[1]
    width = keymap.width
    lows, highs = keymap.bounds(lo, hi)
    keys = np.zeros((1, width), dtype=np.int64)
    counts = np.ones(1, dtype=np.int64)
    steps = np.arange(lo, hi + 1, dtype=np.int64)
    for j in range(d):
        col = keymap.G[:, j]
        inc = keymap.reduce(steps[:, None] * col[None, :])
        inc, _, inc_counts = unique_rows(inc, lows, highs)
        merged = keymap.reduce(keys[:, None, :] + inc[None, :, :]).reshape(-1, width)
        mcounts = (counts[:, None] * inc_counts[None, :]).reshape(-1)
        keys, _, counts = unique_rows(merged, lows, highs, mcounts)
    return keys, counts


def box_indices(n: int, d: int) -> np.ndarray:
    """All ``t`` with ``0 <= t <= (n-1)1`` in row-major order."""
    grids = np.indices((int(n),) * d).reshape(d, -1).T
    return grids.astype(np.int64)


def centered_box(R: int, d: int) -> np.ndarray:
    return box_indices(2 * R + 1, d) - R
