"""Control-measure descriptions and coordinate laws."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class LebesgueFlips:
    """Lebesgue measure on R^dim times counting measure on {-1, +1}^flips."""

    dim: int = 1
    flips: int = 0


@dataclass(frozen=True)
class Atoms:
    """Finite atom set ``0..len(weights)-1`` with positive weights."""

    weights: tuple

    def __post_init__(self):
        if any(w <= 0 for w in self.weights):
            raise ValueError("atom weights must be strictly positive")


@dataclass(frozen=True)
class LatticeCounting:
    """Weighted labels ``w`` times counting measure on Z^dim."""

    label_weights: tuple
    dim: int

    def __post_init__(self):
        if any(w <= 0 for w in self.label_weights):
            raise ValueError("label weights must be strictly positive")


@dataclass(frozen=True)
class Rho:
    """A one-dimensional coordinate law with a vectorized sampler."""

    name: str
    sampler: Callable = field(compare=False, repr=False)
    params: tuple = ()

    def sample(self, rng, size):
        return self.sampler(rng, size)


def gaussian_rho() -> Rho:
    return Rho("normal", lambda rng, size: rng.standard_normal(size))


def pareto_rho(theta: float) -> Rho:
    """Positive Pareto law with P(g > x) = x**-theta for x >= 1."""
    theta = float(theta)
    if theta <= 0:
        raise ValueError("theta must be positive")
    return Rho("pareto", lambda rng, size: (1.0 - rng.random(size)) ** (-1.0 / theta), (theta,))


def constant_rho(value: float = 1.0) -> Rho:
    value = float(value)
    return Rho("constant", lambda rng, size: np.full(size, value), (value,))


def rho_from_name(name: str, params=()) -> Rho:
    if name == "normal":
        return gaussian_rho()
    if name == "pareto":
        return pareto_rho(*params)
    if name == "constant":
        return constant_rho(*params)
    raise ValueError(f"unknown coordinate law {name!r}")


@dataclass(frozen=True)
class ProductProbability:
    """The product law rho^{(x) Z^dim} on coordinate functions."""

    rho: Rho
    dim: int


@dataclass(frozen=True)
class DirectSumMeasure:
    """Disjoint union of component measures; ``mixture`` weights the tilt."""

    parts: tuple
    mixture: tuple


class LazyCoordinates:
    """A point of R^{Z^d} whose coordinates are drawn from ``rho`` on demand.

    Coordinates are generated in cubic blocks, each from its own seed derived
    from ``(seed, block index)``, so the value at an index never depends on
    which other indices were read first.
    """

    BLOCK = 16

    def __init__(self, rho: Rho, seed: int, dim: int):
        self.rho = rho
        self.seed = int(seed)
        self.dim = int(dim)
        self._blocks: dict = {}

    def _block(self, key):
        block = self._blocks.get(key)
        if block is None:
            ss = np.random.SeedSequence([self.seed, *[k + 2**40 for k in key]])
            rng = np.random.default_rng(ss)
            block = self.rho.sample(rng, (self.BLOCK,) * self.dim)
            self._blocks[key] = block
        return block

    def values(self, ts) -> np.ndarray:
        ts = np.atleast_2d(np.asarray(ts, dtype=np.int64))
        keys = np.floor_divide(ts, self.BLOCK)
        local = ts - keys * self.BLOCK
        out = np.empty(len(ts))
        uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        order = np.argsort(inverse, kind="stable")
        bounds = np.searchsorted(inverse[order], np.arange(len(uniq) + 1))
        for i, key in enumerate(uniq):
            sel = order[bounds[i]:bounds[i + 1]]
            out[sel] = self._block(tuple(int(k) for k in key))[tuple(local[sel].T)]
        return out

    def __getitem__(self, t):
        return float(self.values(np.asarray(t, dtype=np.int64).reshape(1, -1))[0])

    def shifted(self, t) -> "ShiftedCoordinates":
        return ShiftedCoordinates(self, np.asarray(t, dtype=np.int64))

    def __eq__(self, other):
        if isinstance(other, ShiftedCoordinates):
            return other == self
        return isinstance(other, LazyCoordinates) and (self.rho, self.seed, self.dim) == (
            other.rho, other.seed, other.dim)

    def __hash__(self):
        return hash((self.seed, self.dim))

    def __repr__(self):
        return f"LazyCoordinates({self.rho.name}, seed={self.seed})"


class ShiftedCoordinates:
    """The index-shifted state ``u -> base[u + offset]``."""

    def __init__(self, base: LazyCoordinates, offset):
        self.base = base
        self.offset = np.asarray(offset, dtype=np.int64)
        self.dim = base.dim

    def values(self, ts):
        return self.base.values(np.atleast_2d(ts) + self.offset)

    def __getitem__(self, t):
        return self.base[np.asarray(t) + self.offset]

    def shifted(self, t):
        return ShiftedCoordinates(self.base, self.offset + np.asarray(t, dtype=np.int64))

    def _canon(self):
        return self.base, tuple(int(v) for v in self.offset)

    def __eq__(self, other):
        if isinstance(other, LazyCoordinates):
            other = ShiftedCoordinates(other, np.zeros(other.dim, dtype=np.int64))
        if not isinstance(other, ShiftedCoordinates):
            return NotImplemented
        return self._canon() == other._canon()

    def __hash__(self):
        return hash(self._canon()[1])
