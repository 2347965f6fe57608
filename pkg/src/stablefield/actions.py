"""Nonsingular Z^d-actions, kernels, cocycles and stationary SaS field specs.

A field is ``X_t = int f_t dM`` with
``f_t(s) = c_t(s) * (dmu o phi_t / dmu)(s)**(1/alpha) * f(phi_t(s))``.

Each action comes with a scalar API (``apply``, ``rn_derivative``) that is
exact where the model allows it, and a batched API that works on *keys*
(see :mod:`stablefield.keys`) so that a whole index box is processed as the
set of distinct maps it contains.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from fractions import Fraction
from functools import cached_property, reduce
from typing import Callable

import numpy as np

from . import measures as M
from .keys import KeyMap, box_keys, unique_rows
from .quadnum import QuadNum
from .stable import check_alpha, tilt_measure


class WindowEscape(LookupError):
    """An orbit left the finite window of an atomic action."""


class IncompatibleKernel(TypeError):
    pass


def _lcm(a: int, b: int) -> int:
    return a * b // math.gcd(a, b)


def _as_index(t, d: int) -> np.ndarray:
    t = np.asarray(t, dtype=np.int64).reshape(-1)
    if t.shape != (d,):
        raise ValueError(f"index must have {d} coordinates, got {t.shape[0]}")
    return t


# ------------------------------------------------------------ permutations


def _cycle_order(perm: np.ndarray) -> int:
    seen = np.zeros(len(perm), dtype=bool)
    order = 1
    for start in range(len(perm)):
        if seen[start]:
            continue
        length, j = 0, start
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            length += 1
        order = _lcm(order, length)
    return order


class _PermPowers:
    """Cached powers of a (possibly partial) permutation.

    Index ``len(perm)`` is a sink standing for "escaped the window".
    """

    def __init__(self, perm):
        perm = np.asarray(perm, dtype=np.int64)
        n = len(perm)
        self.n = n
        fwd = np.where(perm < 0, n, perm)
        self.fwd = np.append(fwd, n)
        inv = np.full(n + 1, n, dtype=np.int64)
        ok = perm >= 0
        inv[perm[ok]] = np.flatnonzero(ok)
        self.inv = inv
        self.partial = bool((perm < 0).any())
        self._cache = {0: np.arange(n + 1, dtype=np.int64)}

    def power(self, k: int) -> np.ndarray:
        k = int(k)
        if k in self._cache:
            return self._cache[k]
        step = self.fwd if k > 0 else self.inv
        prev = self.power(k - 1 if k > 0 else k + 1)
        out = step[prev]
        self._cache[k] = out
        return out


# ------------------------------------------------------------------ actions


class TranslationAction:
    """``phi_t(x, y) = (x + A t, sigma(t) * y)`` on R^m x {-1,1}^k.

    ``A`` is an ``m x d`` matrix of :class:`QuadNum` entries sharing one
    quadratic field; ``flip_parity`` is a ``k x d`` 0/1 matrix and
    ``sigma(t)_i = (-1)**(flip_parity[i] . t)``.  Lebesgue times counting
    measure is invariant, so the Radon-Nikodym derivative is 1.
    """

    def __init__(self, A, flip_parity=()):
        rows = [tuple(QuadNum.coerce(a) for a in row) for row in A]
        if not rows or not rows[0]:
            raise ValueError("translation matrix must be non-empty")
        d = len(rows[0])
        if any(len(r) != d for r in rows):
            raise ValueError("ragged translation matrix")
        fields = {q.m for r in rows for q in r if not q.is_rational}
        if len(fields) > 1:
            raise ValueError(f"translation entries mix quadratic fields {sorted(fields)}")
        self.A = tuple(rows)
        self.m = fields.pop() if fields else 1
        self.d = d
        self.dim = len(rows)
        flips = np.asarray(flip_parity, dtype=np.int64).reshape(-1, d) % 2
        self.flip_parity = flips
        self.flips = flips.shape[0]
        self.measure = M.LebesgueFlips(self.dim, self.flips)
        den = 1
        for r in rows:
            for q in r:
                den = _lcm(den, _lcm(q.a.denominator, q.b.denominator))
        self.denominator = den
        self.P = np.array([[int(q.a * den) for q in r] for r in rows], dtype=np.int64)
        self.Q = np.array([[int(q.b * den) for q in r] for r in rows], dtype=np.int64)
        self.window_limited = False

    def __repr__(self):
        A = "; ".join(", ".join(str(q) for q in r) for r in self.A)
        return f"TranslationAction([{A}], flips={self.flip_parity.tolist()})"

    def __eq__(self, other):
        return (isinstance(other, TranslationAction) and self.A == other.A
                and np.array_equal(self.flip_parity, other.flip_parity))

    __hash__ = None

    @property
    def measure_preserving(self) -> bool:
        return True

    def translation(self, t) -> tuple:
        t = _as_index(t, self.d)
        return tuple(sum((a * int(tj) for a, tj in zip(row, t)), QuadNum(0)) for row in self.A)

    def flip(self, t) -> np.ndarray:
        t = _as_index(t, self.d)
        return 1 - 2 * ((self.flip_parity @ t) % 2)

    def apply(self, t, s):
        x, y = s
        tau = self.translation(t)
        if all(isinstance(v, QuadNum) for v in x):
            new_x = tuple(xi + ti for xi, ti in zip(x, tau))
        else:
            new_x = tuple(float(xi) + float(ti) for xi, ti in zip(x, tau))
        new_y = tuple(int(v) for v in np.asarray(y, dtype=np.int64) * self.flip(t))
        return (new_x, new_y)

    def rn_derivative(self, t, s):
        _as_index(t, self.d)
        return 1

    @cached_property
    def keymap(self) -> KeyMap:
        parts = [KeyMap(self.P, np.zeros(self.dim, dtype=np.int64))]
        if self.Q.any():
            parts.append(KeyMap(self.Q, np.zeros(self.dim, dtype=np.int64)))
        if self.flips:
            parts.append(KeyMap(self.flip_parity, np.full(self.flips, 2, dtype=np.int64)))
        return KeyMap.stack(parts)

    def _split_keys(self, keys):
        keys = np.asarray(keys, dtype=np.int64)
        p = keys[:, : self.dim]
        off = self.dim
        if self.Q.any():
            q = keys[:, off: off + self.dim]
            off += self.dim
        else:
            q = np.zeros_like(p)
        bits = keys[:, off: off + self.flips]
        return p, q, bits

    def key_translations(self, keys) -> np.ndarray:
        p, q, _ = self._split_keys(keys)
        return (p + q * math.sqrt(self.m)) / self.denominator

    def key_flips(self, keys) -> np.ndarray:
        return 1 - 2 * self._split_keys(keys)[2]

    def apply_keys(self, states, keys):
        x, y = states
        tau = self.key_translations(keys)
        sig = self.key_flips(keys).astype(np.int8)
        moved = (x[:, None, :] + tau[None, :, :], y[:, None, :] * sig[None, :, :])
        return moved, None

    def random_state(self, rng):
        rng = np.random.default_rng(rng)
        x = tuple(QuadNum(Fraction(float(v)).limit_denominator(10**6))
                  for v in rng.standard_cauchy(self.dim))
        y = tuple(int(v) for v in rng.choice([-1, 1], size=self.flips))
        return (x, y)

    def unbatch(self, states):
        x, y = states
        return [(tuple(float(v) for v in xi), tuple(int(v) for v in yi)) for xi, yi in zip(x, y)]

    def batch(self, items):
        x = np.array([[float(v) for v in s[0]] for s in items], dtype=float).reshape(-1, self.dim)
        y = np.array([list(s[1]) for s in items], dtype=np.int8).reshape(len(items), self.flips)
        return (x, y)

    def count(self, states) -> int:
        return len(states[0])


class AtomicAction:
    """An action on a finite window of atoms ``0..N-1`` with weights ``w``.

    ``generators[i][s]`` is the image of atom ``s`` under the ``i``-th unit
    vector, or ``-1`` when the orbit leaves the window.  Generators must be
    injective and commute wherever both compositions stay inside the window.
    The Radon-Nikodym derivative of ``phi_t`` at ``s`` is
    ``w(phi_t s) / w(s)``, computed in exact rational arithmetic.
    """

    def __init__(self, weights, generators):
        self.weights = tuple(Fraction(w) for w in weights)
        if any(w <= 0 for w in self.weights):
            raise ValueError("atom weights must be strictly positive")
        n = len(self.weights)
        gens = [np.asarray(g, dtype=np.int64) for g in generators]
        if not gens:
            raise ValueError("need at least one generator")
        for g in gens:
            if g.shape != (n,) or g.max() >= n or g.min() < -1:
                raise ValueError("generator must map atoms into the window or to -1")
            img = g[g >= 0]
            if len(np.unique(img)) != len(img):
                raise ValueError("generator is not injective")
        self.generators = tuple(gens)
        self.d = len(gens)
        self.n_atoms = n
        self._powers = [_PermPowers(g) for g in gens]
        self.window_limited = any(p.partial for p in self._powers)
        for i in range(self.d):
            for j in range(i + 1, self.d):
                a = self._powers[i].fwd[self._powers[j].fwd]
                b = self._powers[j].fwd[self._powers[i].fwd]
                both = (a < n) & (b < n)
                if not np.array_equal(a[both], b[both]):
                    raise ValueError(f"generators {i} and {j} do not commute")
        self.measure = M.Atoms(tuple(float(w) for w in self.weights))
        self._wfloat = np.array([float(w) for w in self.weights] + [np.nan])

    def __repr__(self):
        return f"AtomicAction({self.n_atoms} atoms, d={self.d})"

    @property
    def measure_preserving(self) -> bool:
        return all(all(self.weights[int(g[s])] == self.weights[s] for s in range(self.n_atoms)
                       if g[s] >= 0) for g in self.generators)

    @cached_property
    def orders(self):
        if self.window_limited:
            return None
        return tuple(_cycle_order(g) for g in self.generators)

    def apply(self, t, s):
        t = _as_index(t, self.d)
        s = int(s)
        for p, k in zip(self._powers, t):
            s = int(p.power(int(k))[s])
            if s == self.n_atoms:
                raise WindowEscape(f"orbit of the atom left the window at t={t.tolist()}")
        return s

    def rn_derivative(self, t, s):
        return self.weights[self.apply(t, s)] / self.weights[int(s)]

    @cached_property
    def keymap(self) -> KeyMap:
        if self.orders is None:
            return KeyMap.identity(self.d)
        return KeyMap(np.eye(self.d, dtype=np.int64), np.array(self.orders, dtype=np.int64))

    def apply_keys(self, states, keys):
        atoms = np.asarray(states, dtype=np.int64)
        keys = np.asarray(keys, dtype=np.int64)
        out = np.broadcast_to(atoms[:, None], (len(atoms), len(keys))).copy()
        for i, p in enumerate(self._powers):
            for k in np.unique(keys[:, i]):
                cols = np.flatnonzero(keys[:, i] == k)
                out[:, cols] = p.power(int(k))[out[:, cols]]
        rn = self._wfloat[out] / self._wfloat[atoms][:, None]
        return out, rn

    def random_state(self, rng):
        return int(np.random.default_rng(rng).integers(self.n_atoms))

    def unbatch(self, states):
        return [int(s) for s in states]

    def batch(self, items):
        return np.asarray(items, dtype=np.int64)

    def count(self, states) -> int:
        return len(states)


class LatticeShiftAction:
    """Countable atomic action on ``labels x Z^D``: ``(w, s) -> (pi_t(w), s + S t)``.

    ``shifts`` is a ``D x d`` integer matrix and ``label_perms[i]`` permutes
    the finite label set for the ``i``-th generator (identity when omitted).
    The measure is ``label_weights`` times counting measure on ``Z^D``.  With
    ``S`` the identity and trivial label permutations this is the canonical
    mixed moving average on ``W x Z^d``.
    """

    def __init__(self, label_weights, shifts, label_perms=None):
        self.label_weights = tuple(Fraction(w) for w in label_weights)
        if any(w <= 0 for w in self.label_weights):
            raise ValueError("label weights must be strictly positive")
        S = np.atleast_2d(np.asarray(shifts, dtype=np.int64))
        self.shifts = S
        self.lattice_dim, self.d = S.shape
        nl = len(self.label_weights)
        if label_perms is None:
            label_perms = [list(range(nl))] * self.d
        perms = [np.asarray(p, dtype=np.int64) for p in label_perms]
        if len(perms) != self.d:
            raise ValueError("need one label permutation per generator")
        for p in perms:
            if sorted(p.tolist()) != list(range(nl)):
                raise ValueError("label map must be a permutation")
        for i in range(self.d):
            for j in range(i + 1, self.d):
                if not np.array_equal(perms[i][perms[j]], perms[j][perms[i]]):
                    raise ValueError("label permutations must commute")
        self.label_perms = tuple(perms)
        self.n_labels = nl
        self._powers = [_PermPowers(p) for p in perms]
        self.orders = tuple(_cycle_order(p) for p in perms)
        self.measure = M.LatticeCounting(tuple(float(w) for w in self.label_weights), self.lattice_dim)
        self._wfloat = np.array([float(w) for w in self.label_weights])
        self.window_limited = False

    def __repr__(self):
        return f"LatticeShiftAction(labels={self.n_labels}, shifts={self.shifts.tolist()})"

    @property
    def measure_preserving(self) -> bool:
        return all(self.label_weights[int(p[i])] == self.label_weights[i]
                   for p in self.label_perms for i in range(self.n_labels))

    def apply(self, t, s):
        t = _as_index(t, self.d)
        label, site = s
        label = int(label)
        for p, o, k in zip(self._powers, self.orders, t):
            label = int(p.power(int(k) % o)[label])
        site = tuple(int(v) for v in np.asarray(site, dtype=np.int64) + self.shifts @ t)
        return (label, site)

    def rn_derivative(self, t, s):
        new = self.apply(t, s)
        return self.label_weights[new[0]] / self.label_weights[int(s[0])]

    @cached_property
    def keymap(self) -> KeyMap:
        parts = [KeyMap(self.shifts, np.zeros(self.lattice_dim, dtype=np.int64))]
        tors = [i for i, o in enumerate(self.orders) if o > 1]
        if tors:
            E = np.eye(self.d, dtype=np.int64)[tors]
            parts.append(KeyMap(E, np.array([self.orders[i] for i in tors], dtype=np.int64)))
        return KeyMap.stack(parts)

    def apply_keys(self, states, keys):
        labels, sites = states
        labels = np.asarray(labels, dtype=np.int64)
        keys = np.asarray(keys, dtype=np.int64)
        shift = keys[:, : self.lattice_dim]
        new_sites = np.asarray(sites)[:, None, :] + shift[None, :, :]
        new_labels = np.broadcast_to(labels[:, None], (len(labels), len(keys))).copy()
        tors = [i for i, o in enumerate(self.orders) if o > 1]
        for col, i in enumerate(tors):
            kcol = keys[:, self.lattice_dim + col]
            for k in np.unique(kcol):
                cols = np.flatnonzero(kcol == k)
                new_labels[:, cols] = self._powers[i].power(int(k))[new_labels[:, cols]]
        rn = None
        if not self.measure_preserving:
            rn = self._wfloat[new_labels] / self._wfloat[labels][:, None]
        return (new_labels, new_sites), rn

    def random_state(self, rng):
        rng = np.random.default_rng(rng)
        label = int(rng.integers(self.n_labels))
        site = tuple(int(v) for v in rng.integers(-20, 21, size=self.lattice_dim))
        return (label, site)

    def unbatch(self, states):
        labels, sites = states
        return [(int(l), tuple(int(v) for v in s)) for l, s in zip(labels, sites)]

    def batch(self, items):
        labels = np.array([s[0] for s in items], dtype=np.int64)
        sites = np.array([list(s[1]) for s in items], dtype=np.int64).reshape(-1, self.lattice_dim)
        return (labels, sites)

    def count(self, states) -> int:
        return len(states[0])


class CoordinateShiftAction:
    """Index shift on ``R^{Z^d}`` under the product law ``rho^{Z^d}``.

    ``(phi_t s)(u) = s(u + t)``; the product law is invariant so the
    Radon-Nikodym derivative is 1.  States are :class:`LazyCoordinates`.
    """

    def __init__(self, rho: M.Rho, d: int):
        self.rho = rho
        self.d = int(d)
        self.measure = M.ProductProbability(rho, self.d)
        self.window_limited = False

    def __repr__(self):
        return f"CoordinateShiftAction({self.rho.name}, d={self.d})"

    measure_preserving = True

    def apply(self, t, s):
        return s.shifted(_as_index(t, self.d))

    def rn_derivative(self, t, s):
        _as_index(t, self.d)
        return 1

    @cached_property
    def keymap(self) -> KeyMap:
        return KeyMap.identity(self.d)

    def apply_keys(self, states, keys):
        return (states, np.asarray(keys, dtype=np.int64)), None

    def random_state(self, rng):
        seed = int(np.random.default_rng(rng).integers(0, 2**62))
        return M.LazyCoordinates(self.rho, seed, self.d)

    def unbatch(self, states):
        return list(states)

    def batch(self, items):
        return np.array(list(items), dtype=object)

    def count(self, states) -> int:
        return len(states)


# ------------------------------------------------------------------ kernels


def _qn(v) -> QuadNum:
    return QuadNum.coerce(v)


@dataclass(frozen=True)
class Box:
    """Closed box ``lower <= x <= upper`` on the flip sheet ``sheet``
    (``None`` means every sheet)."""

    lower: tuple
    upper: tuple
    sheet: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "lower", tuple(_qn(v) for v in self.lower))
        object.__setattr__(self, "upper", tuple(_qn(v) for v in self.upper))
        if self.sheet is not None:
            object.__setattr__(self, "sheet", tuple(int(v) for v in self.sheet))
        if len(self.lower) != len(self.upper):
            raise ValueError("box bounds must have equal length")
        if any(u < l for l, u in zip(self.lower, self.upper)):
            raise ValueError("box upper bound below lower bound")

    def contains(self, x, y) -> bool:
        if self.sheet is not None and tuple(int(v) for v in y) != self.sheet:
            return False
        for xi, lo, hi in zip(x, self.lower, self.upper):
            if isinstance(xi, QuadNum):
                if xi < lo or hi < xi:
                    return False
            elif not float(lo) <= float(xi) <= float(hi):
                return False
        return True

    def mask(self, x, y) -> np.ndarray:
        lo = np.array([float(v) for v in self.lower])
        hi = np.array([float(v) for v in self.upper])
        inside = np.all((x >= lo) & (x <= hi), axis=-1)
        if self.sheet is not None:
            inside &= np.all(y == np.array(self.sheet, dtype=y.dtype), axis=-1)
        return inside


class PiecewiseConstant:
    """``f = sum_i value_i * 1_{box_i}`` on R^m x {-1,1}^k (pieces may overlap)."""

    def __init__(self, pieces):
        self.pieces = tuple((b if isinstance(b, Box) else Box(*b), Fraction(v) if not isinstance(v, float) else v)
                            for b, v in pieces)
        dims = {len(b.lower) for b, _ in self.pieces}
        if len(dims) > 1:
            raise ValueError("all boxes must live in the same ambient dimension")
        self.dim = dims.pop() if dims else None

    def __repr__(self):
        return f"{type(self).__name__}({len(self.pieces)} pieces)"

    def __eq__(self, other):
        return isinstance(other, PiecewiseConstant) and self.pieces == other.pieces

    __hash__ = None

    def value(self, s) -> float:
        x, y = s
        return float(sum((v for b, v in self.pieces if b.contains(x, y)), 0))

    def evaluate(self, moved):
        x, y = moved
        out = np.zeros(x.shape[:-1])
        for b, v in self.pieces:
            out += float(v) * b.mask(x, y)
        return out

    def sup(self) -> float:
        # overlapping pieces can add up; bound by the triangle inequality
        return float(sum(abs(float(v)) for _, v in self.pieces))

    def cells(self, flips: int):
        """Disjoint cells ``(lower, upper, sheet, value)`` with exact bounds."""
        if not self.pieces:
            return []
        m = self.dim
        cuts = []
        for axis in range(m):
            pts = sorted({b.lower[axis] for b, _ in self.pieces} | {b.upper[axis] for b, _ in self.pieces})
            cuts.append(pts)
        sheets = [tuple(s) for s in np.array(np.meshgrid(*[[-1, 1]] * flips)).reshape(flips, -1).T] \
            if flips else [()]
        out = []
        for idx in np.ndindex(*[len(c) - 1 for c in cuts]):
            lo = tuple(cuts[a][i] for a, i in enumerate(idx))
            hi = tuple(cuts[a][i + 1] for a, i in enumerate(idx))
            mid = tuple((l + h) / 2 for l, h in zip(lo, hi))
            for sh in sheets:
                v = sum((val for b, val in self.pieces if b.contains(mid, sh)), 0)
                if v != 0:
                    out.append((lo, hi, sh, v))
        return out

    def alpha_mass(self, alpha: float, flips: int) -> float:
        total = 0.0
        for lo, hi, _, v in self.cells(flips):
            vol = 1.0
            for l, h in zip(lo, hi):
                vol *= float(h - l)
            total += abs(float(v)) ** alpha * vol
        return total


class IndicatorBox(PiecewiseConstant):
    """Indicator of ``[lower, upper] x {sheet}``."""

    def __init__(self, lower, upper, sheet=None):
        if np.ndim(lower) == 0:
            lower, upper = (lower,), (upper,)
        super().__init__([(Box(tuple(lower), tuple(upper), sheet), 1)])

    @property
    def box(self) -> Box:
        return self.pieces[0][0]


class AtomTable:
    """A kernel given by its value on each atom of an :class:`AtomicAction`."""

    def __init__(self, values):
        self.values = tuple(float(v) for v in values)
        self._arr = np.append(np.array(self.values), 0.0)

    def __repr__(self):
        return f"AtomTable({list(self.values)})"

    def value(self, s) -> float:
        return self.values[int(s)]

    def evaluate(self, moved):
        return self._arr[moved]

    def sup(self) -> float:
        return max((abs(v) for v in self.values), default=0.0)


class LatticeTable:
    """Finitely supported kernel on ``labels x Z^D``: ``{(label, site): value}``."""

    def __init__(self, entries):
        self.entries = {(int(k[0]), tuple(int(v) for v in k[1])): float(val)
                        for k, val in dict(entries).items() if val != 0}

    def __repr__(self):
        return f"LatticeTable({self.entries})"

    def value(self, s) -> float:
        return self.entries.get((int(s[0]), tuple(int(v) for v in s[1])), 0.0)

    def evaluate(self, moved):
        labels, sites = moved
        out = np.zeros(labels.shape)
        for (label, site), val in self.entries.items():
            hit = (labels == label) & np.all(sites == np.array(site, dtype=np.int64), axis=-1)
            out[hit] += val
        return out

    def sup(self) -> float:
        return max((abs(v) for v in self.entries.values()), default=0.0)

    def support_states(self):
        keys = list(self.entries)
        labels = np.array([k[0] for k in keys], dtype=np.int64)
        sites = np.array([k[1] for k in keys], dtype=np.int64).reshape(len(keys), -1)
        return labels, sites


class CoordinateProjection:
    """``f(s) = s(0)``: the zeroth coordinate of a point of R^{Z^d}."""

    def __repr__(self):
        return "CoordinateProjection()"

    def __eq__(self, other):
        return isinstance(other, CoordinateProjection)

    __hash__ = None

    def value(self, s) -> float:
        return s[np.zeros(s.dim, dtype=np.int64)]

    def evaluate(self, moved):
        states, offsets = moved
        return np.stack([s.values(offsets) for s in states]) if len(states) else \
            np.zeros((0, len(offsets)))

    def sup(self) -> float:
        return math.inf


_COMPATIBLE = {
    TranslationAction: (PiecewiseConstant,),
    AtomicAction: (AtomTable,),
    LatticeShiftAction: (LatticeTable,),
    CoordinateShiftAction: (CoordinateProjection,),
}


# ----------------------------------------------------------------- cocycles


@dataclass(frozen=True)
class ParityCocycle:
    """``c_t = prod_i signs[i]**t_i``, independent of the state."""

    signs: tuple

    def __post_init__(self):
        if any(s not in (-1, 1) for s in self.signs):
            raise ValueError("cocycle signs must be +1 or -1")

    def value(self, t, s=None) -> int:
        t = np.asarray(t, dtype=np.int64)
        bits = np.array([s_ == -1 for s_ in self.signs], dtype=np.int64)
        return int(1 - 2 * (int(bits @ t) % 2))

    @property
    def keymap(self) -> KeyMap:
        bits = np.array([[s == -1 for s in self.signs]], dtype=np.int64)
        return KeyMap(bits, np.array([2], dtype=np.int64))


@dataclass(frozen=True)
class CallableCocycle:
    """An arbitrary ``(t, s) -> +-1`` rule; scalar evaluation only."""

    fn: Callable = dc_field(compare=False)

    def value(self, t, s) -> int:
        return int(self.fn(np.asarray(t, dtype=np.int64), s))


# ------------------------------------------------------------------- fields


@dataclass(frozen=True, eq=False)
class FieldSpec:
    """A stationary SaS random field ``X_t = int f_t dM`` on Z^d."""

    alpha: float
    action: object
    kernel: object
    cocycle: object = None
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "alpha", check_alpha(self.alpha))
        allowed = _COMPATIBLE.get(type(self.action))
        if allowed is None:
            raise TypeError(f"unsupported action type {type(self.action).__name__}")
        if not isinstance(self.kernel, allowed):
            raise IncompatibleKernel(
                f"{type(self.kernel).__name__} cannot be used with {type(self.action).__name__}")
        if isinstance(self.action, TranslationAction) and self.kernel.pieces:
            if self.kernel.dim != self.action.dim:
                raise IncompatibleKernel("kernel and action ambient dimensions differ")
            if any(b.sheet is not None and len(b.sheet) != self.action.flips
                   for b, _ in self.kernel.pieces):
                raise IncompatibleKernel("kernel sheet length differs from the number of flips")
        if isinstance(self.cocycle, ParityCocycle) and len(self.cocycle.signs) != self.d:
            raise ValueError("cocycle needs one sign per generator")

    @property
    def d(self) -> int:
        return self.action.d

    @property
    def is_zero(self) -> bool:
        k = self.kernel
        if isinstance(k, PiecewiseConstant):
            return not k.cells(self.action.flips)
        if isinstance(k, AtomTable):
            return not any(k.values)
        if isinstance(k, LatticeTable):
            return not k.entries
        return False

    @cached_property
    def tilt(self):
        return tilt_measure(self.action.measure)

    @cached_property
    def keymap(self) -> KeyMap:
        if isinstance(self.cocycle, CallableCocycle):
            return KeyMap.identity(self.d)
        parts = [self.action.keymap]
        if isinstance(self.cocycle, ParityCocycle) and -1 in self.cocycle.signs:
            parts.append(self.cocycle.keymap)
        return KeyMap.stack(parts)

    def cocycle_value(self, t, s) -> int:
        return 1 if self.cocycle is None else self.cocycle.value(t, s)

    def kernel_value(self, t, s) -> float:
        t = _as_index(t, self.d)
        rn = self.action.rn_derivative(t, s)
        return self.cocycle_value(t, s) * float(rn) ** (1.0 / self.alpha) * \
            self.kernel.value(self.action.apply(t, s))

    def on_keys(self, states, keys) -> np.ndarray:
        """``f_key(s)`` for a batch of states and a set of keys, shape (N, K)."""
        if isinstance(self.cocycle, CallableCocycle):
            raise NotImplementedError("callable cocycles support scalar evaluation only")
        keys = np.asarray(keys, dtype=np.int64)
        w = self.action.keymap.width
        moved, rn = self.action.apply_keys(states, keys[:, :w])
        vals = self.kernel.evaluate(moved)
        if rn is not None:
            vals = vals * np.nan_to_num(rn) ** (1.0 / self.alpha)
        if keys.shape[1] > w:
            vals = vals * (1 - 2 * keys[:, w])[None, :]
        return vals

    def state_count(self, states) -> int:
        return self.action.count(states)

    def box_keys(self, lo: int, hi: int):
        return box_keys(self.keymap, lo, hi)

    def alpha_mass(self) -> float:
        """``int |f|^alpha dmu``."""
        k, a = self.kernel, self.alpha
        if isinstance(k, PiecewiseConstant):
            return k.alpha_mass(a, self.action.flips)
        if isinstance(k, AtomTable):
            return sum(float(w) * abs(v) ** a for w, v in zip(self.action.weights, k.values))
        if isinstance(k, LatticeTable):
            return sum(float(self.action.label_weights[l]) * abs(v) ** a
                       for (l, _), v in k.entries.items())
        if isinstance(k, CoordinateProjection):
            return coordinate_alpha_moment(self.action.rho, a)
        raise TypeError(type(k).__name__)

    def alpha_norm(self) -> float:
        return self.alpha_mass() ** (1.0 / self.alpha)

    def kernel_sup(self) -> float:
        return self.kernel.sup()

    def series_evaluator(self, keys):
        from .series import make_evaluator
        return make_evaluator(self, keys)


def coordinate_alpha_moment(rho: M.Rho, alpha: float) -> float:
    """``E|g|^alpha`` for the supported coordinate laws."""
    if rho.name == "normal":
        return 2 ** (alpha / 2) * math.gamma((alpha + 1) / 2) / math.sqrt(math.pi)
    if rho.name == "pareto":
        theta = rho.params[0]
        if theta <= alpha:
            return math.inf
        return theta / (theta - alpha)
    if rho.name == "constant":
        return abs(rho.params[0]) ** alpha
    raise ValueError(f"no closed-form moment for {rho.name}")


class DirectSumField:
    """Independent sum of fields living on disjoint state spaces.

    States are ``(part, [substates_0, substates_1, ...])`` where the
    substates of part ``i`` appear in the order of ``part == i``.  The tilt
    is a mixture of the component tilts weighted by ``mixture`` (default:
    the components' kernel alpha-masses).
    """

    def __init__(self, parts, mixture=None, name=""):
        parts = tuple(parts)
        self.parts = parts
        self.name = name
        if parts:
            alphas = {p.alpha for p in parts}
            dims = {p.d for p in parts}
            if len(alphas) != 1 or len(dims) != 1:
                raise ValueError("components must share alpha and d")
            self.alpha = alphas.pop()
            self._d = dims.pop()
            if mixture is None:
                mixture = [p.alpha_mass() for p in parts]
            self.mixture = tuple(float(w) for w in mixture)
        else:
            self.alpha, self._d, self.mixture = None, None, ()

    @classmethod
    def zero(cls, alpha: float, d: int, name: str = "zero") -> "DirectSumField":
        out = cls((), name=name)
        out.alpha, out._d = check_alpha(alpha), int(d)
        return out

    def __repr__(self):
        return f"DirectSumField({[p.name or repr(p) for p in self.parts]})"

    @property
    def d(self) -> int:
        return self._d

    @property
    def is_zero(self) -> bool:
        return all(p.is_zero for p in self.parts)

    @cached_property
    def tilt(self):
        return tilt_measure(M.DirectSumMeasure(tuple(p.action.measure for p in self.parts),
                                               self.mixture))

    @cached_property
    def keymap(self) -> KeyMap:
        if not self.parts:
            return KeyMap(np.zeros((0, self._d), dtype=np.int64), np.zeros(0, dtype=np.int64))
        return KeyMap.stack(p.keymap for p in self.parts)

    def _key_slices(self):
        off = 0
        for p in self.parts:
            w = p.keymap.width
            yield slice(off, off + w)
            off += w

    def on_keys(self, states, keys):
        part, sub = states
        keys = np.asarray(keys, dtype=np.int64)
        out = np.zeros((len(part), len(keys)))
        for i, (p, sl) in enumerate(zip(self.parts, self._key_slices())):
            sel = part == i
            if sel.any():
                out[sel] = p.on_keys(sub[i], keys[:, sl])
        return out

    def kernel_value(self, t, s):
        i, sub = s
        return self.parts[int(i)].kernel_value(t, sub)

    def state_count(self, states) -> int:
        return len(states[0])

    def box_keys(self, lo, hi):
        return box_keys(self.keymap, lo, hi)

    def alpha_mass(self):
        return sum(p.alpha_mass() for p in self.parts)

    def alpha_norm(self):
        return self.alpha_mass() ** (1.0 / self.alpha)

    def kernel_sup(self):
        return max((p.kernel_sup() for p in self.parts), default=0.0)

    def series_evaluator(self, keys):
        from .series import make_evaluator
        return make_evaluator(self, keys)


# ------------------------------------------------------------- scalar API


def apply(action, t, s):
    """``phi_t(s)``."""
    return action.apply(t, s)


def rn_derivative(action, t, s):
    """``(d mu o phi_t / d mu)(s)``."""
    return action.rn_derivative(t, s)


def field_kernel(field, t, s) -> float:
    """``f_t(s) = c_t(s) (dmu o phi_t/dmu)(s)^(1/alpha) f(phi_t s)``."""
    return field.kernel_value(t, s)


@dataclass
class CocycleReport:
    ok: bool
    trials: int
    counterexample: tuple | None = None

    def __bool__(self):
        return self.ok


def check_cocycle(field: FieldSpec, trials: int = 200, rng=None, radius: int = 5) -> CocycleReport:
    """Test ``c_{u+v}(s) = c_v(s) c_u(phi_v s)`` on random triples."""
    rng = np.random.default_rng(rng)
    for _ in range(int(trials)):
        u = rng.integers(-radius, radius + 1, size=field.d)
        v = rng.integers(-radius, radius + 1, size=field.d)
        s = field.action.random_state(rng)
        try:
            lhs = field.cocycle_value(u + v, s)
            rhs = field.cocycle_value(v, s) * field.cocycle_value(u, field.action.apply(v, s))
        except WindowEscape:
            continue
        if lhs != rhs:
            return CocycleReport(False, int(trials), (u.tolist(), v.tolist(), s))
    return CocycleReport(True, int(trials))


def check_group_law(action, trials: int = 200, rng=None, radius: int = 5):
    """Return the first ``(u, v, s)`` violating an action axiom, or ``None``."""
    rng = np.random.default_rng(rng)
    zero = np.zeros(action.d, dtype=np.int64)
    for _ in range(int(trials)):
        u = rng.integers(-radius, radius + 1, size=action.d)
        v = rng.integers(-radius, radius + 1, size=action.d)
        s = action.random_state(rng)
        try:
            if action.apply(zero, s) != s:
                return (zero.tolist(), zero.tolist(), s)
            if action.apply(u + v, s) != action.apply(u, action.apply(v, s)):
                return (u.tolist(), v.tolist(), s)
            rn_uv = action.rn_derivative(u + v, s)
            rn_chain = action.rn_derivative(u, action.apply(v, s)) * action.rn_derivative(v, s)
            if rn_uv != rn_chain:
                return (u.tolist(), v.tolist(), s)
        except WindowEscape:
            continue
    return None


def full_support(field, radius: int = 16, samples: int = 256, rng=None, core: float | None = None) -> bool:
    """Spot-check that ``{f_t}`` has full support.

    States are drawn from the tilt, restricted to a core region
    ``|coordinates| <= core`` (default ``radius``, where applicable), and
    each must have some ``t`` in ``[-radius, radius]^d`` with ``f_t(s) != 0``.
    """
    rng = np.random.default_rng(rng)
    core = float(radius) if core is None else core
    keys, _ = field.box_keys(-radius, radius)
    probes = _core_states(field, rng, samples, core)
    vals = field.on_keys(probes, keys)
    return bool(np.all(np.any(vals != 0, axis=1)))


def _core_states(field, rng, samples, core):
    if isinstance(field, DirectSumField):
        part = np.repeat(np.arange(len(field.parts)), samples)
        sub = [_core_states(p, rng, samples, core) for p in field.parts]
        return (part, sub)
    states = field.tilt.sample(rng, 8 * samples)
    action = field.action
    if isinstance(action, TranslationAction):
        keep = np.flatnonzero(np.all(np.abs(states[0]) <= core, axis=1))[:samples]
        return (states[0][keep], states[1][keep])
    if isinstance(action, LatticeShiftAction):
        keep = np.flatnonzero(np.all(np.abs(states[1]) <= core, axis=1))[:samples]
        return (states[0][keep], states[1][keep])
    return states[:samples]


def restrict_keys(keys, keymap_from: KeyMap, rows) -> tuple:
    """Project keys onto a subset of key rows and merge duplicates."""
    sub = np.asarray(keys)[:, rows]
    uniq, inverse, _ = unique_rows(sub)
    return uniq, inverse
