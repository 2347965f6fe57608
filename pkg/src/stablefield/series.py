"""Batched evaluation of ``sum_k w_k f_key(xi_k)`` for the LePage series."""

from __future__ import annotations

import numpy as np

from .actions import (
    CoordinateProjection,
    CoordinateShiftAction,
    DirectSumField,
    PiecewiseConstant,
    TranslationAction,
)

_CHUNK = 2_000_000


class DenseEvaluator:
    """Generic path: evaluate the kernel on a (states x keys) grid in chunks."""

    def __init__(self, field, keys):
        self.field = field
        self.keys = np.asarray(keys, dtype=np.int64)
        self.kernel_sup = field.kernel_sup()

    def __call__(self, states, weights):
        n = self.field.state_count(states)
        out = np.zeros(len(self.keys))
        step = max(1, _CHUNK // max(1, len(self.keys)))
        for start in range(0, n, step):
            sel = np.arange(start, min(n, start + step))
            sub = _take(self.field, states, sel)
            out += weights[sel] @ self.field.on_keys(sub, self.keys)
        return out


class IntervalEvaluator:
    """Translations on R x {-1,1}^k with piecewise-constant kernels.

    For each key the contribution of a piece ``[a, b] x {sheet}`` is the
    weight sum of states with ``a - tau <= x <= b - tau`` on the matching
    source sheet, read off prefix sums over the sorted states.
    """

    def __init__(self, field, keys):
        action = field.action
        self.field = field
        self.keys = np.asarray(keys, dtype=np.int64)
        self.kernel_sup = field.kernel_sup()
        w = action.keymap.width
        self.tau = action.key_translations(self.keys[:, :w])[:, 0]
        self.flip = action.key_flips(self.keys[:, :w])
        if self.keys.shape[1] > w:
            self.sign = 1 - 2 * self.keys[:, w]
        else:
            self.sign = np.ones(len(self.keys), dtype=np.int64)
        self.pieces = [(float(b.lower[0]), float(b.upper[0]), b.sheet, float(v))
                       for b, v in field.kernel.pieces]
        self.flips = action.flips

    @staticmethod
    def _code(y):
        y = np.asarray(y)
        if y.shape[-1] == 0:
            return np.zeros(y.shape[:-1], dtype=np.int64)
        bits = (y < 0).astype(np.int64)
        return bits @ (1 << np.arange(y.shape[-1], dtype=np.int64))

    def __call__(self, states, weights):
        x, y = states
        x = np.asarray(x)[:, 0]
        codes = self._code(y)
        tables = {}

        def table(code):
            if code not in tables:
                sel = np.flatnonzero(codes == code) if code is not None else np.arange(len(x))
                order = np.argsort(x[sel], kind="stable")
                xs = x[sel][order]
                cum = np.concatenate([[0.0], np.cumsum(weights[sel][order])])
                tables[code] = (xs, cum)
            return tables[code]

        out = np.zeros(len(self.keys))
        for lo, hi, sheet, val in self.pieces:
            if sheet is None:
                groups = [(None, np.arange(len(self.keys)))]
            else:
                src = self._code(np.asarray(sheet)[None, :] * self.flip)
                groups = [(int(c), np.flatnonzero(src == c)) for c in np.unique(src)]
            for code, idx in groups:
                xs, cum = table(code)
                tau = self.tau[idx]
                upper = np.searchsorted(xs, hi - tau, side="right")
                lower = np.searchsorted(xs, lo - tau, side="left")
                out[idx] += val * (cum[upper] - cum[lower])
        return out * self.sign


class CoordinateEvaluator:
    """Coordinate fields: series states are fresh i.i.d. draws that are never
    revisited, so their coordinates at the keys are drawn in bulk from one
    stream seeded by the states' own seeds (equal in law to reading them
    lazily, and much faster)."""

    def __init__(self, field, keys):
        self.field = field
        self.keys = np.asarray(keys, dtype=np.int64)
        self.kernel_sup = field.kernel_sup()
        self.rho = field.action.rho

    def __call__(self, states, weights):
        n, k = len(states), len(self.keys)
        rng = np.random.default_rng([int(s.seed) for s in states] or [0])
        out = np.zeros(k)
        step = max(1, _CHUNK // max(1, k))
        for start in range(0, n, step):
            stop = min(n, start + step)
            out += weights[start:stop] @ self.rho.sample(rng, (stop - start, k))
        return out


class SumEvaluator:
    def __init__(self, field, keys):
        self.field = field
        keys = np.asarray(keys, dtype=np.int64)
        self.subs = [make_evaluator(p, keys[:, sl])
                     for p, sl in zip(field.parts, field._key_slices())]
        self.kernel_sup = field.kernel_sup()
        self.n_keys = len(keys)

    def __call__(self, states, weights):
        part, sub = states
        out = np.zeros(self.n_keys)
        for i, ev in enumerate(self.subs):
            sel = part == i
            if sel.any():
                out += ev(sub[i], weights[sel])
        return out


def _take(field, states, sel):
    if isinstance(states, tuple):
        return tuple(np.asarray(s)[sel] for s in states)
    return states[sel]


def make_evaluator(field, keys):
    if isinstance(field, DirectSumField):
        return SumEvaluator(field, keys)
    if isinstance(field.action, CoordinateShiftAction) and isinstance(field.kernel, CoordinateProjection):
        return CoordinateEvaluator(field, keys)
    if (isinstance(field.action, TranslationAction) and field.action.dim == 1
            and isinstance(field.kernel, PiecewiseConstant)):
        return IntervalEvaluator(field, keys)
    return DenseEvaluator(field, keys)
