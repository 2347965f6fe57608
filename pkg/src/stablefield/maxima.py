"""Partial maxima: the scale ``b_n``, simulated ``M_n`` and limit checks.

``b_n^alpha = int max_{0 <= t <= (n-1)1} |f_t|^alpha dmu`` and
``M_n = max_{0 <= t <= (n-1)1} |X_t|``.
"""

from __future__ import annotations

import functools
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import stats

from . import measures as M
from .actions import (
    AtomicAction,
    CoordinateProjection,
    CoordinateShiftAction,
    DirectSumField,
    LatticeShiftAction,
    LatticeTable,
    PiecewiseConstant,
    TranslationAction,
)
from .keys import box_indices, box_keys, unique_rows
from .quadnum import QuadNum
from .stable import SeriesConfig, check_alpha, series_on_keys, stable_tail_constant


class UnsupportedExact(ValueError):
    """No exact b_n for this kernel/action; use :func:`bn_monte_carlo`."""


EXACT = "Exact"
MONTE_CARLO = "MonteCarlo"
_ENUM_BUDGET = 4_000_000


@dataclass
class BnCurve:
    n_grid: tuple
    values: np.ndarray
    method: str = EXACT
    stderr: np.ndarray | None = None
    replications: int | None = None
    exact_alpha: list | None = field(default=None, repr=False)

    def __post_init__(self):
        self.n_grid = tuple(int(n) for n in self.n_grid)
        self.values = np.asarray(self.values, dtype=float)
        if self.stderr is None:
            self.stderr = np.zeros(len(self.values))

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("n,b_n,method,stderr\n")
        for n, b, se in zip(self.n_grid, self.values, self.stderr):
            out.write(f"{n},{float(b)!r},{self.method},{float(se)!r}\n")
        return out.getvalue()

    def plot_data(self) -> str:
        """``log n, log b_n`` pairs for external plotting."""
        rows = ["log_n,log_b_n"]
        rows += [f"{math.log(n)!r},{math.log(b)!r}" for n, b in zip(self.n_grid, self.values) if b > 0]
        return "\n".join(rows) + "\n"

    def to_dict(self) -> dict:
        out = {"n_grid": list(self.n_grid), "values": [float(v) for v in self.values],
               "method": self.method, "stderr": [float(v) for v in self.stderr]}
        if self.replications is not None:
            out["replications"] = self.replications
        if self.exact_alpha is not None:
            out["exact_b_alpha"] = [q.to_text() for q in self.exact_alpha]
        return out


# ------------------------------------------------------- exact: translations


def _qsign(A, B, m: int) -> np.ndarray:
    """Exact sign of ``A + B sqrt(m)`` for integer arrays."""
    A = np.asarray(A, dtype=np.int64)
    B = np.asarray(B, dtype=np.int64)
    if m == 1 or not B.any():
        return np.sign(A + B)
    # floats decide unless the value is within rounding error of zero
    root = math.sqrt(m)
    val = A + B * root
    near = np.abs(val) <= 1e-9 * (np.abs(A) + np.abs(B) * root)
    if not near.any():
        return np.sign(val).astype(np.int64)
    out = np.sign(val).astype(np.int64)
    out[near] = _qsign_exact(A[near], B[near], m)
    return out


def _qsign_exact(A, B, m: int) -> np.ndarray:
    if np.abs(A).max(initial=0) > 2**31 or np.abs(B).max(initial=0) > 2**31 // max(1, math.isqrt(m) + 1):
        return np.array([QuadNum(int(a), int(b), m).sign() for a, b in zip(A, B)], dtype=np.int64)
    sa, sb = np.sign(A), np.sign(B)
    out = np.where(sb == 0, sa, np.where(sa == 0, sb, sa))
    opp = (sa != 0) & (sb != 0) & (sa != sb)
    if opp.any():
        a2 = A[opp] * A[opp]
        mb2 = m * B[opp] * B[opp]
        out[opp] = np.where(a2 > mb2, sa[opp], np.where(a2 < mb2, sb[opp], 0))
    return out


def _union_slow(lA, lB, rA, rB, m: int, D: int) -> QuadNum:
    def q(a, b):
        return QuadNum(Fraction(int(a), D), Fraction(int(b), D), m)

    ivs = sorted(((q(a, b), q(c, e)) for a, b, c, e in zip(lA, lB, rA, rB)), key=lambda p: p[0])
    total, reach = QuadNum(0), None
    for lo, hi in ivs:
        start = lo if reach is None or reach < lo else reach
        if start < hi:
            total = total + (hi - start)
        reach = hi if reach is None or reach < hi else reach
    return total


def _fsign(fd, A, B, m: int, tol: float) -> np.ndarray:
    """Sign of ``A + B sqrt(m)`` given its float value ``fd``; only values
    within ``tol`` of zero are decided exactly."""
    out = np.sign(fd).astype(np.int64)
    near = np.abs(fd) <= tol
    if near.any():
        out[near] = _qsign_exact(A[near], B[near], m)
    return out


def _union_sorted(lA, lB, rA, rB, m: int, D: int) -> QuadNum:
    """Exact length of a union of closed intervals already sorted by left end."""
    n = len(lA)
    if n == 0:
        return QuadNum(0)
    sq = math.sqrt(m)
    lf = lA + lB * sq
    rf = rA + rB * sq
    tol = 1e-10 * float(max(np.abs(lA).max() + np.abs(lB).max() * sq,
                            np.abs(rA).max() + np.abs(rB).max() * sq, 1.0))
    idx = np.arange(n)
    runmax = np.maximum.accumulate(rf)
    arg = np.maximum.accumulate(np.where(rf >= runmax, idx, 0))
    prev = arg[:-1]
    cur = arg[1:]
    new = cur == idx[1:]
    # confirm the float running maximum exactly where it was a near tie
    other = np.where(new, prev, cur)
    gap = np.where(new, rf[1:] - rf[other], rf[other] - rf[1:])
    near = np.abs(gap) <= tol
    if near.any():
        k = np.flatnonzero(near)
        dA = np.where(new[k], rA[1:][k] - rA[other[k]], rA[other[k]] - rA[1:][k])
        dB = np.where(new[k], rB[1:][k] - rB[other[k]], rB[other[k]] - rB[1:][k])
        if np.any(_qsign_exact(dA, dB, m) < 0):
            return _union_slow(lA, lB, rA, rB, m, D)
    RA = np.concatenate([[lA[0]], rA[prev]])
    RB = np.concatenate([[lB[0]], rB[prev]])
    Rf = np.concatenate([[lf[0]], rf[prev]])
    use_l = _fsign(lf - Rf, lA - RA, lB - RB, m, tol) >= 0
    sA = np.where(use_l, lA, RA)
    sB = np.where(use_l, lB, RB)
    dA, dB = rA - sA, rB - sB
    pos = _fsign(rf - np.where(use_l, lf, Rf), dA, dB, m, tol) > 0
    return QuadNum(Fraction(int(dA[pos].sum()), D), Fraction(int(dB[pos].sum()), D), m)


def _sort_exact(lA, lB, m):
    order = np.argsort(lA + lB * math.sqrt(m), kind="stable")
    a, b = lA[order], lB[order]
    if len(a) > 1 and np.any(_qsign(np.diff(a), np.diff(b), m) < 0):
        def cmp(i, j):
            return int(_qsign(np.array([a[i] - a[j]]), np.array([b[i] - b[j]]), m)[0])
        fix = sorted(range(len(a)), key=functools.cmp_to_key(cmp))
        order = order[np.array(fix, dtype=np.int64)]
    return order


class _TranslationBn:
    """Exact ``b_n^alpha`` for 1-D translations with piecewise-constant kernels.

    ``max_t |f_t|^alpha`` is a step function whose superlevel sets are unions
    of translated kernel cells, so its integral is a sum of exact interval
    union lengths in Q(sqrt m) weighted by level gaps.
    """

    def __init__(self, field):
        action = field.action
        if not (isinstance(action, TranslationAction) and action.dim == 1
                and isinstance(field.kernel, PiecewiseConstant)):
            raise UnsupportedExact("exact b_n needs a 1-D translation with a piecewise-constant kernel")
        self.field, self.action, self.alpha = field, action, field.alpha
        cells = field.kernel.cells(action.flips)
        m = action.m
        for lo, hi, _, _ in cells:
            for v in (lo[0], hi[0]):
                if v.m not in (1, m):
                    raise UnsupportedExact("kernel endpoints live in a different quadratic field")
                if m == 1 and v.m != 1:
                    m = v.m
        self.m = m
        D = action.denominator
        for lo, hi, _, _ in cells:
            for v in (lo[0], hi[0]):
                D = math.lcm(D, v.a.denominator, v.b.denominator)
        self.D = D
        self.scale = D // action.denominator
        mags = sorted({abs(Fraction(v)) for *_, v in cells}, reverse=True)
        self.levels = mags
        self.cells = [(int(lo[0].a * D), int(lo[0].b * D), int(hi[0].a * D), int(hi[0].b * D), sh,
                       abs(Fraction(v))) for lo, hi, sh, v in cells]
        k = action.flips
        self.sheets = [tuple(s) for s in np.array(np.meshgrid(*[[-1, 1]] * k)).reshape(k, -1).T] \
            if k else [()]

    def _groups(self, keys):
        """Interval arrays ``(lA, lB, rA, rB, key_index)`` per (source sheet, level)."""
        act = self.action
        w = act.keymap.width
        p, q, bits = act._split_keys(keys[:, :w])
        tA = p[:, 0] * self.scale
        tB = q[:, 0] * self.scale
        sig = 1 - 2 * bits
        codes = bits @ (1 << np.arange(bits.shape[1], dtype=np.int64)) if bits.shape[1] else \
            np.zeros(len(keys), dtype=np.int64)
        out = []
        for y0 in self.sheets:
            for level in self.levels:
                lA, lB, rA, rB, kid = [], [], [], [], []
                for code in np.unique(codes):
                    sel = np.flatnonzero(codes == code)
                    target = tuple(int(v) for v in np.asarray(y0, dtype=np.int64) * sig[sel[0]])
                    for a0, b0, a1, b1, sh, val in self.cells:
                        if val < level or (sh != target and sh != ()):
                            continue
                        lA.append(a0 - tA[sel])
                        lB.append(b0 - tB[sel])
                        rA.append(a1 - tA[sel])
                        rB.append(b1 - tB[sel])
                        kid.append(sel)
                if lA:
                    out.append((level, tuple(np.concatenate(x) for x in (lA, lB, rA, rB, kid))))
        return out

    def _combine(self, lengths):
        """``sum_j (v_j^a - v_{j+1}^a) |{h >= v_j}|`` as a float, plus the exact
        measure when there is a single level."""
        per_level = {}
        for level, length in lengths:
            per_level[level] = per_level.get(level, QuadNum(0)) + length
        levels = sorted(per_level, reverse=True)
        total = 0.0
        for j, v in enumerate(levels):
            nxt = levels[j + 1] if j + 1 < len(levels) else 0
            total += (float(v) ** self.alpha - float(nxt) ** self.alpha) * float(per_level[v])
        exact = None
        if len(levels) == 1 and levels[0] == 1:
            exact = per_level[1]
        return total, exact

    def curve(self, n_grid):
        n_grid = [int(n) for n in n_grid]
        n_max = max(n_grid)
        d = self.field.d
        out = {}
        if n_max ** d <= _ENUM_BUDGET:
            ts = box_indices(n_max, d)
            keys, inverse, _ = unique_rows(self.field.keymap.keys(ts))
            n_min = np.full(len(keys), n_max + 1, dtype=np.int64)
            np.minimum.at(n_min, inverse, ts.max(axis=1) + 1)
            groups = []
            for level, (lA, lB, rA, rB, kid) in self._groups(keys):
                order = _sort_exact(lA, lB, self.m)
                groups.append((level, lA[order], lB[order], rA[order], rB[order], n_min[kid[order]]))
            for n in n_grid:
                lengths = []
                for level, lA, lB, rA, rB, nm in groups:
                    sel = nm <= n
                    lengths.append((level, _union_sorted(lA[sel], lB[sel], rA[sel], rB[sel],
                                                         self.m, self.D)))
                out[n] = self._combine(lengths)
        else:
            for n in n_grid:
                keys, _ = box_keys(self.field.keymap, 0, n - 1)
                lengths = []
                for level, (lA, lB, rA, rB, _) in self._groups(keys):
                    order = _sort_exact(lA, lB, self.m)
                    lengths.append((level, _union_sorted(lA[order], lB[order], rA[order], rB[order],
                                                         self.m, self.D)))
                out[n] = self._combine(lengths)
        return out


# -------------------------------------------------------- exact: countable


def _lattice_bn_alpha(field, n: int) -> float:
    act = field.action
    keys, _ = box_keys(field.keymap, 0, n - 1)
    Dl = act.lattice_dim
    shift = keys[:, :Dl]
    tors = [i for i, o in enumerate(act.orders) if o > 1]
    labels_all, sites_all, vals_all = [], [], []
    for (L, z), v in field.kernel.entries.items():
        pre = np.full(len(keys), L, dtype=np.int64)
        for col, i in enumerate(tors):
            kcol = keys[:, Dl + col]
            for r in np.unique(kcol):
                sel = kcol == r
                inv = np.argsort(act._powers[i].power(int(r))[: act.n_labels])
                pre[sel] = inv[pre[sel]]
        sites = np.asarray(z, dtype=np.int64)[None, :] - shift
        rn = act._wfloat[L] / act._wfloat[pre]
        labels_all.append(pre)
        sites_all.append(sites)
        vals_all.append(rn * abs(v) ** field.alpha)
    labels = np.concatenate(labels_all)
    rows = np.column_stack([labels, np.concatenate(sites_all)])
    vals = np.concatenate(vals_all)
    uniq, inverse, _ = unique_rows(rows)
    best = np.zeros(len(uniq))
    np.maximum.at(best, inverse, vals)
    return float(best @ act._wfloat[uniq[:, 0]])


def _atomic_bn_alpha(field, n: int) -> float:
    act = field.action
    keys, _ = box_keys(field.keymap, 0, n - 1)
    atoms = np.arange(act.n_atoms)
    vals = np.abs(field.on_keys(atoms, keys)) ** field.alpha
    return float(vals.max(axis=1) @ np.array([float(w) for w in act.weights]))


def bn_exact_curve(field, n_grid) -> BnCurve:
    """Exact ``b_n`` on a grid (translation, lattice-shift, atomic and direct sums)."""
    n_grid = sorted({int(n) for n in n_grid})
    if n_grid[0] < 1:
        raise ValueError("n must be positive")
    if isinstance(field, DirectSumField):
        parts = [bn_exact_curve(p, n_grid) for p in field.parts]
        vals = sum(c.values ** field.alpha for c in parts) ** (1.0 / field.alpha)
        return BnCurve(n_grid, vals, EXACT)
    action = field.action
    if isinstance(action, TranslationAction):
        if not action.measure_preserving:
            raise UnsupportedExact("exact b_n needs a measure-preserving action")
        res = _TranslationBn(field).curve(n_grid)
        vals = np.array([res[n][0] for n in n_grid]) ** (1.0 / field.alpha)
        exact = [res[n][1] for n in n_grid]
        return BnCurve(n_grid, vals, EXACT, exact_alpha=exact if all(e is not None for e in exact) else None)
    if isinstance(action, LatticeShiftAction) and isinstance(field.kernel, LatticeTable):
        vals = [_lattice_bn_alpha(field, n) for n in n_grid]
    elif isinstance(action, AtomicAction):
        vals = [_atomic_bn_alpha(field, n) for n in n_grid]
    else:
        raise UnsupportedExact(f"no exact b_n for {type(action).__name__}; use bn_monte_carlo")
    return BnCurve(n_grid, np.array(vals) ** (1.0 / field.alpha), EXACT)


def bn_exact(field, n: int) -> float:
    """Exact ``b_n``."""
    return float(bn_exact_curve(field, [n]).values[0])


def bn_alpha_exact(field, n: int) -> QuadNum:
    """``b_n^alpha`` as an exact number (indicator kernels under translations)."""
    curve = bn_exact_curve(field, [n])
    if curve.exact_alpha is None:
        raise UnsupportedExact("exact value available only for 0/1-valued translation kernels")
    return curve.exact_alpha[0]


# -------------------------------------------------------------- Monte Carlo


def _abs_max_sampler(rho: M.Rho):
    """``s -> x`` with ``P(|g| > x) = s``, so ``max |g_1..g_N|`` is drawn by
    inverting ``1 - (1 - s)^N = U``."""
    if rho.name == "normal":
        return lambda s: stats.norm.isf(s / 2.0)
    if rho.name == "pareto":
        theta = rho.params[0]
        return lambda s: s ** (-1.0 / theta)
    if rho.name == "constant":
        c = abs(rho.params[0])
        return lambda s: np.full(np.shape(s), c)
    return None


def bn_monte_carlo(field, n: int, replications: int = 100_000, rng=None):
    """Estimate ``b_n`` as ``(mean of max_t |f_t|^alpha dmu/dnu)^(1/alpha)``.

    Returns ``(estimate, stderr)`` with a delta-method standard error.  For
    coordinate fields the maximum of ``n^d`` i.i.d. coordinates is drawn
    directly from its law.
    """
    rng = np.random.default_rng(rng)
    n, reps, a = int(n), int(replications), field.alpha
    d = field.d
    if isinstance(field, DirectSumField):
        raise UnsupportedExact("Monte Carlo b_n expects a single component")
    if isinstance(field.action, CoordinateShiftAction) and isinstance(field.kernel, CoordinateProjection):
        sampler = _abs_max_sampler(field.action.rho)
        N = n ** d
        if sampler is not None:
            u = rng.random(reps)
            s = -np.expm1(np.log1p(-u) / N)
            draws = sampler(s) ** a
        else:
            draws = np.array([np.max(np.abs(field.action.rho.sample(rng, N))) ** a for _ in range(reps)])
    else:
        keys, _ = box_keys(field.keymap, 0, n - 1)
        tilt = field.tilt
        draws = np.empty(reps)
        step = max(1, 2_000_000 // max(1, len(keys)))
        for start in range(0, reps, step):
            k = min(step, reps - start)
            states = tilt.sample(rng, k)
            vals = np.abs(field.on_keys(states, keys)) ** a
            draws[start:start + k] = vals.max(axis=1) * tilt.mu_over_nu(states)
    mean = float(draws.mean())
    se_mean = float(draws.std(ddof=1) / math.sqrt(reps)) if reps > 1 else float("nan")
    est = mean ** (1.0 / a)
    se = (1.0 / a) * mean ** (1.0 / a - 1.0) * se_mean if mean > 0 else 0.0
    return est, se


def bn_monte_carlo_curve(field, n_grid, replications: int = 100_000, seed: int = 0) -> BnCurve:
    n_grid = sorted({int(n) for n in n_grid})
    streams = np.random.SeedSequence(seed).spawn(len(n_grid))
    res = [bn_monte_carlo(field, n, replications, np.random.default_rng(s)) for n, s in zip(n_grid, streams)]
    return BnCurve(n_grid, np.array([r[0] for r in res]), MONTE_CARLO,
                   np.array([r[1] for r in res]), replications)


def bn_curve(field, n_grid, replications: int = 100_000, seed: int = 0) -> BnCurve:
    """Exact when available, Monte Carlo otherwise."""
    try:
        return bn_exact_curve(field, n_grid)
    except UnsupportedExact:
        return bn_monte_carlo_curve(field, n_grid, replications, seed)


# ------------------------------------------------------------------- fits


@dataclass
class Fit:
    slope: float
    intercept: float
    residual: float


def growth_exponent(curve, drop_first: bool = True) -> Fit:
    """Least-squares fit of ``log b_n`` on ``log n``; the smallest grid point
    is excluded by default."""
    n = np.asarray(curve.n_grid if isinstance(curve, BnCurve) else curve[0], dtype=float)
    b = np.asarray(curve.values if isinstance(curve, BnCurve) else curve[1], dtype=float)
    if len(n) < 4 or n.max() < 4 * n.min():
        raise ValueError("need at least 4 grid points spanning 2 octaves")
    if drop_first:
        n, b = n[1:], b[1:]
    x, y = np.log(n), np.log(b)
    slope, intercept = np.polyfit(x, y, 1)
    resid = float(np.max(np.abs(y - (slope * x + intercept))))
    return Fit(float(slope), float(intercept), resid)


def check_surrogate_condition(curve: BnCurve, d: int, alpha: float, margin: float = 0.02) -> bool:
    """``b_n / n^{d/(2 alpha)} -> infinity``, judged by the fitted exponent."""
    return growth_exponent(curve).slope > d / (2.0 * check_alpha(alpha)) + margin


def tightness_scaling(alpha: float, n: int) -> float:
    """``zeta_n``: 1 for alpha < 1, ``max(1, log log n)`` at 1, ``(log n)^(1/alpha')`` above."""
    alpha = check_alpha(alpha)
    if n < 3:
        raise ValueError("need n >= 3")
    if alpha < 1:
        return 1.0
    if alpha == 1:
        return max(1.0, math.log(math.log(n)))
    conj = alpha / (alpha - 1.0)
    return math.log(n) ** (1.0 / conj)


def k_x(weights, sups, alpha: float) -> float:
    """``K_X = (sum_v nu(v) g(v)^alpha)^(1/alpha)`` for finitely many ``v``."""
    alpha = check_alpha(alpha)
    w = np.asarray(weights, dtype=float)
    g = np.asarray(sups, dtype=float)
    if np.any(~np.isfinite(g)):
        raise ValueError("supremum is not computable")
    return float((w @ np.abs(g) ** alpha) ** (1.0 / alpha))


def k_x_field(field) -> float:
    """``K_X`` of a mixed moving average given as a lattice-shift field."""
    act = field.action
    if not isinstance(act, LatticeShiftAction) or not isinstance(field.kernel, LatticeTable):
        raise ValueError("K_X needs a lattice-shift field with a finitely supported kernel")
    sups = np.zeros(act.n_labels)
    for (label, _), v in field.kernel.entries.items():
        sups[label] = max(sups[label], abs(v))
    return k_x(act._wfloat, sups, field.alpha)


def effective_rate_constant(volume, l: int, p: int, g_integral: float, alpha: float) -> float:
    """``a = (V l 2^{-p} int g*^alpha dnu)^(1/alpha)``: the limit of ``n^{-p/alpha} b_n``."""
    return float(float(volume) * l / 2 ** p * g_integral) ** (1.0 / alpha)


# ------------------------------------------------------------------ Frechet


def frechet_cdf(z, alpha: float):
    z = np.asarray(z, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(z > 0, np.exp(-np.power(np.maximum(z, 1e-300), -alpha)), 0.0)


def frechet_sample(alpha: float, size, rng=None):
    """``(-log U)^(-1/alpha)``."""
    u = np.random.default_rng(rng).random(size)
    return (-np.log(u)) ** (-1.0 / alpha)


def frechet_gof(samples, alpha: float, scale: float = 1.0) -> float:
    """KS distance between ``samples / scale`` and the standard alpha-Frechet law."""
    x = np.asarray(samples, dtype=float)
    if len(x) < 100:
        raise ValueError("need at least 100 samples")
    if np.any(x < 0):
        raise ValueError("samples must be nonnegative")
    return float(stats.kstest(x / scale, stats.invweibull(check_alpha(alpha)).cdf).statistic)


def limit_scale(b_n: float, alpha: float) -> float:
    """Frechet scale of ``M_n`` under the limit ``M_n / b_n -> C_alpha^(1/alpha) Z``."""
    return b_n * stable_tail_constant(alpha) ** (1.0 / alpha)


# -------------------------------------------------------------- simulation


@dataclass
class MaximaReport:
    n: int
    replications: int
    samples: np.ndarray
    signed_samples: np.ndarray
    normalization: float = 1.0
    normalization_label: str = "1"
    target: str = "Frechet"
    target_scale: float | None = None
    ks_statistic: float | None = None
    seed: int = 0
    truncation_count: int = 0

    @property
    def normalized(self) -> np.ndarray:
        return self.samples / self.normalization

    @property
    def median(self) -> float:
        return float(np.median(self.normalized))

    def evaluate(self, alpha: float, scale: float | None) -> "MaximaReport":
        """Set the Frechet target (``None`` means the degenerate zero law)."""
        if scale is None:
            self.target, self.target_scale = "DegenerateZero", None
            self.ks_statistic = float(np.mean(self.normalized > 0))
        else:
            self.target, self.target_scale = "Frechet", float(scale)
            self.ks_statistic = frechet_gof(self.normalized, alpha, scale)
        return self

    def to_dict(self, include_samples: bool = True) -> dict:
        out = {"n": self.n, "replications": self.replications, "normalization": self.normalization,
               "normalization_label": self.normalization_label, "target": self.target,
               "target_scale": self.target_scale, "ks_statistic": self.ks_statistic,
               "median_normalized": self.median, "seed": self.seed,
               "truncation_count": self.truncation_count}
        if include_samples:
            out["samples"] = [float(v) for v in self.samples]
            out["signed_samples"] = [float(v) for v in self.signed_samples]
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def to_csv(self) -> str:
        rows = ["replication,n,max_abs,max_signed"]
        rows += [f"{i},{self.n},{float(a)!r},{float(s)!r}" for i, (a, s) in enumerate(zip(self.samples, self.signed_samples))]
        return "\n".join(rows) + "\n"


def simulate_maxima(field, n: int, replications: int, cfg: SeriesConfig = SeriesConfig(),
                    seed: int | None = None, normalization: float = 1.0,
                    normalization_label: str = "1", workers: int = 1) -> MaximaReport:
    """Independent series realizations of ``M_n`` and ``max_t X_t``.

    Replication ``r`` uses the ``r``-th child of ``SeedSequence(seed)``, so
    results do not depend on execution order or on ``workers``.
    """
    seed = cfg.seed if seed is None else int(seed)
    n, reps = int(n), int(replications)
    if field.is_zero:
        z = np.zeros(reps)
        return MaximaReport(n, reps, z, z.copy(), normalization, normalization_label, seed=seed,
                            truncation_count=cfg.truncation_count)
    keys, _ = box_keys(field.keymap, 0, n - 1)

    def one(ss):
        x = series_on_keys(field, keys, cfg, np.random.default_rng(ss))
        return np.max(np.abs(x)), np.max(x)

    streams = np.random.SeedSequence(seed).spawn(reps)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=int(workers)) as pool:
            out = list(pool.map(one, streams))
    else:
        out = [one(ss) for ss in streams]
    res = np.array(out, dtype=float).reshape(reps, 2)
    return MaximaReport(n, reps, res[:, 0], res[:, 1], float(normalization), normalization_label,
                        seed=seed, truncation_count=cfg.truncation_count)
