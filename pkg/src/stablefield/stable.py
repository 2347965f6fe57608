"""Symmetric alpha-stable sampling, the stable tail constant, measure tilts
and the LePage series simulation of stable integrals."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import gamma as gamma_fn

log = logging.getLogger(__name__)

HARD_TRUNCATION_CAP = 1_000_000


class TruncationCapError(RuntimeError):
    """The adaptive series rule asked for more terms than the hard cap."""


class UnsupportedMeasure(ValueError):
    pass


def check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 < alpha < 2.0:
        raise ValueError(f"alpha must lie strictly inside (0, 2), got {alpha}")
    return alpha


def sample_sas(alpha, scale=1.0, rng=None, size=None):
    """Draw from the symmetric alpha-stable law with characteristic function
    ``exp(-|scale*theta|**alpha)``.

    Uses the Chambers-Mallows-Stuck transform of a uniform angle and a unit
    exponential, which is exact in law for every ``alpha`` in (0, 2).
    """
    alpha = check_alpha(alpha)
    if scale < 0:
        raise ValueError("scale must be nonnegative")
    rng = np.random.default_rng(rng)
    v = rng.uniform(-np.pi / 2, np.pi / 2, size=size)
    w = rng.standard_exponential(size=size)
    if alpha == 1.0:
        x = np.tan(v)
    else:
        x = (np.sin(alpha * v) / np.cos(v) ** (1.0 / alpha)
             * (np.cos((1.0 - alpha) * v) / w) ** ((1.0 - alpha) / alpha))
    x = scale * x
    if size is None:
        return float(x)
    return x


def stable_tail_constant(alpha) -> float:
    """C_alpha such that P(|X| > x) ~ C_alpha x**-alpha for X ~ SaS(1)."""
    alpha = check_alpha(alpha)
    if alpha == 1.0:
        return 2.0 / math.pi
    return (1.0 - alpha) / (gamma_fn(2.0 - alpha) * math.cos(math.pi * alpha / 2.0))


# ---------------------------------------------------------------- measures


@dataclass(frozen=True)
class TiltedMeasure:
    """A probability measure nu equivalent to a control measure mu.

    ``density(states)`` evaluates d(nu)/d(mu); ``sampler(rng, size)`` draws
    nu-distributed states.  States use the representation of the action the
    measure belongs to.
    """

    density: Callable
    sampler: Callable
    description: str = ""

    def sample(self, rng, size):
        return self.sampler(np.random.default_rng(rng), size)

    def mu_over_nu(self, states) -> np.ndarray:
        return 1.0 / np.asarray(self.density(states), dtype=float)


def _cauchy_density(x):
    return 1.0 / (np.pi * (1.0 + x * x))


def rounded_cauchy_pmf(k):
    """P(round(C) = k) for standard Cauchy C."""
    k = np.asarray(k, dtype=float)
    return (np.arctan(k + 0.5) - np.arctan(k - 0.5)) / np.pi


def tilt_measure(measure) -> TiltedMeasure:
    """Tilt a sigma-finite control measure to an equivalent probability.

    Supported descriptions (see :mod:`stablefield.measures`): Lebesgue on R^m
    times counting on sign flips (product Cauchy tilt, uniform on flips),
    finite atom tables (normalized weights), weighted atoms times counting
    measure on Z^d (normalized weights times rounded-Cauchy lattice tilt),
    product probability laws (identity tilt) and direct sums (mixtures).
    """
    from . import measures as M

    if isinstance(measure, M.LebesgueFlips):
        dim, k = measure.dim, measure.flips

        def density(states):
            x = np.atleast_2d(states[0])
            return np.prod(_cauchy_density(x), axis=-1) / 2.0 ** k

        def sampler(rng, size):
            x = rng.standard_cauchy(size=(size, dim))
            y = rng.choice(np.array([-1, 1], dtype=np.int8), size=(size, k))
            return (x, y)

        return TiltedMeasure(density, sampler, f"cauchy^{dim} x uniform(+-1)^{k}")

    if isinstance(measure, M.Atoms):
        w = np.asarray(measure.weights, dtype=float)
        total = w.sum()
        if not np.isfinite(total) or total <= 0:
            raise UnsupportedMeasure("atom weights must have a finite positive sum")
        probs = w / total

        def density(states):
            return np.full(np.shape(states), 1.0 / total)

        def sampler(rng, size):
            return rng.choice(len(w), size=size, p=probs)

        return TiltedMeasure(density, sampler, f"normalized atoms ({len(w)})")

    if isinstance(measure, M.LatticeCounting):
        w = np.asarray(measure.label_weights, dtype=float)
        probs = w / w.sum()
        dim = measure.dim

        def density(states):
            labels, sites = states
            label_p = probs[np.asarray(labels)] / w[np.asarray(labels)]
            return label_p * np.prod(rounded_cauchy_pmf(np.atleast_2d(sites)), axis=-1)

        def sampler(rng, size):
            labels = rng.choice(len(w), size=size, p=probs)
            sites = np.rint(rng.standard_cauchy(size=(size, dim))).astype(np.int64)
            return (labels, sites)

        return TiltedMeasure(density, sampler, "atoms x rounded-cauchy on Z^d")

    if isinstance(measure, M.ProductProbability):
        def density(states):
            return np.ones(len(states))

        def sampler(rng, size):
            seeds = rng.integers(0, 2**63 - 1, size=size, dtype=np.int64)
            return np.array([M.LazyCoordinates(measure.rho, int(s), measure.dim) for s in seeds],
                            dtype=object)

        return TiltedMeasure(density, sampler, f"identity tilt of {measure.rho.name}^Z^d")

    if isinstance(measure, M.DirectSumMeasure):
        tilts = [tilt_measure(part) for part in measure.parts]
        mix = np.asarray(measure.mixture, dtype=float)
        mix = mix / mix.sum()

        def density(states):
            part, sub = states
            out = np.empty(len(part))
            for i, tilt in enumerate(tilts):
                sel = part == i
                if sel.any():
                    out[sel] = mix[i] * np.asarray(tilt.density(sub[i]), dtype=float)
            return out

        def sampler(rng, size):
            part = rng.choice(len(tilts), size=size, p=mix)
            sub = []
            for i, tilt in enumerate(tilts):
                sub.append(tilt.sampler(rng, int(np.count_nonzero(part == i))))
            return (part, sub)

        return TiltedMeasure(density, sampler, "mixture of component tilts")

    raise UnsupportedMeasure(f"no tilt available for {type(measure).__name__}")


# ------------------------------------------------------------------ series


@dataclass(frozen=True)
class SeriesConfig:
    """Truncation settings for the LePage series.

    With ``tail_tolerance == 0`` exactly ``truncation_count`` terms are used.
    Otherwise terms are added in blocks of ``truncation_count`` until the
    next term bound ``Gamma_N**(-1/alpha) * max|h|`` drops below
    ``tail_tolerance`` times the largest partial sum magnitude.
    """

    truncation_count: int = 1000
    tail_tolerance: float = 0.0
    seed: int = 0
    hard_cap: int = HARD_TRUNCATION_CAP

    def __post_init__(self):
        if self.truncation_count < 1:
            raise ValueError("truncation_count must be >= 1")
        if self.tail_tolerance < 0:
            raise ValueError("tail_tolerance must be >= 0")


def series_tail_sd(alpha: float, n_terms: int, second_moment: float = 1.0) -> float:
    """Approximate standard deviation of the dropped tail sum_{k>N}.

    ``C**(1/alpha) * sqrt(E[h^2] * N**(1-2/alpha) / (2/alpha - 1))``; used to
    report truncation bias, never to correct it.
    """
    c = stable_tail_constant(alpha) ** (1.0 / alpha)
    return c * math.sqrt(second_moment * n_terms ** (1.0 - 2.0 / alpha) / (2.0 / alpha - 1.0))


def lepage_simulate(field, box, cfg: SeriesConfig = SeriesConfig(), rng=None):
    """One approximate realization of ``{X_t : t in box}``.

    ``X_t ~ C_a^(1/a) sum_k eps_k Gamma_k^(-1/a) h_t(xi_k)`` where the xi_k are
    drawn from the tilt nu of the control measure and
    ``h_t = f_t * (dmu/dnu)^(1/a)``.  ``box`` is either an integer ``n``
    (meaning ``{0..n-1}^d``) or an ``(T, d)`` array of indices.  Returns an
    array aligned with the box rows (row-major order for an integer ``n``).

    ``rng`` defaults to ``cfg.seed``; equal seeds give bit-identical output.
    """
    from .keys import box_indices, unique_rows

    ts = box_indices(box, field.d) if np.ndim(box) == 0 else np.atleast_2d(
        np.asarray(box, dtype=np.int64))
    if field.is_zero:
        return np.zeros(len(ts))
    keys, inverse, _ = unique_rows(field.keymap.keys(ts))
    return series_on_keys(field, keys, cfg, rng)[inverse]


def series_on_keys(field, keys, cfg: SeriesConfig = SeriesConfig(), rng=None):
    """Series realization of ``X`` at each distinct key (see :func:`lepage_simulate`)."""
    alpha = field.alpha
    rng = np.random.default_rng(cfg.seed if rng is None else rng)
    if field.is_zero:
        return np.zeros(len(keys))
    evaluator = field.series_evaluator(keys)
    tilt = field.tilt
    scale = stable_tail_constant(alpha) ** (1.0 / alpha)

    total = np.zeros(len(keys))
    gamma_last = 0.0
    used = 0
    hmax = 0.0
    while True:
        block = cfg.truncation_count
        if used + block > cfg.hard_cap:
            raise TruncationCapError(
                f"adaptive truncation needs more than {cfg.hard_cap} series terms")
        arrivals = gamma_last + np.cumsum(rng.standard_exponential(block))
        signs = rng.choice(np.array([-1.0, 1.0]), size=block)
        states = tilt.sample(rng, block)
        tilt_factor = tilt.mu_over_nu(states) ** (1.0 / alpha)
        total += evaluator(states, signs * arrivals ** (-1.0 / alpha) * tilt_factor)
        hmax = max(hmax, float(np.max(tilt_factor)) * evaluator.kernel_sup)
        gamma_last = float(arrivals[-1])
        used += block
        if cfg.tail_tolerance == 0.0:
            break
        bound = gamma_last ** (-1.0 / alpha) * hmax
        if bound <= cfg.tail_tolerance * float(np.max(np.abs(total))):
            break
    log.debug("lepage: %d terms, last arrival %.3g", used, gamma_last)
    return scale * total
