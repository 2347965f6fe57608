"""Conservative/dissipative classification from orbit sums.

A field is conservative at ``s`` when ``sum_t |f_t(s)|^alpha`` diverges and
dissipative where it converges.  Sums over growing boxes are computed
exactly on sampled states and the verdict is read off their log-log slope.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import measures as M
from .actions import DirectSumField, FieldSpec
from .keys import box_keys
from .series import _take

DEFAULT_RADII = (4, 8, 16, 32, 64, 128)
DIVERGENT_SLOPE = 0.3
FINITE_SLOPE = 0.05
STABLE_TOL = 1e-12
INCONCLUSIVE_TOLERANCE = 0.1

CONSERVATIVE = "Conservative"
DISSIPATIVE = "Dissipative"
MIXED = "Mixed"
INCONCLUSIVE = "Inconclusive"

_CHUNK = 4_000_000


class InconclusiveEvidence(ValueError):
    pass


class WindowLimited(float):
    """A float carrying a ``window_limited`` flag."""

    window_limited = False


def _box_sums(field: FieldSpec, states, R: int):
    """``sum_{|t| <= R} |f_t(s)|^alpha`` per state, plus a window-escape flag."""
    keys, counts = box_keys(field.keymap, -R, R)
    n = field.state_count(states)
    out = np.zeros(n)
    step = max(1, _CHUNK // max(1, len(keys)))
    escaped = False
    for start in range(0, n, step):
        sel = np.arange(start, min(n, start + step))
        vals = field.on_keys(_take(field, states, sel), keys)
        if field.action.window_limited:
            w = field.action.keymap.width
            moved, _ = field.action.apply_keys(_take(field, states, sel), keys[:, :w])
            escaped |= bool(np.any(moved == field.action.n_atoms))
        out[sel] = (np.abs(vals) ** field.alpha) @ counts
    return out, escaped


def local_sums(field, states, radii=DEFAULT_RADII):
    """Partial orbit sums for a batch of states: array of shape (N, len(radii)).

    Returns ``(sums, window_limited)``.
    """
    radii = [int(r) for r in radii]
    if isinstance(field, DirectSumField):
        part, subs = states
        out = np.zeros((len(part), len(radii)))
        limited = False
        for i, p in enumerate(field.parts):
            sel = np.flatnonzero(part == i)
            if len(sel):
                out[sel], lim = local_sums(p, subs[i], radii)
                limited |= lim
        return out, limited
    cols, limited = [], False
    for R in radii:
        col, esc = _box_sums(field, states, R)
        cols.append(col)
        limited |= esc
    return np.column_stack(cols) if cols else np.zeros((field.state_count(states), 0)), limited


def local_sum(field, s, R: int) -> float:
    """Exact ``sum_{|t|_inf <= R} |f_t(s)|^alpha`` for a single state.

    The result carries ``window_limited`` when an atomic orbit escaped.
    """
    if isinstance(field, DirectSumField):
        i, sub = s
        return local_sum(field.parts[int(i)], sub, R)
    sums, limited = local_sums(field, field.action.batch([s]), [R])
    out = WindowLimited(sums[0, 0])
    out.window_limited = limited
    return out


def log_slope(radii, sums) -> float:
    """Least-squares slope of ``log sum`` against ``log R`` over the positive tail."""
    radii = np.asarray(radii, dtype=float)
    sums = np.asarray(sums, dtype=float)
    pos = np.flatnonzero(sums > 0)
    if len(pos) < 2:
        return 0.0
    tail = np.arange(pos[0], len(sums))
    return float(np.polyfit(np.log(radii[tail]), np.log(sums[tail]), 1)[0])


def state_label(sums, slope) -> str:
    sums = np.asarray(sums, dtype=float)
    if not np.any(sums > 0):
        return INCONCLUSIVE
    if slope > DIVERGENT_SLOPE:
        return CONSERVATIVE
    if slope < FINITE_SLOPE and abs(sums[-1] - sums[-2]) <= STABLE_TOL * max(1.0, abs(sums[-1])):
        return DISSIPATIVE
    return INCONCLUSIVE


@dataclass
class DivergenceProfile:
    radii: tuple
    partial_sums: np.ndarray
    slopes: np.ndarray
    labels: list
    window_limited: bool = False

    def to_dict(self) -> dict:
        return {
            "radii": list(self.radii),
            "window_limited": self.window_limited,
            "per_state": [
                {"state_id": i, "sums": [float(v) for v in row], "slope": float(sl), "label": lab}
                for i, (row, sl, lab) in enumerate(zip(self.partial_sums, self.slopes, self.labels))
            ],
        }


@dataclass
class Verdict:
    label: str
    conservative_mass_fraction: float
    stderr: float
    evidence: DivergenceProfile
    parts: np.ndarray | None = field(default=None, repr=False)
    inconclusive_fraction: float = 0.0

    @property
    def mass_fraction(self) -> float:
        return self.conservative_mass_fraction

    def to_dict(self) -> dict:
        ev = self.evidence.to_dict()
        return {
            "label": self.label,
            "mass_fraction": self.conservative_mass_fraction,
            "stderr": self.stderr,
            "inconclusive_fraction": self.inconclusive_fraction,
            "window_limited": ev["window_limited"],
            "radii": ev["radii"],
            "per_state": ev["per_state"],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _finite_measure(field) -> bool:
    if isinstance(field, DirectSumField):
        return False
    return isinstance(field.action.measure, (M.Atoms, M.ProductProbability))


def sample_states(field, n: int, rng):
    """``n`` states from the tilted probability measure."""
    return field.tilt.sample(np.random.default_rng(rng), int(n))


def classify(field, states=None, radii=DEFAULT_RADII, rng=None, n_states: int = 64,
             inconclusive_tolerance: float = INCONCLUSIVE_TOLERANCE) -> Verdict:
    """Classify the action behind ``field`` on sampled states.

    States whose sums never leave zero (their orbit did not reach the kernel
    support within the largest box) or fall in the slope gap are
    inconclusive.  The aggregate is Inconclusive when they exceed
    ``inconclusive_tolerance`` of the sample; otherwise the decided states
    vote.
    """
    radii = tuple(int(r) for r in radii)
    if len(radii) < 3 or any(b <= a for a, b in zip(radii, radii[1:])) or radii[0] < 1:
        raise ValueError("radii must be >= 3 strictly increasing positive integers")
    if states is None:
        states = sample_states(field, n_states, rng)
    sums, limited = local_sums(field, states, radii)
    slopes = np.array([log_slope(radii, row) for row in sums])
    labels = [state_label(row, sl) for row, sl in zip(sums, slopes)]
    profile = DivergenceProfile(radii, sums, slopes, labels, limited)
    parts = np.asarray(states[0]) if isinstance(field, DirectSumField) else None

    n = len(labels)
    lab = np.array(labels)
    decided = lab != INCONCLUSIVE
    inconclusive = 1.0 - decided.mean() if n else 1.0
    if _finite_measure(field):
        w = field.tilt.mu_over_nu(states)
    else:
        w = np.ones(n)
    cons = (lab == CONSERVATIVE).astype(float)
    if decided.any():
        wd = w[decided] / w[decided].sum()
        frac = float(np.clip(wd @ cons[decided], 0.0, 1.0))
        if cons[decided].all() or not cons[decided].any():
            frac = float(cons[decided][0])
        n_eff = 1.0 / float(np.sum(wd ** 2))
        stderr = float(np.sqrt(frac * (1 - frac) / n_eff))
    else:
        frac, stderr = float("nan"), float("nan")

    if not decided.any() or inconclusive > inconclusive_tolerance:
        label = INCONCLUSIVE
    elif not (lab == DISSIPATIVE).any():
        label = CONSERVATIVE
    elif not (lab == CONSERVATIVE).any():
        label = DISSIPATIVE
    else:
        label = MIXED
    return Verdict(label, frac, stderr, profile, parts, float(inconclusive))


# ---------------------------------------------------------------- recurrence


class RecurrenceCounts(dict):
    window_limited = False


def recurrence_count(action, atoms, R: int) -> RecurrenceCounts:
    """``sum_{|t|_inf <= R} 1_A(phi_t s)`` for each atom ``s`` of ``A``."""
    atoms = sorted({int(a) for a in atoms})
    if any(a < 0 or a >= action.n_atoms for a in atoms):
        raise ValueError("atoms must lie in the window")
    keys, counts = box_keys(action.keymap, -int(R), int(R))
    moved, _ = action.apply_keys(np.array(atoms, dtype=np.int64), keys)
    member = np.isin(moved, atoms)
    out = RecurrenceCounts({a: int(member[i].astype(np.int64) @ counts) for i, a in enumerate(atoms)})
    out.window_limited = bool(np.any(moved == action.n_atoms))
    return out


# -------------------------------------------------------------- decomposition


def decompose_field(field, verdict: Verdict, inconclusive_tolerance: float = INCONCLUSIVE_TOLERANCE):
    """Split into ``(conservative part, dissipative part)``.

    Mixed verdicts are split along the components of a direct sum; each
    component must be labelled unanimously by its decided states.
    """
    if verdict.label == INCONCLUSIVE or verdict.inconclusive_fraction > inconclusive_tolerance:
        raise InconclusiveEvidence("evidence is inconclusive on a non-negligible fraction of states")
    zero = DirectSumField.zero(field.alpha, field.d)
    if verdict.label == DISSIPATIVE:
        return zero, field
    if verdict.label == CONSERVATIVE:
        return field, zero
    if not isinstance(field, DirectSumField) or verdict.parts is None:
        raise NotImplementedError("mixed splits are supported for direct-sum state spaces")
    labels = np.array(verdict.evidence.labels)
    cons, diss, cw, dw = [], [], [], []
    for i, p in enumerate(field.parts):
        mine = labels[(verdict.parts == i) & (labels != INCONCLUSIVE)]
        kinds = set(mine.tolist())
        if len(kinds) > 1:
            raise InconclusiveEvidence(f"component {i} has both divergent and finite states")
        if not kinds:
            raise InconclusiveEvidence(f"component {i} has no decided states")
        if kinds == {CONSERVATIVE}:
            cons.append(p)
            cw.append(field.mixture[i])
        else:
            diss.append(p)
            dw.append(field.mixture[i])

    def build(parts, w, name):
        if not parts:
            return DirectSumField.zero(field.alpha, field.d, name)
        return DirectSumField(parts, mixture=w, name=name)

    return build(cons, cw, "conservative"), build(diss, dw, "dissipative")


def charfn_gap(field, parts, thetas=(0.25, 0.5, 1.0, 2.0), box: int = 3, reps: int = 2000,
               seed: int = 0, truncation: int = 500) -> float:
    """Largest gap between the empirical characteristic functions of a fixed
    linear functional of ``field`` and of the sum of independently simulated
    ``parts`` on the box ``{0..box-1}^d``."""
    from .stable import SeriesConfig, lepage_simulate

    cfg = SeriesConfig(truncation_count=truncation, seed=seed)
    ss = np.random.SeedSequence(seed)
    weights = np.random.default_rng(ss.spawn(1)[0]).normal(size=box ** field.d)

    def draws(f, key):
        if f.is_zero:
            return np.zeros(reps)
        streams = np.random.SeedSequence([seed, key]).spawn(reps)
        return np.array([weights @ lepage_simulate(f, box, cfg, np.random.default_rng(s))
                         for s in streams])

    whole = draws(field, 1)
    split = sum(draws(p, 2 + i) for i, p in enumerate(parts))
    gaps = [abs(np.mean(np.exp(1j * th * whole)) - np.mean(np.exp(1j * th * split))) for th in thetas]
    return float(max(gaps))
