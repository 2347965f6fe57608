import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stablefield.actions import AtomicAction, AtomTable, DirectSumField, FieldSpec
from stablefield.fixtures import irrational_rot, moving_avg, two_component, z3_flip
from stablefield.memory import (
    CONSERVATIVE,
    DISSIPATIVE,
    INCONCLUSIVE,
    MIXED,
    InconclusiveEvidence,
    Verdict,
    charfn_gap,
    classify,
    decompose_field,
    local_sum,
    local_sums,
    log_slope,
    recurrence_count,
    sample_states,
    state_label,
)

SQ2 = math.sqrt(2)


def rotation_hits(x, R):
    return sum(1 for i, j in itertools.product(range(-R, R + 1), repeat=2) if 0 <= x + i + j * SQ2 <= 1)


# --------------------------------------------------------------- local sums


def test_zero_kernel_local_sum():
    field = FieldSpec(1.2, AtomicAction([1, 1], [[1, 0]]), AtomTable([0.0, 0.0]))
    assert all(local_sum(field, 0, R) == 0 for R in (1, 4, 16))


@pytest.mark.parametrize("R", [1, 2, 4, 8, 16, 32])
def test_rotation_local_sum_matches_enumeration(R):
    s = ((0.5,), ())
    assert local_sum(irrational_rot(), s, R) == rotation_hits(0.5, R)


def test_rotation_local_sum_grows_linearly():
    s = ((0.5,), ())
    sums = [local_sum(irrational_rot(), s, R) for R in (16, 32, 64, 128)]
    assert log_slope([16, 32, 64, 128], sums) == pytest.approx(1.0, abs=0.1)


@pytest.mark.parametrize("R", [1, 3, 10, 50])
def test_moving_average_local_sum_is_norm(R):
    assert local_sum(moving_avg(), (0, (0, 0)), R) == 1.0


def test_batched_sums_match_scalar():
    field = z3_flip()
    states = sample_states(field, 16, 3)
    sums, _ = local_sums(field, states, (2, 5, 9))
    for i, s in enumerate(field.action.unbatch(states)):
        assert sums[i, 1] == pytest.approx(local_sum(field, s, 5))


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_partial_sums_nondecreasing(seed):
    field = two_component()
    sums, _ = local_sums(field, sample_states(field, 16, seed), (1, 2, 4, 8, 16))
    assert np.all(np.diff(sums, axis=1) >= -1e-12)


@pytest.mark.parametrize("sums,slope,label", [
    ([0, 0, 0], 0.0, INCONCLUSIVE),
    ([1, 2, 4], 1.0, CONSERVATIVE),
    ([1, 1, 1], 0.0, DISSIPATIVE),
    ([1, 1.01, 1.02], 0.02, INCONCLUSIVE),
    ([1, 1.2, 1.5], 0.2, INCONCLUSIVE),
])
def test_state_labels(sums, slope, label):
    assert state_label(sums, slope) == label


def test_log_slope_power_law():
    r = np.array([4, 8, 16, 32])
    assert log_slope(r, 3.0 * r ** 1.5) == pytest.approx(1.5, abs=1e-12)


# ------------------------------------------------------------- classify


def test_rotation_is_conservative():
    v = classify(irrational_rot(), rng=1, n_states=64)
    assert v.label == CONSERVATIVE
    assert v.mass_fraction == 1.0


def test_z3_is_conservative():
    assert classify(z3_flip(), rng=2, n_states=32).label == CONSERVATIVE


def test_moving_average_is_dissipative():
    v = classify(moving_avg(), rng=1, n_states=64)
    assert v.label == DISSIPATIVE
    assert v.mass_fraction == 0.0
    decided = np.array(v.evidence.labels) != INCONCLUSIVE
    ps = v.evidence.partial_sums[decided]
    assert np.all(ps[:, -1] == ps[:, -2]) and np.all(ps[:, -1] == 1.0)
    # undecided states lie beyond the largest box, not in a slope gap
    assert np.all(v.evidence.partial_sums[~decided, :-1] == 0)


@pytest.mark.parametrize("mixture,seed", [((1.0, 1.0), 5), ((0.3, 0.7), 6)])
def test_two_component_is_mixed(mixture, seed):
    field = two_component(mixture=mixture)
    v = classify(field, rng=seed, n_states=1024)
    expected = mixture[0] / sum(mixture)
    assert v.label == MIXED
    assert 0 < v.mass_fraction < 1
    assert abs(v.mass_fraction - expected) < 0.05


def test_finite_cycle_is_conservative():
    field = FieldSpec(1.0, AtomicAction([1, 2, 3], [[1, 2, 0]]), AtomTable([1.0, 0.0, 0.0]))
    assert classify(field, rng=0, n_states=16).label == CONSERVATIVE


def test_inconclusive_when_sums_vanish():
    # atom 1 is fixed and outside the support of f
    field = FieldSpec(1.0, AtomicAction([1, 1], [[0, 1]]), AtomTable([1.0, 0.0]))
    v = classify(field, rng=0, n_states=64)
    assert v.label == INCONCLUSIVE
    assert v.inconclusive_fraction > 0.1
    with pytest.raises(InconclusiveEvidence):
        decompose_field(field, v)


def test_radii_validation():
    with pytest.raises(ValueError):
        classify(moving_avg(), radii=(4, 2, 8), rng=0)


def test_verdict_json():
    v = classify(moving_avg(), rng=0, n_states=4)
    d = v.to_dict()
    assert d["label"] == DISSIPATIVE and len(d["per_state"]) == 4
    assert v.to_json() == v.to_json()


# ----------------------------------------------------------- recurrence


@pytest.mark.parametrize("R", [0, 1, 4, 5, 6, 12, 23])
def test_cyclic_recurrence(R):
    action = AtomicAction([1] * 5, [[1, 2, 3, 4, 0]])
    counts = recurrence_count(action, [2], R)
    assert counts[2] == 2 * (R // 5) + 1
    assert not counts.window_limited


def test_wandering_recurrence():
    n = 41
    action = AtomicAction([1] * n, [[i + 1 if i + 1 < n else -1 for i in range(n)]])
    for R in (1, 5, 20):
        assert recurrence_count(action, [20], R)[20] == 1


def test_product_cycle_recurrence():
    action = AtomicAction([1] * 6, [[(i + 3) % 6 for i in range(6)], [3 * (i // 3) + (i + 1) % 3 for i in range(6)]])
    # generator 0 swaps the halves (order 2), generator 1 rotates within a half (order 3)
    assert recurrence_count(action, [0], 6)[0] == 7 * 5


def test_recurrence_rejects_foreign_atoms():
    with pytest.raises(ValueError):
        recurrence_count(AtomicAction([1, 1], [[1, 0]]), [5], 3)


# -------------------------------------------------------------- decompose


def test_decompose_one_sided():
    diss = moving_avg()
    cons_part, diss_part = decompose_field(diss, classify(diss, rng=0, n_states=16))
    assert cons_part.is_zero and diss_part is diss
    cons = irrational_rot()
    cons_part, diss_part = decompose_field(cons, classify(cons, rng=0, n_states=16))
    assert cons_part is cons and diss_part.is_zero


def test_decompose_two_component_recovers_parts():
    field = two_component()
    v = classify(field, rng=3, n_states=256)
    cons, diss = decompose_field(field, v)
    assert [p.name for p in cons.parts] == ["irrational-rot"]
    assert [p.name for p in diss.parts] == ["moving-avg"]
    assert cons.parts[0] is field.parts[0] and diss.parts[0] is field.parts[1]


def test_decompose_needs_direct_sum_for_mixed():
    field = irrational_rot()
    fake = Verdict(MIXED, 0.5, 0.1, classify(field, rng=0, n_states=4).evidence)
    with pytest.raises(NotImplementedError):
        decompose_field(field, fake)


def test_decomposition_preserves_law():
    field = two_component()
    parts = decompose_field(field, classify(field, rng=3, n_states=256))
    assert charfn_gap(field, parts, box=2, reps=1500, seed=4, truncation=300) < 0.08


def test_zero_field_helpers():
    z = DirectSumField.zero(1.2, 2)
    assert z.is_zero and z.d == 2
