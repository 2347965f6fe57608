import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import as_int, determinantal_factors, laplace_det, polytope_mc_volume, unimodular
from stablefield.actions import AtomicAction, LatticeShiftAction, TranslationAction
from stablefield.fixtures import builtin, irrational_rot, moving_avg, z3_flip, z3_flip_lattice
from stablefield.lattice import (
    BudgetExceeded,
    HRepPolytope,
    RankDeficient,
    count_lattice,
    count_lattice_brute,
    effective_structure,
    effective_volume,
    in_lattice,
    invariant_factors,
    is_smith_form,
    kernel_lattice,
    polytope_volume,
    project_polytope,
    sandwich_check,
    smith_normal_form,
)


# ---------------------------------------------------------------------- SNF


def test_snf_identity_matrix():
    U, D, V = smith_normal_form(np.eye(3, dtype=int))
    assert (as_int(D) == np.eye(3, dtype=int)).all()


@pytest.mark.parametrize("M,expected", [
    ([[-2, 0], [1, 0], [0, 2]], (1, 2)),
    ([[2, 0], [0, 3]], (1, 6)),
    ([[4, 6], [6, 9]], (1,)),
    ([[0, 0], [0, 0]], ()),
])
def test_invariant_factor_examples(M, expected):
    assert invariant_factors(M) == expected
    assert determinantal_factors(M) == expected


def test_snf_on_500_random_matrices():
    rng = np.random.default_rng(2024)
    for _ in range(500):
        m, n = rng.integers(1, 7, size=2)
        M = rng.integers(-9, 10, size=(m, n))
        if rng.random() < 0.2:  # force rank deficiency now and then
            M[-1] = M[0] * rng.integers(-2, 3)
        U, D, V = smith_normal_form(M)
        assert (as_int(U) @ as_int(M) @ as_int(V) == as_int(D)).all()
        assert unimodular(U) and unimodular(V)
        assert is_smith_form(D)
        assert invariant_factors(M) == determinantal_factors(M)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.lists(st.integers(-30, 30), min_size=3, max_size=3), min_size=2, max_size=3))
def test_snf_property(rows):
    M = np.array(rows)
    U, D, V = smith_normal_form(M)
    assert (as_int(U) @ as_int(M) @ as_int(V) == as_int(D)).all()
    assert is_smith_form(D)


# ----------------------------------------------------------- kernel lattice


def lattice_members(B, box):
    d = B.shape[0]
    return {t for t in itertools.product(range(-box, box + 1), repeat=d) if in_lattice(B, t)}


def test_z3_kernel():
    K = kernel_lattice(z3_flip().action)
    assert K.shape == (3, 2)
    box = {t for t in itertools.product(range(-4, 5), repeat=3) if t[0] + 2 * t[1] == 0 and t[2] % 2 == 0}
    assert lattice_members(K, 4) == box
    assert invariant_factors(K) == (1, 2)


def test_z3_lattice_representation_has_same_kernel():
    a = kernel_lattice(z3_flip().action)
    b = kernel_lattice(z3_flip_lattice().action)
    assert lattice_members(a, 3) == lattice_members(b, 3)


@pytest.mark.parametrize("action", [irrational_rot().action, moving_avg().action])
def test_free_actions_have_trivial_kernel(action):
    assert kernel_lattice(action).shape[1] == 0


@settings(max_examples=40, deadline=None)
@given(st.lists(st.lists(st.integers(-3, 3), min_size=3, max_size=3), min_size=1, max_size=2),
       st.lists(st.integers(0, 1), min_size=3, max_size=3))
def test_translation_kernel_matches_brute_force(rows, parity):
    action = TranslationAction(rows, flip_parity=[parity])
    K = kernel_lattice(action)
    P = np.array(rows)
    expect = {t for t in itertools.product(range(-3, 4), repeat=3)
              if not (P @ np.array(t)).any() and np.dot(parity, t) % 2 == 0}
    assert lattice_members(K, 3) == expect


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 5), st.integers(2, 5))
def test_atomic_kernel_matches_brute_force(a, b):
    # Z^2 acting on Z/a x Z/b by independent rotations
    n = a * b
    g0 = [((i // b + 1) % a) * b + i % b for i in range(n)]
    g1 = [(i // b) * b + (i % b + 1) % b for i in range(n)]
    action = AtomicAction([1] * n, [g0, g1])
    K = kernel_lattice(action)
    expect = {t for t in itertools.product(range(-6, 7), repeat=2)
              if all(action.apply(t, s) == s for s in range(n))}
    assert lattice_members(K, 6) == expect


def test_label_permutation_kernel():
    action = LatticeShiftAction((1, 1), [[1, 2, 0]], label_perms=[[0, 1], [0, 1], [1, 0]])
    assert lattice_members(kernel_lattice(action), 3) == lattice_members(kernel_lattice(z3_flip().action), 3)


# ------------------------------------------------------ effective structure


def test_z3_effective_structure():
    s = effective_structure(z3_flip().action)
    assert (s.p, s.l, s.q) == (1, 2, 2)
    assert not s.degenerate
    # F complements K: together they generate Z^3 up to the torsion
    W = as_int(s.W)
    assert abs(laplace_det(W.tolist())) == 2
    assert len(s.coset_reps) == 2
    assert len({s.coords(x)[0] for x in s.coset_reps}) == 2


def test_rotation_effective_structure():
    s = effective_structure(irrational_rot().action)
    assert (s.p, s.l, s.q) == (2, 1, 0)


def test_degenerate_structure():
    s = effective_structure(AtomicAction([1], [[0], [0]]))
    assert (s.p, s.l) == (0, 1)
    assert s.degenerate


def test_torsion_only_structure():
    action = AtomicAction([1] * 6, [[(i + 1) % 6 for i in range(6)]])
    s = effective_structure(action)
    assert (s.p, s.l) == (0, 6)


# ---------------------------------------------------------------- polytopes


def interval(poly):
    verts = sorted(v[0] for v in poly.vertices())
    return verts[0], verts[-1]


@pytest.mark.parametrize("W,p,expected", [
    ([[1]], 1, (-1, 1)),
    ([[1, -2, 0], [0, 1, 0], [0, 0, 2]], 1, (-3, 3)),
    ([[1, 0], [0, 1]], 1, (-1, 1)),
])
def test_projection_examples(W, p, expected):
    poly = project_polytope(W, p)
    assert interval(poly) == expected
    assert poly.is_bounded() and poly.is_symmetric()


@pytest.mark.parametrize("cons,expected", [
    ([((1,), 1), ((-1,), 1)], 2),
    ([((3,), 9), ((-1,), 3)], 6),
    ([((1, 0), 1), ((-1, 0), 1), ((0, 1), 1), ((0, -1), 1)], 4),
    ([((-1, 0), 0), ((0, -1), 0), ((1, 1), 1)], Fraction(1, 2)),
    ([((1, 1, 1), 1), ((-1, 0, 0), 0), ((0, -1, 0), 0), ((0, 0, -1), 0)], Fraction(1, 6)),
])
def test_volume_examples(cons, expected):
    assert polytope_volume(HRepPolytope(cons)) == expected


def test_z3_effective_volume():
    assert effective_volume(effective_structure(z3_flip().action)) == 6


def test_rank_deficient_rejected():
    with pytest.raises(RankDeficient):
        project_polytope([[1, 2], [2, 4]], 1)


def test_text_round_trip():
    poly = project_polytope([[1, 1, 0], [0, 1, 1], [1, 0, 1]], 2)
    assert HRepPolytope.from_text(poly.to_text()).constraints == poly.constraints


@pytest.mark.parametrize("seed", range(6))
def test_volume_against_monte_carlo(seed):
    rng = np.random.default_rng(seed)
    while True:
        W = rng.integers(-2, 3, size=(3, 3))
        if round(abs(np.linalg.det(W))) > 0:
            break
    poly = project_polytope(W, 2)
    assert polytope_mc_volume(poly, rng) == pytest.approx(float(polytope_volume(poly)), rel=0.01)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(1, 6), min_size=2, max_size=3), st.lists(st.integers(1, 6), min_size=3, max_size=3))
def test_box_volume_property(lows, highs):
    p = len(lows)
    cons = []
    for i in range(p):
        e = [0] * p
        e[i] = 1
        cons.append((tuple(e), highs[i]))
        cons.append((tuple(-v for v in e), lows[i]))
    assert polytope_volume(HRepPolytope(cons)) == math.prod(lows[i] + highs[i] for i in range(p))


# ----------------------------------------------------------------- counting


def test_trivial_kernel_counts():
    s = effective_structure(AtomicAction([1], [[-1]]))
    s1 = effective_structure(moving_avg(d=1).action)
    for n in (0, 1, 5, 40):
        assert count_lattice(s1, n).H == 2 * n + 1
    assert count_lattice(s1, 0).H == 1
    assert s.p == 1


@pytest.mark.parametrize("n", [0, 1, 2, 5, 9])
def test_z3_counts_match_brute_force(n):
    s = effective_structure(z3_flip().action)
    assert count_lattice(s, n) == count_lattice_brute(s, n)


def test_z3_count_ratio():
    s = effective_structure(z3_flip().action)
    ratio = count_lattice(s, 500).H / 500
    assert abs(ratio - 12) / 12 < 0.02


def test_counting_budget():
    with pytest.raises(BudgetExceeded):
        count_lattice(effective_structure(z3_flip().action), 10_000, budget=1000)


def test_sandwich_small():
    report = sandwich_check(effective_structure(z3_flip().action), n_max=40)
    assert report.ok and report.c >= 1 and report.d_const >= 1


def test_free_part_meets_kernel_trivially():
    s = effective_structure(z3_flip().action)
    FK = np.hstack([np.array(s.F_basis.tolist(), dtype=float), np.array(s.K_basis.tolist(), dtype=float)])
    assert np.linalg.matrix_rank(FK) == s.p + s.q == s.d


def test_cosets_partition_test_box():
    s = effective_structure(z3_flip().action)
    K = s.K_basis
    box = np.array(list(itertools.product(range(-20, 21), repeat=3)), dtype=np.int64)
    keys = s.keymap().keys(box)
    nt = len(s.torsion_factors)
    assert len({tuple(k[:nt]) for k in keys}) == s.l  # every class occurs
    rng = np.random.default_rng(8)
    for i, j in rng.integers(0, len(box), size=(300, 2)):
        same = bool((keys[i] == keys[j]).all())
        assert same == in_lattice(K, box[i] - box[j])
    # same key exactly when the difference lies in K, also for near neighbours
    for i in rng.integers(0, len(box), size=100):
        for k in K.T.tolist():
            j = box[i] + np.array([int(v) for v in k])
            assert (s.keymap().keys(j.reshape(1, -1))[0] == keys[i]).all()


def test_per_coset_counts_share_limit():
    s = effective_structure(z3_flip().action)
    ratios = np.array(list(count_lattice(s, 500).per_coset.values())) / 500
    assert ratios.max() / ratios.min() - 1 < 0.03
    assert abs(ratios.mean() - 6) / 6 < 0.03


@pytest.mark.parametrize("name", ["z3-flip", "irrational-rot", "moving-avg"])
def test_sandwich_to_200(name):
    report = sandwich_check(effective_structure(builtin(name).action), n_max=200)
    assert report.ok
