import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats
from scipy.special import gammaln

from stablefield.actions import (
    AtomicAction,
    AtomTable,
    CoordinateProjection,
    CoordinateShiftAction,
    FieldSpec,
)
from stablefield.fixtures import (
    gauss_iid,
    irrational_rot,
    moving_avg,
    pareto_iid,
    two_component,
    z3_flip,
    z3_flip_lattice,
)
from stablefield.lattice import effective_structure, effective_volume
from stablefield.maxima import (
    EXACT,
    MONTE_CARLO,
    BnCurve,
    UnsupportedExact,
    bn_alpha_exact,
    bn_curve,
    bn_exact,
    bn_exact_curve,
    bn_monte_carlo,
    check_surrogate_condition,
    effective_rate_constant,
    frechet_gof,
    frechet_sample,
    growth_exponent,
    k_x,
    k_x_field,
    limit_scale,
    simulate_maxima,
    tightness_scaling,
)
from stablefield.measures import constant_rho
from stablefield.quadnum import SQRT2, QuadNum
from stablefield.stable import SeriesConfig, sample_sas, stable_tail_constant


def pareto_max_moment(N, theta, alpha):
    """E[max of N i.i.d. Pareto(theta)]^alpha in closed form."""
    r = alpha / theta
    return math.exp(gammaln(N + 1) + gammaln(1 - r) - gammaln(N + 1 - r))


# ------------------------------------------------------------------ exact b_n


def test_rotation_b1():
    assert bn_exact(irrational_rot(), 1) == 1.0


@pytest.mark.parametrize("alpha", [0.8, 1.2, 1.6])
def test_rotation_exact_values(alpha):
    field = irrational_rot(alpha)
    curve = bn_exact_curve(field, range(2, 41))
    for n, q, v in zip(curve.n_grid, curve.exact_alpha, curve.values):
        expected = 1 + (n - 1) * (1 + SQRT2)
        assert q == expected
        assert v ** alpha == pytest.approx(float(expected), rel=1e-12)


@pytest.mark.parametrize("n", [2, 3, 7, 20, 60])
def test_z3_exact_values(n):
    assert bn_alpha_exact(z3_flip(), n) == QuadNum(2 * (3 * n - 2))


def test_representation_invariance():
    grid = [1, 2, 5, 17, 40]
    a = bn_exact_curve(z3_flip(), grid).values
    b = bn_exact_curve(z3_flip_lattice(), grid).values
    assert np.allclose(a, b, rtol=1e-9, atol=0)


def test_rate_constant_consistency():
    """b_n^alpha / n -> 6 = V l 2^-p int g*^alpha, forcing int g*^alpha = 1."""
    field = z3_flip()
    s = effective_structure(field.action)
    vol = effective_volume(s)
    assert vol * s.l / 2 ** s.p == 6
    n = 400
    ratio = bn_exact(field, n) ** field.alpha / n
    assert ratio == pytest.approx(6 * (3 * n - 2) / (3 * n), rel=1e-12)
    g_integral = 1.0
    a = effective_rate_constant(vol, s.l, s.p, g_integral, field.alpha)
    assert a ** field.alpha == pytest.approx(6.0)


def test_exact_curve_monotone():
    for field in (irrational_rot(), z3_flip(), moving_avg()):
        v = bn_exact_curve(field, range(1, 30)).values
        assert np.all(np.diff(v) >= 0)


def test_moving_average_exact():
    field = moving_avg(1.2, d=2)
    for n in (1, 3, 8):
        assert bn_exact(field, n) ** 1.2 == pytest.approx(n ** 2)


def test_direct_sum_adds_alpha_powers():
    field = two_component()
    n = 5
    a = bn_exact(field.parts[0], n) ** field.alpha + bn_exact(field.parts[1], n) ** field.alpha
    assert bn_exact(field, n) ** field.alpha == pytest.approx(a)


def test_no_exact_for_coordinate_fields():
    with pytest.raises(UnsupportedExact):
        bn_exact(gauss_iid(), 4)
    assert bn_curve(gauss_iid(), [1, 2], replications=1000).method == MONTE_CARLO


def test_exact_matches_monte_carlo_on_rotation():
    field = irrational_rot()
    est, se = bn_monte_carlo(field, 6, 200_000, rng=1)
    assert abs(est - bn_exact(field, 6)) < 4 * se


# ------------------------------------------------------------ Monte Carlo b_n


def test_gaussian_b1():
    est, se = bn_monte_carlo(gauss_iid(1.0, 1), 1, 100_000, rng=3)
    assert abs(est - math.sqrt(2 / math.pi)) < 3 * se


def test_constant_kernel_gives_one():
    field = FieldSpec(1.3, CoordinateShiftAction(constant_rho(1.0), 2), CoordinateProjection())
    for n in (1, 4, 16):
        est, se = bn_monte_carlo(field, n, 1000, rng=0)
        assert est == pytest.approx(1.0) and se == 0


@pytest.mark.parametrize("n", [2, 8, 32])
def test_pareto_against_closed_form(n):
    field = pareto_iid(1.5, 3.0, 2)
    est, se = bn_monte_carlo(field, n, 100_000, rng=n)
    exact = pareto_max_moment(n ** 2, 3.0, 1.5) ** (1 / 1.5)
    assert abs(est - exact) < 4 * se


def test_gaussian_max_sampler_law():
    """max of N |N(0,1)| via inversion agrees with brute force."""
    field = gauss_iid(1.0, 1)
    n = 20
    est, se = bn_monte_carlo(field, n, 50_000, rng=5)
    brute = np.abs(np.random.default_rng(6).standard_normal((50_000, n))).max(axis=1).mean()
    assert abs(est - brute) < 5 * se


# --------------------------------------------------------------------- fits


def test_growth_exponent_exact_power():
    n = np.array([8, 16, 32, 64, 128])
    fit = growth_exponent(BnCurve(n, n ** (2 / 1.5)))
    assert fit.slope == pytest.approx(4 / 3, abs=1e-9)
    assert fit.residual < 1e-9


def test_growth_exponent_needs_two_octaves():
    with pytest.raises(ValueError):
        growth_exponent(BnCurve([8, 10, 12, 14], [1, 2, 3, 4]))


def test_rotation_slope():
    curve = bn_exact_curve(irrational_rot(1.2), [16, 32, 64, 128, 256, 512, 1024])
    assert abs(growth_exponent(curve).slope - 1 / 1.2) < 0.02


def test_gaussian_slope_is_small_and_concave():
    curve = bn_curve(gauss_iid(), [16, 64, 256, 1024, 4096], replications=20_000, seed=1)
    fit = growth_exponent(curve)
    assert 0 < fit.slope < 0.15
    local = np.diff(np.log(curve.values)) / np.diff(np.log(curve.n_grid))
    assert local[0] > local[-1]


@pytest.mark.parametrize("field,d,expected", [
    (irrational_rot(1.2), 2, False),
    (moving_avg(1.2, 2), 2, True),
])
def test_surrogate_condition_exact(field, d, expected):
    curve = bn_exact_curve(field, [16, 32, 64, 128, 256])
    assert check_surrogate_condition(curve, d, field.alpha) is expected


def test_surrogate_condition_pareto_boundary():
    curve = bn_curve(pareto_iid(), [8, 16, 32, 64, 128, 256], replications=100_000, seed=2)
    assert check_surrogate_condition(curve, 2, 1.5) is False


@pytest.mark.parametrize("alpha,n,expected", [
    (0.5, 10, 1.0), (0.5, 10**6, 1.0),
    (1.0, 10, 1.0), (1.0, 10**8, math.log(math.log(10**8))),
    (1.5, math.e ** 8, 2.0),
])
def test_tightness_scaling(alpha, n, expected):
    assert tightness_scaling(alpha, n) == pytest.approx(expected)


# ----------------------------------------------------------------------- K_X


@pytest.mark.parametrize("weights,sups,alpha,expected", [
    ((1,), (1,), 1.2, 1.0),
    ((1,), (2,), 1.0, 2.0),
    ((1, 3), (1, 2), 1.0, 7.0),
])
def test_k_x_examples(weights, sups, alpha, expected):
    assert k_x(weights, sups, alpha) == pytest.approx(expected)


def test_k_x_field():
    field = moving_avg(1.0, 2, support={(0, 0): 2.0, (1, 0): 1.0})
    assert k_x_field(field) == pytest.approx(2.0)


def test_k_x_rejects_infinite_sup():
    with pytest.raises(ValueError):
        k_x((1,), (np.inf,), 1.0)


# ------------------------------------------------------------------ Frechet


def test_frechet_inversion_sample():
    x = frechet_sample(1.3, 10_000, rng=1)
    assert frechet_gof(x, 1.3) < 0.02
    assert stats.kstest(x, stats.invweibull(1.3).cdf).statistic < 0.02


def test_frechet_degenerate_sample():
    assert frechet_gof(np.ones(500), 1.2) >= 0.5


def test_frechet_scale_equivariance():
    x = frechet_sample(1.2, 2000, rng=2)
    assert frechet_gof(2 * x, 1.2, 2.0) == pytest.approx(frechet_gof(x, 1.2, 1.0), abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(c=st.floats(0.01, 100.0), scale=st.floats(0.1, 10.0), seed=st.integers(0, 1000))
def test_frechet_gof_rescaling_invariance(c, scale, seed):
    x = frechet_sample(0.9, 200, rng=seed) * scale
    assert frechet_gof(c * x, 0.9, c * scale) == pytest.approx(frechet_gof(x, 0.9, scale), abs=1e-9)


def test_frechet_input_validation():
    with pytest.raises(ValueError):
        frechet_gof(np.ones(10), 1.0)
    with pytest.raises(ValueError):
        frechet_gof(-np.ones(200), 1.0)


def test_limit_scale():
    assert limit_scale(2.0, 1.0) == pytest.approx(2.0 * 2 / math.pi)


# ---------------------------------------------------------------- simulation


def test_zero_kernel_maxima():
    field = FieldSpec(1.2, AtomicAction([1], [[0]]), AtomTable([0.0]))
    rep = simulate_maxima(field, 3, 50, seed=1)
    assert np.all(rep.samples == 0)


def test_single_atom_maxima_is_folded_stable():
    field = FieldSpec(1.5, AtomicAction([1], [[0]]), AtomTable([1.0]))
    rep = simulate_maxima(field, 1, 10_000, SeriesConfig(2000), seed=3)
    ref = np.abs(sample_sas(1.5, 1.0, rng=4, size=200_000))
    assert stats.ks_2samp(rep.samples, ref).statistic < 0.02


def test_moving_average_maxima_are_iid_maxima():
    alpha, n = 1.2, 4
    rep = simulate_maxima(moving_avg(alpha, 2), n, 2000, SeriesConfig(2000), seed=5)
    rng = np.random.default_rng(6)
    ref = np.abs(sample_sas(alpha, 1.0, rng, (20_000, n * n))).max(axis=1)
    assert stats.ks_2samp(rep.samples, ref).statistic < 0.05
    # M_n / n^{d/alpha} already sits near its Frechet limit with scale C_alpha^{1/alpha}
    scale = stable_tail_constant(alpha) ** (1 / alpha)
    assert frechet_gof(ref / n ** (2 / alpha), alpha, scale) < 0.05


def test_simulation_is_deterministic_and_thread_invariant():
    field = irrational_rot()
    cfg = SeriesConfig(200)
    a = simulate_maxima(field, 8, 40, cfg, seed=7)
    b = simulate_maxima(field, 8, 40, cfg, seed=7, workers=4)
    assert a.samples.tobytes() == b.samples.tobytes()
    assert a.to_json() == b.to_json()


def test_report_serialization():
    rep = simulate_maxima(irrational_rot(), 4, 120, SeriesConfig(100), seed=1, normalization=2.0)
    rep.evaluate(1.2, 1.0)
    assert rep.ks_statistic is not None and rep.target == "Frechet"
    assert rep.to_csv().splitlines()[0] == "replication,n,max_abs,max_signed"
    assert np.all(rep.samples >= rep.signed_samples)
    rep.evaluate(1.2, None)
    assert rep.target == "DegenerateZero"


def test_curve_csv_and_plot_data():
    curve = bn_exact_curve(irrational_rot(), [1, 2, 4])
    lines = curve.to_csv().splitlines()
    assert lines[0] == "n,b_n,method,stderr"
    assert lines[1].startswith("1,1.0," + EXACT)
    assert curve.plot_data().splitlines()[1] == "0.0,0.0"
