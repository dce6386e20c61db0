import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.stats import norm

from bftqcd import analytics as A
from bftqcd import _rng
from bftqcd.signal_models import DiscreteModel

E = math.e


# closed forms ---------------------------------------------------------------

def test_centralized_closed_forms():
    assert A.arl_centralized_closed_form(0.0) == 0.0
    assert A.delay_centralized_closed_form(0.0) == 0.0
    assert A.arl_centralized_closed_form(5, 9, 1) == pytest.approx(31.65, abs=0.005)
    assert A.arl_centralized_closed_form(5, 1, 1) == pytest.approx(284.8, abs=0.05)
    assert A.delay_centralized_closed_form(5, 9, 1) == pytest.approx(0.8904, abs=5e-5)


def test_honest_log_scaling():
    ratios = [A.delay_centralized_closed_form(v, 9) / math.log(A.arl_centralized_closed_form(v, 9))
              for v in (10, 40, 160)]
    assert abs(ratios[-1] - 2 / 9) < abs(ratios[0] - 2 / 9)
    assert ratios[-1] == pytest.approx(2 / 9, rel=0.02)


@given(st.floats(1.01, 1e8), st.integers(1, 20), st.floats(0.3, 3))
def test_calibration_inverts_closed_form(arl, n, mu):
    nu = A.calibrate_centralized_threshold(arl, n, mu)
    assert A.arl_centralized_closed_form(nu, n, mu) == pytest.approx(arl, rel=1e-9)


def test_prop1_values():
    b = A.prop1_bounds(5, 9, 1)
    assert b.arl_upper == pytest.approx(0.8904, abs=5e-5)
    assert b.delay_lower == pytest.approx(0.3205, abs=5e-5)
    z = A.prop1_bounds(0, 9, 1)
    assert z.arl_upper == 0 and z.delay_lower == 0
    with pytest.raises(ValueError):
        A.prop1_bounds(5, 1)


def test_prop1_gap_grows():
    r = [A.prop1_bounds(v, 9).arl_upper / A.arl_centralized_closed_form(v, 9) for v in (2, 5, 10, 20)]
    assert all(a > b for a, b in zip(r, r[1:])) and r[-1] < 1e-6


def test_reflected_drift_formula_matches_centralized():
    # centralized statistic has drift N mu^2/2 and variance N mu^2 after the change
    assert A.reflected_drift_mean_time(4.0, 4.5, 9.0) == pytest.approx(
        A.delay_centralized_closed_form(4.0, 9))


# survival series ----------------------------------------------------------------

def test_known_roots_at_h4():
    p = A.solve_transcendental_roots(4.0, 5)
    assert p.eta == pytest.approx(1.915, abs=5e-4)
    assert p.phi[0] == pytest.approx(2.289, abs=5e-4)


@pytest.mark.parametrize("h", [2.1, 3.0, 4.0, 6.0, 12.0])
def test_roots_bracketed_and_accurate(h):
    p = A.solve_transcendental_roots(h, 200)
    k = np.arange(1, 201)
    assert np.all((p.phi > (2 * k - 1) * np.pi / 2) & (p.phi < k * np.pi))
    assert np.all((p.theta > k * np.pi) & (p.theta < (2 * k + 1) * np.pi / 2))
    assert np.all(np.diff(p.phi) > 0) and np.all(np.diff(p.theta) > 0)
    rp, rt, re = A.root_residuals(p)
    assert abs(re) < 1e-10
    # the tan form loses digits near its poles; the first roots meet 1e-10 absolutely
    assert np.abs(rp[:20]).max() < 1e-10 and np.abs(rt[:20]).max() < 1e-10
    assert np.all(np.abs(rp) / (1 + 2 * p.phi / h) < 1e-10)
    assert np.all(np.abs(rt) / (1 + 2 * p.theta / h) < 1e-10)


@pytest.mark.parametrize("h", [1.0, 2.0])
def test_no_eta_root_below_two(h):
    with pytest.raises(A.RootExistenceError):
        A.solve_transcendental_roots(h, 4)


@pytest.mark.parametrize("h", [3.0, 4.0, 6.0, 9.0])
def test_series_integrals_match_closed_forms(h):
    p = A.survival_params(h)
    assert A.integrated_p0(p) == pytest.approx(A.delay_centralized_closed_form(h), rel=1e-6)
    assert A.integrated_pinf(p) == pytest.approx(A.arl_centralized_closed_form(h), rel=1e-6)


@pytest.mark.parametrize("h", [3.0, 5.0])
def test_survival_monotone_and_bounded(h):
    p = A.survival_params(h)
    t = np.linspace(h * h / 60, 50 * A.delay_centralized_closed_form(h), 400)
    for s in (A.survival_p0(t, p), A.survival_pinf(t, p)):
        assert np.all((s >= 0) & (s <= 1)) and np.all(np.diff(s) <= 1e-12)


def test_pinf_tail_slope():
    p = A.survival_params(4.0)
    t1, t2 = 300.0, 600.0
    slope = (math.log(A.survival_pinf(t2, p)) - math.log(A.survival_pinf(t1, p))) / (t2 - t1)
    assert slope == pytest.approx(-1 / (8 * math.cosh(p.eta) ** 2), rel=1e-6)


def test_truncation_error_reported():
    p = A.solve_transcendental_roots(4.0, 4)
    with pytest.raises(A.SeriesTruncationError):
        A.survival_p0(1e-3, p)
    val, err = A.survival_p0(5.0, A.survival_params(4.0), return_error=True)
    assert 0 <= err < 1e-8 * val
    with pytest.raises(ValueError):
        A.survival_pinf(0.0, p)


def test_order_statistic_mean_of_one_is_plain_mean():
    p = A.survival_params(4.0)
    assert A.expected_order_statistic(p, 1, 1, "p0") == pytest.approx(A.integrated_p0(p), rel=1e-6)
    assert A.expected_order_statistic(p, 1, 1, "pinf") == pytest.approx(A.integrated_pinf(p), rel=1e-6)


@pytest.mark.parametrize("h", [3.0, 4.0, 6.0])
def test_second_alarm_worst_cases_respect_bounds(h):
    p = A.survival_params(h)
    assert A.expected_order_statistic(p, 2, 8, "p0") <= A.theorem1_delay_upper(h)
    assert A.expected_order_statistic(p, 1, 8, "pinf") >= 0.8 * A.theorem1_arl_lower(h, 9)


# continuous bounds ----------------------------------------------------------------

def test_theorem_bound_values():
    assert A.theorem1_delay_bound(1000, 9) == pytest.approx(29.18, abs=0.005)
    assert A.theorem2_delay_bound(1000, 9) == pytest.approx(9.34, abs=0.005)
    with pytest.raises(ValueError):
        A.theorem1_delay_bound(1.0, 9)


@given(st.floats(2.0, 1e9), st.integers(3, 30), st.floats(0.3, 3))
def test_theorem_slopes(arl, n, mu):
    d1 = A.theorem1_delay_bound(E * arl, n, mu) - A.theorem1_delay_bound(arl, n, mu)
    d2 = A.theorem2_delay_bound(E * arl, n, mu) - A.theorem2_delay_bound(arl, n, mu)
    assert d1 == pytest.approx(4 / mu ** 2, rel=1e-6)
    assert d2 == pytest.approx(12 / (mu ** 2 * n), rel=1e-6)
    assert d1 / d2 == pytest.approx(n / 3, rel=1e-6)


def test_theorem1_concave():
    a = np.geomspace(2, 1e6, 50)
    b = np.array([A.theorem1_delay_bound(x, 9) for x in a])
    assert np.all(np.diff(b) > 0) and np.all(np.diff(np.diff(b) / np.diff(a)) < 0)


# discrete -------------------------------------------------------------------

def _siegmund_nu(x):
    n = np.arange(1, 10 ** 6, dtype=float)
    return 2 / x ** 2 * math.exp(-2 * np.sum(norm.cdf(-x * np.sqrt(n) / 2) / n))


def _spitzer_min(x):
    n = np.arange(1, 10 ** 6, dtype=float)
    m, s = n * x * x / 2, np.sqrt(n) * x
    return -np.sum((s * norm.pdf(m / s) - m * norm.cdf(-m / s)) / n)


def _ladder_kappa(x, n=200000):
    rng = _rng.stream(77, 0, _rng.AUX)
    s = np.zeros(n)
    out = np.empty(n)
    alive = np.arange(n)
    while alive.size:
        s[alive] += rng.normal(x * x / 2, x, alive.size)
        up = s[alive] > 0
        out[alive[up]] = s[alive[up]]
        alive = alive[~up]
    return np.mean(out ** 2) / (2 * np.mean(out))


@pytest.fixture(scope="module")
def scope1_constants():
    return A.estimate_renewal_constants(DiscreteModel(), 1, 10 ** 5, seed=3)


def test_renewal_constants_scope1(scope1_constants):
    c = scope1_constants
    assert c.converged
    assert 0 < c.r <= 1 and c.kappa >= 0 and c.beta <= 0
    for val, se in ((c.kappa, c.kappa_se), (c.beta, c.beta_se), (c.r, c.r_se)):
        assert se < 0.02 * abs(val)
    assert c.r == pytest.approx(_siegmund_nu(1.0), abs=3 * c.r_se + 1e-3)
    assert c.beta == pytest.approx(_spitzer_min(1.0), abs=3 * c.beta_se + 2e-3)
    assert c.kappa == pytest.approx(_ladder_kappa(1.0), abs=3 * c.kappa_se + 5e-3)


def test_renewal_constants_scope3():
    c = A.estimate_renewal_constants(DiscreteModel(), 3, 20000, seed=4)
    x = math.sqrt(3)
    assert c.r == pytest.approx(_siegmund_nu(x), abs=3 * c.r_se + 2e-3)
    assert c.beta == pytest.approx(_spitzer_min(x), abs=3 * c.beta_se + 3e-3)


def test_nonconvergence_warns():
    with pytest.warns(RuntimeWarning):
        c = A.estimate_renewal_constants(DiscreteModel(), 1, 10000, thresholds=(0.1, 0.2), seed=1)
    assert not c.converged and c.notes


def test_discrete_bound_slopes(scope1_constants):
    m = DiscreteModel()
    c = scope1_constants
    d3 = A.theorem3_delay_bound(E * 100, m, 9, c) - A.theorem3_delay_bound(100, m, 9, c)
    d4 = A.theorem4_delay_bound(E * 100, m, 9, c) - A.theorem4_delay_bound(100, m, 9, c)
    assert d3 == pytest.approx(4.0) and d4 == pytest.approx(6 / (0.5 * 9))
    assert d3 / d4 == pytest.approx(3.0)


def test_theorem3_grows_like_n(scope1_constants):
    m, c = DiscreteModel(), scope1_constants
    b = {n: A.theorem3_delay_bound(100, m, n, c) for n in (9, 20, 50)}
    # the N-dependent term is 2/D * log((1 - e^(1-N)) / e^(1-N)) ~ 2/D * (N - 1)
    assert (b[50] - b[20]) == pytest.approx(4.0 * 30, rel=1e-6)
    assert (b[20] - b[9]) == pytest.approx(4.0 * 11, rel=1e-3)


def test_geometric_check_on_exponential_samples():
    rng = _rng.stream(5, 0, _rng.AUX)
    d = [A.geometric_approximation_check(rng.exponential(3.0, n), 3.0) for n in (100, 10000, 1000000)]
    assert d[2] < d[0] and d[2] < 0.002
