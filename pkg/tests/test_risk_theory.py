import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ensemble_ols.errors import DegenerateDenominator, DomainError, InfeasibleInterval
from ensemble_ols.risk_theory import (
    K_INF,
    PairSizes,
    Term,
    TheoryQuery,
    alpha_quadratic_residual,
    ensemble_risk,
    finite_k_optimal_alpha,
    finite_pair_term,
    golden_section,
    interpolator_variance_term,
    large_ensemble_risk,
    limiting_bias,
    limiting_pair_term,
    limiting_variance,
    mu_scaled_risk,
    optimal_alpha,
    optimal_mu,
    optimal_ridge_risk,
)

GAMMAS = np.geomspace(0.1, 10, 20)
SIGMAS = np.geomspace(0.05, 10, 20)


# ---------------------------------------------------------------------------
# finite pairwise terms


def test_finite_bias_same_member():
    sizes = PairSizes(s_ii=5, t_ii=10, s_cap=5, sc_cap=5, n=10, p=10)
    assert finite_pair_term(Term.BIAS, True, sizes) == pytest.approx(0.5 * (1 + 5 / 4), abs=1e-15)
    assert finite_pair_term(Term.BIAS, True, sizes) == pytest.approx(1.125)


def test_finite_variance_cross_member():
    sizes = PairSizes(s_ii=5, t_ii=20, s_cap=5, sc_cap=5, n=40, p=10)
    assert finite_pair_term("variance", False, sizes, sigma=1.0) == pytest.approx(5 / 34, abs=1e-15)


@pytest.mark.parametrize("c", [0, 1, 4])
def test_finite_bias_disjoint(c):
    sizes = PairSizes(s_ii=3, t_ii=20, s_cap=0, sc_cap=c, n=40, p=10)
    assert finite_pair_term(Term.BIAS, False, sizes, beta_norm_sq=2.0) == pytest.approx(c / 10 * 2.0, abs=1e-15)


def test_finite_domain_errors():
    with pytest.raises(DomainError):
        finite_pair_term(Term.BIAS, True, PairSizes(5, 6, 5, 5, 10, 10))
    with pytest.raises(DomainError):
        finite_pair_term(Term.BIAS, True, PairSizes(5, 10, 6, 0, 10, 10))


def test_pair_feasibility():
    assert PairSizes(5, 20, 3, 3, 40, 10).pair_feasible
    assert not PairSizes(5, 20, 3, 4, 40, 10).pair_feasible


# ---------------------------------------------------------------------------
# limiting pairwise terms


def test_limiting_variance_cross():
    q = TheoryQuery(alpha=0.5, gamma=0.5, sigma=1.0)
    assert limiting_pair_term(Term.VARIANCE, False, q) == pytest.approx(0.125 / 0.875, abs=1e-15)


def test_limiting_bias_null_member():
    for eta, gamma in [(0.3, 5.0), (1.0, 0.1)]:
        assert limiting_pair_term(Term.BIAS, True, TheoryQuery(alpha=0.0, eta=eta, gamma=gamma)) == 1.0


def test_limiting_variance_same():
    q = TheoryQuery(alpha=0.25, eta=1.0, gamma=2.0, sigma=1.0)
    assert limiting_pair_term(Term.VARIANCE, True, q) == pytest.approx(1.0, abs=1e-15)


def test_limiting_domain_guard():
    with pytest.raises(DomainError):
        limiting_pair_term(Term.BIAS, True, TheoryQuery(alpha=0.6, eta=1.0, gamma=2.0))
    with pytest.raises(DomainError):
        large_ensemble_risk(1.0, 1.0, 1.0)


def test_finite_terms_approach_limits():
    n, gamma, alpha, eta = 4000, 0.5, 0.5, 1.0
    p = int(gamma * n)
    s = int(alpha * p)
    s_cap = int(alpha**2 * p)
    sc_cap = p - 2 * s + s_cap
    sizes = PairSizes(s, int(eta * n), s_cap, sc_cap, n, p)
    q = TheoryQuery(alpha=alpha, eta=eta, gamma=gamma, sigma=1.0)
    for kind in Term:
        for same in (True, False):
            assert finite_pair_term(kind, same, sizes) == pytest.approx(limiting_pair_term(kind, same, q), rel=0.01)


# ---------------------------------------------------------------------------
# ensemble risk


def test_finite_k_risk_example():
    q = TheoryQuery(alpha=0.25, eta=1.0, gamma=2.0, sigma=1.0, k=10)
    shared = (0.75**2 + 0.125) / (1 - 0.125)
    own = (0.75 + 0.5) / 0.5
    assert ensemble_risk(q) == pytest.approx(0.9 * shared + 0.1 * own, abs=1e-15)
    assert ensemble_risk(q) == pytest.approx(0.957143, abs=5e-7)


@pytest.mark.parametrize("k", [1, 3, 100])
def test_full_ols_risk(k):
    assert ensemble_risk(TheoryQuery(alpha=1.0, eta=1.0, gamma=0.5, sigma=1.0, k=k)) == pytest.approx(1.0, abs=1e-14)


def test_large_k_consistency():
    q = TheoryQuery(alpha=0.3, eta=0.9, gamma=1.5, sigma=0.7, k=10**6)
    assert ensemble_risk(q) == pytest.approx(large_ensemble_risk(0.3, 1.5, 0.7), rel=1e-5)
    assert ensemble_risk(TheoryQuery(alpha=0.3, eta=0.9, gamma=1.5, sigma=0.7)) == large_ensemble_risk(0.3, 1.5, 0.7)


def test_risk_is_bias_plus_variance():
    q = TheoryQuery(alpha=0.3, eta=0.8, gamma=1.2, sigma=0.9, k=7)
    assert limiting_bias(q) + limiting_variance(q) == pytest.approx(ensemble_risk(q), abs=1e-14)


def test_large_ensemble_examples():
    assert large_ensemble_risk(0.0, 3.0, 2.0) == 1.0
    assert large_ensemble_risk(0.5, 0.5, 1.0) == pytest.approx(0.375 / 0.875, abs=1e-15)


def test_theory_query_validation():
    with pytest.raises(DomainError):
        TheoryQuery(alpha=0.5, gamma=0.0)
    with pytest.raises(DomainError):
        TheoryQuery(alpha=0.5, k=0)
    assert repr(K_INF) == "K_INF"


def _strict_pairs(alpha, eta, gamma):
    return eta > alpha * gamma and alpha**2 * gamma < 1


def test_monotone_in_k_on_grid():
    checked = 0
    for a in np.linspace(0.05, 0.95, 10):
        for eta in np.linspace(0.1, 1.0, 10):
            for g in np.geomspace(0.1, 5, 8):
                if not _strict_pairs(a, eta, g) or a * eta >= 1:
                    continue
                for s in (0.0, 0.5, 2.0):
                    q = dict(alpha=a, eta=eta, gamma=g, sigma=s)
                    risks = [ensemble_risk(TheoryQuery(k=k, **q)) for k in range(1, 12)]
                    assert np.all(np.diff(risks) < 0)
                    b = [limiting_bias(TheoryQuery(k=k, **q)) for k in range(1, 12)]
                    assert np.all(np.diff(b) < 0)
                    checked += 1
    assert checked > 100


# ---------------------------------------------------------------------------
# optimal alpha and ridge


def test_optimal_alpha_examples():
    assert optimal_alpha(1.0, 1.0) == pytest.approx((3 - math.sqrt(5)) / 2, abs=1e-15)
    assert optimal_alpha(2.0, 1.0) == pytest.approx((5 - math.sqrt(17)) / 4, abs=1e-15)
    assert optimal_alpha(2.0, 0.0) == pytest.approx(0.5, abs=1e-15)


def test_optimal_alpha_matches_textbook_root():
    for g in GAMMAS:
        for s in SIGMAS:
            b = g * (s**2 + 1) + 1
            textbook = (b - math.sqrt(b * b - 4 * g)) / (2 * g)
            assert optimal_alpha(g, s) == pytest.approx(textbook, rel=1e-8)


def test_optimal_ridge_examples():
    assert optimal_ridge_risk(1.0, 1.0) == pytest.approx((math.sqrt(5) - 1) / 2, abs=1e-15)
    assert optimal_ridge_risk(0.5, 1.0) == pytest.approx(1 - optimal_alpha(0.5, 1.0), abs=1e-12)
    assert optimal_ridge_risk(0.5, 1.0) == pytest.approx(0.414214, abs=5e-7)
    for g in (0.3, 1.0, 4.0):
        assert optimal_ridge_risk(g, 0.0) == pytest.approx(max(0.0, (g - 1) / g), abs=1e-15)


def test_grid_identities():
    for g in GAMMAS:
        for s in SIGMAS:
            a = optimal_alpha(g, s)
            r = large_ensemble_risk(a, g, s)
            assert abs(r - (1 - a)) <= 1e-12
            assert abs(r - optimal_ridge_risk(g, s)) <= 1e-12
            assert abs(alpha_quadratic_residual(a, g, s)) <= 1e-12
            assert 0 <= a <= min(1.0, 1.0 / g)


@settings(max_examples=200, deadline=None)
@given(g=st.floats(0.1, 10), s=st.floats(0.05, 10), t=st.floats(0.01, 0.99))
def test_alpha_star_minimizes_large_ensemble_risk(g, s, t):
    a_star = optimal_alpha(g, s)
    a = t * min(1.0, 1.0 / math.sqrt(g))
    assert large_ensemble_risk(a, g, s) >= large_ensemble_risk(a_star, g, s) - 1e-12


# ---------------------------------------------------------------------------
# mu scaling


def test_mu_scaled_examples():
    assert mu_scaled_risk(TheoryQuery(alpha=0.4, gamma=0.8, sigma=0.6)) == large_ensemble_risk(0.4, 0.8, 0.6)
    assert mu_scaled_risk(TheoryQuery(alpha=0.4, gamma=0.8, sigma=0.6, mu=0.0)) == 1.0
    mu, risk = optimal_mu(0.5, 0.5, 1.0)
    assert mu == pytest.approx(0.5 / (0.375 / 0.875), abs=1e-15)
    assert mu == pytest.approx(1.166667, abs=5e-7)
    assert risk == pytest.approx(0.416667, abs=5e-7)
    assert mu_scaled_risk(TheoryQuery(alpha=0.5, gamma=0.5, sigma=1.0, mu=mu)) == pytest.approx(risk, abs=1e-14)


def test_mu_star_is_one_at_alpha_star():
    for g in (0.2, 1.0, 3.0):
        for s in (0.1, 1.0, 5.0):
            assert optimal_mu(optimal_alpha(g, s), g, s)[0] == pytest.approx(1.0, abs=1e-12)


def test_mu_star_side_of_one():
    for g in (0.5, 2.0):
        for s in (0.3, 1.0, 3.0):
            a_star = optimal_alpha(g, s)
            hi = min(1.0, 1 / math.sqrt(g))
            for a in np.linspace(0.02, hi - 0.02, 25):
                mu, _ = optimal_mu(a, g, s)
                if a > a_star + 1e-9:
                    assert mu < 1
                elif a < a_star - 1e-9:
                    assert mu > 1


def test_mu_star_is_minimizer():
    for a, g, s in [(0.5, 0.5, 1.0), (0.2, 2.0, 0.3), (0.7, 1.0, 2.0)]:
        mu, risk = optimal_mu(a, g, s)
        for d in (-1e-4, 1e-4):
            assert mu_scaled_risk(TheoryQuery(alpha=a, gamma=g, sigma=s, mu=mu + d)) >= risk


def test_mu_degenerate():
    # alpha = 0 makes R = 1 and the denominator 2*0 - 1 + 1 = 0
    with pytest.raises(DegenerateDenominator):
        optimal_mu(0.0, 1.0, 1.0)


# ---------------------------------------------------------------------------
# interpolators


def test_interpolator_variance_examples():
    assert interpolator_variance_term(False, 1.0, 0.5, 1.0, 1.0) == pytest.approx(0.25 / 0.75, abs=1e-15)
    assert interpolator_variance_term(True, 1.0, 0.5, 1.0, 1.0) == pytest.approx(1.0, abs=1e-15)
    assert interpolator_variance_term(True, 1.0, 0.5, 1.0, 0.0) == 0.0
    assert interpolator_variance_term(False, 1.0, 0.5, 1.0, 0.0) == 0.0
    with pytest.raises(DomainError):
        interpolator_variance_term(True, 0.5, 0.5, 1.0, 1.0)
    with pytest.raises(DomainError):
        interpolator_variance_term(False, 1.0, 1.0, 1.0, 1.0)


# ---------------------------------------------------------------------------
# finite-k tuning


def test_golden_section_quadratic():
    assert golden_section(lambda x: (x - 0.3) ** 2, 0.0, 1.0) == pytest.approx(0.3, abs=1e-8)


def test_finite_k_alpha_limit():
    assert finite_k_optimal_alpha(2.0, 1.0, 1.0, 10**6) == pytest.approx(optimal_alpha(2.0, 1.0), abs=1e-4)


def test_finite_k_alpha_below_alpha_star_at_low_noise():
    a = finite_k_optimal_alpha(2.0, 0.1, 1.0, 16)
    assert a < optimal_alpha(2.0, 0.1)


@pytest.mark.parametrize("g,s,eta,k", [(2.0, 0.1, 1.0, 16), (0.5, 1.0, 0.8, 4), (1.0, 1.0, 1.0, 8)])
def test_finite_k_alpha_local_minimum(g, s, eta, k):
    a = finite_k_optimal_alpha(g, s, eta, k)
    r = lambda x: ensemble_risk(TheoryQuery(alpha=x, eta=eta, gamma=g, sigma=s, k=k))
    assert r(a - 1e-4) > r(a) and r(a + 1e-4) > r(a)
    assert eta > a * g and a * a * g < 1


def test_finite_k_alpha_boundary_minimum():
    # high noise, few members: the null predictor wins and the search hits the lower edge
    a = finite_k_optimal_alpha(1.0, 2.0, 1.0, 3)
    assert a <= 2e-6
    assert ensemble_risk(TheoryQuery(alpha=a, gamma=1.0, sigma=2.0, k=3)) == pytest.approx(1.0, abs=1e-4)


def test_finite_k_alpha_infeasible():
    with pytest.raises(InfeasibleInterval):
        finite_k_optimal_alpha(1e7, 1.0, 1e-7, 5)
