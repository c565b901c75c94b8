import numpy as np
import pytest
from hypothesis import given, strategies as st

from postmech.dist import DomainError, Generator, OrderStatistic, TabulatedJoint, check_regularity
from postmech.mech import expected_revenue
from postmech.solve import (RegularityWarning, classify_regime_thm5, optimal_post1,
                            optimal_post2, post2_revenue, solve)

from conftest import K_STAR

K1_UNIFORM = 1 / np.sqrt(3)


def power(p):
    return OrderStatistic(Generator("power", p))


def uniform_root(b):
    """Smaller root of 3x^2 - (4 + 4b)x + (1 + 2b) = 0."""
    B = 4 + 4 * b
    return (B - np.sqrt(B * B - 12 * (1 + 2 * b))) / 6


def brute_force_post2(d, b, n=1500):
    k = np.linspace(max(b, 1e-9), 1, n)
    K1, K2 = np.meshgrid(k, k, indexing="ij")
    R = np.where(K1 <= K2, post2_revenue(d, b, K1, K2), -np.inf)
    return R.max()


def test_optimal_post1_examples(uniform):
    r = optimal_post1(uniform, 0.25)
    assert r.spec.kappa1 == 0.25 and r.revenue == pytest.approx(0.234375, abs=1e-12)
    r = optimal_post1(uniform, 0.9)
    assert r.spec.kappa1 == pytest.approx(K1_UNIFORM, abs=1e-6)
    assert r.revenue == pytest.approx(2 / (3 * np.sqrt(3)), abs=1e-12)
    r = optimal_post1(uniform, 0.0)
    assert r.spec.kappa1 == 0 and r.revenue == 0


def test_optimal_post2_worked_example(uniform):
    r = optimal_post2(uniform, 0.25)
    assert r.spec.kappa1 == pytest.approx(K_STAR, abs=1e-9)
    assert r.spec.kappa2 == pytest.approx(K_STAR, abs=1e-9)
    assert r.revenue == pytest.approx(0.26407, abs=1e-4)
    assert round(r.spec.kappa1, 2) == 0.39


@pytest.mark.parametrize("b", [0.0, 0.05, 0.1, 0.2, 0.3, 0.4])
def test_uniform_price_is_quadratic_root(uniform, b):
    r = optimal_post2(uniform, b)
    assert r.shape == "uniform"
    assert r.spec.kappa1 == pytest.approx(uniform_root(b), abs=1e-9)


@pytest.mark.parametrize("b", [0.05, 0.25, 0.45, 0.7])
def test_post2_beats_brute_force_scan(uniform, power2, b):
    for d in (uniform, power2):
        assert optimal_post2(d, b).revenue >= brute_force_post2(d, b) - 1e-12


def test_post2_degenerate_budgets(uniform):
    r = optimal_post2(uniform, 1.0)
    assert (r.spec.kappa1, r.spec.kappa2, r.revenue) == (1.0, 1.0, 0.0)
    assert solve(uniform, 1.0).regime == "post1-optimal"
    assert solve(uniform, 0.6).regime == "post1-optimal"


def test_solve_examples(uniform):
    r = solve(uniform, 0.25)
    assert r.regime == "post2-optimal" and r.classification == "uniform"
    assert r.best_post2.revenue > r.best_post1.revenue
    r = solve(uniform, 0.7)
    assert r.regime == "post1-optimal"
    assert r.optimal.kappa1 == pytest.approx(K1_UNIFORM, abs=1e-6)
    r = solve(uniform, K1_UNIFORM)
    assert r.regime == "tie"
    assert r.best_post1.revenue == pytest.approx(r.best_post2.revenue, abs=1e-9)
    assert r.optimal.kind == "post1"


def test_zero_budget_sells_to_principal(uniform):
    r = solve(uniform, 0.0)
    assert r.best_post1.revenue == 0 and r.best_post1.spec.kappa1 == 0
    assert r.regime == "post2-optimal"
    assert r.best_post2.revenue == pytest.approx((1 / 3) * (4 / 9), abs=1e-12)


def test_budget_outside_support(uniform):
    with pytest.raises(DomainError):
        solve(uniform, 1.2)


_DISTS = {"uniform": OrderStatistic(Generator()), "power2": power(2.0), "power0.5": power(0.5),
          "power0.25": power(0.25)}
_REPORTS = {k: check_regularity(d) for k, d in _DISTS.items()}


@given(st.sampled_from(sorted(_DISTS)), st.floats(0, 1))
def test_threshold_rule_holds(name, b):
    d, rep = _DISTS[name], _REPORTS[name]
    r = solve(d, b, rep)
    assert r.threshold_consistent
    if b < rep.kappa_tilde_1 - 1e-6:
        assert r.regime != "post1-optimal"
    elif b > rep.kappa_tilde_1 + 1e-6:
        assert r.regime != "post2-optimal"
    # reported revenues are reproducible
    assert expected_revenue(r.best_post2.spec, d) == pytest.approx(r.best_post2.revenue, abs=1e-6)
    assert expected_revenue(r.best_post1.spec, d) == pytest.approx(r.best_post1.revenue, abs=1e-6)
    assert r.best_post2.grid_revenue <= r.best_post2.revenue + 1e-4


@given(st.floats(0.1, 0.45), st.floats(0, 1))
def test_interior_solutions_satisfy_first_order_conditions(p, frac):
    d = power(p)
    rep = check_regularity(d)
    b = frac * rep.kappa_tilde_2 * 0.9
    r = solve(d, b, rep)
    if r.classification != "interior":
        return
    assert r.best_post2.shape == "interior"
    k1, k2 = r.best_post2.spec.kappa1, r.best_post2.spec.kappa2
    assert abs(k2 - (1 - d.cdf(2, k2)) / d.pdf(2, k2)) <= 1e-8
    assert abs(k1 ** 2 * d.pdf(1, k1) - k2 * (1 - d.cdf(2, k2))) <= 1e-8


@given(st.sampled_from(["uniform", "power2", "power0.5"]), st.floats(0, 0.6))
def test_uniform_price_sits_above_principal_threshold(name, b):
    d, rep = _DISTS[name], _REPORTS[name]
    r = solve(d, b, rep)
    if r.classification == "uniform" and r.best_post2.spec.kappa1 > b + 1e-9:
        k = r.best_post2.spec.kappa1
        assert k >= rep.kappa_tilde_2 - 1e-8
        assert d.pdf(1, k) / d.pdf(2, k) <= 1 + 1e-8


@pytest.mark.parametrize("name", sorted(_DISTS))
def test_x2_f1_is_increasing(name):
    d = _DISTS[name]
    x = np.linspace(1e-3, 1, 1000)
    assert _REPORTS[name].concave_xF1
    assert np.all(np.diff(x * x * d.pdf(1, x)) > 0)


def test_budget_cases(uniform):
    assert classify_regime_thm5(uniform, 0.25).case == "case1-uniform-interior-price"
    assert classify_regime_thm5(uniform, 0.25).consistent
    assert classify_regime_thm5(uniform, 0.4).case == "none"
    c3 = classify_regime_thm5(uniform, 0.55)
    assert c3.case == "case3-price-at-b" and c3.consistent
    c2 = classify_regime_thm5(power(0.25), 0.3)
    assert c2.case == "case2-price-at-b" and c2.consistent


def test_squared_generator_has_no_case_three_budget(power2):
    # ratio f1/f2 = x^2/(1-x^2) exceeds one only above 1/sqrt(2), past the agent threshold
    rep = check_regularity(power2)
    assert 1 / np.sqrt(2) > rep.kappa_tilde_1
    for b in np.linspace(rep.kappa_tilde_2, rep.kappa_tilde_1, 50, endpoint=False):
        assert classify_regime_thm5(power2, b, rep).case == "none"


def test_nonconcave_prior_falls_back_to_grid():
    x = np.linspace(0, 1, 121)
    X, Y = np.meshgrid(x, x, indexing="ij")
    f = np.exp(-((X - 0.15) ** 2) / 0.002) + np.exp(-((X - 0.9) ** 2) / 0.002)
    d = TabulatedJoint(f)
    rep = check_regularity(d)
    assert not rep.concave_xF1
    with pytest.warns(RegularityWarning):
        r = solve(d, 0.3, rep)
    assert r.best_post2.source == "grid"
    assert r.classification == "none"
