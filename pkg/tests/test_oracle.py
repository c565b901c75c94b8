import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from postmech.choice import Menu
from postmech.mech import GridMechanism, Post1Spec, Post2Spec, TypeGrid, instantiate
from postmech.oracle import (DegenerateMenuGridWarning, InapplicableError, MenuGrid,
                             appendix_upper_bound, best_menu_revenue, breakpoints,
                             menu_revenue, verify_monotonicity)

from conftest import K_STAR


def test_menu_grid_normalises_and_limits():
    g = MenuGrid((0.5, 0.5), (0.3,), 3)
    assert g.A == (0.0, 0.5, 1.0) and g.T == (0.0, 0.3)
    assert next(iter(g.menus())) == ((0.0, 0.0),)
    with pytest.raises(ValueError):
        MenuGrid(tuple(np.linspace(0, 1, 8)), tuple(np.linspace(0, 1, 8)), 3)
    with pytest.raises(ValueError):
        MenuGrid((0.5,), (0.3,), 5)


def test_menu_count_matches_combinatorics():
    g = MenuGrid((0.5,), (0.2, 0.4), 3)
    others = 3 * 3 - 1
    assert sum(1 for _ in g.menus()) == 1 + others + others * (others - 1) // 2


def test_breakpoints_are_indifference_values():
    w = breakpoints([0, 0.5, 1], [0, 0.1, 0.6], 1.0)
    assert np.allclose(w, [0, 0.2, 0.6, 1.0])


def test_exact_menu_revenue_matches_closed_forms(uniform, power2):
    for d in (uniform, power2):
        for spec in (Post2Spec(K_STAR, K_STAR, 0.25), Post2Spec(0.3, 0.6, 0.1), Post1Spec(0.2, 0.3)):
            assert menu_revenue(spec.menu(), d) == pytest.approx(spec.revenue(d), abs=1e-10)


@given(st.lists(st.tuples(st.floats(0, 1), st.floats(0, 1)), min_size=1, max_size=4),
       st.floats(0, 1))
def test_exact_revenue_agrees_with_grid_quadrature(extra, b):
    from postmech.dist import uniform_triangle
    d = uniform_triangle()
    menu = Menu.of([(0, 0), *extra], b)
    m = GridMechanism.from_menu(menu, 301)
    assert m.grid.integrate(m.t, d) == pytest.approx(menu_revenue(menu, d), abs=1.5e-2)


def test_free_outcomes_only_give_zero(uniform):
    with pytest.warns(DegenerateMenuGridWarning):
        r = best_menu_revenue(uniform, 0.25, MenuGrid((0, 1), (0,), 2))
    assert r.revenue == 0.0


def test_worked_example_menu_is_found(uniform):
    g = MenuGrid((0, 0.641, 1), (0, 0.25, 0.392), 3)
    r = best_menu_revenue(uniform, 0.25, g)
    assert {o.as_tuple() for o in r.menu} == {(0, 0), (0.641, 0.25), (1, 0.392)}
    assert r.revenue == pytest.approx(0.26407, abs=5e-3)


def test_unbinding_budget_recovers_posted_price(uniform):
    k = 1 / np.sqrt(3)
    g = MenuGrid((0, 0.5, 1), (0, 0.3, 0.5, k, 0.65, 0.8), 3)
    r = best_menu_revenue(uniform, 1.0, g)
    assert r.revenue == pytest.approx(2 / (3 * np.sqrt(3)), abs=5e-3)
    assert (1.0, k) in {o.as_tuple() for o in r.menu}


def test_quadrature_route_tracks_exact_route(uniform):
    g = MenuGrid((0, 0.641, 1), (0, 0.25, 0.392), 3)
    exact = best_menu_revenue(uniform, 0.25, g)
    approx = best_menu_revenue(uniform, 0.25, g, type_grid_n=200)
    assert approx.route == "grid-200"
    assert approx.revenue == pytest.approx(exact.revenue, abs=5e-3)


def test_ties_keep_first_menu(uniform):
    # every menu is worthless when the budget set is just (0,0) and nobody values delegation
    g = MenuGrid((1,), (0,), 2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        r = best_menu_revenue(uniform, 0.0, g)
    assert r.menu == Menu.of([(0, 0)], 0.0)


def test_bound_is_tight_for_optimal_post2(uniform):
    rep = appendix_upper_bound(instantiate(Post2Spec(K_STAR, K_STAR, 0.25), 200), uniform)
    assert rep.holds
    assert rep.bound_total == pytest.approx(0.26407, abs=5e-3)
    assert rep.bound_total >= rep.actual - 1e-9
    assert rep.gap < 5e-3


def test_bound_is_strict_for_low_top_price(uniform):
    rep = appendix_upper_bound(instantiate(Post2Spec(0.15, 0.2, 0.1), 200), uniform)
    assert rep.actual < rep.bound_total - 1e-4
    assert rep.kappa2_star == pytest.approx(1 / 3, abs=1e-6)


def test_bound_with_zero_baseline(uniform):
    menu = Menu.of([(0, 0), (1, 0.5)], 0.25)
    rep = appendix_upper_bound(GridMechanism.from_menu(menu, 100), uniform)
    assert (rep.q_base, rep.p_base) == (0.0, 0.0)
    assert rep.q_dagger == pytest.approx(0.25 / rep.kappa, abs=1e-12)
    assert rep.holds


def test_bound_rejects_low_payment_and_non_ic(uniform):
    with pytest.raises(InapplicableError):
        appendix_upper_bound(instantiate(Post1Spec(0.2, 0.25), 50), uniform)
    g = TypeGrid(30)
    bad = GridMechanism(g, np.where(g.v1 > 0.5, 1.0, 0.0), np.where(g.v1 > 0.5, 0.6, 0.0), 0.25)
    bad = GridMechanism(g, np.where(g.v1 > 0.9, 0.0, bad.a), np.where(g.v1 > 0.9, 0.0, bad.t), 0.25)
    with pytest.raises(ValueError):
        appendix_upper_bound(bad, uniform)


_OUT = st.tuples(st.floats(0.05, 1), st.floats(0.01, 1))


@given(st.lists(_OUT, min_size=1, max_size=3), st.floats(0.02, 0.6))
def test_bound_holds_for_menu_mechanisms(extra, b):
    from postmech.dist import uniform_triangle
    d = uniform_triangle()
    menu = Menu.of([(0, 0), *extra], b)
    m = GridMechanism.from_menu(menu, 80)
    try:
        rep = appendix_upper_bound(m, d)
    except InapplicableError:
        return
    assert rep.holds, rep.to_dict()
    assert 0 <= rep.q_dagger <= 1


def test_monotonicity_of_post2_and_constant():
    assert verify_monotonicity(instantiate(Post2Spec(0.4, 0.6, 0.25), 80)) == []
    g = TypeGrid(20)
    assert verify_monotonicity(GridMechanism(g, np.zeros(g.size), np.zeros(g.size), 0.2)) == []


def test_monotonicity_flags_decreasing_allocation():
    g = TypeGrid(40)
    a = np.where(g.v1 > 0.5, 0.5, 1.0)
    a = np.where(g.v1 < 0.2, 0.0, a)
    t = np.where(g.v1 < 0.2, 0.0, 0.1)
    bad = verify_monotonicity(GridMechanism(g, a, t, 0.2))
    assert bad and bad[0][2] == "a"
