"""Acceptance criteria, one test per criterion (a summary line per criterion is printed)."""

import time

import numpy as np
import pytest

from _helpers import monotone_violations, random_indirect
from conftest import K_STAR, perturbed_tabulated
from postmech.choice import Menu
from postmech.dist import Generator, OrderStatistic, check_regularity, uniform_triangle
from postmech.mech import (GridMechanism, Post2Spec, check_ic_ir, instantiate,
                           principal_payoff)
from postmech.oracle import InapplicableError, MenuGrid, appendix_upper_bound, best_menu_revenue
from postmech.reveal import is_equilibrium, to_direct, truthful
from postmech.solve import solve

pytestmark = pytest.mark.filterwarnings("ignore::UserWarning")


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start


def test_ac1_worked_example_price():
    d = uniform_triangle()
    with Timer() as tm:
        r = solve(d, 0.25)
    spec = r.best_post2.spec
    assert r.regime == "post2-optimal" and r.classification == "uniform"
    assert spec.kappa1 == spec.kappa2
    assert abs(spec.kappa1 - K_STAR) <= 1e-6
    assert round(spec.kappa1, 2) == 0.39
    assert tm.elapsed < 1.0


def test_ac2_principal_payoffs():
    d = uniform_triangle()
    with Timer() as tm:
        pay = principal_payoff(solve(d, 0.25).best_post2.spec, d)
    assert pay.agent_region == pytest.approx(-0.059, abs=2e-3)
    assert pay.principal_region == pytest.approx(0.075, abs=2e-3)
    assert tm.elapsed < 1.0


def test_ac3_threshold_sweep():
    d = uniform_triangle()
    rep = check_regularity(d)
    budgets = np.linspace(0, 1, 101)
    with Timer() as tm:
        rows = [solve(d, float(b), rep) for b in budgets]
    regimes = [r.regime for r in rows]
    post1 = np.array([g == "post1-optimal" for g in regimes])
    # once POST-1 is strictly better it stays so: a single switch
    first = int(np.argmax(post1))
    assert post1.any() and post1[first:].all()
    assert "post2-optimal" not in regimes[first:]
    step = budgets[1] - budgets[0]
    k1 = 1 / np.sqrt(3)
    assert abs(budgets[first] - k1) <= step
    assert budgets[first - 1] < k1 <= budgets[first]
    for b, r in zip(budgets, rows):
        if b < k1:
            assert r.best_post2.revenue - r.best_post1.revenue >= -1e-9
    assert tm.elapsed < 10.0


def _random_post2(rng, d, beta=1.0):
    b = float(rng.uniform(0, 0.9 * beta))
    if rng.random() < 0.25:
        return solve(d, b).best_post2.spec
    k1 = float(rng.uniform(b, beta))
    k2 = float(rng.uniform(k1, beta))
    return Post2Spec(k1, k2, b, beta)


def test_ac4_post2_is_ic_across_distributions():
    rng = np.random.default_rng(20240401)
    dists = [uniform_triangle(), OrderStatistic(Generator("power", 2.0)), perturbed_tabulated()]
    failures = []
    with Timer() as tm:
        for i in range(200):
            d = dists[i % 3]
            spec = _random_post2(rng, d)
            m = instantiate(spec, grid_n=400)
            rep = check_ic_ir(m)
            if not rep.ok:
                failures.append((spec, rep.reason))
    assert failures == []
    assert tm.elapsed < 60.0


def _oracle_grids(b, spec, seed):
    rng = np.random.default_rng(seed)
    A = {0.0, 0.25, 0.5, 0.75, 1.0, spec.q}
    T = {0.0, b, spec.top_price}
    while len(T) < 10:
        T.add(round(float(rng.uniform(0, 1)), 3))
    return tuple(A), tuple(T)


@pytest.mark.parametrize("b", [0.1, 0.25, 0.4])
def test_ac5_oracle_certifies_post2(b):
    d = uniform_triangle()
    closed = solve(d, b)
    A, T = _oracle_grids(b, closed.best_post2.spec, seed=int(b * 100))
    with Timer() as tm:
        r3 = best_menu_revenue(d, b, MenuGrid(A, T, 3))
        r4 = best_menu_revenue(d, b, MenuGrid(A, T, 4))
    post2 = closed.best_post2.revenue
    assert abs(r3.revenue - post2) <= 5e-3
    assert r4.revenue - r3.revenue <= 5e-3
    assert r4.revenue <= post2 + 1e-9
    assert tm.elapsed < 300.0


def test_ac6_interior_first_order_conditions():
    labelled = 0
    for p in (0.1, 0.2, 0.25, 0.3, 0.4, 0.45):
        d = OrderStatistic(Generator("power", p))
        rep = check_regularity(d)
        for b in np.linspace(0.0, 0.95 * rep.kappa_tilde_2, 8):
            r = solve(d, float(b), rep)
            if r.classification != "interior":
                continue
            labelled += 1
            k1, k2 = r.best_post2.spec.kappa1, r.best_post2.spec.kappa2
            f2, tail2 = d.pdf(2, k2), 1 - d.cdf(2, k2)
            assert abs(k2 - tail2 / f2) <= 1e-8
            assert abs(k1 ** 2 * d.pdf(1, k1) - k2 * tail2) <= 1e-8
    assert labelled > 0


def test_ac7_partition_bound():
    rng = np.random.default_rng(7)
    dists = [uniform_triangle(), OrderStatistic(Generator("power", 2.0))]
    checked = 0
    while checked < 50:
        d = dists[checked % 2]
        b = float(rng.uniform(0.02, 0.6))
        outs = [(0.0, 0.0)]
        for _ in range(int(rng.integers(1, 4))):
            a = float(rng.uniform(0.05, 1))
            outs.append((a, float(rng.uniform(0, 1) * a)))
        outs.append((1.0, float(rng.uniform(b, 1))))  # some payment above b
        m = GridMechanism.from_menu(Menu.of(outs, b), 80)
        if not check_ic_ir(m).ok:
            continue
        try:
            rep = appendix_upper_bound(m, d)
        except InapplicableError:
            continue
        assert rep.bound_total >= rep.actual - 1e-6, rep.to_dict()
        checked += 1
    d = uniform_triangle()
    opt = solve(d, 0.25).best_post2.spec
    rep = appendix_upper_bound(instantiate(opt, 200), d)
    assert -1e-6 <= rep.gap <= 5e-3


def test_ac8_revelation():
    rng = np.random.default_rng(8)
    for _ in range(50):
        im, s = random_indirect(rng)
        assert is_equilibrium(im, s).ok
        direct = to_direct(im, s)
        assert check_ic_ir(direct).ok
        a_s, t_s = s.outcome_arrays(im)
        same = (direct.a == a_s) & (direct.t == t_s)
        assert np.all(same | (direct.t > t_s))
        im2, s2 = truthful(direct)
        again = to_direct(im2, s2)
        np.testing.assert_array_equal(again.a, direct.a)
        np.testing.assert_array_equal(again.t, direct.t)


def test_ac9_choice_monotonicity():
    rng = np.random.default_rng(9)
    bad = []
    for _ in range(1000):
        k = int(rng.integers(1, 6))
        outs = [(0.0, 0.0)] + [tuple(np.round(rng.uniform(0, 1, 2), 3)) for _ in range(k)]
        m = Menu.of(outs, round(float(rng.uniform(0, 1)), 3))
        lo, hi = np.sort(rng.uniform(0, 1, 2))
        if hi <= lo:
            continue
        bad += monotone_violations(m, lo, hi)
        bad += monotone_violations(Menu.of(m.budget_set(), m.budget), lo, hi)
    assert bad == []
