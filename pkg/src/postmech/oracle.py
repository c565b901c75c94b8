"""Brute-force certification over small menus and the partition revenue bound.

Any menu containing (0, 0) defines an IC and IR direct mechanism once every
type is assigned its tr-max pair choice, so the best enumerated menu is a lower
bound on optimal revenue that can be compared with the POST-2 closed form.

Menu revenue is computed exactly: the pair choice only changes where some
value crosses a pairwise indifference point (t_i - t_j) / (a_i - a_j), so the
type space splits into rectangles with a constant choice, whose probabilities
come from the joint cdf.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._search import argmax_on_interval
from .choice import EPS_CH, Menu, choice_masks, tr_max_batch
from .mech import GridMechanism, Post1Spec, Post2Spec, TypeGrid, check_ic_ir, payment_threshold

MAX_GRID_PRODUCT = 60
MAX_MENU_SIZE = 4


class DegenerateMenuGridWarning(UserWarning):
    """The transfer grid cannot produce positive revenue."""


class InapplicableError(ValueError):
    """The mechanism never charges more than the budget; use the POST-1 bound."""


@dataclass(frozen=True)
class MenuGrid:
    """Candidate allocations ``A`` and transfers ``T`` plus the maximum menu size ``k``."""

    A: tuple
    T: tuple
    k: int = 3

    def __post_init__(self):
        A = tuple(sorted({0.0, 1.0, *map(float, self.A)}))
        T = tuple(sorted({0.0, *map(float, self.T)}))
        if A[0] < 0 or A[-1] > 1:
            raise ValueError("allocations must lie in [0, 1]")
        if T[0] < 0:
            raise ValueError("transfers must be nonnegative")
        if len(A) * len(T) > MAX_GRID_PRODUCT:
            raise ValueError(f"n_a * n_t = {len(A) * len(T)} exceeds {MAX_GRID_PRODUCT}")
        if not 1 <= self.k <= MAX_MENU_SIZE:
            raise ValueError(f"menu size k must be in 1..{MAX_MENU_SIZE}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "T", T)

    def outcomes(self):
        """All non-zero candidate outcomes, lexicographically sorted."""
        return [(a, t) for a in self.A for t in self.T if (a, t) != (0.0, 0.0)]

    def menus(self):
        """Every menu with (0, 0) and up to k-1 other outcomes, in lexicographic order."""
        others = self.outcomes()
        for size in range(self.k):
            for combo in itertools.combinations(others, size):
                yield ((0.0, 0.0),) + combo


def breakpoints(a, t, beta):
    """Sorted indifference values in (0, beta), with 0 and beta added."""
    a, t = np.asarray(a, float), np.asarray(t, float)
    i, j = np.triu_indices(a.size, 1)
    da, dt = a[i] - a[j], t[i] - t[j]
    ok = da != 0
    with np.errstate(over="ignore"):
        w = dt[ok] / da[ok]
    w = w[(w > 0) & (w < beta)]
    return np.unique(np.concatenate([[0.0, beta], w]))


def menu_cells(a, t, b, beta, eps=EPS_CH):
    """Rectangles of constant tr-max pair choice.

    Returns:
        lo1, hi1, lo2, hi2, idx: cell bounds (v1 then v2) and chosen outcome index,
        restricted to cells that meet the triangle v1 >= v2.
    """
    w = breakpoints(a, t, beta)
    m = w.size - 1
    p, q = np.tril_indices(m)  # p indexes v1 intervals, q indexes v2 intervals
    mid = 0.5 * (w[:-1] + w[1:])
    idx, principal = tr_max_batch(a, t, b, mid[p], mid[q], eps)
    return w[p], w[p + 1], w[q], w[q + 1], idx, principal


def menu_revenue(menu: Menu, d, eps=EPS_CH):
    """Exact expected transfer when each type takes its tr-max pair choice."""
    lo1, hi1, lo2, hi2, idx, _ = menu_cells(menu.a, menu.t, menu.budget, d.beta, eps)
    prob = d.rect_prob(lo1, hi1, lo2, hi2)
    return float(np.sum(menu.t[idx] * prob))


def menu_range(menu: Menu, d, eps=EPS_CH, min_prob=1e-14):
    """Outcomes chosen on a set of types with positive probability."""
    lo1, hi1, lo2, hi2, idx, _ = menu_cells(menu.a, menu.t, menu.budget, d.beta, eps)
    prob = d.rect_prob(lo1, hi1, lo2, hi2)
    used = np.unique(idx[prob > min_prob])
    return Menu.of(zip(menu.a[used], menu.t[used]), menu.budget)


@dataclass
class OracleResult:
    revenue: float
    menu: Menu
    n_menus: int
    route: str
    above: list = field(default_factory=list)  # (revenue, menu) pairs over the dump threshold

    def to_dict(self):
        return {
            "revenue": self.revenue,
            "menu": [list(o.as_tuple()) for o in self.menu],
            "n_menus": self.n_menus,
            "route": self.route,
        }


def best_menu_revenue(d, b, g: MenuGrid, type_grid_n=None, dump_threshold=None, eps=EPS_CH):
    """Enumerate every menu on ``g`` and keep the most profitable one.

    With ``type_grid_n`` the revenue of each menu is taken by trapezoid
    quadrature on a type grid instead of the exact cell partition. Ties keep the
    first menu in enumeration order.
    """
    if not any(t > 0 for t in g.T):
        warnings.warn("transfer grid has no positive transfer; revenue is zero",
                      DegenerateMenuGridWarning, stacklevel=2)
    if type_grid_n is None:
        def value(menu):
            return menu_revenue(menu, d, eps)
        route = "exact"
    else:
        grid = TypeGrid(type_grid_n, d.beta)
        weights = grid.weights() * d.joint_pdf(grid.v1, grid.v2)
        v1, v2 = grid.v1, grid.v2

        def value(menu):
            idx, _ = tr_max_batch(menu.a, menu.t, menu.budget, v1, v2, eps)
            return float(np.sum(weights * menu.t[idx]))
        route = f"grid-{type_grid_n}"

    best_rev, best_menu, count, above = -np.inf, None, 0, []
    for pairs in g.menus():
        menu = Menu.of(pairs, b)
        rev = value(menu)
        count += 1
        if rev > best_rev + 1e-13:
            best_rev, best_menu = rev, menu
        if dump_threshold is not None and rev >= dump_threshold:
            above.append((rev, menu))
    return OracleResult(float(best_rev), best_menu, count, route, above)


# --- partition upper bound -----------------------------------------------------


@dataclass(frozen=True)
class BoundReport:
    kappa: float
    q_base: float
    p_base: float
    q_dagger: float
    bound_Vl: float
    bound_Vm: float
    bound_Vh: float
    kappa2_star: float
    actual: float
    tol: float = 1e-6

    @property
    def bound_total(self):
        return self.bound_Vl + self.bound_Vm + self.bound_Vh

    @property
    def holds(self):
        return self.actual <= self.bound_total + self.tol

    @property
    def gap(self):
        return self.bound_total - self.actual

    def to_dict(self):
        return {
            "kappa": self.kappa, "q_base": self.q_base, "p_base": self.p_base,
            "q_dagger": self.q_dagger, "bound_Vl": self.bound_Vl, "bound_Vm": self.bound_Vm,
            "bound_Vh": self.bound_Vh, "kappa2_star": self.kappa2_star,
            "bound_total": self.bound_total, "actual": self.actual, "holds": self.holds,
        }


def _exact_range_and_revenue(m: GridMechanism, d, eps):
    src = m.source
    if isinstance(src, (Post1Spec, Post2Spec)):
        menu = src.menu()
        return menu_range(menu, d, eps), src.revenue(d)
    if isinstance(src, Menu):
        return menu_range(src, d, eps), menu_revenue(src, d, eps)
    rng = m.range()
    return Menu.of(map(tuple, rng), m.budget), m.grid.integrate(m.t, d)


def appendix_upper_bound(m: GridMechanism, d, eps=EPS_CH, tol=1e-6):
    """Upper bound on revenue built from the type at the payment threshold.

    The type space is split at the threshold kappa into agents below it (bounded
    by a single lottery at price b), types whose principal value exceeds it
    (lottery plus an optimally priced top-up), and the rest (at most b each).
    """
    report = check_ic_ir(m)
    if not report.ok:
        raise ValueError(f"mechanism is not IC and IR: {report.reason}")
    rng, actual = _exact_range_and_revenue(m, d, eps)
    b, beta = m.budget, m.beta
    if not np.any(rng.t > b):
        raise InapplicableError("no payment exceeds the budget; the POST-1 bound applies")
    kappa = payment_threshold(rng.a, rng.t, b, beta, eps=eps)
    # outcome of the boundary type (kappa, 0): the agent's tr-max budget choice at kappa
    own, _ = choice_masks(rng.a, rng.t, b, [kappa], [0.0], eps)
    cand = np.flatnonzero(own[0])
    k = cand[np.lexsort((rng.a[cand], rng.t[cand]))[-1]]
    q0, p0 = float(rng.a[k]), float(rng.t[k])
    q_dag = min(max(q0 + (b - p0) / kappa, 0.0), 1.0)

    F1, F2 = (lambda x: float(d.cdf(1, x))), (lambda x: float(d.cdf(2, x)))
    cut = b / q_dag if q_dag > 0 else np.inf
    bound_l = b * (F1(kappa) - F1(cut)) if cut < kappa else 0.0
    bound_m = b * max(F2(kappa) - F1(kappa), 0.0)
    k2, top = argmax_on_interval(lambda x: x * (1.0 - d.cdf(2, x)), kappa, beta)
    bound_h = b * (1.0 - F2(kappa)) + (1.0 - q_dag) * top
    return BoundReport(kappa, q0, p0, q_dag, bound_l, bound_m, bound_h, k2, float(actual), tol)


def verify_monotonicity(m: GridMechanism, eps=EPS_CH, tol=1e-9, limit=100):
    """Pairs of types where a higher deciding value gets a lower allocation or transfer.

    Types are grouped by who decides (agent: value v1 on the budget set;
    principal: value v2 on the full range) and compared within each group.
    """
    rng = m.range()
    if rng.shape[0] == 1:
        return []
    _, principal = tr_max_batch(rng[:, 0], rng[:, 1], m.budget, m.grid.v1, m.grid.v2, eps)
    v1, v2 = m.grid.v1, m.grid.v2
    out = []
    for flag in (False, True):
        sel = np.flatnonzero(principal == flag)
        if sel.size < 2:
            continue
        w = (v2 if flag else v1)[sel]
        order = np.lexsort((m.t[sel], m.a[sel], w))
        sel, w = sel[order], w[order]
        # compare each value level against the running max of all lower levels
        starts = np.flatnonzero(np.r_[True, np.diff(w) > 0])
        best_a = best_t = -np.inf
        arg_a = arg_t = None
        for s, e in zip(starts, np.r_[starts[1:], sel.size]):
            block = sel[s:e]
            for c in block:
                if m.a[c] < best_a - tol:
                    out.append(((v1[arg_a], v2[arg_a]), (v1[c], v2[c]), "a", best_a - m.a[c]))
                if m.t[c] < best_t - tol:
                    out.append(((v1[arg_t], v2[arg_t]), (v1[c], v2[c]), "t", best_t - m.t[c]))
                if len(out) >= limit:
                    return out
            ia = block[np.argmax(m.a[block])]
            it = block[np.argmax(m.t[block])]
            if m.a[ia] > best_a:
                best_a, arg_a = m.a[ia], ia
            if m.t[it] > best_t:
                best_t, arg_t = m.t[it], it
    return out


partition_upper_bound = appendix_upper_bound
