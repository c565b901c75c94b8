"""Posted-price mechanisms, tabulated direct mechanisms and their IC/IR check.

A direct mechanism assigns an outcome (q(v), p(v)) to each type. It is
incentive compatible when the assigned outcome is one the type would pick from
the mechanism's range under the pair-choice rule, and individually rational
when (0, 0) belongs to the range.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .choice import EPS_CH, Menu, choice_masks, pair_choice_batch, tr_max_batch

EPS_IC = 1e-7
DEFAULT_GRID_N = 400


class SpecError(ValueError):
    """Mechanism parameters violate their invariants."""


# --- type grid -------------------------------------------------------------


@dataclass(frozen=True)
class TypeGrid:
    """Triangle grid v1 = x_i, v2 = x_j with j <= i, stored row-major."""

    n: int
    beta: float = 1.0

    def __post_init__(self):
        if self.n < 2:
            raise SpecError("grid_n must be at least 2")
        if self.beta <= 0:
            raise SpecError("beta must be positive")

    @property
    def x(self):
        return np.linspace(0.0, self.beta, self.n)

    @property
    def index(self):
        i, j = np.tril_indices(self.n)
        return i, j

    @property
    def v1(self):
        return self.x[self.index[0]]

    @property
    def v2(self):
        return self.x[self.index[1]]

    @property
    def size(self):
        return self.n * (self.n + 1) // 2

    def weights(self):
        """Iterated trapezoid weights over the triangle (inner v2 in [0, v1])."""
        h = self.beta / (self.n - 1)
        i, j = self.index
        inner = np.where((j == 0) | (j == i), 0.5 * h, h)
        inner = np.where(i == 0, 0.0, inner)
        outer = np.where((i == 0) | (i == self.n - 1), 0.5 * h, h)
        return inner * outer

    def integrate(self, values, d):
        """Trapezoid integral of ``values * f`` over the triangle."""
        dens = d.joint_pdf(self.v1, self.v2)
        return float(np.sum(self.weights() * values * dens))


# --- parametric specs ------------------------------------------------------


@dataclass(frozen=True)
class Post1Spec:
    """Single price kappa1 <= b offered to the agent."""

    kappa1: float
    budget: float
    beta: float = 1.0

    def __post_init__(self):
        if not (0.0 <= self.kappa1 <= self.budget) or self.budget > self.beta:
            raise SpecError(f"post1 needs 0 <= k1 <= b <= beta, got k1={self.kappa1}, b={self.budget}")

    kind = "post1"

    def menu(self):
        return Menu.of([(0.0, 0.0), (1.0, self.kappa1)], self.budget)

    def outcomes(self, v1, v2):
        v1 = np.asarray(v1, float)
        sale = v1 > self.kappa1
        return np.where(sale, 1.0, 0.0), np.where(sale, self.kappa1, 0.0)

    def revenue(self, d):
        return float(self.kappa1 * (1.0 - d.cdf(1, self.kappa1)))

    def to_dict(self):
        return {"type": "post1", "k1": self.kappa1, "budget": self.budget}


@dataclass(frozen=True)
class Post2Spec:
    """Lottery (b/k1, b) for agents above k1, full sale once the principal's value tops k2."""

    kappa1: float
    kappa2: float
    budget: float
    beta: float = 1.0

    kind = "post2"

    def __post_init__(self):
        b, k1, k2 = self.budget, self.kappa1, self.kappa2
        if not (0.0 <= b <= k1 <= k2 <= self.beta):
            raise SpecError(f"post2 needs b <= k1 <= k2 <= beta, got b={b}, k1={k1}, k2={k2}")
        if k1 <= 0:
            raise SpecError("post2 needs k1 > 0")

    @property
    def q(self):
        return self.budget / self.kappa1

    @property
    def top_price(self):
        return self.budget + self.kappa2 * (1.0 - self.q)

    def menu(self):
        return Menu.of([(0.0, 0.0), (self.q, self.budget), (1.0, self.top_price)], self.budget)

    def outcomes(self, v1, v2, eps=EPS_CH):
        """Outcome per type; boundary types take the lottery.

        Full sale needs the principal to gain more than ``eps`` over the lottery,
        (1 - q)(v2 - k2) > eps, so that types inside the choice tolerance band
        are not assigned an outcome only a strict preference would select.
        """
        v1, v2 = np.broadcast_arrays(np.asarray(v1, float), np.asarray(v2, float))
        top = (1.0 - self.q) * (v2 - self.kappa2) > eps
        none = v1 < self.kappa1
        a = np.where(none, 0.0, np.where(top, 1.0, self.q))
        t = np.where(none, 0.0, np.where(top, self.top_price, self.budget))
        return a, t

    def revenue(self, d):
        b, k1, k2 = self.budget, self.kappa1, self.kappa2
        return float(b * (1.0 - d.cdf(1, k1)) + (1.0 - b / k1) * k2 * (1.0 - d.cdf(2, k2)))

    def to_dict(self):
        return {"type": "post2", "k1": self.kappa1, "k2": self.kappa2, "budget": self.budget}


def spec_from_dict(block, budget, beta=1.0):
    kind = block.get("type")
    try:
        if kind == "post1":
            return Post1Spec(float(block["k1"]), float(budget), float(beta))
        if kind == "post2":
            return Post2Spec(float(block["k1"]), float(block["k2"]), float(budget), float(beta))
    except KeyError as exc:
        raise SpecError(f"mechanism block missing {exc}") from None
    raise SpecError(f"unknown mechanism type {kind!r}")


# --- tabulated mechanisms --------------------------------------------------


@dataclass(frozen=True)
class GridMechanism:
    """Outcome per type-grid cell; ``source`` remembers the spec or menu it came from."""

    grid: TypeGrid
    a: np.ndarray
    t: np.ndarray
    budget: float
    source: object = field(default=None, compare=False)

    def __post_init__(self):
        a = np.asarray(self.a, float)
        t = np.asarray(self.t, float)
        if a.shape != (self.grid.size,) or t.shape != (self.grid.size,):
            raise SpecError("outcome arrays must match the grid size")
        if np.any((a < 0) | (a > 1)) or not np.all(np.isfinite(t)):
            raise SpecError("allocations must lie in [0, 1] and transfers be finite")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "t", t)

    @property
    def beta(self):
        return self.grid.beta

    def range(self):
        """Distinct outcomes as (K, 2) array, sorted lexicographically."""
        return np.unique(np.stack([self.a, self.t], axis=1), axis=0)

    def range_index(self):
        rng, inv = np.unique(np.stack([self.a, self.t], axis=1), axis=0, return_inverse=True)
        return rng, inv.ravel()

    def has_zero_outcome(self):
        return bool(np.any((self.a == 0.0) & (self.t == 0.0)))

    @classmethod
    def from_menu(cls, menu: Menu, grid_n=DEFAULT_GRID_N, beta=1.0, eps=EPS_CH):
        """Assign every grid type its tr-max pair choice from ``menu``."""
        grid = TypeGrid(grid_n, beta)
        idx, _ = tr_max_batch(menu.a, menu.t, menu.budget, grid.v1, grid.v2, eps)
        return cls(grid, menu.a[idx], menu.t[idx], menu.budget, source=menu)

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(self.csv_text())

    def csv_text(self):
        lines = ["v1,v2,a,t"]
        for row in zip(self.grid.v1, self.grid.v2, self.a, self.t):
            lines.append(",".join(f"{x:.17g}" for x in row))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, path, budget, beta=None):
        """Read ``v1,v2,a,t`` rows covering a full triangle grid."""
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        if not rows:
            raise SpecError(f"{path}: no rows")
        try:
            data = np.array([[float(r["v1"]), float(r["v2"]), float(r["a"]), float(r["t"])] for r in rows])
        except (KeyError, ValueError) as exc:
            raise SpecError(f"{path}: bad row ({exc})") from None
        return cls.from_rows(data, budget, beta)

    @classmethod
    def from_rows(cls, data, budget, beta=None):
        data = np.asarray(data, float)
        xs = np.unique(np.concatenate([data[:, 0], data[:, 1]]))
        n = xs.size
        beta = float(xs[-1]) if beta is None else float(beta)
        grid = TypeGrid(n, beta)
        if not np.allclose(xs, grid.x, atol=1e-9 * beta):
            raise SpecError("type values do not form an evenly spaced grid on [0, beta]")
        if data.shape[0] != grid.size:
            raise SpecError(f"expected {grid.size} rows for a {n}-point grid, got {data.shape[0]}")
        h = beta / (n - 1)
        i = np.rint(data[:, 0] / h).astype(int)
        j = np.rint(data[:, 1] / h).astype(int)
        if np.any(j > i):
            raise SpecError("rows with v2 > v1")
        pos = i * (i + 1) // 2 + j
        if np.unique(pos).size != grid.size:
            raise SpecError("duplicate or missing grid cells")
        a = np.empty(grid.size)
        t = np.empty(grid.size)
        a[pos], t[pos] = data[:, 2], data[:, 3]
        return cls(grid, a, t, float(budget))


def instantiate(spec, grid_n=DEFAULT_GRID_N):
    """Tabulate a parametric mechanism on the triangle grid."""
    grid = TypeGrid(grid_n, spec.beta)
    a, t = spec.outcomes(grid.v1, grid.v2)
    return GridMechanism(grid, a, t, spec.budget, source=spec)


# --- IC / IR -----------------------------------------------------------------


@dataclass
class ICReport:
    is_ic: bool
    ir: bool
    max_deficit: float
    worst_type: tuple | None
    principal: np.ndarray  # per-cell flag: principal decides
    kappa_hat: float
    reason: str = ""

    @property
    def ok(self):
        return self.is_ic and self.ir

    def to_dict(self):
        return {
            "is_ic": self.is_ic,
            "ir": self.ir,
            "ok": self.ok,
            "reason": self.reason,
            "max_deficit": self.max_deficit,
            "worst_type": list(self.worst_type) if self.worst_type else None,
            "principal_cells": int(np.count_nonzero(self.principal)),
            "kappa_hat": self.kappa_hat,
        }


def _pays_within_budget(a, t, b, w, eps):
    """True where every scalar choice at value ``w`` pays at most ``b``."""
    w = np.atleast_1d(np.asarray(w, float))
    mask, _ = choice_masks(a, t, np.inf, w, w, eps)
    return ~np.any(mask & (np.asarray(t)[None, :] > b), axis=1)


def payment_threshold(a, t, b, beta, n=400, eps=EPS_CH, xtol=1e-12):
    """Sup of values w whose scalar choices from the range all pay <= b.

    The indicator is monotone in w, so a grid scan brackets the switch and
    bisection narrows it down.
    """
    a, t = np.asarray(a, float), np.asarray(t, float)
    if not np.any(t > b):
        return float(beta)
    w = np.linspace(0.0, beta, n)
    ok = _pays_within_budget(a, t, b, w, eps)
    if ok.all():
        return float(beta)
    k = int(np.argmin(ok))
    if k == 0:
        return 0.0
    lo, hi = w[k - 1], w[k]
    while hi - lo > xtol:
        mid = 0.5 * (lo + hi)
        if _pays_within_budget(a, t, b, mid, eps)[0]:
            lo = mid
        else:
            hi = mid
    return float(0.5 * (lo + hi))


def ic_deficits(rng_a, rng_t, b, v1, v2, assigned_a, assigned_t, eps=EPS_CH, chunk=1 << 22):
    """Per-type utility shortfall of the assigned outcome versus the pair choice.

    The shortfall is measured at the decider's value. A type the agent decides
    for but who is assigned an unaffordable outcome gets ``inf``.

    Returns:
        (deficit, principal_flag)
    """
    n = len(v1)
    k = max(len(rng_a), 1)
    step = max(1, chunk // k)
    deficit = np.empty(n)
    principal = np.empty(n, dtype=bool)
    for s in range(0, n, step):
        sl = slice(s, s + step)
        chosen, prin = pair_choice_batch(rng_a, rng_t, b, v1[sl], v2[sl], eps)
        w = np.where(prin, v2[sl], v1[sl])
        u = w[:, None] * rng_a[None, :] - rng_t[None, :]
        best = np.where(chosen, u, -np.inf).max(axis=1)
        got = w * assigned_a[sl] - assigned_t[sl]
        d = np.maximum(best - got, 0.0)
        d = np.where(~prin & (assigned_t[sl] > b), np.inf, d)
        deficit[sl] = d
        principal[sl] = prin
    return deficit, principal


def check_ic_ir(m: GridMechanism, eps_ic=EPS_IC, eps=EPS_CH):
    """Check every grid type's assigned outcome against its pair choice from the range."""
    rng = m.range()
    ir = m.has_zero_outcome()
    empty = np.zeros(m.grid.size, dtype=bool)
    if not np.any(rng[:, 1] <= m.budget):
        return ICReport(False, ir, float("inf"), None, empty, 0.0,
                        "IR: (0,0) not in range; no affordable outcome")
    v1, v2 = m.grid.v1, m.grid.v2
    deficit, principal = ic_deficits(rng[:, 0], rng[:, 1], m.budget, v1, v2, m.a, m.t, eps)
    w = int(np.argmax(deficit))
    worst = float(deficit[w])
    is_ic = bool(worst <= eps_ic)
    kappa_hat = payment_threshold(rng[:, 0], rng[:, 1], m.budget, m.beta, eps=eps)
    reason = ""
    if not ir:
        reason = "IR: (0,0) not in range"
    elif not is_ic:
        reason = f"IC: deficit {worst:.3g} at type ({v1[w]:.6g}, {v2[w]:.6g})"
    return ICReport(is_ic, ir, worst, (float(v1[w]), float(v2[w]), worst), principal,
                    kappa_hat, reason)


# --- revenue and payoffs -----------------------------------------------------


def expected_revenue(m, d):
    """Closed form for POST specs, trapezoid quadrature of p(v) f(v) for grids."""
    if abs(m.beta - d.beta) > 1e-12:
        raise SpecError(f"mechanism beta {m.beta} differs from distribution beta {d.beta}")
    if isinstance(m, GridMechanism):
        return m.grid.integrate(m.t, d)
    return m.revenue(d)


@dataclass(frozen=True)
class PrincipalPayoff:
    principal_region: float
    agent_region: float

    @property
    def total(self):
        return self.principal_region + self.agent_region


def principal_payoff(spec: Post2Spec, d, epsabs=1e-10, epsrel=1e-9):
    """Principal's expected utility v2 q - p, split by who decides.

    The principal decides where v2 > k2; elsewhere the agent decides (types
    below k1 contribute nothing).
    """
    if not isinstance(spec, Post2Spec):
        raise SpecError("principal payoff is defined for post2 mechanisms")
    if abs(spec.beta - d.beta) > 1e-12:
        raise SpecError("beta mismatch")
    beta, k1, k2 = spec.beta, spec.kappa1, spec.kappa2
    q, b, top = spec.q, spec.budget, spec.top_price

    def dens(v1, v2):
        return float(d.joint_pdf(v1, v2))

    kw = {"epsabs": epsabs, "epsrel": epsrel}
    # dblquad integrates func(inner, outer): inner = v1, outer = v2
    prin, _ = integrate.dblquad(lambda v1, v2: (v2 - top) * dens(v1, v2),
                                k2, beta, lambda v2: v2, lambda v2: beta, **kw)
    agent, _ = integrate.dblquad(lambda v1, v2: (v2 * q - b) * dens(v1, v2),
                                 0.0, k2, lambda v2: max(k1, v2), lambda v2: beta, **kw)
    return PrincipalPayoff(float(prin), float(agent))
