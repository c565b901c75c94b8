"""Revenue-optimal POST-1 and POST-2 mechanisms for a given prior and budget."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from ._search import all_roots, argmax_on_interval
from .dist import DomainError, RegularityReport, check_regularity
from .mech import Post1Spec, Post2Spec

TIE_TOL = 1e-9
ROOT_TOL = 1e-12


class RegularityWarning(UserWarning):
    """x(1 - F1(x)) is not concave, so only the grid search is trusted."""


@dataclass(frozen=True)
class Post1Result:
    spec: Post1Spec
    revenue: float


@dataclass(frozen=True)
class Post2Result:
    spec: Post2Spec | None
    revenue: float
    source: str  # which candidate won: collapse / uniform-root / interior / boundary / grid
    grid_revenue: float
    candidates: list = field(default_factory=list)

    @property
    def shape(self):
        """Geometry of the optimum: collapse, uniform, interior or boundary."""
        s = self.spec
        if s is None:
            return "infeasible"
        tol = 1e-9
        if abs(s.kappa1 - s.kappa2) <= tol:
            return "collapse" if abs(s.kappa1 - s.budget) <= tol else "uniform"
        if s.kappa1 > s.budget + tol and s.kappa2 < s.beta - tol:
            return "interior"
        return "boundary"


@dataclass
class SolveReport:
    budget: float
    regime: str
    best_post1: Post1Result
    best_post2: Post2Result
    classification: str
    foc_residuals: dict
    diagnostics: RegularityReport
    threshold_consistent: bool
    notes: list = field(default_factory=list)

    @property
    def optimal(self):
        """The recommended mechanism; revenue ties go to POST-1."""
        if self.regime == "post2-optimal":
            return self.best_post2.spec
        return self.best_post1.spec

    def to_dict(self):
        p1, p2 = self.best_post1, self.best_post2
        return {
            "budget": self.budget,
            "regime": self.regime,
            "optimal": self.optimal.to_dict(),
            "best_post1": {**p1.spec.to_dict(), "revenue": p1.revenue},
            "best_post2": None if p2.spec is None else {
                **p2.spec.to_dict(), "revenue": p2.revenue, "source": p2.source,
                "shape": p2.shape, "grid_revenue": p2.grid_revenue},
            "k1": self.optimal.kappa1,
            "k2": getattr(self.optimal, "kappa2", None),
            "classification": self.classification,
            "foc_residuals": self.foc_residuals,
            "threshold_consistent": self.threshold_consistent,
            "regularity": self.diagnostics.to_dict(),
            "notes": list(self.notes),
        }


# --- revenue functions -----------------------------------------------------


def post1_revenue(d, k1):
    k1 = np.asarray(k1, float)
    return k1 * (1.0 - d.cdf(1, k1))


def post2_revenue(d, b, k1, k2):
    """Expected POST-2 revenue, vectorised over (k1, k2)."""
    k1, k2 = np.broadcast_arrays(np.asarray(k1, float), np.asarray(k2, float))
    with np.errstate(divide="ignore", invalid="ignore"):
        rest = np.where(k1 > 0, 1.0 - b / k1, 0.0)
    return b * (1.0 - d.cdf(1, k1)) + rest * k2 * (1.0 - d.cdf(2, k2))


def uniform_foc(d, b):
    """x f2 - (1 - F2) - b (f2 - f1): zero at an interior uniform-price optimum."""
    def fn(x):
        f1, f2 = d.pdf(1, x), d.pdf(2, x)
        return x * f2 - (1.0 - d.cdf(2, x)) - b * (f2 - f1)
    return fn


# --- optimisers --------------------------------------------------------------


def _check_budget(d, b):
    if not (0.0 <= b <= d.beta):
        raise DomainError(f"budget {b} outside [0, {d.beta}]")


def optimal_post1(d, b):
    """Best price in [0, b] for the agent alone."""
    _check_budget(d, b)
    if b == 0:
        return Post1Result(Post1Spec(0.0, 0.0, d.beta), 0.0)
    k, _ = argmax_on_interval(lambda x: post1_revenue(d, x), 0.0, b)
    k = min(max(k, 0.0), b)
    return Post1Result(Post1Spec(k, b, d.beta), float(post1_revenue(d, k)))


def _grid_post2(d, b, n=300, zooms=4):
    """Scan b <= k1 <= k2 <= beta, then zoom around the best cell."""
    beta = d.beta
    lo1 = b if b > 0 else beta / (10 * n)
    box = (lo1, beta, b, beta)
    best = (-np.inf, None, None)
    m = n
    for _ in range(zooms + 1):
        k1 = np.linspace(box[0], box[1], m)
        k2 = np.linspace(box[2], box[3], m)
        K1, K2 = np.meshgrid(k1, k2, indexing="ij")
        R = np.where(K1 <= K2, post2_revenue(d, b, K1, K2), -np.inf)
        # argmax on the flattened (k1, k2) array picks the lexicographically smallest tie
        i = int(np.argmax(R))
        r = float(R.flat[i])
        if r > best[0]:
            best = (r, float(K1.flat[i]), float(K2.flat[i]))
        _, c1, c2 = best
        h1 = 2 * (box[1] - box[0]) / (m - 1)
        h2 = 2 * (box[3] - box[2]) / (m - 1)
        box = (max(lo1, c1 - h1), min(beta, c1 + h1), max(b, c2 - h2), min(beta, c2 + h2))
        m = 61
    return best


def _post2_candidates(d, b, report, root_tol=ROOT_TOL):
    beta = d.beta
    cands = []

    def add(name, k1, k2):
        k1 = min(max(float(k1), b), beta)
        k2 = min(max(float(k2), k1), beta)
        if k1 <= 0:
            return
        cands.append((name, k1, k2, float(post2_revenue(d, b, k1, k2))))

    if b > 0:
        add("collapse", b, b)
    lo = max(b, 1e-12)
    for r in all_roots(uniform_foc(d, b), lo, beta, n=2000, xtol=root_tol):
        add("uniform-root", r, r)
    k2t = report.kappa_tilde_2
    if k2t > b:
        target = k2t * (1.0 - d.cdf(2, k2t))
        for r in all_roots(lambda x: x * x * d.pdf(1, x) - target, lo, k2t, n=2000, xtol=root_tol):
            add("interior", r, k2t)
    if b > 0:
        add("boundary", b, beta)
    add("boundary", beta, beta)
    return cands


def optimal_post2(d, b, report=None, grid_only=False, root_tol=ROOT_TOL, grid_n=300):
    """Best POST-2 prices: analytic candidates checked against a 2-D grid search."""
    _check_budget(d, b)
    if report is None:
        report = check_regularity(d)
    grid_rev, g1, g2 = _grid_post2(d, b, n=grid_n)
    if b >= d.beta:
        spec = Post2Spec(d.beta, d.beta, b, d.beta)
        return Post2Result(spec, 0.0, "boundary", 0.0, [("boundary", d.beta, d.beta, 0.0)])
    cands = [] if grid_only else _post2_candidates(d, b, report, root_tol)
    name, k1, k2, rev = max(cands, key=lambda c: c[3]) if cands else ("grid", g1, g2, -np.inf)
    if grid_rev > rev + 1e-10:
        name, k1, k2, rev = "grid", g1, g2, grid_rev
    return Post2Result(Post2Spec(k1, k2, b, d.beta), float(rev), name, float(grid_rev), cands)


def foc_residuals(d, spec: Post2Spec):
    """Residuals of the interior first-order conditions at ``spec``."""
    k1, k2 = spec.kappa1, spec.kappa2
    f2 = float(d.pdf(2, k2))
    tail2 = 1.0 - float(d.cdf(2, k2))
    return {
        "k2_virtual_value": abs(k2 - tail2 / f2) if f2 > 0 else float("inf"),
        "k2_scaled": abs(k2 * f2 - tail2),
        "k1_equation": abs(k1 * k1 * float(d.pdf(1, k1)) - k2 * tail2),
    }


def _regime(rev1, rev2, tol=TIE_TOL):
    if rev2 > rev1 + tol:
        return "post2-optimal"
    if rev1 > rev2 + tol:
        return "post1-optimal"
    return "tie"


def solve(d, b, report=None, root_tol=ROOT_TOL):
    """Optimal POST-1 and POST-2 mechanisms, regime and classification."""
    _check_budget(d, b)
    if report is None:
        report = check_regularity(d)
    notes = []
    grid_only = not report.concave_xF1
    if grid_only:
        warnings.warn("x(1-F1(x)) is not concave on the grid; using grid search only",
                      RegularityWarning, stacklevel=2)
        notes.append("concavity fails: analytic candidates skipped")
    p1 = optimal_post1(d, b)
    p2 = optimal_post2(d, b, report, grid_only=grid_only, root_tol=root_tol)
    regime = _regime(p1.revenue, p2.revenue)

    if not report.all_hold:
        classification = "none"
        notes.append("regularity hypotheses fail: unclassified")
    elif regime == "tie":
        classification = "none"
    elif regime == "post1-optimal":
        classification = "boundary-collapse"
    else:
        classification = "uniform" if report.ratio_at_kappa_tilde_2 <= 1 else "interior"

    # exact revenue ties (b = 0 makes k1 irrelevant) resolve toward the classified shape
    wanted = {"interior": "interior", "uniform": "uniform-root"}.get(classification)
    if wanted and p2.source != wanted:
        for name, k1, k2, rev in p2.candidates:
            if name == wanted and rev >= p2.revenue - 1e-12:
                p2 = Post2Result(Post2Spec(k1, k2, b, d.beta), rev, name, p2.grid_revenue,
                                 p2.candidates)
                break

    residuals = {}
    if p2.spec is not None and classification == "interior":
        residuals = foc_residuals(d, p2.spec)
        if p2.shape != "interior":
            notes.append(f"classified interior but optimum has shape {p2.shape}")
    elif p2.spec is not None and classification == "uniform":
        k = p2.spec.kappa1
        residuals = {"uniform_equation": abs(float(uniform_foc(d, b)(np.array([k]))[0]))
                     if k > b else None}
        if p2.shape not in ("uniform", "collapse"):
            notes.append(f"classified uniform but optimum has shape {p2.shape}")

    k1t = report.kappa_tilde_1
    if b < k1t:
        consistent = p2.revenue >= p1.revenue - TIE_TOL
    else:
        consistent = p1.revenue >= p2.revenue - TIE_TOL
    if not consistent:
        notes.append("threshold rule violated: check regularity diagnostics")
    return SolveReport(b, regime, p1, p2, classification, residuals, report, bool(consistent), notes)


# --- budget-regime cases -----------------------------------------------------


@dataclass(frozen=True)
class BudgetCase:
    case: str
    consistent: bool | None
    detail: dict


def density_ratio(d, x):
    with np.errstate(divide="ignore", invalid="ignore"):
        return float(d.pdf(1, x) / d.pdf(2, x))


def classify_regime_thm5(d, b, report=None, solved: Post2Result | None = None):
    """Which budget case applies, cross-checked against the optimiser.

    Case 1 predicts a uniform price above b that solves the uniform first-order
    equation; cases 2 and 3 predict the price collapses to b.
    """
    _check_budget(d, b)
    if report is None:
        report = check_regularity(d)
    k2t = report.kappa_tilde_2
    r_k2 = density_ratio(d, k2t)
    r_b = density_ratio(d, b) if b > 0 else 0.0
    detail = {"kappa_tilde_2": k2t, "ratio_at_kappa_tilde_2": r_k2, "ratio_at_b": r_b}
    if not report.all_hold or b >= report.kappa_tilde_1:
        return BudgetCase("none", None, detail)
    if b < k2t and r_k2 <= 1:
        case = "case1-uniform-interior-price"
    elif k2t <= b and r_k2 > 1:
        case = "case2-price-at-b"
    elif k2t <= b and r_k2 <= 1 < r_b:
        case = "case3-price-at-b"
    else:
        return BudgetCase("none", None, detail)

    if solved is None:
        solved = optimal_post2(d, b, report)
    collapse = float(post2_revenue(d, b, b, b)) if b > 0 else 0.0
    detail["post2_revenue"] = solved.revenue
    detail["collapse_revenue"] = collapse
    if case.startswith("case1"):
        k = solved.spec.kappa1
        res = abs(float(uniform_foc(d, b)(np.array([k]))[0]))
        detail["kappa_star"] = k
        detail["uniform_equation_residual"] = res
        ok = solved.shape == "uniform" and k > b and res <= 1e-8
    else:
        detail["kappa_star"] = b
        ok = solved.revenue <= collapse + TIE_TOL
    return BudgetCase(case, bool(ok), detail)


classify_budget_case = classify_regime_thm5
