"""Outcomes, menus and the two-stage agent/principal choice correspondence.

Scalar choice picks the utility-maximising outcomes for a single value v
(utility v*a - t). Pair choice models an agent with value v1 who can only
afford transfers up to the budget b, but may hand the decision to a principal
with value v2 who faces no budget; she does so only when every outcome the
principal would pick is at least as good for her as her own picks, and one is
strictly better.

The scalar functions here are the reference implementation. The ``*_batch``
functions evaluate the same rules for many types at once and are what the
mechanism and oracle code use on grids.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable

import numpy as np

EPS_CH = 1e-9


class EmptyBudgetSetError(ValueError):
    """The menu has no outcome the agent can afford; (0, 0) is missing."""


@dataclass(frozen=True, order=True)
class Outcome:
    """Allocation probability ``a`` in [0, 1] and transfer ``t``."""

    a: float
    t: float

    def __post_init__(self):
        if not (0.0 <= self.a <= 1.0):
            raise ValueError(f"allocation {self.a} outside [0, 1]")
        if not np.isfinite(self.t):
            raise ValueError("transfer must be finite")

    def utility(self, v):
        return v * self.a - self.t

    def as_tuple(self):
        return (self.a, self.t)


ZERO = Outcome(0.0, 0.0)


@dataclass(frozen=True)
class TypePoint:
    v1: float
    v2: float
    beta: float = 1.0

    def __post_init__(self):
        if not (0.0 <= self.v2 <= self.v1 <= self.beta):
            raise ValueError(f"type ({self.v1}, {self.v2}) outside the triangle")


def _as_outcome(o):
    return o if isinstance(o, Outcome) else Outcome(float(o[0]), float(o[1]))


@dataclass(frozen=True)
class Menu:
    """Finite set of outcomes plus the agent's budget.

    Outcomes are stored sorted and without exact duplicates, so two menus with
    the same content compare equal.
    """

    outcomes: tuple
    budget: float = 0.0
    _arrays: tuple = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        outs = tuple(sorted({_as_outcome(o) for o in self.outcomes}))
        if not outs:
            raise ValueError("menu must be non-empty")
        if self.budget < 0:
            raise ValueError("budget must be nonnegative")
        object.__setattr__(self, "outcomes", outs)
        a = np.array([o.a for o in outs])
        t = np.array([o.t for o in outs])
        object.__setattr__(self, "_arrays", (a, t))

    @classmethod
    def of(cls, pairs: Iterable, budget=0.0):
        return cls(tuple(pairs), float(budget))

    @property
    def a(self):
        return self._arrays[0]

    @property
    def t(self):
        return self._arrays[1]

    def __len__(self):
        return len(self.outcomes)

    def __iter__(self):
        return iter(self.outcomes)

    def budget_set(self):
        return tuple(o for o in self.outcomes if o.t <= self.budget)


class Dominance(str, Enum):
    STRICT = "strict"
    WEAK_ONLY = "weak-only"
    NO = "no"


class Decider(str, Enum):
    AGENT = "agent"
    PRINCIPAL = "principal"


def _best(outcomes, v, eps):
    utils = [o.utility(v) for o in outcomes]
    top = max(utils)
    return frozenset(o for o, u in zip(outcomes, utils) if u >= top - eps)


def scalar_choice(m: Menu, v, restrict_to_budget=False, eps=EPS_CH):
    """Outcomes within ``eps`` of the best utility ``v*a - t``."""
    pool = m.budget_set() if restrict_to_budget else m.outcomes
    if not pool:
        raise EmptyBudgetSetError("no outcome within budget; the menu lacks (0, 0)")
    return _best(pool, v, eps)


def dominates(A, B, v, eps=EPS_CH):
    """Compare two outcome sets from the point of view of value ``v``."""
    if not A or not B:
        raise ValueError("dominance needs non-empty sets")
    gaps = [x.utility(v) - y.utility(v) for x in A for y in B]
    if min(gaps) < -eps:
        return Dominance.NO
    return Dominance.STRICT if max(gaps) > eps else Dominance.WEAK_ONLY


def pair_choice(m: Menu, v: TypePoint, eps=EPS_CH):
    """The agent's realised choice set and who made the decision."""
    own = scalar_choice(m, v.v1, restrict_to_budget=True, eps=eps)
    delegated = scalar_choice(m, v.v2, eps=eps)
    if dominates(delegated, own, v.v1, eps) is Dominance.STRICT:
        return delegated, Decider.PRINCIPAL
    return own, Decider.AGENT


def tr_max(choices, v):
    """Transfer-maximal element of a choice set.

    Transfer ties can only arise at v = 0 (or within eps); they break toward
    the smallest allocation at v = 0 and the largest otherwise.
    """
    if v == 0:
        return max(choices, key=lambda o: (o.t, -o.a))
    return max(choices, key=lambda o: (o.t, o.a))


def tr_max_choice(m: Menu, v: TypePoint, eps=EPS_CH):
    """Single outcome chosen when every scalar choice is refined to its tr-max element."""
    own = tr_max(scalar_choice(m, v.v1, restrict_to_budget=True, eps=eps), v.v1)
    delegated = tr_max(scalar_choice(m, v.v2, eps=eps), v.v2)
    if delegated.utility(v.v1) > own.utility(v.v1) + eps:
        return delegated
    return own


# --- vectorised versions -------------------------------------------------


def _masked_best(u, mask, eps):
    u = np.where(mask, u, -np.inf)
    top = u.max(axis=1, keepdims=True)
    return u >= top - eps


def choice_masks(a, t, b, v1, v2, eps=EPS_CH):
    """Scalar choice masks for many types.

    Args:
        a, t: outcome arrays of length K.
        b: budget.
        v1, v2: type arrays of length N.

    Returns:
        (own, delegated) boolean arrays of shape (N, K): Ch(X_b; v1) and Ch(X; v2).
    """
    a = np.asarray(a, float)[None, :]
    t = np.asarray(t, float)[None, :]
    v1 = np.asarray(v1, float)[:, None]
    v2 = np.asarray(v2, float)[:, None]
    affordable = np.broadcast_to(t <= b, (v1.shape[0], a.shape[1]))
    if not affordable[0].any():
        raise EmptyBudgetSetError("no outcome within budget; the menu lacks (0, 0)")
    own = _masked_best(v1 * a - t, affordable, eps)
    delegated = _masked_best(v2 * a - t, np.ones_like(affordable), eps)
    return own, delegated


def pair_choice_batch(a, t, b, v1, v2, eps=EPS_CH):
    """Pair choice for many types.

    Returns:
        (chosen, principal): chosen is an (N, K) mask, principal an (N,) flag
        that is True where the principal's set strictly dominates.
    """
    own, delegated = choice_masks(a, t, b, v1, v2, eps)
    u1 = np.asarray(v1, float)[:, None] * np.asarray(a, float)[None, :] - np.asarray(t, float)[None, :]
    d_lo = np.where(delegated, u1, np.inf).min(axis=1)
    d_hi = np.where(delegated, u1, -np.inf).max(axis=1)
    o_lo = np.where(own, u1, np.inf).min(axis=1)
    o_hi = np.where(own, u1, -np.inf).max(axis=1)
    principal = (d_lo - o_hi >= -eps) & (d_hi - o_lo > eps)
    chosen = np.where(principal[:, None], delegated, own)
    return chosen, principal


def _tr_max_index(mask, a, t, v):
    a = np.asarray(a, float)[None, :]
    t = np.asarray(t, float)[None, :]
    tie_dir = np.where(np.asarray(v)[:, None] == 0, -1.0, 1.0)
    # two passes: highest transfer, then the allocation tie-break
    t_masked = np.where(mask, t, -np.inf)
    top_t = t_masked.max(axis=1, keepdims=True)
    at_top = mask & (t_masked >= top_t)
    key = np.where(at_top, tie_dir * a, -np.inf)
    return key.argmax(axis=1)


def tr_max_batch(a, t, b, v1, v2, eps=EPS_CH):
    """Index of the tr-max pair choice for each type, plus the principal flag."""
    own, delegated = choice_masks(a, t, b, v1, v2, eps)
    v1 = np.asarray(v1, float)
    v2 = np.asarray(v2, float)
    i_own = _tr_max_index(own, a, t, v1)
    i_del = _tr_max_index(delegated, a, t, v2)
    a = np.asarray(a, float)
    t = np.asarray(t, float)
    u_del = v1 * a[i_del] - t[i_del]
    u_own = v1 * a[i_own] - t[i_own]
    principal = u_del > u_own + eps
    return np.where(principal, i_del, i_own), principal
