"""From an indirect mechanism and an equilibrium strategy to an IC direct mechanism.

The direct mechanism offers the union of the choice sets the types face in
equilibrium and assigns each type its tr-max choice from that union. Each
type's transfer weakly rises, so revenue weakly rises too.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .choice import EPS_CH, Outcome, pair_choice_batch, tr_max_batch
from .mech import EPS_IC, GridMechanism, TypeGrid, ic_deficits


class NotEquilibriumError(ValueError):
    """The strategy does not pick a choice-set outcome for some type."""


@dataclass(frozen=True)
class IndirectMechanism:
    """Finite message space with an outcome per message."""

    messages: tuple
    outcomes: tuple  # Outcome per message, same order
    budget: float

    def __post_init__(self):
        if not self.messages:
            raise ValueError("message space must be non-empty")
        if len(self.messages) != len(self.outcomes):
            raise ValueError("one outcome per message required")
        if len(set(self.messages)) != len(self.messages):
            raise ValueError("duplicate messages")
        outs = tuple(o if isinstance(o, Outcome) else Outcome(float(o[0]), float(o[1]))
                     for o in self.outcomes)
        object.__setattr__(self, "messages", tuple(self.messages))
        object.__setattr__(self, "outcomes", outs)

    def lookup(self):
        return {m: i for i, m in enumerate(self.messages)}

    def range_arrays(self):
        """Distinct outcomes of the message space as (a, t) arrays."""
        rng = np.unique(np.array([o.as_tuple() for o in self.outcomes]), axis=0)
        return rng[:, 0], rng[:, 1]

    @classmethod
    def from_dict(cls, block, budget=None):
        b = float(block.get("budget", budget if budget is not None else 0.0))
        msgs = [str(m) for m in block["messages"]]
        raw = block["outcomes"]
        outs = [raw[m] for m in msgs] if isinstance(raw, dict) else list(raw)
        return cls(tuple(msgs), tuple(tuple(map(float, o)) for o in outs), b)

    def to_dict(self):
        return {"budget": self.budget, "messages": list(self.messages),
                "outcomes": {m: list(o.as_tuple()) for m, o in zip(self.messages, self.outcomes)}}


@dataclass(frozen=True)
class Strategy:
    """A message for every cell of a triangle type grid (row-major)."""

    grid: TypeGrid
    messages: tuple

    def __post_init__(self):
        if len(self.messages) != self.grid.size:
            raise ValueError(f"strategy covers {len(self.messages)} cells, grid has {self.grid.size}")
        object.__setattr__(self, "messages", tuple(self.messages))

    def outcome_arrays(self, im: IndirectMechanism):
        pos = im.lookup()
        try:
            idx = np.array([pos[m] for m in self.messages])
        except KeyError as exc:
            raise ValueError(f"strategy uses unknown message {exc}") from None
        a = np.array([o.a for o in im.outcomes])
        t = np.array([o.t for o in im.outcomes])
        return a[idx], t[idx]

    @classmethod
    def from_csv(cls, path, beta=None):
        """Read ``v1,v2,message`` rows covering a full triangle grid."""
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        if not rows:
            raise ValueError(f"{path}: no rows")
        v = np.array([[float(r["v1"]), float(r["v2"])] for r in rows])
        xs = np.unique(v)
        grid = TypeGrid(xs.size, float(xs[-1]) if beta is None else float(beta))
        if not np.allclose(xs, grid.x, atol=1e-9 * grid.beta) or len(rows) != grid.size:
            raise ValueError(f"{path}: rows do not cover an evenly spaced triangle grid")
        h = grid.beta / (grid.n - 1)
        i = np.rint(v[:, 0] / h).astype(int)
        j = np.rint(v[:, 1] / h).astype(int)
        pos = i * (i + 1) // 2 + j
        if np.any(j > i) or np.unique(pos).size != grid.size:
            raise ValueError(f"{path}: duplicate, missing or out-of-triangle cells")
        msgs = [None] * grid.size
        for p, r in zip(pos, rows):
            msgs[p] = r["message"]
        return cls(grid, tuple(msgs))


@dataclass(frozen=True)
class EquilibriumReport:
    ok: bool
    max_deficit: float
    worst_type: tuple


def is_equilibrium(im: IndirectMechanism, s: Strategy, eps_ic=EPS_IC, eps=EPS_CH):
    """Whether every type's message yields an outcome in its pair-choice set over the range."""
    ra, rt = im.range_arrays()
    a, t = s.outcome_arrays(im)
    v1, v2 = s.grid.v1, s.grid.v2
    deficit, _ = ic_deficits(ra, rt, im.budget, v1, v2, a, t, eps)
    w = int(np.argmax(deficit))
    return EquilibriumReport(bool(deficit[w] <= eps_ic), float(deficit[w]),
                             (float(v1[w]), float(v2[w])))


def chosen_union(a, t, b, v1, v2, eps=EPS_CH, chunk=1 << 22):
    """Indices of outcomes that are in some type's pair-choice set."""
    a, t = np.asarray(a, float), np.asarray(t, float)
    used = np.zeros(a.size, dtype=bool)
    step = max(1, chunk // max(a.size, 1))
    for s in range(0, len(v1), step):
        chosen, _ = pair_choice_batch(a, t, b, v1[s:s + step], v2[s:s + step], eps)
        used |= chosen.any(axis=0)
    return np.flatnonzero(used)


def to_direct(im: IndirectMechanism, s: Strategy, eps_ic=EPS_IC, eps=EPS_CH):
    """Direct mechanism assigning each type its tr-max choice from the equilibrium choice sets."""
    eq = is_equilibrium(im, s, eps_ic, eps)
    if not eq.ok:
        raise NotEquilibriumError(
            f"not an equilibrium: deficit {eq.max_deficit:.3g} at type {eq.worst_type}")
    ra, rt = im.range_arrays()
    v1, v2 = s.grid.v1, s.grid.v2
    keep = chosen_union(ra, rt, im.budget, v1, v2, eps)
    xa, xt = ra[keep], rt[keep]
    idx, _ = tr_max_batch(xa, xt, im.budget, v1, v2, eps)
    return GridMechanism(s.grid, xa[idx], xt[idx], im.budget,
                         source=IndirectMechanism(tuple(f"x{i}" for i in range(xa.size)),
                                                  tuple(zip(xa, xt)), im.budget))


def truthful(m: GridMechanism):
    """Read a direct mechanism as an indirect one where each type reports its outcome."""
    rng, inv = m.range_index()
    msgs = tuple(f"o{i}" for i in range(rng.shape[0]))
    im = IndirectMechanism(msgs, tuple(map(tuple, rng)), m.budget)
    return im, Strategy(m.grid, tuple(msgs[i] for i in inv))


def strategy_revenue(im: IndirectMechanism, s: Strategy, d):
    """Expected transfer of the indirect mechanism under ``s`` on its type grid."""
    _, t = s.outcome_arrays(im)
    return s.grid.integrate(t, d)
