"""Command-line entry point: ``postmech {solve,check,sweep,oracle,regions,reveal}``.

Exit codes: 0 ok, 1 property failure (IC, equilibrium, bound), 2 usage or
invalid config, 3 invalid data (density, CSV contents).
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import io
import json
import sys
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .choice import EPS_CH
from .dist import DistributionError, DomainError, check_regularity, from_dict
from .mech import EPS_IC, GridMechanism, SpecError, check_ic_ir, instantiate, spec_from_dict
from .oracle import DegenerateMenuGridWarning, MenuGrid, best_menu_revenue
from .reveal import IndirectMechanism, NotEquilibriumError, Strategy, to_direct
from .solve import ROOT_TOL, solve

EXIT_OK, EXIT_PROPERTY, EXIT_USAGE, EXIT_DATA = 0, 1, 2, 3


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


@dataclass
class Grids:
    type_n: int = 400
    menu_a_n: int = 6
    menu_t_n: int = 10
    menu_k: int = 3


@dataclass
class Tolerances:
    eps_ch: float = EPS_CH
    eps_ic: float = EPS_IC
    root_tol: float = ROOT_TOL


@dataclass
class Config:
    distribution: dict = field(default_factory=lambda: {"kind": "order-stat", "G": {"family": "uniform", "param": 1.0}})
    budget: float = 0.25
    beta: float = 1.0
    grids: Grids = field(default_factory=Grids)
    tolerances: Tolerances = field(default_factory=Tolerances)
    seed: int = 0
    mechanism: dict | None = None
    oracle: dict | None = None  # optional explicit {"A": [...], "T": [...], "k": n}

    def validate(self):
        tol = self.tolerances
        if min(tol.eps_ch, tol.eps_ic, tol.root_tol) <= 0:
            raise UsageError("all tolerances must be positive")
        if self.beta <= 0 or not (0.0 <= self.budget <= self.beta):
            raise UsageError(f"need 0 <= budget <= beta, got budget={self.budget}, beta={self.beta}")
        if self.grids.type_n < 2:
            raise UsageError("grids.type_n must be at least 2")
        return self

    def to_dict(self):
        return dataclasses.asdict(self)

    def digest(self):
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    @classmethod
    def from_dict(cls, raw):
        raw = dict(raw)
        known = {f.name for f in dataclasses.fields(cls)}
        extra = set(raw) - known
        if extra:
            raise UsageError(f"unknown config keys: {sorted(extra)}")
        try:
            grids = Grids(**raw.pop("grids", {}))
            tols = Tolerances(**raw.pop("tolerances", {}))
            cfg = cls(grids=grids, tolerances=tols, **raw)
            cfg.budget, cfg.beta, cfg.seed = float(cfg.budget), float(cfg.beta), int(cfg.seed)
        except (TypeError, ValueError) as exc:
            raise UsageError(f"invalid config: {exc}") from None
        return cfg


def load_config(args):
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from None
        except json.JSONDecodeError as exc:
            raise UsageError(f"config is not valid JSON: {exc}") from None
        cfg = Config.from_dict(raw)
    else:
        cfg = Config()
    if args.grid_n is not None:
        cfg.grids.type_n = args.grid_n
    if args.seed is not None:
        cfg.seed = args.seed
    if args.budget is not None:
        cfg.budget = args.budget
    return cfg.validate()


def distribution(cfg):
    block = dict(cfg.distribution)
    block.setdefault("beta", cfg.beta)
    return from_dict(block)


# --- output helpers -------------------------------------------------------------


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if np.isfinite(x) else str(x)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def emit_json(doc, cfg, out):
    doc = {**_clean(doc), "config_hash": cfg.digest(), "version": __version__}
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    _write(text, out)


def _write(text, out):
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def fmt(x):
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    return f"{float(x):.17g}"


def emit_csv(header, rows, out):
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(fmt(x) for x in row) + "\n")
    _write(buf.getvalue(), out)


def _mechanism(cfg, args):
    """GridMechanism from --mechanism-file, else from the config's mechanism block."""
    path = getattr(args, "mechanism_file", None)
    block = cfg.mechanism
    if path is None and block and block.get("type") == "grid":
        path = block.get("file")
    if path is not None:
        try:
            return GridMechanism.from_csv(path, cfg.budget, cfg.beta)
        except OSError as exc:
            raise UsageError(f"cannot read mechanism file: {exc}") from None
        except SpecError as exc:
            raise DataError(str(exc)) from None
    if not block:
        raise UsageError("no mechanism given: set 'mechanism' in the config or pass --mechanism-file")
    spec = spec_from_dict(block, cfg.budget, cfg.beta)
    return instantiate(spec, cfg.grids.type_n)


# --- commands -----------------------------------------------------------------


def cmd_solve(cfg, args):
    d = distribution(cfg)
    report = check_regularity(d)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        rep = solve(d, cfg.budget, report, root_tol=cfg.tolerances.root_tol)
    doc = rep.to_dict()
    doc["warnings"] = [str(w.message) for w in caught]
    emit_json(doc, cfg, args.out)
    return EXIT_OK


def cmd_check(cfg, args):
    m = _mechanism(cfg, args)
    rep = check_ic_ir(m, eps_ic=cfg.tolerances.eps_ic, eps=cfg.tolerances.eps_ch)
    doc = rep.to_dict()
    if m.source is not None and hasattr(m.source, "to_dict"):
        doc["mechanism"] = m.source.to_dict()
    emit_json(doc, cfg, args.out)
    return EXIT_OK if rep.ok else EXIT_PROPERTY


def cmd_sweep(cfg, args):
    lo, hi, steps = args.b_min, args.b_max, args.steps
    if not (0.0 <= lo <= hi <= cfg.beta):
        raise UsageError("need 0 <= b_min <= b_max <= beta")
    if lo == hi:
        budgets = np.array([lo])
    elif steps < 2:
        raise UsageError("steps must be at least 2")
    else:
        budgets = np.linspace(lo, hi, steps)
    d = distribution(cfg)
    report = check_regularity(d)
    rows = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for b in budgets:
            rep = solve(d, float(b), report, root_tol=cfg.tolerances.root_tol)
            opt = rep.optimal
            rows.append((float(b), rep.regime, rep.best_post1.revenue, rep.best_post2.revenue,
                         opt.kappa1, getattr(opt, "kappa2", None)))
    emit_csv(["b", "regime", "rev_post1", "rev_post2", "k1", "k2"], rows, args.out)
    return EXIT_OK


def default_menu_grid(cfg, d):
    """Grids holding the optimal POST-2 outcomes plus seeded filler points."""
    g = cfg.grids
    block = cfg.oracle or {}
    k = int(block.get("k", g.menu_k))
    if "A" in block and "T" in block:
        return MenuGrid(tuple(block["A"]), tuple(block["T"]), k)
    b = cfg.budget
    rng = np.random.default_rng(cfg.seed)
    A, T = {0.0, 1.0}, {0.0}
    if 0 < b < cfg.beta:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            spec = solve(d, b).best_post2.spec
        A.add(spec.q)
        T.update({b, spec.top_price})
    else:
        T.add(b)
    while len(A) < g.menu_a_n:
        A.add(round(float(rng.uniform(0, 1)), 3))
    while len(T) < g.menu_t_n:
        T.add(round(float(rng.uniform(0, cfg.beta)), 3))
    return MenuGrid(tuple(A), tuple(T), k)


def cmd_oracle(cfg, args):
    d = distribution(cfg)
    try:
        g = default_menu_grid(cfg, d)
        if args.k is not None:
            g = MenuGrid(g.A, g.T, args.k)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", DegenerateMenuGridWarning)
        res = best_menu_revenue(d, cfg.budget, g, dump_threshold=args.dump_threshold)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        post2 = solve(d, cfg.budget).best_post2.revenue
    doc = res.to_dict()
    doc.update({"A": list(g.A), "T": list(g.T), "k": g.k, "post2_revenue": post2,
                "gap_vs_post2": res.revenue - post2,
                "warnings": [str(w.message) for w in caught]})
    print(f"oracle {res.revenue:.6f} vs post2 {post2:.6f} (gap {res.revenue - post2:+.2e})",
          file=sys.stderr)
    if args.dump_csv:
        rows = [(r, ";".join(f"{o.a:.17g}:{o.t:.17g}" for o in m)) for r, m in res.above]
        emit_csv(["revenue", "menu"], rows, args.dump_csv)
    emit_json(doc, cfg, args.out)
    return EXIT_OK


def cmd_regions(cfg, args):
    m = _mechanism(cfg, args)
    rep = check_ic_ir(m, eps_ic=cfg.tolerances.eps_ic, eps=cfg.tolerances.eps_ch)
    dec = np.where(rep.principal, "principal", "agent")
    rows = zip(m.grid.v1, m.grid.v2, m.a, m.t, dec)
    emit_csv(["v1", "v2", "a", "t", "decider"], rows, args.out)
    return EXIT_OK


def cmd_reveal(cfg, args):
    try:
        with open(args.indirect, encoding="utf-8") as fh:
            im = IndirectMechanism.from_dict(json.load(fh), cfg.budget)
        s = Strategy.from_csv(args.strategy, cfg.beta)
    except OSError as exc:
        raise UsageError(str(exc)) from None
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        raise DataError(f"bad indirect mechanism or strategy: {exc}") from None
    try:
        m = to_direct(im, s, cfg.tolerances.eps_ic, cfg.tolerances.eps_ch)
    except NotEquilibriumError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_PROPERTY
    except ValueError as exc:
        raise DataError(str(exc)) from None
    _write(m.csv_text(), args.out)
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "check": cmd_check, "sweep": cmd_sweep,
            "oracle": cmd_oracle, "regions": cmd_regions, "reveal": cmd_reveal}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--out", help="write output here instead of stdout")
    common.add_argument("--grid-n", type=int, help="type grid resolution")
    common.add_argument("--seed", type=int, help="seed for randomised grids")
    common.add_argument("--budget", type=float, help="override the config budget")

    p = argparse.ArgumentParser(prog="postmech",
                                description="Optimal posted-price mechanisms with a budget-constrained agent.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common], help="optimal POST-1/POST-2 and regime")
    c = sub.add_parser("check", parents=[common], help="IC/IR check of a mechanism")
    c.add_argument("--mechanism-file", help="CSV with v1,v2,a,t rows")
    s = sub.add_parser("sweep", parents=[common], help="solve over a range of budgets")
    s.add_argument("--b-min", type=float, default=0.0)
    s.add_argument("--b-max", type=float, default=1.0)
    s.add_argument("--steps", type=int, default=101)
    o = sub.add_parser("oracle", parents=[common], help="brute-force best menu")
    o.add_argument("--k", type=int, help="maximum menu size")
    o.add_argument("--dump-csv", help="write menus with revenue above --dump-threshold")
    o.add_argument("--dump-threshold", type=float)
    r = sub.add_parser("regions", parents=[common], help="per-cell outcome and decider")
    r.add_argument("--mechanism-file", help="CSV with v1,v2,a,t rows")
    v = sub.add_parser("reveal", parents=[common], help="direct mechanism from an equilibrium")
    v.add_argument("--indirect", required=True, help="JSON with messages and outcomes")
    v.add_argument("--strategy", required=True, help="CSV with v1,v2,message rows")
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args)
        return COMMANDS[args.command](cfg, args)
    except (UsageError, SpecError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, DistributionError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
