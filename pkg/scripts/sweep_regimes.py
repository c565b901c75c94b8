"""Budget sweep of POST-1 vs POST-2 revenue, optionally for several generator families."""
from __future__ import annotations

import argparse
import csv
import sys
import warnings

import numpy as np

from postmech.dist import Generator, OrderStatistic, check_regularity
from postmech.solve import classify_regime_thm5, solve


def sweep(d, budgets):
    rep = check_regularity(d)
    for b in budgets:
        r = solve(d, float(b), rep)
        case = classify_regime_thm5(d, float(b), rep, r.best_post2) if b < rep.kappa_tilde_1 else None
        opt = r.optimal
        yield {
            "b": float(b),
            "regime": r.regime,
            "classification": r.classification,
            "case": case.case if case else "",
            "rev_post1": r.best_post1.revenue,
            "rev_post2": r.best_post2.revenue,
            "k1": opt.kappa1,
            "k2": getattr(opt, "kappa2", ""),
        }


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--family", choices=["uniform", "power"], default="uniform")
    ap.add_argument("--params", type=float, nargs="+", default=[1.0])
    ap.add_argument("--steps", type=int, default=101)
    ap.add_argument("--out", help="CSV path (default stdout)")
    args = ap.parse_args()

    warnings.simplefilter("ignore")
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    writer = None
    for p in args.params:
        d = OrderStatistic(Generator(args.family, p))
        for row in sweep(d, np.linspace(0, 1, args.steps)):
            row = {"param": p, **row}
            if writer is None:
                writer = csv.DictWriter(fh, fieldnames=list(row))
                writer.writeheader()
            writer.writerow(row)
    if args.out:
        fh.close()


if __name__ == "__main__":
    main()
