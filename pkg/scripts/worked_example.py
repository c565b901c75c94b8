"""Uniform triangle at b = 0.25: optimal mechanisms, principal payoffs, bound and oracle."""
from __future__ import annotations

import argparse
import json
import warnings

from postmech.dist import check_regularity, uniform_triangle
from postmech.mech import check_ic_ir, instantiate, principal_payoff
from postmech.oracle import MenuGrid, appendix_upper_bound, best_menu_revenue
from postmech.solve import solve


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--budget", type=float, default=0.25)
    ap.add_argument("--grid-n", type=int, default=400)
    args = ap.parse_args()

    warnings.simplefilter("ignore")
    d = uniform_triangle()
    rep = solve(d, args.budget, check_regularity(d))
    spec = rep.best_post2.spec
    pay = principal_payoff(spec, d)
    m = instantiate(spec, args.grid_n)
    ic = check_ic_ir(m)
    out = {
        "regime": rep.regime,
        "classification": rep.classification,
        "post1": rep.best_post1.spec.to_dict() | {"revenue": rep.best_post1.revenue},
        "post2": spec.to_dict() | {"revenue": rep.best_post2.revenue,
                                   "lottery": spec.q, "top_price": spec.top_price},
        "principal_payoff": {"agent_region": pay.agent_region,
                             "principal_region": pay.principal_region, "total": pay.total},
        "ic_ok": ic.ok,
    }
    if args.budget < spec.kappa1:
        out["upper_bound"] = appendix_upper_bound(m, d).to_dict()
        g = MenuGrid((0, 0.5, spec.q, 1), (0, args.budget, spec.top_price, 0.5, 0.75), 3)
        orc = best_menu_revenue(d, args.budget, g)
        out["oracle"] = orc.to_dict()
    print(json.dumps(out, indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
