"""Brute-force menu search against the POST-2 closed form over a set of budgets."""
from __future__ import annotations

import argparse
import time
import warnings

import numpy as np

from postmech.dist import uniform_triangle
from postmech.oracle import MenuGrid, best_menu_revenue
from postmech.solve import solve


def menu_grid(b, spec, k, seed, n_t=10):
    rng = np.random.default_rng(seed)
    A = {0.0, 0.25, 0.5, 0.75, 1.0, spec.q}
    T = {0.0, b, spec.top_price}
    while len(T) < n_t:
        T.add(round(float(rng.uniform(0, 1)), 3))
    return MenuGrid(tuple(A), tuple(T), k)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--budgets", type=float, nargs="+", default=[0.1, 0.25, 0.4])
    ap.add_argument("--k", type=int, nargs="+", default=[3, 4])
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    warnings.simplefilter("ignore")
    d = uniform_triangle()
    print("b,k,n_menus,oracle,post2,gap,seconds")
    for b in args.budgets:
        closed = solve(d, b).best_post2
        for k in args.k:
            g = menu_grid(b, closed.spec, k, args.seed)
            t0 = time.perf_counter()
            r = best_menu_revenue(d, b, g)
            dt = time.perf_counter() - t0
            print(f"{b},{k},{r.n_menus},{r.revenue:.10f},{closed.revenue:.10f},"
                  f"{r.revenue - closed.revenue:+.3e},{dt:.1f}")


if __name__ == "__main__":
    main()
