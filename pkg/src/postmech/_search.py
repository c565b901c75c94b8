"""Bracketed one-dimensional search used by the distribution and solver modules."""

from __future__ import annotations

import numpy as np
from scipy import optimize


def argmax_on_interval(fn, lo, hi, n=1000, xtol=1e-10):
    """Maximise a vectorised scalar function on ``[lo, hi]``.

    A coarse scan of ``n`` points brackets the maximiser, which is then refined
    with a bounded golden-section/parabolic search. Endpoints are compared
    explicitly so corner solutions come back exactly.

    Returns:
        (x, fn(x))
    """
    lo, hi = float(lo), float(hi)
    if hi <= lo:
        return lo, float(fn(np.array([lo]))[0])
    xs = np.linspace(lo, hi, n)
    with np.errstate(all="ignore"):
        ys = np.asarray(fn(xs), dtype=float)
    ys = np.where(np.isfinite(ys), ys, -np.inf)
    i = int(np.argmax(ys))
    a, c = xs[max(i - 1, 0)], xs[min(i + 1, n - 1)]

    def neg(x):
        with np.errstate(all="ignore"):
            y = float(np.asarray(fn(np.array([x])))[0])
        return -y if np.isfinite(y) else np.inf

    res = optimize.minimize_scalar(neg, bounds=(a, c), method="bounded",
                                   options={"xatol": xtol})
    # endpoints first so exact corners win ties
    candidates = [(lo, ys[0]), (hi, ys[-1]), (xs[i], ys[i]), (float(res.x), -float(res.fun))]
    best = candidates[0]
    for x, y in candidates[1:]:
        if y > best[1]:
            best = (x, y)
    return float(best[0]), float(best[1])


def all_roots(fn, lo, hi, n=2000, xtol=1e-12):
    """Every sign-change root of ``fn`` on ``[lo, hi]``, located by bisection.

    Roots are bracketed on an ``n``-point scan; grid points where ``fn`` is
    exactly zero are returned as-is. Non-finite samples are skipped.
    """
    lo, hi = float(lo), float(hi)
    if hi <= lo:
        return []
    xs = np.linspace(lo, hi, n)
    with np.errstate(all="ignore"):
        ys = np.asarray(fn(xs), dtype=float)
    ok = np.isfinite(ys)
    xs, ys = xs[ok], ys[ok]
    roots = [float(x) for x, y in zip(xs, ys) if y == 0.0]
    for k in range(len(xs) - 1):
        y0, y1 = ys[k], ys[k + 1]
        if y0 * y1 < 0:
            def scalar(x):
                with np.errstate(all="ignore"):
                    return float(np.asarray(fn(np.array([x])))[0])
            roots.append(float(optimize.bisect(scalar, xs[k], xs[k + 1],
                                               xtol=xtol, maxiter=500)))
    return sorted(roots)
