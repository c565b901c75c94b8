"""Joint value distributions on the triangle V = {(v1, v2) in [0, beta]^2 : v1 >= v2}.

Two kinds are supported:

* :class:`OrderStatistic` -- v1 and v2 are the max and min of two i.i.d. draws
  from a generator cdf G, so F1 = G^2 and F2 = 1 - (1 - G)^2.
* :class:`TabulatedJoint` -- a density tabulated on an N x N grid and masked to
  the triangle.

Both expose marginal cdfs/densities (index 1 = agent, 2 = principal), the joint
density and the joint cdf H(x, y) = P(v1 <= x, v2 <= y).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from ._search import all_roots, argmax_on_interval

DIFF_TOL = 1e-9


class DomainError(ValueError):
    """An argument lies outside the support or admissible range."""


class DistributionError(ValueError):
    """The density data cannot define a distribution on V."""


def _check_which(which):
    if which not in (1, 2):
        raise ValueError(f"marginal index must be 1 or 2, got {which!r}")


class JointDistribution:
    """Interface shared by all joint distributions on V."""

    beta: float
    kind: str

    def cdf(self, which, x):
        raise NotImplementedError

    def pdf(self, which, x):
        raise NotImplementedError

    def joint_pdf(self, v1, v2):
        raise NotImplementedError

    def joint_cdf(self, x, y):
        raise NotImplementedError

    def to_dict(self):
        raise NotImplementedError

    def rect_prob(self, lo1, hi1, lo2, hi2):
        """P(lo1 < v1 <= hi1, lo2 < v2 <= hi2), vectorised."""
        H = self.joint_cdf
        return H(hi1, hi2) - H(lo1, hi2) - H(hi1, lo2) + H(lo1, lo2)


@dataclass(frozen=True)
class Generator:
    """Cdf G on [0, beta] that generates an order-statistic distribution."""

    family: str = "uniform"
    param: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        if self.family not in ("uniform", "power"):
            raise DistributionError(f"unknown generator family {self.family!r}")
        if self.beta <= 0:
            raise DistributionError("beta must be positive")
        if self.family == "power" and not self.param > 0:
            raise DistributionError("power generator needs param > 0")

    @property
    def exponent(self):
        return 1.0 if self.family == "uniform" else float(self.param)

    def cdf(self, x):
        x = np.clip(np.asarray(x, dtype=float) / self.beta, 0.0, 1.0)
        return x ** self.exponent

    def pdf(self, x):
        p = self.exponent
        x = np.clip(np.asarray(x, dtype=float) / self.beta, 0.0, 1.0)
        with np.errstate(divide="ignore"):
            return p * x ** (p - 1.0) / self.beta


@dataclass(frozen=True)
class OrderStatistic(JointDistribution):
    """(v1, v2) = (max, min) of two independent draws from ``G``."""

    G: Generator = field(default_factory=Generator)
    kind = "order-stat"

    @property
    def beta(self):
        return self.G.beta

    def cdf(self, which, x):
        _check_which(which)
        g = self.G.cdf(x)
        return g * g if which == 1 else 1.0 - (1.0 - g) ** 2

    def pdf(self, which, x):
        _check_which(which)
        g, G = self.G.pdf(x), self.G.cdf(x)
        with np.errstate(invalid="ignore"):
            return 2.0 * g * G if which == 1 else 2.0 * g * (1.0 - G)

    def joint_pdf(self, v1, v2):
        v1, v2 = np.broadcast_arrays(np.asarray(v1, float), np.asarray(v2, float))
        inside = (v2 <= v1) & (v2 >= 0) & (v1 <= self.beta)
        with np.errstate(invalid="ignore"):
            dens = 2.0 * self.G.pdf(v1) * self.G.pdf(v2)
        return np.where(inside, dens, 0.0)

    def joint_cdf(self, x, y):
        Gx, Gy = self.G.cdf(x), self.G.cdf(y)
        Gx, Gy = np.broadcast_arrays(Gx, Gy)
        return np.where(Gy < Gx, Gx * Gx - (Gx - Gy) ** 2, Gx * Gx)

    def to_dict(self):
        return {"kind": "order-stat",
                "G": {"family": self.G.family, "param": self.G.param},
                "beta": self.beta}


def _cumtrapz(y, h, axis=-1):
    y = np.moveaxis(np.asarray(y, float), axis, -1)
    out = np.zeros_like(y)
    out[..., 1:] = np.cumsum(0.5 * h * (y[..., 1:] + y[..., :-1]), axis=-1)
    return np.moveaxis(out, -1, axis)


class TabulatedJoint(JointDistribution):
    """Density tabulated on a square grid, row index = v1, column index = v2.

    Entries above the diagonal (v2 > v1) are ignored. The table is normalised
    by its iterated trapezoid integral over the triangle; marginal densities are
    trapezoid integrals along rows/columns and the marginal cdfs integrate their
    piecewise-linear interpolants exactly, so ``pdf`` is the derivative of ``cdf``.
    """

    kind = "tabulated"

    def __init__(self, values, beta=1.0):
        f = np.array(values, dtype=float)
        if f.ndim == 1:
            n = int(round(math.sqrt(f.size)))
            if n * n != f.size:
                raise DistributionError("row-major values must form a square grid")
            f = f.reshape(n, n)
        if f.ndim != 2 or f.shape[0] != f.shape[1] or f.shape[0] < 3:
            raise DistributionError("tabulated density must be an N x N grid, N >= 3")
        if beta <= 0:
            raise DistributionError("beta must be positive")
        n = f.shape[0]
        lower = np.tril(np.ones((n, n), dtype=bool))
        f = np.where(lower, f, 0.0)
        if not np.all(np.isfinite(f)):
            raise DistributionError("density values must be finite")
        if np.any(f < 0):
            raise DistributionError("density values must be nonnegative")

        self.beta = float(beta)
        self.grid_n = n
        self.x = np.linspace(0.0, self.beta, n)
        h = self.x[1] - self.x[0]
        self._h = h

        # row i integrates v2 over [0, x_i]; column j integrates v1 over [x_j, beta]
        row_cum = _cumtrapz(f, h, axis=1)
        f1 = row_cum[np.arange(n), np.arange(n)]
        col_cum_rev = _cumtrapz(f[::-1, :], h, axis=0)[::-1, :]
        f2 = col_cum_rev[np.arange(n), np.arange(n)]
        total = float(_cumtrapz(f1, h)[-1])
        if not total > 0:
            raise DistributionError("density has no mass on the triangle")
        total2 = float(_cumtrapz(f2, h)[-1])

        self.values = f / total
        self._f1 = f1 / total
        self._f2 = f2 / total2
        self._F1 = _cumtrapz(self._f1, h)
        self._F2 = _cumtrapz(self._f2, h)

        # joint cdf table C[i, j] = P(v1 <= x_i, v2 <= x_j)
        jj = np.minimum(np.arange(n)[None, :], np.arange(n)[:, None])
        inner = (row_cum / total)[np.arange(n)[:, None], jj]
        self._C = _cumtrapz(inner, h, axis=0)
        self._C_interp = RegularGridInterpolator((self.x, self.x), self._C)

        # extend each row past the diagonal with its diagonal value for interpolation
        ext = np.where(lower, self.values, np.diag(self.values)[:, None])
        self._f_interp = RegularGridInterpolator((self.x, self.x), ext)

    def _locate(self, x):
        x = np.clip(np.asarray(x, float), 0.0, self.beta)
        k = np.minimum((x / self._h).astype(int), self.grid_n - 2)
        return x, k, x - self.x[k]

    def pdf(self, which, x):
        _check_which(which)
        dens = self._f1 if which == 1 else self._f2
        x, k, d = self._locate(x)
        return dens[k] + (dens[k + 1] - dens[k]) * d / self._h

    def cdf(self, which, x):
        _check_which(which)
        dens = self._f1 if which == 1 else self._f2
        cum = self._F1 if which == 1 else self._F2
        x, k, d = self._locate(x)
        return cum[k] + dens[k] * d + (dens[k + 1] - dens[k]) * d * d / (2 * self._h)

    def joint_pdf(self, v1, v2):
        v1, v2 = np.broadcast_arrays(np.asarray(v1, float), np.asarray(v2, float))
        inside = (v2 <= v1) & (v2 >= 0) & (v1 <= self.beta)
        pts = np.stack([np.clip(v1, 0, self.beta), np.clip(v2, 0, self.beta)], axis=-1)
        return np.where(inside, self._f_interp(pts), 0.0)

    def joint_cdf(self, x, y):
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        pts = np.stack([np.clip(x, 0, self.beta), np.clip(y, 0, self.beta)], axis=-1)
        return self._C_interp(pts)

    def to_dict(self):
        return {"kind": "tabulated", "grid_n": self.grid_n, "beta": self.beta,
                "values": self.values.ravel().tolist()}


def uniform_triangle(beta=1.0):
    """The uniform density 2/beta^2 on V (order statistics of uniform draws)."""
    return OrderStatistic(Generator("uniform", 1.0, beta))


def from_dict(block, beta=None):
    """Build a distribution from the CLI config block."""
    if not isinstance(block, dict) or "kind" not in block:
        raise DistributionError("distribution block needs a 'kind'")
    beta = float(block.get("beta", 1.0 if beta is None else beta))
    if block["kind"] == "order-stat":
        g = block.get("G", {})
        return OrderStatistic(Generator(g.get("family", "uniform"),
                                        float(g.get("param", 1.0)), beta))
    if block["kind"] in ("tabulated", "tabulated-joint"):
        n = int(block["grid_n"])
        values = np.asarray(block["values"], float)
        if values.size != n * n:
            raise DistributionError(f"expected {n * n} values, got {values.size}")
        return TabulatedJoint(values.reshape(n, n), beta)
    raise DistributionError(f"unknown distribution kind {block['kind']!r}")


def marginal_cdf(d, which, x):
    """F_which(x) for a scalar ``x`` in [0, beta]."""
    if not (-1e-12 <= x <= d.beta + 1e-12):
        raise DomainError(f"x={x} outside [0, {d.beta}]")
    return float(d.cdf(which, min(max(x, 0.0), d.beta)))


def revenue_curve(d, which, n):
    """Posted-price revenue x (1 - F_which(x)) at ``n`` evenly spaced prices."""
    if n < 2:
        raise DomainError("revenue curve needs n >= 2")
    xs = np.linspace(0.0, d.beta, n)
    rev = xs * (1.0 - d.cdf(which, xs))
    rev[-1] = 0.0 if abs(rev[-1]) < 1e-12 else rev[-1]
    return [(float(x), float(r)) for x, r in zip(xs, rev)]


def kappa_tilde(d, which, n=1000, xtol=1e-10):
    """Maximiser of x (1 - F_which(x)) on [0, beta]."""
    return argmax_on_interval(lambda x: x * (1.0 - d.cdf(which, x)), 0.0, d.beta,
                              n=n, xtol=xtol)[0]


@dataclass(frozen=True)
class RegularityReport:
    """Grid diagnostics for the distributional hypotheses used by the solver."""

    concave_xF1: bool
    concave_worst: tuple  # (x, largest second difference)
    mlrp: bool
    mlrp_worst: tuple  # (x, most negative ratio step)
    sc: bool
    sc_sign_changes: int
    sc_crossing: float | None
    kappa_tilde_1: float
    kappa_tilde_2: float
    ratio_at_kappa_tilde_2: float
    density_gaps: bool

    @property
    def all_hold(self):
        return self.concave_xF1 and self.mlrp and self.sc

    def to_dict(self):
        return {
            "concave_xF1": self.concave_xF1,
            "concave_worst": list(self.concave_worst),
            "mlrp": self.mlrp,
            "mlrp_worst": list(self.mlrp_worst),
            "sc": self.sc,
            "sc_sign_changes": self.sc_sign_changes,
            "sc_crossing": self.sc_crossing,
            "kappa_tilde_1": self.kappa_tilde_1,
            "kappa_tilde_2": self.kappa_tilde_2,
            "ratio_at_kappa_tilde_2": self.ratio_at_kappa_tilde_2,
            "density_gaps": self.density_gaps,
        }


def sc_function(d):
    """x f2(x) - (1 - F2(x)): negative derivative of the principal's price revenue."""
    return lambda x: x * d.pdf(2, x) - (1.0 - d.cdf(2, x))


def check_regularity(d, grid_n=1000, tol=DIFF_TOL):
    """Test concavity of x(1-F1), MLRP and single crossing on a grid.

    Failures are reported with their worst location rather than raised; a
    density that vanishes on interior grid points only sets ``density_gaps``.
    """
    if grid_n < 100:
        raise DomainError("grid_n must be at least 100")
    beta = d.beta
    x = np.linspace(0.0, beta, grid_n)
    with np.errstate(all="ignore"):
        R = x * (1.0 - d.cdf(1, x))
        d2 = R[2:] - 2 * R[1:-1] + R[:-2]
        i = int(np.argmax(d2))
        concave = bool(d2[i] <= tol)
        concave_worst = (float(x[i + 1]), float(d2[i]))

        xi = x[1:-1]
        f1, f2 = d.pdf(1, xi), d.pdf(2, xi)
        gaps = bool(np.any((f1 <= 0) | (f2 <= 0)))
        ok = (f2 > 0) & np.isfinite(f1) & np.isfinite(f2)
        ratio, xr = f1[ok] / f2[ok], xi[ok]
        steps = np.diff(ratio)
        allowed = tol * np.maximum(1.0, np.abs(ratio[:-1]))
        if steps.size:
            k = int(np.argmin(steps + allowed))
            mlrp = bool(np.all(steps >= -allowed))
            mlrp_worst = (float(xr[k + 1]), float(steps[k]))
        else:
            mlrp, mlrp_worst = False, (float("nan"), float("nan"))

        s = sc_function(d)(xi)
    s = s[np.isfinite(s) & (np.abs(s) > tol)]
    signs = np.sign(s)
    changes = int(np.count_nonzero(signs[1:] != signs[:-1]))
    sc = changes == 1 and signs[0] < 0

    k1 = kappa_tilde(d, 1)
    k2 = kappa_tilde(d, 2)
    crossing = None
    if sc:
        roots = all_roots(sc_function(d), x[1], x[-2], n=grid_n)
        if roots:
            crossing = roots[0]
            k2 = crossing
    with np.errstate(all="ignore"):
        r2 = float(d.pdf(1, k2) / d.pdf(2, k2))
    return RegularityReport(concave, concave_worst, mlrp, mlrp_worst, bool(sc), changes,
                            crossing, float(k1), float(k2), r2, gaps)
