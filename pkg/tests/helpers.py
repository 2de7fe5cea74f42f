"""Shared test machinery: closed-form outcome mixtures, a discrete design
with exact conditional-moment enumeration, and a discrete-grid process for
brute-force bound checks."""

import numpy as np
from numpy.polynomial.legendre import leggauss

from strata_bounds.data_model import NuisanceBundle, ObservationTable
from strata_bounds.identification import SupportBounds


class Pieces:
    """Piecewise-uniform outcome mixture with exact tail means."""

    def __init__(self, weights, lows, highs):
        w = np.asarray(weights, float)
        self.w = w / w.sum()
        self.lo = np.asarray(lows, float)
        self.hi = np.asarray(highs, float)

    @property
    def support(self):
        return float(self.lo.min()), float(self.hi.max())

    def cdf(self, y):
        return float(np.sum(self.w * np.clip((y - self.lo) / (self.hi - self.lo),
                                             0.0, 1.0)))

    def ppf(self, u):
        if u <= 0.0:
            return self.support[0]
        if u >= 1.0:
            return self.support[1]
        lo, hi = self.support
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if self.cdf(mid) >= u:
                hi = mid
            else:
                lo = mid
        return 0.5 * (lo + hi)

    def partial(self, q, k=1):
        b = np.clip(q, self.lo, self.hi)
        return float(np.sum(self.w * (b ** (k + 1) - self.lo ** (k + 1))
                            / ((k + 1) * (self.hi - self.lo))))

    def mean(self):
        return float(np.sum(self.w * (self.lo + self.hi) / 2.0))

    def trunc_below(self, u):
        if u <= 0.0:
            return self.support[0]
        if u >= 1.0:
            return self.mean()
        return self.partial(self.ppf(u)) / u

    def trunc_above(self, u):
        if u >= 1.0:
            return self.support[1]
        if u <= 0.0:
            return self.mean()
        return (self.mean() - self.partial(self.ppf(u))) / (1.0 - u)

    def censored_var_below(self, level):
        q = self.ppf(level)
        return self.partial(q, 2) - self.partial(q, 1) ** 2

    def nodes(self, extra_breaks=(), order=8):
        """Integration nodes exact for piecewise polynomials between breaks."""
        xs, ws = leggauss(order)
        ys, wts = [], []
        for w, lo, hi in zip(self.w, self.lo, self.hi):
            breaks = sorted({lo, hi, *[b for b in extra_breaks if lo < b < hi]})
            dens = w / (hi - lo)
            for a, b in zip(breaks[:-1], breaks[1:]):
                ys.append(0.5 * (b - a) * xs + 0.5 * (a + b))
                wts.append(0.5 * (b - a) * ws * dens)
        return np.concatenate(ys), np.concatenate(wts)


class DPoint:
    """One covariate point of a discrete design with continuous outcomes."""

    def __init__(self, m, s0, s1, dist1: Pieces, dist0: Pieces, prob=1.0):
        self.m, self.s0, self.s1, self.prob = m, s0, s1, prob
        self.dist = {1: dist1, 0: dist0}

    @property
    def p0(self):
        return self.s0 / self.s1

    @property
    def label(self):
        diff = self.s1 - self.s0
        return 0 if diff == 0 else (1 if diff > 0 else -1)

    def bundle(self, n) -> NuisanceBundle:
        def qfn(rows, d, u):
            dist = self.dist[d]
            return np.array([dist.ppf(ui) for ui in np.atleast_1d(u)])

        def bfn(rows, j, d, u):
            dist = self.dist[d]
            f = dist.trunc_below if j == 1 else dist.trunc_above
            return np.array([f(ui) for ui in np.atleast_1d(u)])

        return NuisanceBundle(np.full(n, self.m), np.full(n, self.s0),
                              np.full(n, self.s1), qfn, bfn, provenance="oracle")

    def support(self) -> SupportBounds:
        lo1, hi1 = self.dist[1].support
        lo0, hi0 = self.dist[0].support
        return SupportBounds(y1_lower=lo1, y1_upper=hi1,
                             y0_lower=lo0, y0_upper=hi0)

    def enumerate(self, moment_fn, u_breaks=None):
        """Exact E[psi-components | X = this point] over (D, S, Y).

        ``moment_fn(table, bundle)`` returns moment rows; ``u_breaks`` maps
        each arm to the quantile levels whose thresholds the moment uses,
        so integration pieces split exactly at the indicator jumps.
        """
        u_breaks = u_breaks or {}
        cells = []
        for d in (0, 1):
            pd = self.m if d == 1 else 1.0 - self.m
            sd = self.s1 if d == 1 else self.s0
            cells.append((np.array([np.nan]), np.array([pd * (1.0 - sd)]), 0, d))
            breaks = [self.dist[d].ppf(u) for u in u_breaks.get(d, ())]
            ys, ws = self.dist[d].nodes(breaks)
            cells.append((ys, ws * pd * sd, 1, d))
        totals = None
        for ys, ws, s, d in cells:
            n = len(ys)
            table = ObservationTable(y=ys if s else np.full(n, np.nan),
                                     s=np.full(n, s), d=np.full(n, d),
                                     x=np.zeros((n, 1)), weight=np.ones(n))
            rows = moment_fn(table, self.bundle(n))
            if hasattr(rows, "psi_b_plus"):
                comps = (rows.psi_b_plus, rows.psi_s_plus,
                         rows.psi_b_minus, rows.psi_s_minus)
            else:
                comps = (rows.psi_b, rows.psi_s)
            vals = [float(np.sum(ws * c)) for c in comps]
            totals = vals if totals is None else [a + b for a, b in zip(totals, vals)]
        return totals


def standard_points():
    """One point per partition, with mixture outcomes on both arms."""
    plus = DPoint(m=0.4, s0=0.55, s1=0.8, prob=0.45,
                  dist1=Pieces([0.5, 0.5], [0.0, 1.2], [1.0, 2.6]),
                  dist0=Pieces([1.0], [-0.5], [1.3]))
    minus = DPoint(m=0.65, s0=0.7, s1=0.45, prob=0.35,
                   dist1=Pieces([1.0], [0.2], [1.6]),
                   dist0=Pieces([0.4, 0.6], [-1.0, 0.5], [0.4, 2.0]))
    zero = DPoint(m=0.5, s0=0.6, s1=0.6, prob=0.2,
                  dist1=Pieces([1.0], [0.0], [2.0]),
                  dist0=Pieces([1.0], [-1.0], [1.0]))
    return plus, minus, zero


# ---------------------------------------------------------------------------
# discrete-outcome process for brute-force bound enumeration

class GridPmf:
    """Outcome pmf on a finite grid with fractional-mass trimming."""

    def __init__(self, values, probs):
        order = np.argsort(values)
        self.v = np.asarray(values, float)[order]
        p = np.asarray(probs, float)[order]
        self.p = p / p.sum()
        self.cum = np.cumsum(self.p)

    def mean(self):
        return float(np.dot(self.v, self.p))

    def quantile(self, u):
        """Smallest grid value with cdf >= u."""
        if u <= 0.0:
            return float(self.v[0])
        idx = int(np.searchsorted(self.cum, min(u, 1.0) - 1e-13))
        return float(self.v[min(idx, len(self.v) - 1)])

    def trunc_below(self, u):
        """Mean of the bottom-u mass, splitting the threshold atom."""
        if u <= 0.0:
            return float(self.v[0])
        if u >= 1.0:
            return self.mean()
        q = self.quantile(u)
        below = self.v < q
        mass_below = float(self.p[below].sum())
        total = float(np.dot(self.v[below], self.p[below]))
        total += q * (u - mass_below)
        return total / u

    def trunc_above(self, u):
        if u >= 1.0:
            return float(self.v[-1])
        if u <= 0.0:
            return self.mean()
        return (self.mean() - u * self.trunc_below(u)) / (1.0 - u)


def grid_design(seed=7, n_grid=100):
    """Three covariate points with outcome pmfs on a shared finite grid."""
    rng = np.random.default_rng(seed)
    grid = np.linspace(-1.0, 2.0, n_grid)
    points = []
    for m, s0, s1, prob in ((0.4, 0.5, 0.8, 0.5), (0.6, 0.75, 0.5, 0.3),
                            (0.5, 0.6, 0.6, 0.2)):
        points.append({"m": m, "s0": s0, "s1": s1, "prob": prob,
                       "pmf": {1: GridPmf(grid, rng.dirichlet(np.ones(n_grid))),
                               0: GridPmf(grid, rng.dirichlet(np.ones(n_grid)))},
                       "support": (float(grid[0]), float(grid[-1]))})
    return points


def grid_bundle_and_table(points):
    """Package-facing inputs whose surfaces carry the grid pmfs."""
    n = len(points)
    s0 = np.array([p["s0"] for p in points])
    s1 = np.array([p["s1"] for p in points])
    m = np.array([p["m"] for p in points])

    def qfn(rows, d, u):
        return np.array([points[r]["pmf"][d].quantile(ui)
                         for r, ui in zip(np.atleast_1d(rows), u)])

    def bfn(rows, j, d, u):
        out = []
        for r, ui in zip(np.atleast_1d(rows), u):
            pmf = points[r]["pmf"][d]
            out.append(pmf.trunc_below(ui) if j == 1 else pmf.trunc_above(ui))
        return np.array(out)

    bundle = NuisanceBundle(m, s0, s1, qfn, bfn, provenance="oracle")
    table = ObservationTable(y=np.ones(n), s=np.ones(n, int),
                             d=np.zeros(n, int), x=np.arange(n)[:, None],
                             weight=np.array([p["prob"] for p in points]))
    lo, hi = points[0]["support"]
    support = SupportBounds(y1_lower=lo, y1_upper=hi, y0_lower=lo, y0_upper=hi)
    return bundle, table, support


def direct_grid_bound(points, stratum, side, dominance):
    """From-scratch enumeration of the trimmed-mean bound formulas."""
    lo, hi = points[0]["support"]
    num = den = 0.0
    for p in points:
        s0, s1 = p["s0"], p["s1"]
        p0 = s0 / s1
        t1, r0 = min(p0, 1.0), min(1.0 / p0, 1.0)
        pmf1, pmf0 = p["pmf"][1], p["pmf"][0]
        if stratum == "at":
            w = min(s0, s1)
            if side == "l":
                bx = (pmf1.mean() if dominance else pmf1.trunc_below(t1)) \
                    - pmf0.trunc_above(1.0 - r0)
            else:
                bx = pmf1.trunc_above(1.0 - t1) \
                    - (pmf0.mean() if dominance else pmf0.trunc_below(r0))
        else:
            w_c = max(0.0, s1 - s0)
            w_d = max(0.0, s0 - s1)
            w = w_c if stratum == "c" else w_c + w_d
            if w == 0.0:
                bx = 0.0
            elif w_c > 0:
                if side == "l":
                    bx = pmf1.trunc_below(1.0 - t1) \
                        - (pmf0.mean() if dominance else hi)
                else:
                    bx = (pmf1.mean() if dominance else pmf1.trunc_above(t1)) \
                        - pmf0.trunc_below(1.0 - r0)
            else:
                if side == "l":
                    bx = lo - (pmf0.mean() if dominance
                               else pmf0.trunc_above(r0))
                else:
                    bx = (pmf1.mean() if dominance else hi) \
                        - pmf0.trunc_below(1.0 - r0)
        num += p["prob"] * bx * w
        den += p["prob"] * w
    return num / den
