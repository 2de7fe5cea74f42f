"""Nuisance learners, cross-fitting, and externally supplied predictions.

Built-in learners are deliberately simple: a damped-Newton logistic model
for the probability surfaces and cell-based weighted empirical quantiles
and truncated means for the outcome surfaces. Flexible machine-learning
predictions enter through the external CSV channel instead.
"""

from __future__ import annotations

import csv
import logging
import re
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import expit

from .data_model import NuisanceBundle, ObservationTable
from .errors import EmptyCellError, EmptyTailError, SeparationWarning

logger = logging.getLogger("strata_bounds")


# ---------------------------------------------------------------------------
# logistic probability learner

def _fit_logistic(X, y, w, tol: float = 1e-8, max_iter: int = 100):
    """Weighted logistic regression by damped Newton iterations.

    Stops at gradient norm <= tol or after max_iter steps; warns on
    quasi-separation (fitted index beyond +-30).
    """
    Xd = np.column_stack([np.ones(len(y)), X])
    coef = np.zeros(Xd.shape[1])
    w = np.asarray(w, dtype=float)
    y = np.asarray(y, dtype=float)

    def nll(c):
        eta = Xd @ c
        return float(np.sum(w * (np.logaddexp(0.0, eta) - y * eta)))

    loss = nll(coef)
    for _ in range(max_iter):
        eta = Xd @ coef
        p = expit(eta)
        grad = Xd.T @ (w * (p - y))
        if np.linalg.norm(grad) <= tol:
            break
        hess = Xd.T @ (Xd * (w * p * (1.0 - p))[:, None])
        hess += 1e-10 * np.eye(Xd.shape[1])
        step = np.linalg.solve(hess, grad)
        scale = 1.0
        while scale > 1e-6:
            cand = coef - scale * step
            cand_loss = nll(cand)
            if cand_loss <= loss + 1e-12:
                coef, loss = cand, cand_loss
                break
            scale /= 2.0
        else:
            break
    if np.max(np.abs(Xd @ coef)) > 30.0:
        warnings.warn("fitted logistic index exceeds +-30 (quasi-separation)",
                      SeparationWarning)
    return coef


def logistic_predict(coef, X):
    Xd = np.column_stack([np.ones(X.shape[0]), X])
    return expit(Xd @ coef)


def fit_selection(table: ObservationTable, arm: int):
    """Fit P(S=1 | X) on one treatment arm; returns an x -> probability map."""
    mask = table.d == arm
    if not mask.any():
        raise EmptyCellError(f"no rows in treatment arm {arm}")
    coef = _fit_logistic(table.x[mask], table.s[mask], table.weight[mask])
    return lambda X: logistic_predict(coef, np.atleast_2d(X))


def fit_propensity(table: ObservationTable):
    """Fit P(D=1 | X) on the full sample."""
    coef = _fit_logistic(table.x, table.d, table.weight)
    return lambda X: logistic_predict(coef, np.atleast_2d(X))


# ---------------------------------------------------------------------------
# cell-based outcome surfaces

@dataclass(frozen=True)
class CellSpec:
    """How to partition the covariate space into evaluation cells.

    ``discrete_cols`` are used as-is; every other column is cut at its
    weighted training quantiles into ``n_bins`` bins. ``lenient_tails``
    substitutes the cell mean (with a log entry) when a truncation region
    contains no training mass instead of raising.
    """

    discrete_cols: tuple = ()
    n_bins: int = 1
    lenient_tails: bool = True


class _CellIndex:
    """Maps covariate rows to training-defined cells."""

    def __init__(self, x_train, w_train, spec: CellSpec):
        self.spec = spec
        p = x_train.shape[1]
        self.cont_cols = tuple(j for j in range(p) if j not in spec.discrete_cols)
        self.levels = {j: np.unique(x_train[:, j]) for j in spec.discrete_cols}
        self.edges = {}
        for j in self.cont_cols:
            if spec.n_bins <= 1:
                self.edges[j] = np.array([])
            else:
                qs = np.linspace(0, 1, spec.n_bins + 1)[1:-1]
                self.edges[j] = _weighted_quantile(x_train[:, j], w_train, qs)

    def keys(self, x) -> np.ndarray:
        x = np.atleast_2d(x)
        parts = []
        for j in self.spec.discrete_cols:
            lv = self.levels[j]
            idx = np.searchsorted(lv, x[:, j])
            idx = np.clip(idx, 0, len(lv) - 1)
            ok = np.isclose(lv[idx], x[:, j])
            if not ok.all():
                raise EmptyCellError(
                    f"unseen level in discrete column {j}: "
                    f"{np.unique(x[~ok, j])[:5]}")
            parts.append(idx)
        for j in self.cont_cols:
            parts.append(np.searchsorted(self.edges[j], x[:, j]))
        if not parts:
            return np.zeros(x.shape[0], dtype=np.int64)
        key = parts[0].astype(np.int64)
        for extra in parts[1:]:
            key = key * 1_000_003 + extra.astype(np.int64)
        return key


def _weighted_quantile(values, weights, qs):
    """Left-continuous weighted empirical quantiles (smallest y with F(y) >= q)."""
    order = np.argsort(values, kind="stable")
    v = np.asarray(values, dtype=float)[order]
    cw = np.cumsum(np.asarray(weights, dtype=float)[order])
    total = cw[-1]
    qs = np.atleast_1d(np.asarray(qs, dtype=float))
    idx = np.searchsorted(cw, qs * total - 1e-12 * total, side="left")
    idx = np.clip(idx, 0, len(v) - 1)
    return v[idx]


class CellOutcomeSurface:
    """Weighted empirical quantile and truncated-mean surfaces on cells.

    Monotonicity in the quantile level holds by construction (one sorted
    copy per cell). Conventions at the edges: the level-1 quantile is the
    cell maximum; the lower truncated mean at level 1 and the upper one at
    level 0 both return the full cell mean.
    """

    def __init__(self, table: ObservationTable, spec: CellSpec):
        self.spec = spec
        sel = table.s == 1
        self.index = {}
        self.cells = {}
        for d in (0, 1):
            mask = sel & (table.d == d)
            if not mask.any():
                # error deferred to evaluation time: half-sample fits may
                # legitimately never be asked about the missing arm
                self.index[d] = None
                self.cells[d] = None
                continue
            xi = table.x[mask]
            wi = table.weight[mask]
            yi = table.y[mask]
            cidx = _CellIndex(xi, wi, spec)
            keys = cidx.keys(xi)
            cells = {}
            for key in np.unique(keys):
                inc = keys == key
                order = np.argsort(yi[inc], kind="stable")
                yv = yi[inc][order]
                wv = wi[inc][order]
                cw = np.cumsum(wv)
                cy = np.cumsum(wv * yv)
                cells[int(key)] = (yv, cw, cy)
            self.index[d] = cidx
            self.cells[d] = cells

    def _cell(self, d, key):
        try:
            return self.cells[d][int(key)]
        except KeyError:
            raise EmptyCellError(f"no training rows in arm {d} for cell {key}")

    def _keys(self, d, x):
        if self.index[d] is None:
            raise EmptyCellError(f"no selected training rows in arm {d}")
        return self.index[d].keys(x)

    def quantile(self, x, d, u) -> np.ndarray:
        x = np.atleast_2d(x)
        u = np.asarray(u, dtype=float)
        keys = self._keys(d, x)
        out = np.empty(len(keys))
        for i, key in enumerate(keys):
            yv, cw, _ = self._cell(d, key)
            total = cw[-1]
            pos = np.searchsorted(cw, u[i] * total - 1e-12 * total, side="left")
            out[i] = yv[min(pos, len(yv) - 1)]
        return out

    def trunc_mean(self, x, j, d, u) -> np.ndarray:
        x = np.atleast_2d(x)
        u = np.asarray(u, dtype=float)
        keys = self._keys(d, x)
        out = np.empty(len(keys))
        for i, key in enumerate(keys):
            yv, cw, cy = self._cell(d, key)
            total_w, total_y = cw[-1], cy[-1]
            pos = np.searchsorted(cw, u[i] * total_w - 1e-12 * total_w, side="left")
            pos = min(pos, len(yv) - 1)
            q = yv[pos]
            # include every tied observation at the threshold
            hi = np.searchsorted(yv, q, side="right") - 1
            lo = np.searchsorted(yv, q, side="left")
            if j == 1:
                w_at, y_at = cw[hi], cy[hi]
                if u[i] >= 1.0:
                    out[i] = total_y / total_w
                elif w_at <= 0:
                    out[i] = self._lenient(yv, cy, cw, f"arm {d} lower tail")
                else:
                    out[i] = y_at / w_at
            else:
                w_above = total_w - (cw[lo - 1] if lo > 0 else 0.0)
                y_above = total_y - (cy[lo - 1] if lo > 0 else 0.0)
                if u[i] <= 0.0:
                    out[i] = total_y / total_w
                elif w_above <= 0:
                    out[i] = self._lenient(yv, cy, cw, f"arm {d} upper tail")
                else:
                    out[i] = y_above / w_above
        return out

    def _lenient(self, yv, cy, cw, what):
        if not self.spec.lenient_tails:
            raise EmptyTailError(f"no observation in truncation region ({what})")
        logger.warning("empty truncation region (%s); using the cell mean", what)
        return cy[-1] / cw[-1]


# ---------------------------------------------------------------------------
# learner specification and cross-fitting

@dataclass(frozen=True)
class LearnerSpec:
    """Which learners produce the bundle and how folds are formed."""

    kind: str = "builtin"          # builtin | oracle | external
    cells: CellSpec = field(default_factory=CellSpec)
    folds: int = 5
    seed: int = 0
    propensity_known: Optional[float] = None   # fix m(x) to a constant if given
    oracle_factory: Optional[Callable] = None  # table -> NuisanceBundle
    external_path: Optional[str] = None


def fold_assignments(n: int, k: int, seed: int) -> np.ndarray:
    """Balanced fold ids from a seeded permutation (sizes differ by <= 1)."""
    if k < 2:
        raise ValueError("need at least 2 folds")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    perm = rng.permutation(n)
    folds = np.empty(n, dtype=np.int64)
    folds[perm] = np.arange(n) % k
    return folds


def crossfit(table: ObservationTable, spec: LearnerSpec) -> NuisanceBundle:
    """Cross-fitted nuisance bundle: each row is scored by models trained on
    the complementary folds; truncated-mean surfaces reuse the quantile
    surface fitted on the same training folds."""
    if spec.kind == "oracle":
        if spec.oracle_factory is None:
            raise ValueError("oracle learner requires an oracle_factory")
        return spec.oracle_factory(table)
    if spec.kind == "external":
        if spec.external_path is None:
            raise ValueError("external learner requires external_path")
        return load_external_nuisances(spec.external_path, table)
    if spec.kind != "builtin":
        raise ValueError(f"unknown learner kind {spec.kind!r}")

    n = table.n
    folds = fold_assignments(n, spec.folds, spec.seed)
    m = np.empty(n)
    s0 = np.empty(n)
    s1 = np.empty(n)
    surfaces = {}
    for k in range(spec.folds):
        hold = folds == k
        train = table.select(~hold)
        sel0 = fit_selection(train, 0)
        sel1 = fit_selection(train, 1)
        s0[hold] = sel0(table.x[hold])
        s1[hold] = sel1(table.x[hold])
        if spec.propensity_known is not None:
            m[hold] = spec.propensity_known
        else:
            prop = fit_propensity(train)
            m[hold] = prop(table.x[hold])
        surfaces[k] = CellOutcomeSurface(train, spec.cells)

    def quantile_fn(rows, d, u):
        out = np.empty(len(rows))
        for k in range(spec.folds):
            here = folds[rows] == k
            if here.any():
                out[here] = surfaces[k].quantile(table.x[rows][here], d, u[here])
        return out

    def trunc_mean_fn(rows, j, d, u):
        out = np.empty(len(rows))
        for k in range(spec.folds):
            here = folds[rows] == k
            if here.any():
                out[here] = surfaces[k].trunc_mean(table.x[rows][here], j, d, u[here])
        return out

    bundle = NuisanceBundle(m, s0, s1, quantile_fn, trunc_mean_fn,
                            provenance="cross_fitted")
    bundle.fold_ids = folds
    return bundle


# ---------------------------------------------------------------------------
# externally supplied predictions

_GRID_COL = re.compile(r"^(q|b)_(\d)(?:_(\d))?_u(.+)$")


def load_external_nuisances(path, table: ObservationTable,
                            provenance: str = "external") -> NuisanceBundle:
    """Bundle from a CSV of per-row predictions, row-aligned with the data.

    Required columns ``m,s0,s1``; optional per-level surface grids with
    columns ``q_<d>_u<level>`` and ``b_<j>_<d>_u<level>``. Surfaces are
    piecewise-linear in the level between grid points (monotonized for
    quantiles) and clamped at the grid ends.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) if v.strip() not in ("", "NA") else np.nan for v in row]
                for row in reader]
    data = np.asarray(rows, dtype=float)
    if data.shape[0] != table.n:
        raise ValueError(f"nuisance file has {data.shape[0]} rows, "
                         f"data has {table.n}")
    cols = {name: j for j, name in enumerate(header)}
    for required in ("m", "s0", "s1"):
        if required not in cols:
            raise ValueError(f"nuisance file missing column {required!r}")

    q_grids = {0: {}, 1: {}}
    b_grids = {(j, d): {} for j in (0, 1) for d in (0, 1)}
    for name, jcol in cols.items():
        match = _GRID_COL.match(name)
        if not match:
            continue
        kind, first, second, level = match.groups()
        u = float(level)
        if kind == "q":
            q_grids[int(first)][u] = data[:, jcol]
        else:
            if second is None:
                raise ValueError(f"bad truncated-mean column {name!r}")
            b_grids[(int(first), int(second))][u] = data[:, jcol]

    def make_interp(grid):
        if not grid:
            return None
        levels = np.array(sorted(grid))
        values = np.column_stack([grid[u] for u in levels])

        def interp(rows_idx, u):
            vals = values[rows_idx]
            out = np.empty(len(rows_idx))
            for i in range(len(rows_idx)):
                out[i] = np.interp(u[i], levels, vals[i])
            return out

        return interp

    q_interp = {d: make_interp(grid) for d, grid in q_grids.items()}
    b_interp = {key: make_interp(grid) for key, grid in b_grids.items()}

    def quantile_fn(rows, d, u):
        fn = q_interp[d]
        if fn is None:
            raise ValueError(f"no quantile grid supplied for arm {d}")
        return fn(rows, u)

    def trunc_mean_fn(rows, j, d, u):
        fn = b_interp[(j, d)]
        if fn is None:
            raise ValueError(f"no truncated-mean grid for (j={j}, d={d})")
        return fn(rows, u)

    return NuisanceBundle(data[:, cols["m"]], data[:, cols["s0"]],
                          data[:, cols["s1"]], quantile_fn, trunc_mean_fn,
                          provenance=provenance)
