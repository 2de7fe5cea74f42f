"""Estimators, variance estimates, and confidence intervals.

Four strategies for the irregularity at selection-indifferent covariate
points: evaluate the moments straight through their point-identified limit
(``sharp``), physically drop the indifference band (``trim``, drop
variant), substitute the point-identified moment inside a shrinking band
(``switch``), or smooth the whole functional (``smooth``). The
known-propensity variant (``inefficient_known_ps``) drops the
truncated-mean augmentation from the moments.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.stats import norm

from .data_model import (BoundsEstimate, NuisanceBundle, ObservationTable,
                         Side, Stratum, StratumSpec, XZERO)
from .errors import AllTrimmedError, PartitionError, ZeroShareError
from .identification import SupportBounds
from .influence import (InfluenceRows, degenerate_at_moments, eif_regular,
                        eif_smooth)
from .smoothing import GFamily


def default_rho(n: int) -> float:
    """Shrinking half-width of the moment-switching band."""
    return n ** (-0.25) / math.log(n)


def ratio_estimate(psi_b, psi_s, weights, share_floor: float = 1e-12):
    """Solve the linear moment equation; returns (estimate, standard error).

    The estimate is the ratio of weighted means; the standard error comes
    from the plug-in variance of the linearized residual
    ``psi_b - beta * psi_s`` scaled by the share mean.
    """
    psi_b = np.asarray(psi_b, dtype=float)
    psi_s = np.asarray(psi_s, dtype=float)
    w = np.asarray(weights, dtype=float)
    wn = w / w.sum()
    den = float(np.dot(wn, psi_s))
    if den <= share_floor:
        raise ZeroShareError(f"share moment mean {den:.3e} at or below floor")
    beta = float(np.dot(wn, psi_b)) / den
    resid = psi_b - beta * psi_s
    se = float(np.sqrt(np.sum((wn * resid) ** 2))) / den
    return beta, se


def im_critical_value(delta: float, se: float, alpha: float = 0.05,
                      tol: float = 1e-10) -> float:
    """Critical value interpolating one- and two-sided coverage.

    Solves ``Phi(C + delta/se) - Phi(-C) = 1 - alpha`` by bisection on
    ``[0, z_{1-alpha/2}]``; the point-identified limit gives the two-sided
    value and a wide identified set the one-sided one.
    """
    z_two = float(norm.ppf(1.0 - alpha / 2.0))
    delta = max(float(delta), 0.0)
    if not np.isfinite(delta):
        return float(norm.ppf(1.0 - alpha))
    if se <= 0.0:
        return float(norm.ppf(1.0 - alpha)) if delta > 0 else z_two
    ratio = delta / se

    def f(c):
        return norm.cdf(c + ratio) - norm.cdf(-c) - (1.0 - alpha)

    if f(0.0) >= 0.0:
        return 0.0
    if f(z_two) <= 0.0:  # point-identified limit: the root sits at the end
        return z_two
    return float(brentq(f, 0.0, z_two, xtol=tol))


def imbens_manski_interval(lower: float, upper: float, se_lower: float,
                           se_upper: float, n: Optional[int] = None,
                           alpha: float = 0.05):
    """Effect confidence interval for a partially identified parameter.

    ``se_lower``/``se_upper`` are per-estimate standard errors (any sample
    size scaling already applied); ``n`` is accepted for interface
    compatibility and not used beyond that. The conservative variant with
    the larger of the two standard errors enters the critical-value
    equation.
    """
    del n
    if upper < lower:
        raise ValueError("upper bound below lower bound")
    if se_lower < 0 or se_upper < 0:
        raise ValueError("standard errors must be nonnegative")
    se = max(se_lower, se_upper)
    c = im_critical_value(upper - lower, se, alpha=alpha)
    return lower - c * se_lower, upper + c * se_upper


def identified_set_interval(lower, upper, se_lower, se_upper, alpha=0.05):
    """Pointwise interval for the identified set itself."""
    z = float(norm.ppf(1.0 - alpha / 2.0))
    return lower - z * se_lower, upper + z * se_upper


def _package(lower, se_lower, upper, se_upper, method, n_effective, alpha,
             stratum, h=None, diagnostics=None) -> BoundsEstimate:
    if upper < lower and upper - lower > -1e-10:
        upper = lower  # numerical guard at point identification
    ci_set = identified_set_interval(lower, upper, se_lower, se_upper, alpha)
    # estimated ends can cross on degenerate samples; the critical value
    # then uses the point-identified (zero-width) limit
    c = im_critical_value(upper - lower, max(se_lower, se_upper), alpha=alpha)
    ci_effect = (lower - c * se_lower, upper + c * se_upper)
    return BoundsEstimate(lower=lower, upper=upper, se_lower=se_lower,
                          se_upper=se_upper, ci_set=ci_set, ci_effect=ci_effect,
                          method=method, n_effective=int(n_effective),
                          alpha=alpha, h=h, stratum=str(stratum),
                          diagnostics=diagnostics or {})


def _regular_rows(table, bundle, labels, spec, support, inefficient,
                  degenerate_mask) -> InfluenceRows:
    """Regular moments with the point-identified limit on the masked rows."""
    labels = np.asarray(labels).copy()
    degenerate_mask = np.asarray(degenerate_mask, dtype=bool)
    # give masked rows a harmless branch for vectorized evaluation,
    # then overwrite their contributions
    safe_labels = np.where(degenerate_mask, 1, labels)
    rows = eif_regular(table, bundle, safe_labels, spec, support,
                       inefficient=inefficient)
    if not degenerate_mask.any():
        return rows
    if spec.stratum is Stratum.AT:
        deg = degenerate_at_moments(table, bundle, inefficient=inefficient)
        psi_b = np.where(degenerate_mask, deg.psi_b, rows.psi_b)
        psi_s = np.where(degenerate_mask, deg.psi_s, rows.psi_s)
    else:
        # zero stratum mass at indifference: the rows contribute nothing
        psi_b = np.where(degenerate_mask, 0.0, rows.psi_b)
        psi_s = np.where(degenerate_mask, 0.0, rows.psi_s)
    return InfluenceRows(psi_b=psi_b, psi_s=psi_s)


def _sides(side) -> Sequence[Side]:
    if str(side).lower() in ("both", "lu"):
        return (Side.L, Side.U)
    return (Side.parse(side),)


@dataclass(frozen=True)
class EstimationConfig:
    """Shared knobs for the bound estimators."""

    stratum: Stratum = Stratum.AT
    alpha: float = 0.05
    eps0: Optional[float] = None
    dominance: bool = False
    inefficient: bool = False
    share_floor: float = 1e-12

    def spec(self, side: Side) -> StratumSpec:
        return StratumSpec(self.stratum, side, self.dominance)


def moment_rows(table: ObservationTable, bundle: NuisanceBundle, side,
                config: EstimationConfig = EstimationConfig(),
                support: Optional[SupportBounds] = None) -> InfluenceRows:
    """Per-row moments as the plain estimator consumes them: regular on the
    monotone partitions, the point-identified limit on indifferent rows."""
    if support is None:
        support = SupportBounds.from_table(table)
    labels = bundle.labels(config.eps0)
    mask = labels == XZERO
    return _regular_rows(table, bundle, labels, config.spec(Side.parse(side)),
                         support, config.inefficient, mask)


def estimate_sharp(table: ObservationTable, bundle: NuisanceBundle,
                   config: EstimationConfig = EstimationConfig(),
                   support: Optional[SupportBounds] = None) -> BoundsEstimate:
    """Plug the regular moments straight in, with the point-identified limit
    on selection-indifferent rows.

    Never-taker bounds have no moment representation (they are support
    constants), so that stratum aggregates the conditional bounds directly;
    its standard error reflects the sampling of the plug-in only.
    """
    if support is None:
        support = SupportBounds.from_table(table)
    labels = bundle.labels(config.eps0)
    mask = labels == XZERO
    if config.stratum is Stratum.NT:
        from .identification import conditional_sharp_bound, stratum_weight
        w_nt = stratum_weight(bundle.s0, bundle.s1, Stratum.NT)
        out = {}
        for side in (Side.L, Side.U):
            beta_x = conditional_sharp_bound(bundle, config.spec(side), support)
            out[side] = ratio_estimate(beta_x * w_nt, w_nt, table.weight,
                                       config.share_floor)
        return _package(out[Side.L][0], out[Side.L][1], out[Side.U][0],
                        out[Side.U][1], "sharp", table.n, config.alpha,
                        config.stratum.value,
                        diagnostics={"plug_in": True})
    out = {}
    for side in (Side.L, Side.U):
        rows = _regular_rows(table, bundle, labels, config.spec(side), support,
                             config.inefficient, mask)
        out[side] = ratio_estimate(rows.psi_b, rows.psi_s, table.weight,
                                   config.share_floor)
    method = "inefficient_known_ps" if config.inefficient else "sharp"
    diags = {"share_xzero": float(mask.mean()), "n_clamped": bundle.n_clamped}
    return _package(out[Side.L][0], out[Side.L][1], out[Side.U][0], out[Side.U][1],
                    method, table.n, config.alpha, config.stratum.value,
                    diagnostics=diags)


def estimate_inefficient(table, bundle, config: EstimationConfig = EstimationConfig(),
                         support: Optional[SupportBounds] = None) -> BoundsEstimate:
    """Known-propensity moment estimator (no truncated-mean surfaces consumed)."""
    if bundle.provenance not in ("oracle", "external", "external_oracle"):
        raise PartitionError("known-propensity moments require an oracle or "
                             "externally supplied propensity score")
    cfg = EstimationConfig(stratum=config.stratum, alpha=config.alpha,
                           eps0=config.eps0, dominance=config.dominance,
                           inefficient=True, share_floor=config.share_floor)
    return estimate_sharp(table, bundle, cfg, support)


def estimate_trim(table: ObservationTable, bundle: NuisanceBundle,
                  config: EstimationConfig = EstimationConfig(),
                  eps_trim: Optional[float] = None, variant: str = "drop",
                  support: Optional[SupportBounds] = None) -> BoundsEstimate:
    """Handle the indifference band by trimming.

    ``variant="drop"`` removes the banded rows and re-estimates on the
    survivors (share renormalized to the trimmed subpopulation, so the
    estimand shifts whenever the removed rows carry stratum mass).
    ``variant="retain"`` keeps the full-sample point estimate, routing
    banded rows through their point-identified limit, but bases the
    standard error on the regular subsample only (its residual spread and
    its count), which is deliberately conservative.
    """
    if support is None:
        support = SupportBounds.from_table(table)
    labels = bundle.labels(config.eps0)
    band = labels == XZERO
    if eps_trim is not None:
        band = band | (np.abs(bundle.p0 - 1.0) <= eps_trim)
    survivors = ~band
    n_surv = int(survivors.sum())
    if n_surv == 0:
        raise AllTrimmedError("every row lies inside the trimming band")
    diags = {"share_trimmed": float(band.mean()), "variant": variant}

    if variant == "drop":
        sub_table = table.select(survivors)
        sub_bundle = bundle.select(survivors)
        sub_labels = labels[survivors]
        out = {}
        for side in (Side.L, Side.U):
            rows = eif_regular(sub_table, sub_bundle, sub_labels,
                               config.spec(side), support,
                               inefficient=config.inefficient)
            out[side] = ratio_estimate(rows.psi_b, rows.psi_s, sub_table.weight,
                                       config.share_floor)
        return _package(out[Side.L][0], out[Side.L][1], out[Side.U][0],
                        out[Side.U][1], "trim", n_surv, config.alpha,
                        config.stratum.value, diagnostics=diags)

    if variant != "retain":
        raise ValueError(f"unknown trim variant {variant!r}")
    w = table.weight
    wn_all = w / w.sum()
    w_surv = np.where(survivors, w, 0.0)
    wn_surv = w_surv / w_surv.sum()
    out = {}
    for side in (Side.L, Side.U):
        rows = _regular_rows(table, bundle, labels, config.spec(side), support,
                             config.inefficient, band)
        den = float(np.dot(wn_all, rows.psi_s))
        if den <= config.share_floor:
            raise ZeroShareError("share moment at or below floor")
        beta = float(np.dot(wn_all, rows.psi_b)) / den
        resid = rows.psi_b - beta * rows.psi_s
        se = float(np.sqrt(np.sum((wn_surv * resid) ** 2))) / den
        out[side] = (beta, se)
    return _package(out[Side.L][0], out[Side.L][1], out[Side.U][0],
                    out[Side.U][1], "trim", n_surv, config.alpha,
                    config.stratum.value, diagnostics=diags)


def estimate_switch(table: ObservationTable, bundle: NuisanceBundle,
                    config: EstimationConfig = EstimationConfig(),
                    rho: float | str = "auto",
                    support: Optional[SupportBounds] = None) -> BoundsEstimate:
    """Swap in the point-identified moment inside the shrinking band."""
    if support is None:
        support = SupportBounds.from_table(table)
    if rho == "auto":
        rho = default_rho(table.n)
    rho = float(rho)
    labels = bundle.labels(config.eps0)
    band = (labels == XZERO) | (np.abs(bundle.p0 - 1.0) <= rho)
    out = {}
    for side in (Side.L, Side.U):
        rows = _regular_rows(table, bundle, labels, config.spec(side), support,
                             config.inefficient, band)
        out[side] = ratio_estimate(rows.psi_b, rows.psi_s, table.weight,
                                   config.share_floor)
    diags = {"rho": rho, "share_switched": float(band.mean())}
    return _package(out[Side.L][0], out[Side.L][1], out[Side.U][0], out[Side.U][1],
                    "switch", table.n, config.alpha, config.stratum.value,
                    diagnostics=diags)


def smooth_ratio_estimate(rows, weights, share_floor: float = 1e-12):
    """Sum of two moment ratios with the joint delta-method standard error.

    The four per-row components share observations, so the variance uses
    the combined linearized residual rather than independent ratios.
    """
    w = np.asarray(weights, dtype=float)
    wn = w / w.sum()
    den_p = float(np.dot(wn, rows.psi_s_plus))
    den_m = float(np.dot(wn, rows.psi_s_minus))
    if min(den_p, den_m) <= share_floor:
        raise ZeroShareError("smoothed share moment at or below floor")
    beta_p = float(np.dot(wn, rows.psi_b_plus)) / den_p
    beta_m = float(np.dot(wn, rows.psi_b_minus)) / den_m
    resid = ((rows.psi_b_plus - beta_p * rows.psi_s_plus) / den_p
             + (rows.psi_b_minus - beta_m * rows.psi_s_minus) / den_m)
    se = float(np.sqrt(np.sum((wn * resid) ** 2)))
    return beta_p + beta_m, se


def estimate_smooth(table: ObservationTable, bundle: NuisanceBundle,
                    family: GFamily,
                    config: EstimationConfig = EstimationConfig()) -> BoundsEstimate:
    """Smoothed outer-bound estimator; defined for the always-taker stratum."""
    if config.stratum is not Stratum.AT:
        raise PartitionError("smoothed moments are provided for the "
                             "always-taker stratum")
    out = {}
    for side in (Side.L, Side.U):
        rows = eif_smooth(table, bundle, family, side)
        out[side] = smooth_ratio_estimate(rows, table.weight, config.share_floor)
    return _package(out[Side.L][0], out[Side.L][1], out[Side.U][0], out[Side.U][1],
                    "smooth", table.n, config.alpha, config.stratum.value,
                    h=family.h)


def heterogeneous_bounds(lower_rows: InfluenceRows, upper_rows: InfluenceRows,
                         groups, weights, alpha: float = 0.05,
                         method: str = "sharp", stratum: str = "at",
                         share_floor: float = 1e-12) -> dict:
    """Subgroup bounds by aggregating moment rows within covariate groups.

    Group ratios recombine to the unconditional estimate with weights
    proportional to each group's share-moment mass.
    """
    groups = np.asarray(groups)
    weights = np.asarray(weights, dtype=float)
    out = {}
    for gval in np.unique(groups):
        mask = groups == gval
        if not mask.any():
            continue
        lo, se_lo = ratio_estimate(lower_rows.psi_b[mask], lower_rows.psi_s[mask],
                                   weights[mask], share_floor)
        hi, se_hi = ratio_estimate(upper_rows.psi_b[mask], upper_rows.psi_s[mask],
                                   weights[mask], share_floor)
        out[gval] = _package(lo, se_lo, hi, se_hi, method, int(mask.sum()),
                             alpha, stratum, diagnostics={"group": gval})
    return out


def serialize_estimates(estimates, **extra) -> str:
    """JSON for one estimate or a list of them."""
    if isinstance(estimates, BoundsEstimate):
        estimates = [estimates]
    payload = [e.to_dict() for e in estimates]
    for entry in payload:
        entry.update(extra)
    return json.dumps(payload, indent=2, sort_keys=True, default=float)
