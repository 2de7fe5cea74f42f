"""Per-row moment (influence-function) evaluations for every estimand.

Each moment family is expressed through its numerator and share components
``psi_b`` and ``psi_s``: the estimand solves ``E[psi_b - beta * psi_s] = 0``,
so the point estimator is the ratio of their weighted means. Conditional on
covariates, ``E[psi_b | X] = beta(x) * weight(x)`` and
``E[psi_s | X] = weight(x)`` where ``weight`` is the stratum share.

Directly assembled families: always-taker lower/upper, complier lower, and
extensive-margin lower, plus the smoothed always-taker pair and the
known-propensity (uncorrected) variant. The remaining strata/sides come
from two exact symmetry transforms (outcome negation and treatment-arm
relabeling) rather than hand-copied formulas.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .data_model import (NuisanceBundle, ObservationTable, Side, Stratum,
                         StratumSpec, XMINUS, XPLUS, XZERO)
from .errors import PartitionError
from .identification import SupportBounds
from .smoothing import GFamily, _smooth_trim_levels


@dataclass(frozen=True)
class InfluenceRows:
    """Numerator and share contributions per row."""

    psi_b: np.ndarray
    psi_s: np.ndarray

    def negated_numerator(self) -> "InfluenceRows":
        return InfluenceRows(-self.psi_b, self.psi_s)


@dataclass(frozen=True)
class SmoothInfluenceRows:
    """The four per-row components of a smoothed bound (two ratio pairs)."""

    psi_b_plus: np.ndarray
    psi_s_plus: np.ndarray
    psi_b_minus: np.ndarray
    psi_s_minus: np.ndarray


def _ipw_pieces(table: ObservationTable, bundle: NuisanceBundle):
    s = table.s.astype(float)
    d = table.d.astype(float)
    yy = table.y_filled
    m, s0, s1 = bundle.m, bundle.s0, bundle.s1
    ipw1 = s * d / m
    ipw0 = s * (1.0 - d) / (1.0 - m)
    c0 = (1.0 - d) / (1.0 - m) * (s - s0)
    c1 = d / m * (s - s1)
    return yy, d, ipw1, ipw0, c0, c1


def _check_labels(labels, allow_xzero: bool):
    labels = np.asarray(labels)
    if not allow_xzero and (labels == XZERO).any():
        raise PartitionError(
            "regular moments are undefined on selection-indifferent rows; "
            "trim, switch, or smooth before evaluating")
    return labels


def _at_moments(table, bundle, labels, side: Side, inefficient: bool,
                dominance: bool) -> InfluenceRows:
    yy, d, ipw1, ipw0, c0, c1 = _ipw_pieces(table, bundle)
    m, s0, s1, p0 = bundle.m, bundle.s0, bundle.s1, bundle.p0
    rows = bundle.all_rows()
    plus = labels == XPLUS

    t1 = np.minimum(p0, 1.0)        # treated-arm mass kept
    r0 = np.minimum(1.0 / p0, 1.0)  # control-arm mass kept
    if side is Side.L:
        q1 = bundle.quantile(rows, 1, t1)
        b1 = bundle.trunc_mean(rows, 1, 1, t1)
        q0 = bundle.quantile(rows, 0, 1.0 - r0)
        b0 = bundle.trunc_mean(rows, 0, 0, 1.0 - r0)
        i1 = (yy <= q1).astype(float)
        i0 = (yy >= q0).astype(float)
    else:
        q1 = bundle.quantile(rows, 1, 1.0 - t1)
        b1 = bundle.trunc_mean(rows, 0, 1, 1.0 - t1)
        q0 = bundle.quantile(rows, 0, r0)
        b0 = bundle.trunc_mean(rows, 1, 0, r0)
        i1 = (yy >= q1).astype(float)
        i0 = (yy <= q0).astype(float)

    m1 = ipw1 * (yy * i1 - t1 * b1)
    m2 = -ipw0 * (yy * i0 - r0 * b0)
    m4 = np.where(plus,
                  -ipw1 * q1 * (i1 - p0),
                  ipw0 * q0 * (i0 - 1.0 / p0))
    m5 = np.where(plus,
                  (q1 - b1) * (c0 - p0 * c1),
                  (q0 - b0) * (c0 / p0 - c1))
    psi_s = np.where(plus, s0 + c0, s1 + c1)
    beta_x = b1 - b0
    psi_b = m1 + m2 + m4 + m5 + beta_x * psi_s

    if dominance:
        if inefficient:
            raise PartitionError("dominance and known-propensity moments "
                                 "cannot be combined")
        # under mean dominance one trimmed component drops its truncation:
        # replace it (and its quantile corrections) by the plain augmented
        # IPW moment of the untruncated conditional mean
        mu1 = bundle.trunc_mean(rows, 1, 1, np.ones(bundle.n))
        mu0 = bundle.trunc_mean(rows, 0, 0, np.zeros(bundle.n))
        if side is Side.L:
            # the treated arm is untrimmed on the positive partition; the
            # control component there is already untrimmed (b0 == mu0)
            treated = s0 * mu1 + mu1 * c0 + p0 * ipw1 * (yy - mu1)
            control = s0 * b0 + b0 * c0 + ipw0 * (yy - b0)
            psi_b = np.where(plus, treated - control, psi_b)
        else:
            # the control arm is untrimmed on the negative partition; the
            # treated component there is already untrimmed (b1 == mu1)
            treated = s1 * b1 + b1 * c1 + ipw1 * (yy - b1)
            control = s1 * mu0 + mu0 * c1 + (s1 / s0) * ipw0 * (yy - mu0)
            psi_b = np.where(plus, psi_b, treated - control)

    if inefficient:
        psi_b = psi_b - _at_delta_scaled(table, bundle, labels, side)
    return InfluenceRows(psi_b=psi_b, psi_s=psi_s)


def _at_delta_scaled(table, bundle, labels, side: Side) -> np.ndarray:
    """Share-scaled mean-zero correction dropped under known propensities.

    Subtracting it removes the truncated-mean augmentation, leaving moments
    that consume quantiles but no truncated-mean surfaces.
    """
    _, d, _, _, _, _ = _ipw_pieces(table, bundle)
    m, s0, s1, p0 = bundle.m, bundle.s0, bundle.s1, bundle.p0
    rows = bundle.all_rows()
    plus = np.asarray(labels) == XPLUS
    t1 = np.minimum(p0, 1.0)
    r0 = np.minimum(1.0 / p0, 1.0)
    if side is Side.L:
        b1 = bundle.trunc_mean(rows, 1, 1, t1)
        b0 = bundle.trunc_mean(rows, 0, 0, 1.0 - r0)
    else:
        b1 = bundle.trunc_mean(rows, 0, 1, 1.0 - t1)
        b0 = bundle.trunc_mean(rows, 1, 0, r0)
    share = np.where(plus, s0, s1)
    return share * (b1 * (1.0 - d / m) - b0 * (1.0 - (1.0 - d) / (1.0 - m)))


def degenerate_at_moments(table, bundle, inefficient: bool = False) -> InfluenceRows:
    """Point-identified limit moment used where selection is treatment-indifferent.

    The trimming thresholds collapse, leaving an augmented IPW contrast of
    the untruncated conditional means; the share plug-in is the smaller of
    the two selection probabilities with the matching-arm correction.
    """
    yy, d, ipw1, ipw0, c0, c1 = _ipw_pieces(table, bundle)
    m, s0, s1 = bundle.m, bundle.s0, bundle.s1
    rows = bundle.all_rows()
    sbar = np.minimum(s0, s1)
    psi_s = sbar + np.where(s0 <= s1, c0, c1)
    psi_b = ipw1 * yy - ipw0 * yy
    if not inefficient:
        b1 = bundle.trunc_mean(rows, 1, 1, np.ones(bundle.n))
        b0 = bundle.trunc_mean(rows, 0, 0, np.zeros(bundle.n))
        psi_b = psi_b + sbar * (b1 * (1.0 - d / m)
                                - b0 * (1.0 - (1.0 - d) / (1.0 - m)))
    return InfluenceRows(psi_b=psi_b, psi_s=psi_s)


def _cm_moments(table, bundle, labels, stratum: Stratum,
                support: SupportBounds, dominance: bool) -> InfluenceRows:
    """Lower-bound moments for the compliers and the extensive margin.

    Compliers live on the positive partition only; the extensive margin
    adds the mirrored defier branch on the negative partition. The pairing
    of the share branches with the two strata was confirmed by exact
    enumeration on a discrete design (see the moment-identity tests).
    """
    yy, d, ipw1, ipw0, c0, c1 = _ipw_pieces(table, bundle)
    m, s0, s1, p0 = bundle.m, bundle.s0, bundle.s1, bundle.p0
    rows = bundle.all_rows()
    labels = np.asarray(labels)
    plus = labels == XPLUS
    minus = labels == XMINUS

    psi_b = np.zeros(bundle.n)
    psi_s = np.zeros(bundle.n)

    if plus.any():
        u = np.clip(1.0 - p0, 0.0, 1.0)
        q1 = bundle.quantile(rows, 1, u)
        b1 = bundle.trunc_mean(rows, 1, 1, u)
        i1 = (yy <= q1).astype(float)
        k = c0 - p0 * c1
        share_p = (s1 - s0) + c1 - c0
        m1 = ipw1 * (yy * i1 - u * b1)
        m4 = -ipw1 * q1 * (i1 - u)
        m5 = -(q1 - b1) * k
        if dominance:
            mu0 = bundle.trunc_mean(rows, 0, 0, np.zeros(bundle.n))
            control = (s1 - s0) * mu0 + mu0 * (c1 - c0) \
                + ((s1 - s0) / s0) * ipw0 * (yy - mu0)
            pb = m1 + m4 + m5 + b1 * share_p - control
        else:
            ybar0 = np.broadcast_to(support.upper(0, rows), p0.shape)
            pb = m1 + m4 + m5 + (b1 - ybar0) * share_p
        psi_b = np.where(plus, pb, psi_b)
        psi_s = np.where(plus, share_p, psi_s)

    if stratum is Stratum.EM and minus.any():
        r = np.clip(1.0 / p0, 0.0, 1.0)
        q0 = bundle.quantile(rows, 0, r)
        b0 = bundle.trunc_mean(rows, 0, 0, r)
        i0 = (yy >= q0).astype(float)
        k = c0 / p0 - c1
        share_m = (s0 - s1) + c0 - c1
        m2 = -ipw0 * (yy * i0 - (1.0 - r) * b0)
        m4 = ipw0 * q0 * (i0 - (1.0 - r))
        m5 = (q0 - b0) * k
        if dominance:
            mu1 = bundle.trunc_mean(rows, 1, 1, np.ones(bundle.n))
            treated = (s0 - s1) * mu1 + mu1 * (c0 - c1) \
                + ((s0 - s1) / s1) * ipw1 * (yy - mu1)
            pb = m2 + m4 + m5 + treated - b0 * share_m
        else:
            ylow1 = np.broadcast_to(support.lower(1, rows), p0.shape)
            pb = m2 + m4 + m5 + (ylow1 - b0) * share_m
        psi_b = np.where(minus, pb, psi_b)
        psi_s = np.where(minus, share_m, psi_s)

    return InfluenceRows(psi_b=psi_b, psi_s=psi_s)


def eif_regular(table: ObservationTable, bundle: NuisanceBundle, labels,
                spec: StratumSpec, support: Optional[SupportBounds] = None,
                inefficient: bool = False, allow_xzero: bool = False) -> InfluenceRows:
    """Moment rows for a sharp bound on the requested stratum and side.

    Mirrored cases reduce to the directly assembled ones through outcome
    negation (swaps lower and upper) and treatment-arm relabeling (swaps
    compliers and defiers); both transforms are exact under a continuous
    outcome distribution.
    """
    labels = _check_labels(labels, allow_xzero)
    if support is None:
        support = SupportBounds.from_table(table)
    st, side = spec.stratum, spec.side

    if st is Stratum.AT:
        return _at_moments(table, bundle, labels, side, inefficient, spec.dominance)
    if inefficient:
        raise PartitionError("known-propensity moments are provided for the "
                             "always-taker stratum only")
    if st is Stratum.NT:
        raise PartitionError("never-taker bounds are support-driven constants "
                             "with no moment representation")
    if st in (Stratum.C, Stratum.EM):
        if side is Side.L:
            return _cm_moments(table, bundle, labels, st, support, spec.dominance)
        neg = eif_regular(table.with_negated_outcome(), bundle.with_negated_outcome(),
                          labels, StratumSpec(st, Side.L, spec.dominance),
                          support.with_negated_outcome(), allow_xzero=allow_xzero)
        return neg.negated_numerator()
    if st is Stratum.DEF:
        swapped = (table.with_swapped_arms(), bundle.with_swapped_arms(),
                   -np.asarray(labels), support.with_swapped_arms())
        if side is Side.L:
            # lower defier bound = complier lower bound after swapping arms
            # and negating the outcome (the two sign flips cancel)
            t2 = swapped[0].with_negated_outcome()
            b2 = swapped[1].with_negated_outcome()
            s2 = swapped[3].with_negated_outcome()
            return _cm_moments(t2, b2, swapped[2], Stratum.C, s2, spec.dominance)
        res = _cm_moments(swapped[0], swapped[1], swapped[2], Stratum.C,
                          swapped[3], spec.dominance)
        return res.negated_numerator()
    raise ValueError(st)


def eif_smooth(table: ObservationTable, bundle: NuisanceBundle,
               family: GFamily, side) -> SmoothInfluenceRows:
    """Four-component moment rows for the smoothed always-taker bound.

    No partition labels enter: the smooth surrogates make every term well
    defined and differentiable through the selection-indifference point.
    """
    side = Side.parse(side)
    yy, d, ipw1, ipw0, c0, c1 = _ipw_pieces(table, bundle)
    m, s0, s1, p0 = bundle.m, bundle.s0, bundle.s1, bundle.p0
    rows = bundle.all_rows()
    g, gp = family.g, family.g_prime

    u1, u0 = _smooth_trim_levels(family, p0)   # g1(p0), g1(1/p0)
    g3 = g(3, p0)
    gp1 = gp(1, p0)
    gp1_inv = gp(1, 1.0 / p0)
    k = c0 - p0 * c1

    def fshare(gj, gjp):
        return gj * s1 + gjp * c0 + (gj - p0 * gjp) * c1

    f1 = fshare(u1, gp1)
    f3 = fshare(g3, gp1)   # g3' = g1'

    if side is Side.L:
        q1 = bundle.quantile(rows, 1, u1)
        b1 = bundle.trunc_mean(rows, 1, 1, u1)
        q0 = bundle.quantile(rows, 0, 1.0 - u0)
        b0 = bundle.trunc_mean(rows, 0, 0, 1.0 - u0)
        i1 = (yy <= q1).astype(float)
        i0 = (yy >= q0).astype(float)
        outer_idx = (4, 5)
        level_plus, level_minus = u1, g3          # weights on the trimmed pieces
        share_plus, share_minus = f3, f1          # denominator moments
        carry_plus, carry_minus = f1, f3          # numerator share factors
    else:
        q1 = bundle.quantile(rows, 1, 1.0 - u1)
        b1 = bundle.trunc_mean(rows, 0, 1, 1.0 - u1)
        q0 = bundle.quantile(rows, 0, u0)
        b0 = bundle.trunc_mean(rows, 1, 0, u0)
        i1 = (yy >= q1).astype(float)
        i0 = (yy <= q0).astype(float)
        outer_idx = (2, 6)
        level_plus, level_minus = g3, u1
        share_plus, share_minus = f1, f3
        carry_plus, carry_minus = f3, f1

    beta_h = b1 - b0
    # an infinite quantile means the trimming level degenerated to an end
    # of an unbounded support; every term it enters vanishes in that limit
    # (the indicator residual is exactly zero, the slope decays faster
    # than the quantile grows), so zero it before forming products
    fin1, fin0 = np.isfinite(q1), np.isfinite(q0)
    q1 = np.where(fin1, q1, 0.0)
    q0 = np.where(fin0, q0, 0.0)
    gap1 = np.where(fin1, q1 - b1, 0.0)
    gap0 = np.where(fin0, q0 - b0, 0.0)
    a1 = ipw1 * (yy * i1 - u1 * b1)
    a2 = ipw0 * (yy * i0 - u0 * b0)
    a4 = ipw1 * q1 * (i1 - u1)
    a4b = ipw0 * q0 * (i0 - u0)

    def component(outer_i, level, carry, share):
        deriv = gp(outer_i, beta_h)
        ratio = level / u1
        psi = deriv * (ratio * a1
                       - (level / (p0 * u0)) * a2
                       - ratio * a4
                       + (level / (p0 * u0)) * a4b
                       + (gap1 * gp1 * ratio
                          + gap0 * gp1_inv * level / (u0 * p0 ** 2)) * k)
        psi_b = psi + g(outer_i, beta_h) * carry
        return psi_b, share

    pb_plus, ps_plus = component(outer_idx[0], level_plus, carry_plus, share_plus)
    pb_minus, ps_minus = component(outer_idx[1], level_minus, carry_minus, share_minus)
    return SmoothInfluenceRows(psi_b_plus=pb_plus, psi_s_plus=ps_plus,
                               psi_b_minus=pb_minus, psi_s_minus=ps_minus)


# ---------------------------------------------------------------------------
# closed-form variance functionals for oracle designs

def efficiency_bound(design, side=Side.L) -> float:
    """Semiparametric variance bound for the always-taker lower bound.

    Evaluates every variance and cross-moment summand by quadrature over
    the design's covariate law and divides by the squared always-taker
    share. Valid on designs with no selection-indifferent mass.
    """
    side = Side.parse(side)
    if side is not Side.L:
        raise ValueError("the variance bound is evaluated for the lower bound")
    beta = design.sharp_bound(Side.L)

    def integrand(pt):
        m, s0, s1 = pt.m, pt.s0, pt.s1
        p0 = s0 / s1
        total = s1 * pt.sigma1_sq / m + s0 * pt.sigma0_sq / (1.0 - m)
        if pt.label == XPLUS:
            q1 = pt.q1(min(p0, 1.0))
            b1 = pt.b11(min(p0, 1.0))
            bx = pt.beta_x
            total += (bx - beta) ** 2 * s0 * (1.0 - s0 * m) / (1.0 - m)
            total += s1 * q1 ** 2 * p0 * (1.0 - p0) / m
            total += (q1 - b1) ** 2 * (s0 * (1.0 - s0) / (1.0 - m)
                                       + p0 ** 2 * s1 * (1.0 - s1) / m)
            total += -2.0 * q1 * b1 * s1 * p0 * (1.0 - p0) / m
            total += 2.0 * (bx - beta) * (q1 - b1) * s0 * (1.0 - s0) / (1.0 - m)
        elif pt.label == XMINUS:
            r = 1.0 / p0
            q0 = pt.q0(1.0 - r)
            b0 = pt.b00(1.0 - r)
            bx = pt.beta_x
            total += (bx - beta) ** 2 * s1 * (1.0 - s1 + s1 * m) / m
            total += s0 * q0 ** 2 * r * (1.0 - r) / (1.0 - m)
            total += (q0 - b0) ** 2 * (r ** 2 * s0 * (1.0 - s0) / (1.0 - m)
                                       + s1 * (1.0 - s1) / m)
            total += -2.0 * q0 * b0 * s0 * r * (1.0 - r) / (1.0 - m)
            total += -2.0 * (bx - beta) * (q0 - b0) * s1 * (1.0 - s1) / m
        return total

    denom = design.expectation(lambda pt: min(pt.s0, pt.s1))
    return design.expectation(integrand) / denom ** 2


def efficiency_gap(design) -> float:
    """Excess asymptotic variance of the known-propensity moment estimator."""

    def integrand(pt):
        m, s0, s1 = pt.m, pt.s0, pt.s1
        p0 = s0 / s1
        w1 = np.sqrt((1.0 - m) / m)
        w0 = np.sqrt(m / (1.0 - m))
        if pt.label == XPLUS:
            return s0 ** 2 * (pt.b11(min(p0, 1.0)) * w1 - pt.b00(0.0) * w0) ** 2
        if pt.label == XMINUS:
            return s1 ** 2 * (pt.b11(1.0) * w1 - pt.b00(1.0 - 1.0 / p0) * w0) ** 2
        return 0.0

    denom = design.expectation(lambda pt: min(pt.s0, pt.s1))
    return design.expectation(integrand) / denom ** 2
