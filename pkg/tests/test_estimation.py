import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import norm

import strata_bounds as sb
from strata_bounds.data_model import NuisanceBundle, ObservationTable
from strata_bounds.errors import (AllTrimmedError, PartitionError,
                                  ZeroShareError)
from strata_bounds.estimation import (EstimationConfig, default_rho,
                                      estimate_inefficient, estimate_sharp,
                                      estimate_smooth, estimate_switch,
                                      estimate_trim, heterogeneous_bounds,
                                      im_critical_value, imbens_manski_interval,
                                      ratio_estimate)
from strata_bounds.influence import eif_regular
from strata_bounds.smoothing import GFamily

from helpers import Pieces


class TestRatioEstimate:
    def test_unit_share_reduces_to_weighted_mean(self):
        rng = np.random.default_rng(0)
        psi_b = rng.normal(size=500)
        w = rng.uniform(0.5, 2.0, 500)
        beta, se = ratio_estimate(psi_b, np.ones(500), w)
        assert beta == pytest.approx(np.average(psi_b, weights=w), rel=1e-12)
        wn = w / w.sum()
        want_se = np.sqrt(np.sum((wn * (psi_b - beta)) ** 2))
        assert se == pytest.approx(want_se, rel=1e-12)

    def test_proportional_moments_have_zero_se(self):
        psi_s = np.abs(np.random.default_rng(1).normal(size=100)) + 0.1
        beta, se = ratio_estimate(3.5 * psi_s, psi_s, np.ones(100))
        assert beta == pytest.approx(3.5, rel=1e-12)
        assert se == pytest.approx(0.0, abs=1e-12)

    def test_linearization_residual(self):
        rng = np.random.default_rng(2)
        psi_b = rng.normal(size=300)
        psi_s = rng.uniform(0.2, 1.0, 300)
        w = rng.uniform(0.5, 2.0, 300)
        beta, _ = ratio_estimate(psi_b, psi_s, w)
        resid = np.average(psi_b - beta * psi_s, weights=w)
        assert abs(resid) < 1e-12

    def test_zero_share_error(self):
        with pytest.raises(ZeroShareError):
            ratio_estimate(np.ones(10), np.zeros(10), np.ones(10))


class TestImbensManski:
    def test_wide_set_one_sided_limit(self):
        c = im_critical_value(delta=100.0, se=1.0, alpha=0.05)
        assert c == pytest.approx(norm.ppf(0.95), abs=1e-6)

    def test_point_identified_two_sided_limit(self):
        c = im_critical_value(delta=0.0, se=1.0, alpha=0.05)
        assert c == pytest.approx(norm.ppf(0.975), abs=1e-9)

    def test_monotone_in_width(self):
        cs = [im_critical_value(d, 1.0, 0.05) for d in (0.0, 0.5, 1.0, 3.0, 10.0)]
        assert all(a >= b - 1e-12 for a, b in zip(cs, cs[1:]))

    def test_interval_construction(self):
        lo, hi = imbens_manski_interval(0.2, 0.8, 0.05, 0.1, alpha=0.05)
        c = im_critical_value(0.6, 0.1, 0.05)
        assert lo == pytest.approx(0.2 - c * 0.05)
        assert hi == pytest.approx(0.8 + c * 0.1)

    def test_zero_se_degenerate(self):
        lo, hi = imbens_manski_interval(0.2, 0.8, 0.0, 0.0)
        assert (lo, hi) == (0.2, 0.8)

    @settings(max_examples=100, deadline=None)
    @given(st.floats(-1, 1), st.floats(0, 2), st.floats(0.001, 0.5),
           st.floats(0.001, 0.5), st.floats(0.01, 0.2))
    def test_nesting(self, lower, width, se_l, se_u, alpha):
        upper = lower + width
        eff = imbens_manski_interval(lower, upper, se_l, se_u, alpha=alpha)
        z = norm.ppf(1 - alpha / 2)
        setci = (lower - z * se_l, upper + z * se_u)
        assert eff[0] <= lower + 1e-12 and eff[1] >= upper - 1e-12
        assert eff[0] >= setci[0] - 1e-9 and eff[1] <= setci[1] + 1e-9

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            imbens_manski_interval(1.0, 0.5, 0.1, 0.1)
        with pytest.raises(ValueError):
            imbens_manski_interval(0.0, 1.0, -0.1, 0.1)


def oracle_setup(shares=(0.5, 0.0, 0.5), n=4000, seed=8):
    config = sb.DgpConfig(n=n, shares=shares, replications=1, base_seed=seed)
    table = sb.dgp_sample(config, 0)
    bundle = sb.oracle_nuisances(config)(table)
    support = sb.oracle_support(config, table)
    return config, table, bundle, support


class TestEstimators:
    def test_switch_with_zero_rho_equals_sharp_on_regular_design(self):
        config, table, bundle, support = oracle_setup()
        cfg = EstimationConfig()
        sharp = estimate_sharp(table, bundle, cfg, support)
        switch = estimate_switch(table, bundle, cfg, rho=0.0, support=support)
        assert switch.lower == pytest.approx(sharp.lower, abs=1e-12)
        assert switch.upper == pytest.approx(sharp.upper, abs=1e-12)

    def test_trim_noop_without_indifferent_rows(self):
        config, table, bundle, support = oracle_setup()
        cfg = EstimationConfig()
        sharp = estimate_sharp(table, bundle, cfg, support)
        for variant in ("drop", "retain"):
            trim = estimate_trim(table, bundle, cfg, variant=variant,
                                 support=support)
            assert trim.lower == pytest.approx(sharp.lower, abs=1e-12)
            assert trim.se_lower == pytest.approx(sharp.se_lower, rel=1e-9)

    def test_methods_agree_in_smooth_limit(self):
        # no rows near the indifference point: trim, switch, and the
        # vanishing-h smoothed estimator coincide
        config, table, bundle, support = oracle_setup()
        away = np.abs(bundle.p0 - 1.0) > 2 * default_rho(table.n)
        table, bundle = table.select(away), bundle.select(away)
        assert (np.abs(bundle.p0 - 1.0) > default_rho(table.n)).all()
        cfg = EstimationConfig()
        trim = estimate_trim(table, bundle, cfg, support=support)
        switch = estimate_switch(table, bundle, cfg, support=support)
        smooth = estimate_smooth(table, bundle, GFamily(h=1e-9), cfg)
        assert switch.lower == pytest.approx(trim.lower, abs=1e-6)
        assert smooth.lower == pytest.approx(trim.lower, abs=1e-6)
        assert smooth.upper == pytest.approx(trim.upper, abs=1e-6)

    def test_all_trimmed_error(self):
        config, table, bundle, support = oracle_setup(shares=(0.0, 1.0, 0.0),
                                                      n=200)
        with pytest.raises(AllTrimmedError):
            estimate_trim(table, bundle, EstimationConfig(), support=support)

    def test_trim_retain_keeps_full_sample_point_estimate(self):
        config, table, bundle, support = oracle_setup(shares=(0.4, 0.2, 0.4))
        cfg = EstimationConfig()
        sharp = estimate_sharp(table, bundle, cfg, support)
        retain = estimate_trim(table, bundle, cfg, variant="retain",
                               support=support)
        drop = estimate_trim(table, bundle, cfg, variant="drop", support=support)
        assert retain.lower == pytest.approx(sharp.lower, abs=1e-12)
        assert retain.se_lower > sharp.se_lower
        assert drop.lower != pytest.approx(sharp.lower, abs=1e-6)
        assert retain.n_effective == drop.n_effective < table.n

    def test_smooth_outer_ordering_on_data(self):
        config, table, bundle, support = oracle_setup(shares=(0.4, 0.2, 0.4))
        cfg = EstimationConfig()
        lows, highs = [], []
        for h in (1e-9, 0.01, 0.05, 0.2):
            est = estimate_smooth(table, bundle, GFamily(h=h), cfg)
            lows.append(est.lower)
            highs.append(est.upper)
        assert all(a >= b - 1e-10 for a, b in zip(lows, lows[1:]))
        assert all(a <= b + 1e-10 for a, b in zip(highs, highs[1:]))

    def test_smooth_requires_always_taker_stratum(self):
        config, table, bundle, support = oracle_setup(n=500)
        with pytest.raises(PartitionError):
            estimate_smooth(table, bundle, GFamily(h=0.05),
                            EstimationConfig(stratum=sb.Stratum.C))

    def test_ci_nesting_on_estimates(self):
        config, table, bundle, support = oracle_setup(shares=(0.4, 0.2, 0.4))
        cfg = EstimationConfig()
        for est in (estimate_sharp(table, bundle, cfg, support),
                    estimate_switch(table, bundle, cfg, support=support),
                    estimate_smooth(table, bundle, GFamily(h=0.05), cfg)):
            assert est.ci_effect[0] <= est.lower + 1e-12
            assert est.ci_effect[1] >= est.upper - 1e-12
            assert est.ci_set[0] <= est.ci_effect[0] + 1e-9
            assert est.ci_set[1] >= est.ci_effect[1] - 1e-9

    def test_inefficient_requires_known_propensity(self):
        config, table, bundle, support = oracle_setup(n=300)
        cross = NuisanceBundle(bundle.m, bundle.s0, bundle.s1,
                               bundle._quantile_fn, bundle._trunc_mean_fn,
                               provenance="cross_fitted")
        with pytest.raises(PartitionError):
            estimate_inefficient(table, cross, EstimationConfig(), support)

    def test_null_effect_design(self):
        # constant outcome, full selection, known propensity: the estimated
        # contrast is noise around zero
        n = 20_000
        rng = np.random.default_rng(5)
        d = (rng.random(n) < 0.5).astype(int)
        t = ObservationTable(y=np.full(n, 2.0), s=np.ones(n, int), d=d,
                             x=np.zeros((n, 1)), weight=np.ones(n))
        dist = Pieces([1.0], [2.0 - 1e-9], [2.0 + 1e-9])
        b = NuisanceBundle(np.full(n, 0.5), np.full(n, 1 - 1e-9),
                           np.full(n, 1 - 1e-9),
                           lambda r, dd, u: np.full(len(r), 2.0),
                           lambda r, j, dd, u: np.full(len(r), 2.0),
                           provenance="oracle")
        est = estimate_inefficient(t, b, EstimationConfig())
        assert est.lower == pytest.approx(0.0, abs=4 * max(est.se_lower, 1e-12))

    def test_full_selection_inefficient_is_ipw_contrast(self):
        n = 5000
        rng = np.random.default_rng(6)
        d = (rng.random(n) < 0.4).astype(int)
        y = 1.0 + 0.5 * d + rng.normal(size=n)
        t = ObservationTable(y=y, s=np.ones(n, int), d=d, x=np.zeros((n, 1)),
                             weight=np.ones(n))
        m = np.full(n, 0.4)
        b = NuisanceBundle(m, np.full(n, 1 - 1e-12), np.full(n, 1 - 1e-12),
                           lambda r, dd, u: np.full(len(r), y.max()),
                           lambda r, j, dd, u: np.full(len(r), 0.0),
                           provenance="oracle")
        est = estimate_inefficient(t, b, EstimationConfig())
        ht = np.mean(y * d / 0.4) - np.mean(y * (1 - d) / 0.6)
        # the share moment is 1 up to the floor, so the ratio reduces to
        # the plain inverse-propensity contrast
        assert est.lower == pytest.approx(ht, abs=1e-6)


class TestHeterogeneousBounds:
    def _rows(self):
        config, table, bundle, support = oracle_setup(shares=(0.4, 0.2, 0.4),
                                                      n=6000)
        labels = bundle.labels()
        keep = labels != 0
        lower = eif_regular(table.select(keep), bundle.select(keep),
                            labels[keep], sb.StratumSpec("at", "l"), support)
        upper = eif_regular(table.select(keep), bundle.select(keep),
                            labels[keep], sb.StratumSpec("at", "u"), support)
        return table.select(keep), lower, upper

    def test_single_group_equals_unconditional(self):
        table, lower, upper = self._rows()
        groups = np.zeros(table.n)
        out = heterogeneous_bounds(lower, upper, groups, table.weight)
        beta, se = ratio_estimate(lower.psi_b, lower.psi_s, table.weight)
        assert out[0.0].lower == pytest.approx(beta, rel=1e-12)
        assert out[0.0].se_lower == pytest.approx(se, rel=1e-12)

    def test_groups_recombine_to_unconditional(self):
        table, lower, upper = self._rows()
        groups = table.x[:, 0]
        out = heterogeneous_bounds(lower, upper, groups, table.weight)
        wn = table.weight / table.weight.sum()
        total_mass = float(np.dot(wn, lower.psi_s))
        combined = 0.0
        for gval, est in out.items():
            mask = groups == gval
            share = float(np.dot(wn[mask], lower.psi_s[mask])) / total_mass
            combined += share * est.lower
        beta, _ = ratio_estimate(lower.psi_b, lower.psi_s, table.weight)
        assert combined == pytest.approx(beta, rel=1e-10)

    def test_group_targets_on_benchmark(self):
        # the effect is concentrated on the positive-monotone category
        table, lower, upper = self._rows()
        groups = table.x[:, 0]
        out = heterogeneous_bounds(lower, upper, groups, table.weight)
        assert out[1.0].lower > 0.3
        assert abs(out[-1.0].lower) < 0.1


class TestDefaultRho:
    def test_formula(self):
        assert default_rho(2000) == pytest.approx(2000 ** -0.25 / np.log(2000))
