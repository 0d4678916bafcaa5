"""Exponent objectives: score floor, pairwise confusion, outer forms.

Frozen numbers in this file were produced by this implementation and
cross-checked against the brute-force oracles in gldx.oracles; the
oracle agreement itself is covered in test_oracle_equivalence.py.
"""

import math

import numpy as np
import pytest

from gldx import (
    AffineMetric,
    CompetitorScoreEvaluator,
    Distribution,
    DistributionError,
    ExponentQuery,
    GridSpec,
    InfeasibleGridError,
    JointDistribution,
    competitor_score_exponent,
    constant_metric,
    emi_metric,
    exponent_form,
    expurgated_exponent,
    matched_metric,
    maxmin_exponent,
    mismatched_metric,
    pairwise_confusion_exponent,
    rate_sweep,
)


class TestQueryValidation:
    def test_negative_rate(self, bsc, unif2):
        with pytest.raises(DistributionError):
            ExponentQuery(-0.1, unif2, bsc, matched_metric(bsc))

    def test_rho_max_floor(self, bsc, unif2):
        with pytest.raises(DistributionError):
            ExponentQuery(0.1, unif2, bsc, matched_metric(bsc), rho_max=0.5)

    def test_shape_mismatches(self, bsc, wide, unif2):
        with pytest.raises(DistributionError):
            ExponentQuery(0.1, Distribution.uniform(3), bsc, matched_metric(bsc))
        with pytest.raises(DistributionError):
            ExponentQuery(0.1, unif2, bsc, matched_metric(wide))


class TestScoreFloor:
    def test_constant_metric_exact(self, bsc):
        # independent kernel is optimal: value is the constant plus the rate
        got = competitor_score_exponent(0.25, Distribution([0.3, 0.7]), bsc, constant_metric(2, 2, 0.4), 16)
        assert got == 0.4 + 0.25

    def test_emi_metric_exact(self, bsc):
        got = competitor_score_exponent(0.17, Distribution([0.5, 0.5]), bsc, emi_metric(2, 2), 16)
        assert got == 0.17

    def test_monotone_in_rate(self, bsc):
        m = matched_metric(bsc)
        qy = Distribution([0.4, 0.6])
        vals = [competitor_score_exponent(r, qy, bsc, m, 12) for r in (0.05, 0.2, 0.5)]
        assert vals[0] <= vals[1] + 1e-12 <= vals[2] + 2e-12

    def test_batch_matches_scalar(self, bsc):
        # two separate code paths (padded sub-batches vs one row), so
        # agreement is to roundoff, not to the bit
        ev = CompetitorScoreEvaluator(matched_metric(bsc), 0.3, 2, 12)
        rng = np.random.default_rng(31)
        rows = rng.dirichlet(np.ones(2), size=9)
        batch = ev.value_batch(rows)
        singles = np.array([ev.value(r) for r in rows])
        assert np.max(np.abs(batch - singles)) <= 1e-12

    def test_batch_height_invisible(self, bsc):
        # fixed sub-batch processing: a row's value cannot depend on how
        # many rows ride along with it
        ev = CompetitorScoreEvaluator(matched_metric(bsc), 0.3, 2, 12)
        rng = np.random.default_rng(33)
        rows = rng.dirichlet(np.ones(2), size=100)
        full = ev.value_batch(rows)
        head = ev.value_batch(rows[:7])
        assert np.array_equal(full[:7], head)

    def test_size_mismatch(self, bsc):
        with pytest.raises(DistributionError):
            competitor_score_exponent(0.1, Distribution.uniform(3), bsc, matched_metric(bsc), 8)


class TestPairwiseConfusion:
    def test_nonnegative_and_monotone_in_rate(self, bsc, unif2):
        m = matched_metric(bsc)
        coupling = JointDistribution([[0.3, 0.2], [0.2, 0.3]])
        lo = pairwise_confusion_exponent(coupling, 0.05, bsc, m, 8)
        hi = pairwise_confusion_exponent(coupling, 0.3, bsc, m, 8)
        assert 0.0 <= lo <= hi + 1e-9

    def test_constant_metric_equals_rate(self, bsc):
        # divergence part sits at 0 on the channel rows; the clipped
        # deficit is exactly the rate for every kernel choice
        m = constant_metric(2, 2, -1.0)
        for cpl in ([[0.5, 0.0], [0.0, 0.5]], [[0.25, 0.25], [0.25, 0.25]]):
            got = pairwise_confusion_exponent(JointDistribution(cpl), 0.2, bsc, m, 8)
            assert got == 0.2

    def test_noiseless_off_diagonal_infinite(self, noiseless):
        # finite divergence forces output = input, where the second
        # word's score hits a forbidden cell
        m = matched_metric(noiseless)
        off = JointDistribution([[0.25, 0.25], [0.25, 0.25]])
        assert pairwise_confusion_exponent(off, 0.2, noiseless, m, 8) == math.inf

    def test_noiseless_diagonal_finite(self, noiseless):
        m = matched_metric(noiseless)
        diag = JointDistribution([[0.5, 0.0], [0.0, 0.5]])
        assert pairwise_confusion_exponent(diag, 0.2, noiseless, m, 8) == 0.0


class TestOuterForms:
    def test_bsc_matched_frozen(self, bsc, unif2):
        query = ExponentQuery(0.1, unif2, bsc, matched_metric(bsc))
        res = exponent_form(query, 8)
        assert res.expurgated_value == pytest.approx(0.12314355189689047, abs=1e-12)
        assert res.maxmin_value == pytest.approx(0.11111926448503395, abs=1e-12)
        assert res.form == "constrained"
        assert res.value == res.expurgated_value
        assert res.gap == pytest.approx(res.expurgated_value - res.maxmin_value, abs=1e-15)
        assert not res.boundary_flag

    def test_bsc_matched_k16_forms_agree(self, bsc, unif2):
        query = ExponentQuery(0.1, unif2, bsc, matched_metric(bsc))
        res = exponent_form(query, 16)
        assert res.expurgated_value == pytest.approx(0.1231435513142097, abs=1e-12)
        assert res.maxmin_value == pytest.approx(0.1231435513142097, abs=1e-12)

    def test_mismatched_frozen(self, bsc, unif2):
        m = mismatched_metric([[0.85, 0.15], [0.15, 0.85]])
        res = exponent_form(ExponentQuery(0.2, unif2, bsc, m), 8)
        assert res.expurgated_value == pytest.approx(0.03589828949336804, abs=1e-12)
        assert res.maxmin_value == pytest.approx(0.03589828949336804, abs=1e-12)

    def test_weak_duality_random(self, unif2):
        rng = np.random.default_rng(43)
        from conftest import random_channel

        for _ in range(3):
            ch = random_channel(rng, 2, 2)
            m = matched_metric(ch, beta=float(rng.uniform(0.5, 2.0)))
            res = exponent_form(ExponentQuery(0.2, unif2, ch, m), 8)
            assert res.maxmin_value <= res.expurgated_value + 1e-9

    def test_constant_metric_both_zero(self, bsc, unif2):
        query = ExponentQuery(0.3, unif2, bsc, constant_metric(2, 2, 0.7))
        res = exponent_form(query, 8)
        assert res.expurgated_value == 0.0
        assert res.maxmin_value == 0.0

    def test_emi_reports_penalized_form(self, bsc, unif2):
        res = exponent_form(ExponentQuery(0.1, unif2, bsc, emi_metric(2, 2)), 8)
        assert res.form == "penalized"
        assert res.value == res.maxmin_value
        # duality still applies: penalized never above constrained
        assert res.maxmin_value <= res.expurgated_value + 1e-9

    def test_value_never_below_minus_rate(self, unif2):
        rng = np.random.default_rng(47)
        from conftest import random_channel

        for _ in range(3):
            ch = random_channel(rng, 2, 2)
            m = matched_metric(ch, beta=2.0)
            rate = float(rng.uniform(0.05, 0.5))
            res = expurgated_exponent(ExponentQuery(rate, unif2, ch, m), 8)
            assert res.value >= -rate - 1e-12


class TestSupportInfinity:
    def test_noiseless_expurgated_infinite(self, noiseless, unif2):
        # R below ln 2: every feasible coupling carries off-diagonal mass
        query = ExponentQuery(0.2, unif2, noiseless, matched_metric(noiseless))
        res = expurgated_exponent(query, 16)
        assert res.value == math.inf
        assert "support-forced" in res.note

    def test_noiseless_maxmin_boundary(self, noiseless, unif2):
        query = ExponentQuery(0.2, unif2, noiseless, matched_metric(noiseless))
        res = maxmin_exponent(query, 16)
        # only the diagonal coupling is finite: value rho_max*(ln 2 - R)
        assert res.value == pytest.approx(64.0 * (math.log(2) - 0.2), abs=1e-9)
        assert res.boundary_flag
        assert res.rho_star == pytest.approx(64.0, abs=1e-6)

    def test_all_forbidden_metric(self, bsc, unif2):
        # second word's score is -inf for every coupling
        m = AffineMetric(np.full((2, 2), -math.inf))
        res = expurgated_exponent(ExponentQuery(0.1, unif2, bsc, m), 8)
        assert res.value == math.inf
        assert "support-forced" in res.note


class TestGridFeasibility:
    def test_coarse_grid_rejected(self, bsc, unif2):
        # k=6 pins margins at (3,3); the most independent table still has
        # information above this rate, so the constrained form is empty
        query = ExponentQuery(0.05, unif2, bsc, matched_metric(bsc))
        with pytest.raises(InfeasibleGridError, match="resolution"):
            expurgated_exponent(query, 6)
        # the penalized form has no information cap and stays solvable
        res = maxmin_exponent(query, 6)
        assert math.isfinite(res.value)

    def test_off_grid_composition_rejected(self, bsc):
        query = ExponentQuery(0.2, Distribution([1 / 3, 2 / 3]), bsc, matched_metric(bsc))
        with pytest.raises(InfeasibleGridError) as err:
            expurgated_exponent(query, 8)
        assert err.value.suggestion is not None


class TestRateSweep:
    def test_matches_direct_calls(self, bsc, unif2):
        query = ExponentQuery(0.1, unif2, bsc, matched_metric(bsc))
        rates = [0.1, 0.3]
        swept = rate_sweep(query, rates, 8)
        for r, res in zip(rates, swept):
            direct = exponent_form(ExponentQuery(r, unif2, bsc, matched_metric(bsc)), 8)
            assert res.expurgated_value == direct.expurgated_value
            assert res.maxmin_value == direct.maxmin_value

    def test_exponent_nonincreasing_in_rate(self, bsc, unif2):
        query = ExponentQuery(0.1, unif2, bsc, matched_metric(bsc))
        swept = rate_sweep(query, [0.1, 0.25, 0.45], 8)
        vals = [r.expurgated_value for r in swept]
        assert vals[0] >= vals[1] - 1e-9 >= vals[2] - 2e-9

    def test_unsorted_rejected(self, bsc, unif2):
        query = ExponentQuery(0.1, unif2, bsc, matched_metric(bsc))
        with pytest.raises(DistributionError):
            rate_sweep(query, [0.3, 0.1], 8)


class TestDeterminism:
    def test_repeat_call_identical(self, bsc, unif2):
        query = ExponentQuery(0.15, unif2, bsc, matched_metric(bsc))
        a = exponent_form(query, GridSpec(8, workers=1))
        b = exponent_form(query, GridSpec(8, workers=1))
        assert a.value == b.value
        assert np.array_equal(a.argmin, b.argmin)

    def test_workers_invisible(self, bsc, unif2):
        query = ExponentQuery(0.15, unif2, bsc, matched_metric(bsc))
        a = exponent_form(query, GridSpec(8, workers=1))
        b = exponent_form(query, GridSpec(8, workers=8))
        assert a.value == b.value
        assert a.rho_star == b.rho_star
        assert np.array_equal(a.argmin, b.argmin)
