"""KS machinery, report types, and the generic statistical tests."""

import json
import math

import numpy as np
import pytest
from scipy.special import kolmogorov

from infobridge import (
    EnsembleSummary,
    TestReport,
    ks_test,
    ks_test_exponential,
    martingale_expectation_test,
    refinement_report,
)
from infobridge.verify import kolmogorov_pvalue, ks_statistic


class TestKSStatistic:
    def test_three_point_hand_enumeration(self):
        # samples {0.5, 1.0, 1.5} against 1 - e^{-x}: the sup is attained
        # below the first step, D = F(0.5) - 0
        samples = np.array([0.5, 1.0, 1.5])
        cdf = lambda x: 1.0 - np.exp(-x)
        steps = [(1 / 3, 0.0, cdf(0.5)), (2 / 3, 1 / 3, cdf(1.0)), (1.0, 2 / 3, cdf(1.5))]
        brute = max(max(hi - f, f - lo) for hi, lo, f in steps)
        assert brute == pytest.approx(1.0 - math.exp(-0.5))
        d = ks_statistic(samples, cdf)
        assert d == pytest.approx(brute, abs=1e-15)
        assert d == pytest.approx(0.3934693403, abs=1e-10)

    def test_point_mass_at_one(self):
        # all samples equal 1: D = max(F(1), 1 - F(1)) = 1 - e^{-1}
        samples = np.ones(100)
        d = ks_statistic(samples, lambda x: 1.0 - np.exp(-x))
        assert d == pytest.approx(1.0 - math.exp(-1.0), abs=1e-12)

    def test_pvalue_matches_kolmogorov_series(self):
        # independent oracle: scipy's Kolmogorov survival function
        for lam in (0.5, 0.8, 1.0, 1.36, 2.0):
            ours = kolmogorov_pvalue(lam, 1)
            assert ours == pytest.approx(float(kolmogorov(lam)), abs=1e-10)

    def test_exponential_self_consistency(self):
        # i.i.d. unit-exponential samples pass at the 1% level in at least
        # 97 of 100 seeded repetitions
        hits = 0
        for rep in range(100):
            rng = np.random.default_rng(10_000 + rep)
            sample = -np.log(rng.uniform(size=400))
            _, p = ks_test_exponential(sample)
            hits += p > 0.01
        assert hits >= 97

    def test_preconditions(self):
        with pytest.raises(ValueError):
            ks_test_exponential(np.ones(10))
        with pytest.raises(ValueError):
            ks_test_exponential(np.concatenate([np.ones(60), [-1.0]]))

    def test_detects_wrong_law(self):
        rng = np.random.default_rng(3)
        sample = rng.uniform(0.0, 2.0, 500) + 1e-9
        _, p = ks_test_exponential(sample)
        assert p < 1e-6


class TestMartingaleExpectation:
    def test_unbiased_ensemble_passes(self):
        rng = np.random.default_rng(1)
        target = np.array([0.3, 0.6, 0.9])
        values = target[None, :] + rng.standard_normal((5000, 3))
        rep = martingale_expectation_test("t", values, [1.0, 2.0, 3.0], target)
        assert rep.passed
        assert rep.statistic <= 3.0

    def test_ten_percent_bias_detected_at_acceptance_scale(self):
        # the sensitivity scale of the suite: a x1.1 corruption on values
        # of order one must exceed three standard errors at n=5000
        rng = np.random.default_rng(2)
        target = np.array([0.5, 0.8])
        values = 1.1 * (target[None, :] + 0.5 * rng.standard_normal((5000, 2)))
        rep = martingale_expectation_test("t", values, [1.0, 2.0], target)
        assert not rep.passed

    def test_constant_ensemble_on_target_passes_with_zero_margin(self):
        values = np.full((100, 2), 0.7)
        rep = martingale_expectation_test("t", values, [1.0, 2.0],
                                          np.array([0.7, 0.7]))
        assert rep.passed
        assert rep.statistic == 0.0

    def test_constant_ensemble_off_target_fails(self):
        values = np.full((100, 2), 0.7)
        rep = martingale_expectation_test("t", values, [1.0, 2.0],
                                          np.array([0.7, 0.8]))
        assert not rep.passed

    def test_requires_two_times(self):
        with pytest.raises(ValueError):
            martingale_expectation_test("t", np.ones((10, 1)), [1.0], lambda t: 1.0)


class TestRefinementReport:
    def test_strictly_decreasing_passes(self):
        rep = refinement_report("r", ["a", "b", "c"], [0.1, 0.03, 0.01])
        assert rep.passed

    def test_non_monotone_fails(self):
        rep = refinement_report("r", ["a", "b", "c"], [0.1, 0.12, 0.01])
        assert not rep.passed

    def test_constant_zero_passes(self):
        rep = refinement_report("r", ["a", "b", "c"], [0.0, 0.0, 0.0])
        assert rep.passed

    def test_needs_three_rungs(self):
        with pytest.raises(ValueError):
            refinement_report("r", ["a", "b"], [0.1, 0.01])


class TestReportTypes:
    def test_report_schema(self):
        rep = TestReport(name="x", statistic=1.5, threshold=3.0, passed=True,
                         seed=7, n=100)
        doc = json.loads(json.dumps(rep.to_dict()))
        assert set(doc) == {"name", "statistic", "threshold", "pass", "seed",
                            "n", "retries", "details"}
        assert doc["pass"] is True

    def test_summary_requires_two_paths(self):
        with pytest.raises(ValueError):
            EnsembleSummary.from_values(np.ones((1, 3)), [0.1, 0.2, 0.3])

    def test_summary_stderr(self):
        values = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
        s = EnsembleSummary.from_values(values, [0.5, 1.0])
        np.testing.assert_allclose(s.means, [3.0, 4.0])
        np.testing.assert_allclose(s.stderrs, 2.0 / math.sqrt(3))


class TestDeterminism:
    def test_criteria_reports_are_reproducible(self):
        from infobridge.verify import (VerificationContext,
                                       criterion_density_consistency,
                                       criterion_bridge_exactness)
        a = VerificationContext(master_seed=99, n_bridge=800)
        b = VerificationContext(master_seed=99, n_bridge=800)
        for fn in (criterion_density_consistency, criterion_bridge_exactness):
            assert fn(a).to_dict() == fn(b).to_dict()
