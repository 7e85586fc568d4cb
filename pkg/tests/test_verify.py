import math

import numpy as np
import pytest
from scipy import stats as scipy_stats

from dparena.core import Dataset, ParameterError, RandomSource
from dparena.mechanisms import (
    BetweenThresholdsMechanism,
    ExactAnswerer,
    LaplaceAnswerer,
    RandomizedResponse,
)
from dparena.queries import CorrelatedVectorQuery, ThresholdQuery
from dparena.verify import (
    TestFunction,
    empirical_dp_audit,
    fingerprint_functional_mc,
    fingerprint_functional_sq_mc,
    hoeffding_half_width,
    laplace_cdf,
    laplace_interval_mass,
    laplace_interval_ratio_check,
    laplace_interval_ratio_sweep,
    standard_test_functions,
)


class TestHoeffding:
    def test_formula(self):
        hw = hoeffding_half_width(2.0, 400)
        assert hw == pytest.approx(2.0 * math.sqrt(math.log(200.0) / 800.0))

    def test_validation(self):
        with pytest.raises(ParameterError):
            hoeffding_half_width(1.0, 0)
        with pytest.raises(ParameterError):
            hoeffding_half_width(1.0, 10, confidence=1.0)


class TestStandardFunctions:
    def test_batch_matches_scalar(self):
        gen = RandomSource(201).generator()
        rows = (gen.integers(0, 2, size=(50, 16)) * 2 - 1).astype(np.float64)
        for f in standard_test_functions():
            batch_vals = f.evaluate(rows)
            scalar_vals = np.array([np.clip(f.f(row), -1.0, 1.0) for row in rows])
            assert np.allclose(batch_vals, scalar_vals)
            assert np.all(np.abs(batch_vals) <= 1.0)

    def test_outputs_clamped(self):
        f = TestFunction("big", lambda c: 5.0, batch=lambda r: np.full(r.shape[0], 5.0))
        vals = f.evaluate(np.ones((3, 4)))
        assert np.all(vals == 1.0)


class TestFingerprintFunctional:
    def test_sample_mean_function(self):
        # With f the sample mean, the error term vanishes and the
        # correlation term integrates to E[1 - p^2] = 2/3.
        gen = RandomSource(202).generator()
        family = {f.name: f for f in standard_test_functions()}
        est = fingerprint_functional_mc(family["mean"], 64, 50_000, gen)
        assert abs(est.mean - 2.0 / 3.0) <= 0.05

    def test_zero_function(self):
        # f = 0 leaves 2 E|mean(c)|; the mean concentrates on the bias p
        # and E|p| = 1/2, so the estimate sits near 1.
        gen = RandomSource(203).generator()
        family = {f.name: f for f in standard_test_functions()}
        est = fingerprint_functional_mc(family["zero"], 128, 100_000, gen)
        assert abs(est.mean - 1.0) <= 0.02

    def test_first_coordinate_is_well_above_bound(self):
        gen = RandomSource(204).generator()
        family = {f.name: f for f in standard_test_functions()}
        est = fingerprint_functional_mc(family["first_coordinate"], 64, 20_000, gen)
        assert est.mean + est.half_width >= 1.0 / 3.0

    @pytest.mark.parametrize("n", [16, 64])
    def test_family_bound(self, n):
        gen = RandomSource(205).generator()
        for f in standard_test_functions():
            est = fingerprint_functional_mc(f, n, 20_000, gen)
            assert est.mean + est.half_width >= 1.0 / 3.0, f.name

    def test_requires_enough_trials(self):
        gen = RandomSource(0).generator()
        with pytest.raises(ParameterError):
            fingerprint_functional_mc(standard_test_functions()[0], 16, 500, gen)


class TestSquaredVariant:
    def test_sample_mean_function(self):
        gen = RandomSource(206).generator()
        family = {f.name: f for f in standard_test_functions()}
        est = fingerprint_functional_sq_mc(family["mean"], 64, 50_000, gen)
        assert abs(est.mean - 2.0 / 3.0) <= 0.05

    def test_zero_function_bias_center(self):
        # E[p^2] = 1/3 exactly for p uniform on [-1,1].
        gen = RandomSource(207).generator()
        family = {f.name: f for f in standard_test_functions()}
        est = fingerprint_functional_sq_mc(family["zero"], 64, 20_000, gen, center="bias")
        assert abs(est.mean - 1.0 / 3.0) <= 0.02

    def test_zero_function_sample_mean_center(self):
        # E[mean(c)^2] = E[p^2] + E[(1-p^2)]/n = 1/3 + (2/3)/n.
        n = 16
        gen = RandomSource(208).generator()
        family = {f.name: f for f in standard_test_functions()}
        est = fingerprint_functional_sq_mc(family["zero"], n, 20_000, gen, center="sample_mean")
        assert abs(est.mean - (1.0 / 3.0 + (2.0 / 3.0) / n)) <= 0.02

    def test_one_function_bias_center(self):
        # Correlation term vanishes; E[(1-p)^2] = 4/3.
        gen = RandomSource(209).generator()
        family = {f.name: f for f in standard_test_functions()}
        est = fingerprint_functional_sq_mc(family["one"], 128, 100_000, gen, center="bias")
        assert abs(est.mean - 4.0 / 3.0) <= est.half_width

    def test_unknown_center(self):
        gen = RandomSource(0).generator()
        with pytest.raises(ParameterError):
            fingerprint_functional_sq_mc(standard_test_functions()[0], 16, 2000, gen, center="x")


class TestLaplaceIntervalRatio:
    def test_cdf_against_scipy(self):
        for scale in (0.1, 1.0, 10.0):
            ref = scipy_stats.laplace(scale=scale)
            for x in (-3.0, -0.5, 0.0, 0.2, 4.0):
                assert laplace_cdf(x, scale) == pytest.approx(ref.cdf(x), abs=1e-12)

    def test_mass_against_scipy(self):
        ref = scipy_stats.laplace(scale=2.0)
        assert laplace_interval_mass(-1.0, 3.0, 2.0) == pytest.approx(
            ref.cdf(3.0) - ref.cdf(-1.0), abs=1e-12
        )

    def test_equal_intervals_trivially_ok(self):
        res = laplace_interval_ratio_check(1.0, -1.0, 1.0, -1.0, 1.0)
        assert res.ok
        assert res.rhs > res.lhs  # the multiplier exceeds 1

    def test_hand_case(self):
        # scale 1, inner [-1,1], outer [-1.5,1.5]: eta = 1.
        res = laplace_interval_ratio_check(1.0, -1.0, 1.0, -1.5, 1.5)
        ref = scipy_stats.laplace(scale=1.0)
        lhs = ref.cdf(1.5) - ref.cdf(-1.5)
        inner = ref.cdf(1.0) - ref.cdf(-1.0)
        rhs = math.exp(1.0) / (1.0 - math.exp(-1.0)) * inner
        assert res.lhs == pytest.approx(lhs, abs=1e-12)
        assert res.rhs == pytest.approx(rhs, abs=1e-9)
        assert res.ok

    def test_sweep(self):
        gen = RandomSource(210).generator()
        results = laplace_interval_ratio_sweep((0.1, 1.0, 10.0), 200, gen)
        assert all(r.ok for r in results)

    def test_malformed_intervals(self):
        with pytest.raises(ParameterError):
            laplace_interval_ratio_check(1.0, -1.0, 1.0, -0.5, 1.5)  # not nested
        with pytest.raises(ParameterError):
            laplace_interval_ratio_check(1.0, 1.0, 1.0, 0.0, 2.0)  # empty inner


def _one_bit_pair():
    return Dataset.sign_bits([1]), Dataset.sign_bits([-1])


def _corr_query(n=1, alpha=0.3):
    return [CorrelatedVectorQuery(np.zeros((0, n), dtype=np.int8), alpha)]


class TestEmpiricalAudit:
    def test_exact_answerer_flagged(self):
        x = Dataset.unit_reals([0.2, 0.4, 0.9])
        x2 = Dataset.unit_reals([0.2, 0.6, 0.9])
        report = empirical_dp_audit(
            ExactAnswerer, x, x2, [ThresholdQuery(0.5)], 5000, 0.1, 0.0,
            rng=RandomSource(211),
        )
        assert report.violation

    def test_one_bit_randomized_response(self):
        x, x2 = _one_bit_pair()
        tight = empirical_dp_audit(
            lambda: RandomizedResponse(0.3), x, x2, _corr_query(), 30_000, 0.5, 0.0,
            rng=RandomSource(212),
        )
        loose = empirical_dp_audit(
            lambda: RandomizedResponse(0.3), x, x2, _corr_query(), 30_000, 0.9, 0.0,
            rng=RandomSource(213),
        )
        assert tight.violation
        assert not loose.violation
        assert loose.verdict == "inconclusive-pass"

    def test_worst_ratio_matches_closed_form(self):
        # P(y=+1 | x=+1) / P(y=+1 | x=-1) = (1+a)/(1-a) = 1.857 at a = 0.3.
        x, x2 = _one_bit_pair()
        report = empirical_dp_audit(
            lambda: RandomizedResponse(0.3), x, x2, _corr_query(), 50_000, 0.9, 0.0,
            rng=RandomSource(214),
        )
        assert report.worst_ratio == pytest.approx(1.3 / 0.7, abs=0.15)

    def test_between_thresholds_symbol_transcripts(self):
        gen = RandomSource(215).generator()
        values = 0.2 + 0.6 * gen.random(500)
        x = Dataset.unit_reals(values)
        x2 = Dataset.unit_reals(np.concatenate([[0.9], values[1:]]))
        queries = [ThresholdQuery(t) for t in (0.3, 0.5, 0.7)]
        report = empirical_dp_audit(
            lambda: BetweenThresholdsMechanism(0.35, 0.65, 2.0),
            x, x2, queries, 20_000, 2.0, 1e-3,
            rng=RandomSource(216),
        )
        # Necessary, not sufficient: the audit must simply find no breach.
        assert not report.violation

    def test_real_answer_binning(self):
        # Truths 0.50 and 0.51 straddle the bin edge at 32/64, so the tiny
        # per-query noise of a weakly private answerer separates the bins.
        x = Dataset.unit_reals([0.2] * 50 + [0.8] * 50)
        x2 = Dataset.unit_reals([0.2] * 51 + [0.8] * 49)
        factory = lambda: LaplaceAnswerer(10.0)
        queries = [ThresholdQuery(0.5)]
        flagged = empirical_dp_audit(
            factory, x, x2, queries, 20_000, 3.0, 0.0, rng=RandomSource(217)
        )
        passed = empirical_dp_audit(
            factory, x, x2, queries, 20_000, 12.0, 0.0, rng=RandomSource(218)
        )
        assert flagged.violation
        assert not passed.violation

    def test_requires_adjacent_inputs(self):
        x = Dataset.unit_reals([0.1, 0.2])
        x2 = Dataset.unit_reals([0.8, 0.9])
        with pytest.raises(ParameterError):
            empirical_dp_audit(
                ExactAnswerer, x, x2, [ThresholdQuery(0.5)], 100, 1.0, 0.0,
                rng=RandomSource(219),
            )
