"""Theorem checks, sign calibration, fluctuation decomposition, the Gaussian
integration-by-parts self-check, and the volume-rate sweep."""

import math

import numpy as np
import pytest

from spinstab.errors import UsageError
from spinstab.models import ModelSpec
from spinstab.observables import OverlapPolynomial
from spinstab.verify import (WICK_COVARIANCE, check_sumlaw, check_theorem1,
                             check_theorem2, fluctuation_decomposition,
                             gaussian_monomial_mean, rate_sweep, resolve_sign,
                             wick_selfcheck)

Q12 = OverlapPolynomial.q(1, 2)
ONE = OverlapPolynomial.constant(1.0)


class TestSignCalibration:
    def test_sign_is_plus_one(self):
        assert resolve_sign(seed=0) == 1
        assert resolve_sign(seed=99) == 1


class TestTheorem2:
    def test_small_sk_passes(self):
        report = check_theorem2(ModelSpec.sk(4), Q12, beta=0.5, n_samples=1000,
                                seed=0, threads=2)
        assert report.passed
        assert report.sign == 1

    def test_constant_observable_all_estimators_vanish(self):
        report = check_theorem2(ModelSpec.sk(4), ONE, beta=0.5, n_samples=200,
                                seed=1)
        assert report.passed
        assert abs(report.lhs.mean) <= 3 * report.lhs.stderr + 1e-10
        assert abs(report.rhs.mean) <= 3 * report.rhs.stderr + 1e-10

    def test_beta_zero_rejected(self):
        with pytest.raises(UsageError):
            check_theorem2(ModelSpec.sk(4), Q12, beta=0.0, n_samples=100, seed=0)

    def test_report_schema(self):
        report = check_theorem2(ModelSpec.sk(3), Q12, beta=0.4, n_samples=100,
                                seed=2)
        payload = report.to_dict()
        for key in ("check", "inputs", "lhs", "rhs", "discrepancy", "tolerance",
                    "verdict", "sign_convention", "extras", "wall_time_s"):
            assert key in payload
        assert payload["lhs"].keys() == {"mean", "stderr", "n_samples"}


class TestTheorem1:
    def test_small_sk_passes(self):
        report = check_theorem1(ModelSpec.sk(4), Q12, 0.3, 0.8, nodes=9,
                                n_samples=300, seed=0, threads=2)
        assert report.passed
        assert report.extras["endpoint_check"] == "pass"
        assert report.extras["bound_check"] == "pass"

    def test_constant_observable_trivial(self):
        report = check_theorem1(ModelSpec.sk(4), ONE, 0.3, 0.8, nodes=9,
                                n_samples=50, seed=1)
        assert report.passed
        assert abs(report.lhs.mean) <= 1e-10
        assert abs(report.rhs.mean) <= 1e-10

    def test_bound_halves_when_scale_doubles(self):
        r4 = check_theorem1(ModelSpec.sk(4), Q12, 0.3, 0.8, nodes=5,
                            n_samples=50, seed=2)
        r8 = check_theorem1(ModelSpec.sk(8), Q12, 0.3, 0.8, nodes=5,
                            n_samples=50, seed=2)
        assert r4.extras["bound"] == pytest.approx(0.5)
        assert r8.extras["bound"] == pytest.approx(0.25)

    def test_ea_reports_volume_bound_variant(self):
        report = check_theorem1(ModelSpec.ea((2, 2), "periodic"), Q12, 0.3, 0.8,
                                nodes=5, n_samples=50, seed=3)
        assert report.extras["bound_volume_variant"] == pytest.approx(2.0 / 4.0)
        assert "bound_volume_variant_check" in report.extras


class TestSumLaw:
    def test_lambda_zero_trivial(self):
        report = check_sumlaw(ModelSpec.sk(4), Q12, beta=0.5, lam=0.0,
                              n_samples=500, seed=0)
        assert report.passed
        assert report.inputs["beta_prime"] == pytest.approx(0.5)

    def test_sk4_beta_prime_arithmetic(self):
        report = check_sumlaw(ModelSpec.sk(4), Q12, beta=0.6, lam=0.64,
                              n_samples=2000, seed=1)
        assert report.inputs["beta_prime"] == pytest.approx(math.sqrt(0.52))
        assert report.passed

    def test_ea_chain_beta_zero(self):
        # EA 1D L=3 free has s = 2, so beta = 0, lambda = 2 maps to beta' = 1
        report = check_sumlaw(ModelSpec.ea((3,), "free"), Q12, beta=0.0, lam=2.0,
                              n_samples=2000, seed=2)
        assert report.inputs["beta_prime"] == pytest.approx(1.0)
        assert report.passed

    def test_both_zero_rejected(self):
        with pytest.raises(UsageError):
            check_sumlaw(ModelSpec.sk(4), Q12, beta=0.0, lam=0.0, n_samples=10,
                         seed=0)


class TestFluctuationDecomposition:
    def test_identity_holds_exactly(self):
        report = fluctuation_decomposition(ModelSpec.sk(4), Q12, beta=0.7,
                                           n_samples=200, seed=0)
        assert report.passed
        total = report.extras["total"]
        thermal = report.extras["thermal"]
        disorder = report.extras["disorder"]
        assert total.mean == pytest.approx(thermal.mean + disorder.mean,
                                           abs=1e-12)
        assert thermal.stderr > 0 and disorder.stderr > 0

    def test_constant_observable_all_zero(self):
        report = fluctuation_decomposition(ModelSpec.sk(4), ONE, beta=0.7,
                                           n_samples=50, seed=1)
        assert abs(report.extras["thermal"].mean) <= 1e-12
        assert abs(report.extras["disorder"].mean) <= 1e-12
        assert abs(report.extras["total"].mean) <= 1e-12

    def test_thermal_matches_iden_per_sample(self):
        from spinstab.estimators import (RunPlan, iden_per_sample,
                                         per_sample_values, _weights_at)
        plan = RunPlan(ModelSpec.sk(4), beta=0.7, n_samples=100, seed=2)
        iden_vals = per_sample_values(
            plan, lambda d: iden_per_sample(_weights_at(plan, d), Q12, 0.7))
        report = fluctuation_decomposition(ModelSpec.sk(4), Q12, beta=0.7,
                                           n_samples=100, seed=2)
        # thermal = -2 beta * iden, summed per-sample arithmetic is shared
        assert report.extras["thermal"].mean == pytest.approx(
            -2 * 0.7 * iden_vals.mean(), abs=1e-12)


class TestWick:
    def test_symbolic_moments(self):
        cov = WICK_COVARIANCE
        assert gaussian_monomial_mean(cov, (2, 0, 0)) == pytest.approx(1.0)
        assert gaussian_monomial_mean(cov, (1, 1, 0)) == pytest.approx(0.5)
        assert gaussian_monomial_mean(cov, (1, 0, 1)) == pytest.approx(0.0)
        # E[x1^2 x2^2] = c11 c22 + 2 c12^2
        assert gaussian_monomial_mean(cov, (2, 2, 0)) == pytest.approx(1.5)
        # odd total degree vanishes
        assert gaussian_monomial_mean(cov, (1, 1, 1)) == pytest.approx(
            0.0, abs=1e-15)

    def test_selfcheck_passes(self):
        report = wick_selfcheck(n_samples=200_000, seed=0)
        assert report.passed
        assert set(report.extras["per_component"]) == {"x1", "x2", "x3"}

    def test_independent_component_both_sides_small(self):
        # x3 is uncorrelated with x1, and E[x1 * x2 x3] = c12*c... via Wick:
        # E[x1 x2 x3 x3]? here check the component verdicts all pass
        report = wick_selfcheck(n_samples=100_000, seed=3)
        for comp in report.extras["per_component"].values():
            assert comp["verdict"] == "pass"


class TestRateSweep:
    def test_rows_and_slope(self):
        sizes = [ModelSpec.sk(n) for n in (2, 4, 6)]
        result = rate_sweep(sizes, Q12, 0.3, 0.8, nodes=5, n_samples=150, seed=0,
                            threads=2)
        assert [r.model for r in result.rows] == ["sk:2", "sk:4", "sk:6"]
        for row in result.rows:
            assert row.bound == pytest.approx(2.0 / row.scale)
            assert abs(row.integral.mean) <= row.bound
        mags = [abs(r.integral.mean) for r in result.rows]
        assert mags == sorted(mags, reverse=True)
        assert math.isfinite(result.slope) and math.isfinite(result.slope_stderr)

    def test_to_dict(self):
        sizes = [ModelSpec.sk(n) for n in (2, 4)]
        result = rate_sweep(sizes, Q12, 0.3, 0.8, nodes=5, n_samples=50, seed=1)
        payload = result.to_dict()
        assert payload["check"] == "rate_sweep"
        assert len(payload["rows"]) == 2
        assert "slope" in payload
