"""Sampling-based verification of the structural model conditions."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nsdde_sim import (
    ConditionSpec,
    DegenerateSampling,
    InvalidRange,
    check_coercivity,
    check_contraction,
    check_integrability,
    check_monotonicity,
    constant_rate,
    cubic_drift,
    estimate_contraction,
    make_grid,
    neutral_cubic_rates,
    propose_constant_rates,
)
from nsdde_sim.conditions import MAX_VIOLATIONS

GRID = make_grid(1.0, 2.0, 0.1)


def flat_spec(kappa=0.5, growth=1.0, growth_delayed=0.0, local=1.0, local_delayed=0.0):
    return ConditionSpec(
        kappa=kappa,
        growth_rate=constant_rate(growth),
        growth_rate_delayed=constant_rate(growth_delayed),
        local_rate=constant_rate(local),
        local_rate_delayed=constant_rate(local_delayed),
        growth_delay_factor=1.0,
        local_delay_factor=1.0,
    )


class TestSpecValidation:
    def test_kappa_range(self):
        for kappa in (0.0, 1.0, -0.2):
            with pytest.raises(InvalidRange):
                flat_spec(kappa=kappa)

    def test_delay_factors_capped_by_contraction(self):
        spec = neutral_cubic_rates(0.5, -1.0, -1.0, 1.0)
        assert max(spec.growth_delay_factor, spec.local_delay_factor) <= 1.0 / spec.kappa
        with pytest.raises(InvalidRange):
            ConditionSpec(
                kappa=0.5,
                growth_rate=constant_rate(1.0),
                growth_rate_delayed=constant_rate(0.0),
                local_rate=constant_rate(1.0),
                local_rate_delayed=constant_rate(0.0),
                growth_delay_factor=2.5,  # > 1/kappa = 2
                local_delay_factor=1.0,
            )

    def test_rate_constants_non_negative(self):
        with pytest.raises(InvalidRange):
            constant_rate(-0.1)


class TestContraction:
    def test_linear_map_passes_at_its_own_constant(self):
        report = check_contraction(lambda y: 0.7 * y, 0.7, 2.0, 500, seed=1)
        assert report.verdict == "pass"
        assert report.violations == ()

    def test_square_map_fails_via_probe(self):
        # D(y) = y^2 on the box [-2, 2]: the fixed probe pair (2, 0) gives
        # |D(2) - D(0)| = 4 > 0.9 * 2, so failure cannot depend on the draw.
        report = check_contraction(lambda y: y * y, 0.9, 2.0, 1, seed=123)
        assert report.verdict == "fail"
        probe_hits = [
            v for v in report.violations if v.inputs.get("x") == [2.0] and v.inputs.get("y") == [0.0]
        ]
        assert probe_hits and probe_hits[0].lhs == 4.0
        assert probe_hits[0].rhs == pytest.approx(1.8, rel=1e-15)

    def test_nonzero_origin_detected(self):
        report = check_contraction(lambda y: y + 1.0, 0.9, 2.0, 10, seed=0)
        assert report.verdict == "fail"
        assert any(v.inputs == {"check": "zero-at-origin"} for v in report.violations)

    def test_violations_sorted_and_capped(self):
        report = check_contraction(lambda y: y * y, 0.5, 2.0, 2000, seed=7)
        assert report.verdict == "fail"
        assert len(report.violations) == MAX_VIOLATIONS
        gaps = [v.lhs - v.rhs for v in report.violations]
        assert gaps == sorted(gaps, reverse=True)

    def test_deterministic_given_seed(self):
        a = check_contraction(lambda y: y * y, 0.9, 2.0, 100, seed=5)
        b = check_contraction(lambda y: y * y, 0.9, 2.0, 100, seed=5)
        assert a == b


class TestEstimateContraction:
    def test_linear_map(self):
        est = estimate_contraction(lambda y: 0.7 * y, 2.0, 200, seed=2)
        assert est == pytest.approx(0.7, abs=5e-13)

    def test_smooth_map_modulus(self):
        est = estimate_contraction(np.sin, np.pi, 500, seed=3)
        assert est == pytest.approx(1.0, abs=1e-6)

    def test_degenerate_box(self):
        with pytest.raises(DegenerateSampling):
            estimate_contraction(lambda y: y, 1e-10, 10, seed=0)


class TestCoercivity:
    def test_passes_for_cubic_bundle(self, cubic_model, cubic_rates):
        report = check_coercivity(cubic_model, cubic_rates, GRID, 1000, seed=11)
        assert report.verdict == "pass"

    def test_cubic_growth_breaks_constant_rate(self):
        # b = x^3 against K1 = 1: the (2, 0) probe gives
        # lhs = 2 * 2 * 8 = 32 > 5 = 1 * (1 + 4) + 0, at every time.
        report = check_coercivity(cubic_drift(1.0), flat_spec(), GRID, 1, seed=0)
        assert report.verdict == "fail"
        worst = report.violations[0]
        assert worst.lhs == 32.0 and worst.rhs == 5.0

    def test_rate_inequalities_flagged(self, cubic_model):
        # growth_rate_delayed > growth_rate violates the domination check
        # even though the coercivity bound itself then holds trivially
        spec = flat_spec(growth=5.0, growth_delayed=50.0)
        report = check_coercivity(cubic_model, spec, GRID, 5, seed=0)
        assert report.verdict == "fail"
        assert any(
            v.inputs.get("check") == "dominates-delayed" for v in report.violations
        )


class TestMonotonicity:
    def test_passes_for_cubic_bundle(self, cubic_model, cubic_rates):
        report = check_monotonicity(cubic_model, cubic_rates, GRID, 1000, seed=13)
        assert report.verdict == "pass"

    def test_cubic_drift_fails_flat_rate(self):
        report = check_monotonicity(cubic_drift(1.0), flat_spec(), GRID, 200, seed=1)
        assert report.verdict == "fail"

    def test_quadruples_projected_into_ball(self, cubic_model, cubic_rates):
        # all recorded sample points must lie inside the closed ball
        report = check_monotonicity(cubic_model, cubic_rates, GRID, 300, seed=17)
        for v in report.violations:
            for key in ("x", "y", "xp", "yp"):
                if key in v.inputs:
                    assert np.linalg.norm(v.inputs[key]) <= cubic_rates.box_radius + 1e-12


class TestIntegrability:
    def test_cubic_model_estimate(self, cubic_model):
        report = check_integrability(cubic_model, GRID, 2.0, 500, seed=19)
        assert report.verdict == "pass"
        assert report.estimate is not None and 0.0 < report.estimate < 100.0

    def test_non_finite_coefficient_fails(self):
        from nsdde_sim import NsddeModel

        bad = NsddeModel(
            1, 1, 1.0,
            neutral=lambda y: np.zeros(1),
            drift=lambda x, y, t: np.zeros(1) if t <= 1.0 else np.full(1, np.inf),
            diffusion=lambda x, y, t: np.zeros((1, 1)),
        )
        report = check_integrability(bad, GRID, 2.0, 20, seed=0)
        assert report.verdict == "fail"
        assert any(not np.isfinite(v.lhs) for v in report.violations)

    def test_estimate_scales_with_horizon(self, cubic_model):
        # doubling the horizon of a time-decaying integrand must not shrink it
        longer = make_grid(1.0, 4.0, 0.1)
        short = check_integrability(cubic_model, GRID, 2.0, 200, seed=3).estimate
        long_ = check_integrability(cubic_model, longer, 2.0, 200, seed=3).estimate
        assert long_ > short


def test_propose_constant_rates_heuristic(cubic_model):
    rates = propose_constant_rates(cubic_model, GRID, 2.0, 500, seed=23)
    assert set(rates) == {"growth_rate", "local_rate"}
    assert rates["growth_rate"] > 0.0 and rates["local_rate"] > 0.0


class TestCubicRateBundle:
    def test_frozen_values(self):
        spec = neutral_cubic_rates(0.5, -1.0, -1.0, 1.0)
        assert spec.kappa == 0.5
        # K1(0) = 4 * (e^0 + e^0) = 8, and the delayed rate is k^2 K1
        assert spec.growth_rate(0.0) == 8.0
        assert spec.growth_rate_delayed(0.0) == 2.0
        assert spec.growth_delay_factor == pytest.approx(np.exp(-1.0), rel=1e-15)
        assert spec.local_delay_factor == 1.0

    def test_zero_k_still_valid(self):
        spec = neutral_cubic_rates(0.0, -1.0, -1.0, 1.0)
        assert 0.0 < spec.kappa < 1.0

    @settings(max_examples=30, deadline=None)
    @given(
        k=st.floats(min_value=-0.7, max_value=0.7),
        c2=st.floats(min_value=-2.0, max_value=0.0),
    )
    def test_bundle_always_constructible(self, k, c2):
        # the side condition C1(tau) <= 1/kappa must hold for every admissible
        # parameter combination, so construction never raises
        spec = neutral_cubic_rates(k, c2 - 1.0, c2, 1.0)
        assert spec.growth_rate(0.0) > 0.0
