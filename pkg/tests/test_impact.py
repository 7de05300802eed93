"""Price-impact families, exposures, quadrature, and the assumption checkers."""

import numpy as np
import pytest

import illiqrisk as ir
from illiqrisk.impact import (
    _adaptive_exposure,
    saturating_exp_antiderivative,
)


@pytest.fixture
def space():
    return ir.ScenarioSpace(3, probabilities=[1 / 3, 1 / 3, 1 / 3])


@pytest.fixture
def x_tilde(space):
    return ir.ScenarioVector([80.0, 90.0, 100.0], space)


@pytest.fixture
def x_single():
    sp = ir.ScenarioSpace(1, probabilities=[1.0])
    return ir.ScenarioVector([100.0], sp)


class TestPriceAt:
    def test_linear(self, x_tilde):
        out = ir.price_at(ir.LinearAdditive(0.5), x_tilde, 10.0)
        np.testing.assert_allclose(out.values, [85, 95, 105])

    def test_zero_returns_unaffected(self, x_tilde):
        for model in (ir.LinearAdditive(0.5), ir.SignLinear(1.0, 2.0),
                      ir.PowerLaw(2.0, 0.5), ir.ExponentialMultiplicative(0.01, 1.0)):
            out = ir.price_at(model, x_tilde, 0.0)
            np.testing.assert_array_equal(out.values, x_tilde.values)

    def test_power_law_sell(self, x_single):
        out = ir.price_at(ir.PowerLaw(gamma=2.0, alpha=0.5), x_single, -4.0)
        np.testing.assert_allclose(out.values, [96.0])

    def test_stochastic_slope(self, x_tilde):
        m = np.array([0.1, 0.2, 0.3])
        out = ir.price_at(ir.StochasticSlope(m), x_tilde, 10.0)
        np.testing.assert_allclose(out.values, [81, 92, 103])

    def test_stochastic_slope_positive(self):
        with pytest.raises(ir.InvalidModel):
            ir.StochasticSlope(np.array([0.1, -0.2]))

    def test_power_law_parameter_ranges(self):
        with pytest.raises(ir.InvalidModel):
            ir.PowerLaw(gamma=-1.0, alpha=0.5)
        with pytest.raises(ir.InvalidModel):
            ir.PowerLaw(gamma=1.0, alpha=1.5)


class TestOffsettingExposure:
    def test_linear(self, x_tilde):
        exp_ = ir.offsetting_exposure(ir.LinearAdditive(0.5), x_tilde, 10.0)
        np.testing.assert_allclose(exp_.z.values, [75, 85, 95])
        assert exp_.policy == "block"

    def test_zero_convention(self, x_tilde):
        exp_ = ir.offsetting_exposure(ir.LinearAdditive(0.5), x_tilde, 0.0)
        np.testing.assert_array_equal(exp_.z.values, x_tilde.values)

    def test_exponential(self, x_single):
        exp_ = ir.offsetting_exposure(ir.ExponentialMultiplicative(0.01, 1.0),
                                      x_single, 10.0)
        np.testing.assert_allclose(exp_.z.values, [100 * np.exp(-0.1)])

    def test_block_decreasing_in_y(self, x_tilde):
        model = ir.PowerLaw(2.0, 0.5)
        prev = ir.offsetting_exposure(model, x_tilde, 1.0).z.values
        for y in (2.0, 5.0, 20.0, 80.0):
            cur = ir.offsetting_exposure(model, x_tilde, y).z.values
            assert np.all(cur <= prev + 1e-12)
            prev = cur


class TestSplitExposure:
    def test_linear_closed_form(self, x_tilde):
        exp_ = ir.split_exposure(ir.LinearAdditive(0.5), x_tilde, 10.0)
        np.testing.assert_allclose(exp_.z.values, [775, 875, 975])

    def test_zero_is_empty_integral(self, x_tilde):
        exp_ = ir.split_exposure(ir.LinearAdditive(0.5), x_tilde, 0.0)
        np.testing.assert_array_equal(exp_.z.values, [0, 0, 0])

    def test_power_law_vs_trapezoid_oracle(self, x_single):
        model = ir.PowerLaw(gamma=2.0, alpha=0.5)
        closed = ir.split_exposure(model, x_single, 4.0).z.values
        np.testing.assert_allclose(closed, [400 - 32 / 3], rtol=1e-12)
        oracle = ir.split_exposure_trapezoid(model, x_single, 4.0, 2**16).z.values
        assert abs(closed[0] - oracle[0]) / abs(oracle[0]) < 1e-8

    @pytest.mark.parametrize("model", [
        ir.LinearAdditive(0.5),
        ir.StochasticSlope(np.array([0.1, 0.3, 0.5])),
        ir.PowerLaw(2.0, 0.5),
        ir.ExponentialMultiplicative(0.01, 1.0),
    ])
    def test_closed_forms_match_trapezoid(self, model, x_tilde):
        for y in (0.3, 3.0, 25.0, 100.0):
            closed = ir.split_exposure(model, x_tilde, y).z.values
            oracle = ir.split_exposure_trapezoid(model, x_tilde, y, 2**16).z.values
            rel = np.max(np.abs(closed - oracle) / np.maximum(1.0, np.abs(oracle)))
            assert rel < 1e-8

    def test_sign_linear_closed_form_vs_trapezoid(self, x_tilde):
        # sgn(0) = 0 puts a removable discontinuity at the 0 endpoint, so the
        # fixed trapezoid is biased by theta*h/2 there; the closed form must
        # agree up to exactly that endpoint term
        model = ir.SignLinear(theta=0.5, eta=0.02)
        n = 2**16
        for y in (0.3, 3.0, 25.0, 100.0):
            closed = ir.split_exposure(model, x_tilde, y).z.values
            oracle = ir.split_exposure_trapezoid(model, x_tilde, y, n).z.values
            endpoint_bias = model.theta * (y / n) / 2
            assert np.max(np.abs(closed - oracle)) <= endpoint_bias + 1e-8 * np.max(np.abs(oracle))

    def test_negative_y_signed_integral(self, x_single):
        model = ir.LinearAdditive(0.5)
        closed = ir.split_exposure(model, x_single, -10.0).z.values
        # int_0^{-10} (100 - 0.5 u) du = -1000 - 25
        np.testing.assert_allclose(closed, [-1025.0])
        oracle = ir.split_exposure_trapezoid(model, x_single, -10.0, 2**14).z.values
        np.testing.assert_allclose(closed, oracle, rtol=1e-9)

    def test_adaptive_matches_closed(self, x_tilde):
        model = ir.PowerLaw(2.0, 0.5)
        adaptive = ir.split_exposure(model, x_tilde, 4.0, quadrature="trapezoid").z.values
        closed = ir.split_exposure(model, x_tilde, 4.0).z.values
        np.testing.assert_allclose(adaptive, closed, rtol=1e-7)

    def test_closed_form_required_but_missing(self, x_tilde):
        sep = ir.SeparableAdditive(h=ir.saturating_exp_h(30.0, 0.01))
        with pytest.raises(ir.InvalidModel):
            ir.split_exposure(sep, x_tilde, 5.0, quadrature="closed-form")

    def test_separable_antiderivative_consistent(self, x_tilde):
        h = ir.saturating_exp_h(30.0, 0.01)
        H = saturating_exp_antiderivative(30.0, 0.01)
        with_h = ir.SeparableAdditive(h=h, h_antiderivative=H)
        without = ir.SeparableAdditive(h=h)
        za = ir.split_exposure(with_h, x_tilde, 17.0).z.values
        zq = ir.split_exposure(without, x_tilde, 17.0, quadrature="trapezoid").z.values
        np.testing.assert_allclose(za, zq, atol=1e-5)

    def test_quadrature_cap(self, x_tilde):
        class Noisy(ir.ImpactModel):
            def price_values(self, x, y):
                return x + np.sin(1e7 * y)

            def price_profile(self, x, ys):
                ys = np.asarray(ys, dtype=float)
                return x[None, :] + np.sin(1e7 * ys)[:, None]

        with pytest.raises(ir.QuadratureNonConvergence):
            _adaptive_exposure(Noisy(), x_tilde.values, 1.0, max_steps=2**10)


class TestDiscreteSplit:
    def test_single_tranche_equals_block_times_y(self, x_tilde):
        model = ir.LinearAdditive(0.5)
        exp_ = ir.split_exposure_discrete(model, x_tilde, [(10.0, np.inf)])
        block = ir.offsetting_exposure(model, x_tilde, 10.0).z.values
        np.testing.assert_allclose(exp_.z.values, 10.0 * block)

    def test_ten_unit_tranches(self, x_single):
        model = ir.LinearAdditive(0.5)
        exp_ = ir.split_exposure_discrete(model, x_single, [(1.0, np.inf)] * 10)
        # sum_{j=1..10} (100 - 0.5 j) = 1000 - 27.5
        np.testing.assert_allclose(exp_.z.values, [972.5])
        continuous = ir.split_exposure(model, x_single, 10.0).z.values
        assert exp_.z.values[0] < continuous[0]  # right Riemann sum from below

    def test_cap_violation(self, x_tilde):
        with pytest.raises(ir.TrancheCapViolation):
            ir.split_exposure_discrete(ir.LinearAdditive(0.5), x_tilde,
                                       [(2.0, 1.0)])

    def test_prices_non_increasing_across_tranches(self, x_tilde):
        model = ir.PowerLaw(2.0, 0.5)
        depths = np.cumsum([1.0] * 8)
        prices = [model.price_values(x_tilde.values, -d) for d in depths]
        for a, b in zip(prices, prices[1:]):
            assert np.all(b <= a + 1e-12)

    def test_convergence_to_continuous(self, x_tilde):
        model = ir.PowerLaw(2.0, 0.5)
        y = 10.0
        continuous = ir.split_exposure(model, x_tilde, y).z.values
        errs = []
        for m in (64, 128, 256):
            tranches = [(y / m, np.inf)] * m
            disc = ir.split_exposure_discrete(model, x_tilde, tranches).z.values
            errs.append(np.max(np.abs(disc - continuous)))
        # error is O(1/m): halving the step roughly halves the error
        assert errs[1] / errs[0] == pytest.approx(0.5, abs=0.15)
        assert errs[2] / errs[1] == pytest.approx(0.5, abs=0.15)

    def test_linear_discrete_error_exact(self, x_single):
        # for the affine model the right-sum error is exactly a*y^2/(2m)
        model, y = ir.LinearAdditive(0.5), 10.0
        continuous = ir.split_exposure(model, x_single, y).z.values[0]
        for m in (10, 20):
            disc = ir.split_exposure_discrete(
                model, x_single, [(y / m, np.inf)] * m).z.values[0]
            assert continuous - disc == pytest.approx(0.5 * y * y / (2 * m), abs=1e-9)


class TestInitialCost:
    def test_block(self):
        curve = ir.SupplyCurve(base=70.0, slope=0.2)
        assert ir.initial_cost(curve, 10.0, "block") == pytest.approx(720.0)

    def test_split_is_cheaper(self):
        curve = ir.SupplyCurve(base=70.0, slope=0.2)
        split = ir.initial_cost(curve, 10.0, "split")
        assert split == pytest.approx(710.0)
        assert split < ir.initial_cost(curve, 10.0, "block")

    def test_zero(self):
        curve = ir.SupplyCurve(base=70.0, slope=0.2)
        assert ir.initial_cost(curve, 0.0, "block") == 0.0
        assert ir.initial_cost(curve, 0.0, "split") == 0.0

    def test_custom_curve(self):
        curve = ir.SupplyCurve(custom=lambda y: 70.0 + 0.2 * y)
        assert ir.initial_cost(curve, 10.0, "split") == pytest.approx(710.0, rel=1e-9)

    def test_validation(self):
        with pytest.raises(ir.InvalidParams):
            ir.SupplyCurve(base=-1.0, slope=0.1)


class TestAssumption1:
    def test_linear_passes(self, x_tilde):
        report = ir.check_assumption1(ir.LinearAdditive(0.5), x_tilde,
                                      np.linspace(-10, 10, 21))
        assert report.passed and report.classification == "pass"

    def test_negative_slope_fails(self, x_tilde):
        report = ir.check_assumption1(ir.LinearAdditive(-0.5), x_tilde,
                                      np.linspace(-10, 10, 21))
        assert not report.passed
        assert report.violations[0]["check"] == "monotone"

    def test_sign_linear_jump_respected(self, x_tilde):
        report = ir.check_assumption1(ir.SignLinear(theta=1.0, eta=2.0), x_tilde,
                                      np.linspace(-10, 10, 21))
        assert report.passed

    def test_sandwich_everywhere(self, x_tilde):
        for model in (ir.LinearAdditive(0.5), ir.PowerLaw(2.0, 0.5),
                      ir.ExponentialMultiplicative(0.01, 1.0),
                      ir.StochasticSlope(np.array([0.1, 0.2, 0.3]))):
            report = ir.check_assumption1(model, x_tilde, np.linspace(-50, 50, 41))
            assert report.passed, f"{type(model).__name__}: {report.violations[:2]}"


class TestConcavity:
    def test_linear_block_passes(self, x_tilde):
        model = ir.LinearAdditive(0.5)
        report = ir.check_concavity(
            lambda y: model.price_values(x_tilde.values, -y),
            np.linspace(-10, 10, 9))
        assert report.passed

    def test_power_law_block_fails(self, x_tilde):
        model = ir.PowerLaw(2.0, 0.5)
        report = ir.check_concavity(
            lambda y: model.price_values(x_tilde.values, -y),
            np.linspace(1, 9, 9), expected_fail=True)
        assert not report.passed
        assert report.classification == "expected-fail"

    def test_split_concave_for_every_model(self, x_tilde):
        models = [ir.LinearAdditive(0.5), ir.PowerLaw(2.0, 0.5),
                  ir.SignLinear(0.5, 0.02), ir.ExponentialMultiplicative(0.01, 1.0)]
        for model in models:
            report = ir.check_concavity(
                lambda y, m=model: ir.split_exposure(m, x_tilde, float(y)).z.values,
                np.linspace(1, 50, 7), tol=1e-8)
            assert report.passed, f"{type(model).__name__}: {report.violations[:2]}"


class TestSeparableValidation:
    def test_h_must_anchor_at_zero(self):
        with pytest.raises(ir.InvalidModel):
            ir.SeparableAdditive(h=lambda y: 1.0 + y)

    def test_h_must_be_concave(self):
        # odd square-root extension is convex on the sell side
        with pytest.raises(ir.InvalidModel):
            ir.SeparableAdditive(h=lambda y: np.sign(y) * (np.sqrt(1 + abs(y)) - 1))

    def test_h_must_be_increasing(self):
        with pytest.raises(ir.InvalidModel):
            ir.SeparableAdditive(h=lambda y: -y)

    def test_multiplicative_must_stay_positive(self):
        with pytest.raises(ir.InvalidModel):
            ir.SeparableMultiplicative(h=lambda y: 1.0 + y / 100.0, probe_span=200.0)

    def test_valid_saturating_family(self):
        ir.SeparableAdditive(h=ir.saturating_exp_h(30.0, 0.01))
        ir.SeparableMultiplicative(h=ir.saturating_exp_h(0.5, 0.004, anchor=1.0))
