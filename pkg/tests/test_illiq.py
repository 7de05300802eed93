"""Illiquidity measures, capital requirements, portfolio measures, and the
profile (axiom) suites."""

import numpy as np
import pytest

import illiqrisk as ir


@pytest.fixture
def space():
    return ir.ScenarioSpace(3, probabilities=[1 / 3, 1 / 3, 1 / 3])


@pytest.fixture
def x_tilde(space):
    return ir.ScenarioVector([80.0, 90.0, 100.0], space)


@pytest.fixture
def x_second(space):
    return ir.ScenarioVector([50.0, 60.0, 40.0], space)


WC = ir.WorstCase()
GBM = ir.GbmParams(100.0, 0.05, 0.2, 1.0)


class TestBeta:
    def test_linear_worst_case(self, x_tilde):
        assert ir.beta(ir.LinearAdditive(0.5), x_tilde, WC, None, 10.0) == -75.0

    def test_matches_example_closed_form(self, x_tilde):
        # rho(x_tilde) + a*y for the additive-linear family
        model = ir.LinearAdditive(0.5)
        for y in np.linspace(0.5, 80, 12):
            got = ir.beta(model, x_tilde, WC, None, float(y))
            assert got == pytest.approx(-80.0 + 0.5 * y, abs=1e-12)

    def test_zero_is_liquid_convention(self, x_tilde):
        assert ir.beta(ir.LinearAdditive(0.5), x_tilde, WC, None, 0.0) == -80.0
        small = ir.beta(ir.LinearAdditive(0.5), x_tilde, WC, None, 1e-9)
        assert small == pytest.approx(-80.0, abs=1e-8)

    def test_negative_y_rejected(self, x_tilde):
        with pytest.raises(ir.InvalidParams):
            ir.beta(ir.LinearAdditive(0.5), x_tilde, WC, None, -1.0)

    def test_exponential_gbm_var(self):
        # beta(y) = exp(-a y T) VaR_delta(x_tilde), checked on a seeded
        # million-path sample against the analytic target
        _, v = ir.sample_gbm(GBM, 10**6, seed=12345)
        model = ir.ExponentialMultiplicative(a=0.01, T=1.0)
        got = ir.beta(model, v, ir.ValueAtRisk(0.05), None, 10.0)
        target = np.exp(-0.1) * ir.var_gbm_closed_form(GBM, 0.05)
        assert target == pytest.approx(-67.10, abs=0.05)
        assert got == pytest.approx(target, abs=0.05)
        # exact identity on the sampled space: scaling commutes with quantiles
        assert got == pytest.approx(np.exp(-0.1) * ir.rho(ir.ValueAtRisk(0.05), v),
                                    abs=1e-9)


class TestBetaSplit:
    def test_linear_worst_case(self, x_tilde):
        got = ir.beta_split(ir.LinearAdditive(0.5), x_tilde, WC, None, 10.0)
        assert got == -775.0  # y*rho + a y^2/2

    def test_power_law(self):
        sp = ir.ScenarioSpace(1, probabilities=[1.0])
        x = ir.ScenarioVector([100.0], sp)
        got = ir.beta_split(ir.PowerLaw(2.0, 0.5), x, WC, None, 4.0)
        assert got == pytest.approx(-400 + 32 / 3, abs=1e-9)

    def test_zero_is_empty_integral(self, x_tilde):
        assert ir.beta_split(ir.LinearAdditive(0.5), x_tilde, WC, None, 0.0) == 0.0

    def test_quadrature_and_closed_form_agree(self, x_tilde):
        model = ir.ExponentialMultiplicative(0.01, 1.0)
        for y in (2.0, 30.0):
            a = ir.beta_split(model, x_tilde, WC, None, y)
            b = ir.beta_split(model, x_tilde, WC, None, y, quadrature="trapezoid")
            assert a == pytest.approx(b, rel=1e-6)


class TestDeltaShort:
    def test_linear(self, x_tilde):
        got = ir.delta_short(ir.LinearAdditive(0.5), x_tilde, WC, None, -10.0)
        assert got == 105.0  # max(x_tilde) + a|y|

    def test_zero_convention(self, x_tilde):
        assert ir.delta_short(ir.LinearAdditive(0.5), x_tilde, WC, None, 0.0) == 100.0

    def test_positive_y_rejected(self, x_tilde):
        with pytest.raises(ir.InvalidParams):
            ir.delta_short(ir.LinearAdditive(0.5), x_tilde, WC, None, 1.0)

    def test_unsupported_models_raise(self, x_tilde):
        stoch = ir.StochasticSlope(np.array([0.1, 0.2, 0.3]))
        with pytest.raises(ir.UnsupportedModelForShortSide):
            ir.delta_short(stoch, x_tilde, ir.Entropic(1.0), None, -5.0)
        expm = ir.ExponentialMultiplicative(0.01, 1.0)
        with pytest.raises(ir.UnsupportedModelForShortSide):
            ir.delta_short(expm, x_tilde, ir.Entropic(1.0), None, -5.0)

    def test_supported_combinations(self, x_tilde):
        stoch = ir.StochasticSlope(np.array([0.1, 0.2, 0.3]))
        assert ir.delta_short(stoch, x_tilde, WC, None, -10.0) == pytest.approx(103.0)
        expm = ir.ExponentialMultiplicative(0.01, 1.0)
        got = ir.delta_short(expm, x_tilde, ir.ValueAtRisk(0.5), None, -10.0)
        assert got == pytest.approx(np.exp(0.1) * 90.0, rel=1e-12)


class TestCapitalRequirement:
    CURVE = ir.SupplyCurve(base=70.0, slope=0.2)

    def test_block(self):
        rep = ir.capital_requirement(10.0, -75.0, self.CURVE, "block")
        assert rep.capital_requirement == pytest.approx(-30.0)
        assert rep.initial_cost_block == pytest.approx(720.0)
        assert rep.initial_cost_split == pytest.approx(710.0)

    def test_split_reduces_capital(self):
        rep = ir.capital_requirement(10.0, -775.0, self.CURVE, "split")
        assert rep.capital_requirement == pytest.approx(-55.0)
        assert rep.capital_requirement <= -30.0

    def test_zero_position(self):
        rep = ir.capital_requirement(0.0, -80.0, self.CURVE, "block")
        assert rep.capital_requirement == 0.0

    def test_internal_consistency(self):
        rep = ir.capital_requirement(13.0, -62.0, self.CURVE, "block")
        assert rep.capital_requirement == pytest.approx(
            rep.y * rep.beta_value + rep.initial_cost_block, abs=1e-12)


class TestPortfolio:
    def test_zero_component_excluded(self):
        with pytest.raises(ir.InvalidParams):
            ir.Portfolio(positions=np.array([1.0, 0.0]))

    def test_block_example(self, x_tilde, x_second):
        pf = ir.Portfolio(positions=np.array([10.0, 5.0]), assets=("a1", "a2"))
        models = [ir.LinearAdditive(0.5), ir.LinearAdditive(1.0)]
        got = ir.beta_portfolio(models, [x_tilde, x_second], WC, None, pf)
        assert got == -120.0  # Z = (120, 140, 130)

    def test_subadditivity_gap(self, x_tilde, x_second):
        pf = ir.Portfolio(positions=np.array([10.0, 5.0]))
        models = [ir.LinearAdditive(0.5), ir.LinearAdditive(1.0)]
        b1 = ir.beta(models[0], x_tilde, WC, None, 10.0)
        b2 = ir.beta(models[1], x_second, WC, None, 5.0)
        assert (b1, b2) == (-75.0, -35.0)
        b_pf = ir.beta_portfolio(models, [x_tilde, x_second], WC, None, pf)
        assert b_pf <= b1 + b2  # -120 <= -110, minima in different scenarios
        assert b1 + b2 - b_pf == pytest.approx(10.0)

    def test_subadditivity_equality_with_colocated_minima(self, space):
        # both assets worst in the same scenario: the bound is tight
        xa = ir.ScenarioVector([80.0, 90.0, 100.0], space)
        xb = ir.ScenarioVector([40.0, 60.0, 50.0], space)
        pf = ir.Portfolio(positions=np.array([10.0, 5.0]))
        models = [ir.LinearAdditive(0.5), ir.LinearAdditive(1.0)]
        b_pf = ir.beta_portfolio(models, [xa, xb], WC, None, pf)
        per = (ir.beta(models[0], xa, WC, None, 10.0)
               + ir.beta(models[1], xb, WC, None, 5.0))
        assert b_pf == pytest.approx(per, abs=1e-12)

    def test_single_asset_reduces_to_beta(self, x_tilde):
        pf = ir.Portfolio(positions=np.array([10.0]))
        got = ir.beta_portfolio([ir.LinearAdditive(0.5)], [x_tilde], WC, None, pf)
        assert got == ir.beta(ir.LinearAdditive(0.5), x_tilde, WC, None, 10.0)

    def test_split_portfolio(self, x_tilde, x_second):
        pf = ir.Portfolio(positions=np.array([10.0, 5.0]))
        models = [ir.LinearAdditive(0.5), ir.LinearAdditive(1.0)]
        got = ir.beta_portfolio_split(models, [x_tilde, x_second], WC, None, pf)
        # per-scenario sums (10*x1 - 25) + (5*x2 - 12.5) = (1012.5, 1162.5, 1162.5)
        assert got == pytest.approx(-1012.5, abs=1e-9)
        # independent route: scenario-wise quadrature of each leg
        z = (ir.split_exposure_trapezoid(models[0], x_tilde, 10.0, 2**14).z.values
             + ir.split_exposure_trapezoid(models[1], x_second, 5.0, 2**14).z.values)
        assert got == pytest.approx(-z.min(), rel=1e-9)

    def test_split_single_asset_reduces(self, x_tilde):
        pf = ir.Portfolio(positions=np.array([10.0]))
        got = ir.beta_portfolio_split([ir.LinearAdditive(0.5)], [x_tilde], WC, None, pf)
        assert got == ir.beta_split(ir.LinearAdditive(0.5), x_tilde, WC, None, 10.0)

    def test_space_mismatch(self, x_tilde):
        other_space = ir.ScenarioSpace(4, probabilities=[0.25] * 4)
        xb = ir.ScenarioVector([1.0, 2.0, 3.0, 4.0], other_space)
        pf = ir.Portfolio(positions=np.array([1.0, 1.0]))
        with pytest.raises(ir.SpaceMismatch):
            ir.beta_portfolio([ir.LinearAdditive(0.5)] * 2, [x_tilde, xb], WC, None, pf)

    def test_portfolio_capital_report(self, x_tilde, x_second):
        pf = ir.Portfolio(positions=np.array([10.0, 5.0]), assets=("a1", "a2"))
        models = [ir.LinearAdditive(0.5), ir.LinearAdditive(1.0)]
        curves = [ir.SupplyCurve(70.0, 0.2), ir.SupplyCurve(40.0, 0.1)]
        betas = [ir.beta(m, x, WC, None, float(y))
                 for m, x, y in zip(models, [x_tilde, x_second], pf.positions)]
        b_pf = ir.beta_portfolio(models, [x_tilde, x_second], WC, None, pf)
        rep = ir.capital_requirement_portfolio(pf, betas, b_pf, curves, "block")
        manual = sum(float(y) * (b + c.price(float(y)))
                     for y, b, c in zip(pf.positions, betas, curves))
        assert rep.capital_requirement == pytest.approx(manual, abs=1e-9)
        assert rep.beta_value == b_pf
        assert len(rep.per_asset) == 2

    def test_return_based_capital(self):
        pf = ir.Portfolio(positions=np.array([10.0, 5.0]))
        curves = [ir.SupplyCurve(70.0, 0.2), ir.SupplyCurve(40.0, 0.1)]
        got = ir.capital_requirement_return_based(pf, curves, -0.05)
        invested = 10 * 72.0 + 5 * 40.5
        assert got == pytest.approx(-0.05 * invested)


class TestVarGbmPortfolio:
    def test_single_asset_collapse(self):
        pf = ir.Portfolio(positions=np.array([10.0]))
        got = ir.var_gbm_portfolio([GBM], [0.01], np.array([[1.0]]), pf, 0.05)
        from scipy.special import ndtri
        manual = -ndtri(0.05) * 0.2 - 0.03 - np.log(100.0) + 0.1
        assert got == pytest.approx(manual, abs=1e-12)

    def test_no_impact_matches_monte_carlo(self):
        params = [GBM, ir.GbmParams(80.0, 0.03, 0.3, 1.0)]
        R = np.array([[1.0, 0.4], [0.4, 1.0]])
        pf = ir.Portfolio(positions=np.array([5.0, 7.0]))
        closed = ir.var_gbm_portfolio(params, [0.0, 0.0], R, pf, 0.05)
        space, vecs = ir.sample_gbm_correlated(params, R, 10**6, seed=2024)
        sum_logs = np.log(vecs[0].values) + np.log(vecs[1].values)
        mc = float(ir.ValueAtRisk(0.05).compute(sum_logs, space.probabilities))
        assert abs(closed - mc) / abs(mc) < 0.01

    def test_diagonal_two_identical_assets(self):
        params = [GBM, GBM]
        pf = ir.Portfolio(positions=np.array([5.0, 7.0]))
        closed = ir.var_gbm_portfolio(params, [0.01, 0.01], np.eye(2), pf, 0.05)
        space, vecs = ir.sample_gbm_correlated(params, np.eye(2), 10**6, seed=77)
        sum_logs = np.log(vecs[0].values) + np.log(vecs[1].values)
        mc = (float(ir.ValueAtRisk(0.05).compute(sum_logs, space.probabilities))
              + 0.01 * 5 + 0.01 * 7)
        assert abs(closed - mc) / abs(mc) < 0.01

    def test_non_psd_rejected(self):
        pf = ir.Portfolio(positions=np.array([1.0, 1.0]))
        R = np.array([[1.0, 2.0], [2.0, 1.0]])
        with pytest.raises(ir.NonPSDCovariance):
            ir.var_gbm_portfolio([GBM, GBM], [0.0, 0.0], R, pf, 0.05)


class TestSeparableClosedForms:
    @pytest.fixture
    def wide(self):
        sp = ir.ScenarioSpace(5, probabilities=np.ones(5) / 5)
        return ir.ScenarioVector([80.0, 85.0, 90.0, 95.0, 100.0], sp)

    def test_additive_family(self, wide):
        # beta(y) = rho(x_tilde) - h(-y) for every cash-additive functional
        h = ir.saturating_exp_h(30.0, 0.01)
        model = ir.SeparableAdditive(h=h)
        functionals = [WC, ir.ValueAtRisk(0.3), ir.AverageValueAtRisk(0.3),
                       ir.Entropic(1.0)]
        for fn in functionals:
            for y in (0.5, 7.0, 42.0):
                got = ir.beta(model, wide, fn, None, y)
                assert got == pytest.approx(ir.rho(fn, wide) - h(-y), abs=1e-9)

    def test_multiplicative_family(self, wide):
        # beta(y) = h(-y) rho(x_tilde) for positively homogeneous functionals
        h = ir.saturating_exp_h(0.5, 0.004, anchor=1.0)
        model = ir.SeparableMultiplicative(h=h)
        for fn in (WC, ir.ValueAtRisk(0.3), ir.AverageValueAtRisk(0.3)):
            rx = ir.rho(fn, wide)
            assert rx < 0
            for y in (0.5, 7.0, 42.0):
                got = ir.beta(model, wide, fn, None, y)
                assert got == pytest.approx(h(-y) * rx, rel=1e-12)

    def test_multivariate_additive(self, wide):
        sp = wide.space
        xb = ir.ScenarioVector([50.0, 60.0, 40.0, 55.0, 45.0], sp)
        h1, h2 = ir.saturating_exp_h(30.0, 0.01), ir.saturating_exp_h(20.0, 0.02)
        models = [ir.SeparableAdditive(h=h1), ir.SeparableAdditive(h=h2)]
        pf = ir.Portfolio(positions=np.array([3.0, 11.0]))
        for fn in (WC, ir.Entropic(0.5)):
            got = ir.beta_portfolio(models, [wide, xb], fn, None, pf)
            total = ir.ScenarioVector(wide.values + xb.values, sp)
            want = ir.rho(fn, total) - h1(-3.0) - h2(-11.0)
            assert got == pytest.approx(want, abs=1e-9)


class TestExam1Reproduction:
    def test_var_linear_is_var_plus_ay(self, x_tilde):
        model = ir.LinearAdditive(0.5)
        var = ir.ValueAtRisk(1 / 3)
        base = ir.rho(var, x_tilde)
        for y in np.linspace(0.25, 90, 20):
            got = ir.beta(model, x_tilde, var, None, float(y))
            assert got == pytest.approx(base + 0.5 * y, abs=1e-12)


class TestAxiomSuite:
    @pytest.fixture
    def wide(self):
        sp = ir.ScenarioSpace(5, probabilities=np.ones(5) / 5)
        return ir.ScenarioVector([80.0, 85.0, 90.0, 95.0, 100.0], sp)

    def test_beta_linear_passes(self, wide):
        reports = ir.check_beta_axioms("beta", ir.LinearAdditive(0.5), wide,
                                       WC, None, trials=400, seed=11)
        assert all(r.classification == "pass" for r in reports)

    def test_beta_split_passes(self, wide):
        reports = ir.check_beta_axioms("beta_split", ir.LinearAdditive(0.5), wide,
                                       WC, None, trials=400, seed=11)
        assert all(r.classification == "pass" for r in reports)

    def test_power_law_block_convexity_expected_fail(self, wide):
        reports = ir.check_beta_axioms("beta", ir.PowerLaw(2.0, 0.5), wide,
                                       WC, None, trials=400, seed=11)
        by = {r.name.rsplit("-", 1)[-1]: r for r in reports}
        assert by["monotonicity"].classification == "pass"
        convex = [r for r in reports if r.name.endswith("convexity")][0]
        assert convex.violations and convex.classification == "expected-fail"

    def test_delta_profile(self, wide):
        reports = ir.check_beta_axioms("delta_short", ir.LinearAdditive(0.5), wide,
                                       ir.Entropic(1.0), None, trials=400, seed=4)
        assert all(r.classification == "pass" for r in reports)
        names = [r.name for r in reports]
        assert any("super" in n for n in names)
        assert any("concavity" in n for n in names)

    def test_portfolio_profile(self, wide):
        xb = ir.ScenarioVector([50.0, 60.0, 40.0, 55.0, 45.0], wide.space)
        reports = ir.check_beta_axioms(
            "beta_portfolio", [ir.LinearAdditive(0.5), ir.LinearAdditive(1.0)],
            [wide, xb], WC, None, y_max=50.0, trials=400, seed=9)
        assert all(r.classification == "pass" for r in reports)

    def test_unknown_measure(self, wide):
        with pytest.raises(ir.InvalidParams):
            ir.check_beta_axioms("nope", ir.LinearAdditive(0.5), wide, WC, None)


class TestSplittingDominance:
    def test_capital_reduction_example(self, x_tilde):
        curve = ir.SupplyCurve(70.0, 0.2)
        model = ir.LinearAdditive(0.5)
        b = ir.beta(model, x_tilde, WC, None, 10.0)
        bs = ir.beta_split(model, x_tilde, WC, None, 10.0)
        cr_block = ir.capital_requirement(10.0, b, curve, "block").capital_requirement
        cr_split = ir.capital_requirement(10.0, bs, curve, "split").capital_requirement
        assert (cr_block, cr_split) == (pytest.approx(-30.0), pytest.approx(-55.0))
        assert cr_split <= cr_block

    @pytest.mark.parametrize("model", [ir.LinearAdditive(0.5), ir.PowerLaw(2.0, 0.5)])
    @pytest.mark.parametrize("fn", [WC, ir.Entropic(5.0)])
    def test_dominance_on_grid(self, model, fn, x_tilde):
        curve = ir.SupplyCurve(70.0, 0.2)
        P = x_tilde.space.probabilities
        for y in np.linspace(0.5, 100.0, 40):
            y = float(y)
            b = ir.beta(model, x_tilde, fn, P, y)
            bs = ir.beta_split(model, x_tilde, fn, P, y)
            cr_b = ir.capital_requirement(y, b, curve, "block").capital_requirement
            cr_s = ir.capital_requirement(y, bs, curve, "split").capital_requirement
            assert cr_s <= cr_b + 1e-9
