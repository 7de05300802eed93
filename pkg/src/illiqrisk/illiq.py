"""Illiquidity risk measures of positions and portfolios, and the capital
requirements they induce.

The long-side block measure prices the per-share offsetting exposure,
beta(y) = rho(X_T(w, -y)); the split measure prices the integrated revenue
of a continuously split unwind and is an aggregate, not per-unit, quantity.
The short-side measure delta(y) = rho(-Z_y) is only defined for model
families with a proven decreasing / cash-super-additive profile; anything
else raises UnsupportedModelForShortSide instead of silently producing an
untested number.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import ndtri

from .errors import (
    InvalidParams,
    NonPSDCovariance,
    SpaceMismatch,
    UnsupportedModelForShortSide,
)
from .impact import (
    CheckReport,
    ExponentialMultiplicative,
    ImpactModel,
    LinearAdditive,
    PowerLaw,
    SeparableAdditive,
    SeparableMultiplicative,
    SignLinear,
    StochasticSlope,
    SupplyCurve,
    check_concavity,
    initial_cost,
    offsetting_exposure,
    split_exposure,
)
from .riskmeasure import (
    AverageValueAtRisk,
    Entropic,
    RiskFunctional,
    ValueAtRisk,
    WorstCase,
    avar_gbm_quadrature,
    rho,
    rho_curve,
)
from .scenario import GbmParams, ScenarioVector, as_weights


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Position:
    """A signed holding in one asset; y > 0 long, y < 0 short."""

    asset: str
    y: float


@dataclass(frozen=True)
class Portfolio:
    """Positions in n assets. Zero components are excluded: a portfolio
    either holds an asset or does not mention it."""

    positions: np.ndarray
    assets: tuple[str, ...] | None = None

    def __post_init__(self):
        y = np.asarray(self.positions, dtype=float)
        if y.ndim != 1 or len(y) < 1:
            raise InvalidParams("a portfolio needs at least one position")
        if not np.all(np.isfinite(y)):
            raise InvalidParams("portfolio positions must be finite")
        if np.any(y == 0.0):
            raise InvalidParams("zero components are excluded from portfolios")
        if self.assets is not None and len(self.assets) != len(y):
            raise InvalidParams("asset name count does not match positions")
        y.setflags(write=False)
        object.__setattr__(self, "positions", y)

    def __len__(self) -> int:
        return len(self.positions)


@dataclass(frozen=True)
class CapitalReport:
    """Capital requirement of a position, with both initial-cost legs.

    block policy:  CR = y*beta(y) + y*X0(y)
    split policy:  CR = beta_split(y) + y*X0(y)  (the measure is already an
                   aggregate); the cheaper split-at-time-0 initial leg
                   int_0^y X0(u) du is reported alongside, not substituted.
    """

    y: float
    beta_value: float
    policy: str
    initial_cost_block: float
    initial_cost_split: float
    capital_requirement: float
    per_asset: tuple = ()


# ---------------------------------------------------------------------------
# univariate measures
# ---------------------------------------------------------------------------

def block_risk_curve(model: ImpactModel, x_tilde: ScenarioVector,
                     functional: RiskFunctional, P, ys: np.ndarray) -> np.ndarray:
    """rho(Z_y) for block exposures over an array of signed positions."""
    ys = np.atleast_1d(np.asarray(ys, dtype=float))
    values = model.price_profile(x_tilde.values, -ys)
    weights = _weights_for(functional, x_tilde, P)
    return functional.compute(values, weights)


def split_risk_curve(model: ImpactModel, x_tilde: ScenarioVector,
                     functional: RiskFunctional, P, ys: np.ndarray,
                     quadrature: str | None = None) -> np.ndarray:
    """rho(Z_y) for continuously split exposures over an array of positions."""
    ys = np.atleast_1d(np.asarray(ys, dtype=float))
    rows = [split_exposure(model, x_tilde, float(y), quadrature=quadrature).z.values
            for y in ys]
    weights = _weights_for(functional, x_tilde, P)
    return functional.compute(np.stack(rows), weights)


def _weights_for(functional: RiskFunctional, x_tilde: ScenarioVector, P):
    if not functional.requires_probability:
        return None
    if P is not None:
        return as_weights(P)
    if x_tilde.space.probabilities is not None:
        return x_tilde.space.probabilities
    from .errors import MissingProbability
    raise MissingProbability(f"{functional.kind} needs a probability vector")


def beta(model: ImpactModel, x_tilde: ScenarioVector,
         functional: RiskFunctional, P=None, y: float = 1.0) -> float:
    """Block illiquidity risk of a long position: rho of the offsetting
    exposure. y = 0 is the liquid convention beta(0) = rho(x_tilde)."""
    if y < 0:
        raise InvalidParams("beta is defined for y >= 0; use delta_short for y < 0")
    exp_ = offsetting_exposure(model, x_tilde, y)
    return rho(functional, exp_.z, P)


def beta_split(model: ImpactModel, x_tilde: ScenarioVector,
               functional: RiskFunctional, P=None, y: float = 1.0,
               quadrature: str | None = None) -> float:
    """Illiquidity risk of a continuously split unwind (aggregate revenue).
    beta_split(0) = rho(0) = 0: the empty integral, not the block convention."""
    if y < 0:
        raise InvalidParams("beta_split is defined for y >= 0")
    exp_ = split_exposure(model, x_tilde, y, quadrature=quadrature)
    return rho(functional, exp_.z, P)


_SHORT_DETERMINISTIC = (LinearAdditive, SignLinear, PowerLaw, SeparableAdditive)
_SHORT_HOMOGENEOUS = (WorstCase, ValueAtRisk, AverageValueAtRisk)


def _check_short_side_support(model: ImpactModel, functional: RiskFunctional) -> None:
    if isinstance(model, _SHORT_DETERMINISTIC):
        return  # deterministic additive perturbation: cash-additivity applies
    if isinstance(model, (SeparableMultiplicative, ExponentialMultiplicative)):
        if isinstance(functional, _SHORT_HOMOGENEOUS):
            return  # requires positive homogeneity of rho
        raise UnsupportedModelForShortSide(
            f"multiplicative impact needs a positively homogeneous functional, "
            f"got {functional.kind}"
        )
    if isinstance(model, StochasticSlope):
        if isinstance(functional, WorstCase):
            return
        raise UnsupportedModelForShortSide(
            "stochastic-slope impact supports the short side only under the "
            "worst-case functional"
        )
    raise UnsupportedModelForShortSide(
        f"no short-side guarantee for {type(model).__name__}"
    )


def delta_short(model: ImpactModel, x_tilde: ScenarioVector,
                functional: RiskFunctional, P=None, y: float = -1.0) -> float:
    """Short-side illiquidity risk delta(y) = rho(-Z_y) for y < 0.
    y = 0 is the convention delta(0) = rho(-x_tilde)."""
    if y > 0:
        raise InvalidParams("delta_short is defined for y <= 0")
    _check_short_side_support(model, functional)
    exp_ = offsetting_exposure(model, x_tilde, y)
    neg = ScenarioVector(values=-exp_.z.values, space=exp_.z.space)
    return rho(functional, neg, P)


def short_risk_curve(model: ImpactModel, x_tilde: ScenarioVector,
                     functional: RiskFunctional, P, ys: np.ndarray) -> np.ndarray:
    """rho(-Z_y) over an array of signed positions (both orientations)."""
    _check_short_side_support(model, functional)
    ys = np.atleast_1d(np.asarray(ys, dtype=float))
    values = -model.price_profile(x_tilde.values, -ys)
    weights = _weights_for(functional, x_tilde, P)
    return functional.compute(values, weights)


# ---------------------------------------------------------------------------
# capital requirements
# ---------------------------------------------------------------------------

def capital_requirement(y: float, beta_value: float, curve: SupplyCurve,
                        policy: str = "block") -> CapitalReport:
    """Capital of a long position given its measured risk.

    ``beta_value`` is beta(y) for the block policy (per-share measure) and
    beta_split(y) for the split policy (aggregate measure).
    """
    if y < 0:
        raise InvalidParams("capital_requirement is defined for y >= 0")
    cost_block = initial_cost(curve, y, "block")
    cost_split = initial_cost(curve, y, "split")
    if policy == "block":
        cr = y * beta_value + cost_block
    elif policy == "split":
        cr = beta_value + cost_block
    else:
        raise InvalidParams(f"unknown capital policy {policy!r}")
    return CapitalReport(
        y=float(y), beta_value=float(beta_value), policy=policy,
        initial_cost_block=cost_block, initial_cost_split=cost_split,
        capital_requirement=float(cr),
    )


def capital_requirement_portfolio(portfolio: Portfolio,
                                  per_asset_betas: Sequence[float],
                                  portfolio_beta: float,
                                  curves: Sequence[SupplyCurve],
                                  policy: str = "block") -> CapitalReport:
    """Portfolio capital with per-asset legs.

    The per-asset decomposition sums y_i*(beta_i + X0_i(y_i)) for the block
    policy (beta_i aggregate for the split policy); the coupled portfolio
    measure is reported as ``beta_value`` alongside. The two aggregates are
    labelled distinctly because they answer different questions.
    """
    y = portfolio.positions
    if np.any(y <= 0):
        raise InvalidParams("portfolio capital is defined for long portfolios")
    if not (len(per_asset_betas) == len(curves) == len(y)):
        raise InvalidParams("per-asset inputs must match the portfolio length")
    per_asset = []
    total = 0.0
    cost_block_sum = 0.0
    cost_split_sum = 0.0
    for i, (yi, bi, curve) in enumerate(zip(y, per_asset_betas, curves)):
        rep = capital_requirement(float(yi), float(bi), curve, policy)
        name = portfolio.assets[i] if portfolio.assets else str(i)
        per_asset.append({
            "asset": name, "y": float(yi), "beta": float(bi),
            "capital_requirement": rep.capital_requirement,
        })
        total += rep.capital_requirement
        cost_block_sum += rep.initial_cost_block
        cost_split_sum += rep.initial_cost_split
    return CapitalReport(
        y=float(np.sum(y)), beta_value=float(portfolio_beta), policy=policy,
        initial_cost_block=cost_block_sum, initial_cost_split=cost_split_sum,
        capital_requirement=total, per_asset=tuple(per_asset),
    )


def capital_requirement_return_based(portfolio: Portfolio,
                                     curves: Sequence[SupplyCurve],
                                     beta_return: float) -> float:
    """(sum_i y_i X0_i(y_i)) * beta_return, for measures quoted on log
    prices/returns rather than monetary exposures."""
    y = portfolio.positions
    invested = sum(float(yi) * c.price(float(yi)) for yi, c in zip(y, curves))
    return invested * float(beta_return)


# ---------------------------------------------------------------------------
# portfolio measures
# ---------------------------------------------------------------------------

def _common_space(x_tildes: Sequence[ScenarioVector]):
    space = x_tildes[0].space
    for x in x_tildes[1:]:
        if x.space is not space and x.space != space:
            raise SpaceMismatch("all assets must share one scenario space")
    return space


def portfolio_block_values(models, x_tildes, ys_matrix: np.ndarray) -> np.ndarray:
    """Scenario values of sum_i X_T^i(w, -y_i) for rows of positions;
    shape (n_rows, n_scenarios)."""
    space = _common_space(x_tildes)
    ys_matrix = np.atleast_2d(np.asarray(ys_matrix, dtype=float))
    total = np.zeros((ys_matrix.shape[0], space.n_scenarios))
    for i, (model, x) in enumerate(zip(models, x_tildes)):
        total += model.price_profile(x.values, -ys_matrix[:, i])
    return total


def beta_portfolio(models: Sequence[ImpactModel], x_tildes: Sequence[ScenarioVector],
                   functional: RiskFunctional, P=None,
                   portfolio: Portfolio | None = None) -> float:
    """Coupled portfolio measure: rho of the scenario-wise sum of per-asset
    block exposures. All positions must be strictly positive."""
    y = portfolio.positions
    if np.any(y <= 0):
        raise InvalidParams("beta_portfolio requires a long portfolio")
    if not (len(models) == len(x_tildes) == len(y)):
        raise InvalidParams("models, assets and positions must align")
    z = portfolio_block_values(models, x_tildes, y[None, :])[0]
    zvec = ScenarioVector(values=z, space=_common_space(x_tildes))
    return rho(functional, zvec, P)


def beta_portfolio_split(models: Sequence[ImpactModel], x_tildes: Sequence[ScenarioVector],
                         functional: RiskFunctional, P=None,
                         portfolio: Portfolio | None = None,
                         quadrature: str | None = None) -> float:
    """Split portfolio measure: rho(sum_i int_0^{y_i} X_T^i(w, -u) du)."""
    y = portfolio.positions
    if np.any(y <= 0):
        raise InvalidParams("beta_portfolio_split requires a long portfolio")
    space = _common_space(x_tildes)
    z = np.zeros(space.n_scenarios)
    for model, x, yi in zip(models, x_tildes, y):
        z = z + split_exposure(model, x, float(yi), quadrature=quadrature).z.values
    zvec = ScenarioVector(values=z, space=space)
    return rho(functional, zvec, P)


def var_gbm_portfolio(params: Sequence[GbmParams], a: Sequence[float],
                      correlations: np.ndarray, portfolio: Portfolio,
                      delta: float) -> float:
    """Closed-form VaR of the summed LOG prices of jointly lognormal assets
    under exponential impact, plus the impact drift sum a_i y_i T.

    This measures log prices, not the sum of monetary exposures; callers
    should label it accordingly (the CLI reports it as ``log_price_var``).
    """
    if not (0.0 < delta < 1.0):
        raise InvalidParams(f"delta must lie in (0, 1), got {delta}")
    y = portfolio.positions
    if np.any(y <= 0):
        raise InvalidParams("var_gbm_portfolio requires a long portfolio")
    n = len(params)
    if not (len(a) == len(y) == n):
        raise InvalidParams("params, impact slopes and positions must align")
    T = params[0].horizon_T
    if any(abs(p.horizon_T - T) > 1e-12 for p in params):
        raise InvalidParams("all assets must share one horizon")
    R = np.asarray(correlations, dtype=float)
    if R.shape != (n, n) or not np.allclose(R, R.T, atol=1e-12):
        raise NonPSDCovariance("correlation matrix must be symmetric n x n")
    if np.min(np.linalg.eigvalsh(R)) < -1e-10:
        raise NonPSDCovariance("correlation matrix is not positive semidefinite")
    sig = np.array([p.sigma for p in params])
    cov = sig[:, None] * sig[None, :] * R
    e = np.ones(n)
    total_vol = float(np.sqrt(max(0.0, e @ cov @ e)))
    drift = sum((p.mu - 0.5 * p.sigma**2) * T for p in params)
    impact = sum(float(ai) * float(yi) * T for ai, yi in zip(a, y))
    log_x0 = sum(np.log(p.x0) for p in params)
    return float(-ndtri(delta) * np.sqrt(T) * total_vol - drift - log_x0 + impact)


def avar_exponential_gbm(params: GbmParams, a: float, delta: float, y: float,
                         n_levels: int = 2**12) -> float:
    """AVaR of the exponentially impacted GBM unwind,
    exp(-a y T) * (1/delta) int_0^delta VaR_u(x_tilde) du."""
    return float(np.exp(-a * y * params.horizon_T)
                 * avar_gbm_quadrature(params, delta, n_levels))


# ---------------------------------------------------------------------------
# axiom suite
# ---------------------------------------------------------------------------

_PROFILES = {
    # (monotone_increasing, cash super-additive?, curvature)
    "beta": (True, False, "convex"),
    "beta_split": (False, True, "convex"),
    "delta_short": (False, True, "concave"),
    "beta_portfolio": (True, False, "convex"),
}


def check_beta_axioms(measure: str, models, x_tildes, functional: RiskFunctional,
                      P=None, y_max: float = 100.0, trials: int = 1000,
                      seed: int = 0, tol: float = 1e-9,
                      quadrature: str | None = None) -> list[CheckReport]:
    """Profile suite for the illiquidity measures over seeded (y, v, m, lam)
    triples. The expected curvature for block measures is conditional on the
    exposure family passing the concavity probe: families that fail it (e.g.
    power-law or exponential block exposures) get their curvature violations
    classified "expected-fail".
    """
    if measure not in _PROFILES:
        raise InvalidParams(f"unknown measure {measure!r}")
    if trials < 1:
        raise InvalidParams("trials must be >= 1")
    increasing, super_additive, curvature = _PROFILES[measure]

    if measure == "beta_portfolio":
        model_list, x_list = list(models), list(x_tildes)
    else:
        model_list, x_list = [models], [x_tildes]
    n_assets = len(model_list)

    gen = np.random.Generator(np.random.Philox(key=int(seed)))
    lo = 1e-3 * y_max
    if measure == "delta_short":
        y = -(lo + (y_max - lo) * gen.random((trials, n_assets)))
        v = -(lo + (y_max - lo) * gen.random((trials, n_assets)))
        m = gen.random(trials) * (-y.max(axis=1))  # keeps y + m <= 0
    else:
        y = lo + (y_max - lo) * gen.random((trials, n_assets))
        v = lo + (y_max - lo) * gen.random((trials, n_assets))
        m = gen.random(trials) * (0.5 * y_max)
    lam = gen.random(trials)

    hi = np.maximum(y, v)
    lo_pts = np.minimum(y, v)
    mid = lam[:, None] * y + (1 - lam[:, None]) * v
    shifted = y + m[:, None]

    def evaluate(points: np.ndarray) -> np.ndarray:
        if measure == "beta":
            return block_risk_curve(model_list[0], x_list[0], functional, P, points[:, 0])
        if measure == "beta_split":
            return split_risk_curve(model_list[0], x_list[0], functional, P,
                                    points[:, 0], quadrature=quadrature)
        if measure == "delta_short":
            return short_risk_curve(model_list[0], x_list[0], functional, P, points[:, 0])
        values = portfolio_block_values(model_list, x_list, points)
        weights = _weights_for(functional, x_list[0], P)
        return functional.compute(values, weights)

    if measure == "delta_short":
        _check_short_side_support(model_list[0], functional)

    r_hi, r_lo, r_mid, r_shift = (evaluate(pts) for pts in (hi, lo_pts, mid, shifted))
    r_y, r_v = evaluate(y), evaluate(v)

    # probe: does the underlying exposure family have the curvature the
    # theory needs? block exposures may legitimately fail it.
    curvature_expected = True
    if measure in ("beta", "beta_portfolio"):
        probe_grid = np.linspace(lo, y_max, 9)
        for mdl, xv in zip(model_list, x_list):
            probe = check_concavity(
                lambda t, mdl=mdl, xv=xv: mdl.price_values(xv.values, -t),
                probe_grid, tol=tol, name="assumption-2-probe",
            )
            curvature_expected = curvature_expected and probe.passed

    mono = CheckReport(name=f"{measure}-monotonicity", pairs_tested=trials)
    gaps = r_lo - r_hi if increasing else r_hi - r_lo
    for i in np.nonzero(gaps > tol)[0]:
        mono.violations.append({"trial": int(i), "gap": float(gaps[i])})

    cash_name = "cash-super-additivity" if super_additive else "cash-sub-additivity"
    cash = CheckReport(name=f"{measure}-{cash_name}", pairs_tested=trials)
    if super_additive:
        gaps = r_shift - (r_y + m)          # require shift <= base + m
    else:
        gaps = (r_y - m) - r_shift          # require shift >= base - m
    for i in np.nonzero(gaps > tol)[0]:
        cash.violations.append({"trial": int(i), "m": float(m[i]), "gap": float(gaps[i])})

    curve_name = "convexity" if curvature == "convex" else "concavity"
    curve_check = CheckReport(
        name=f"{measure}-{curve_name}", pairs_tested=trials,
        expected_fail=not curvature_expected,
    )
    chord = lam * r_y + (1 - lam) * r_v
    gaps = r_mid - chord if curvature == "convex" else chord - r_mid
    for i in np.nonzero(gaps > tol)[0]:
        curve_check.violations.append({
            "trial": int(i), "lambda": float(lam[i]), "gap": float(gaps[i]),
        })
    if not curvature_expected:
        curve_check.details["assumption2_probe"] = "failed"
    return [mono, cash, curve_check]
