"""Liquidity-adjusted risk measures under parametric price impact.

The package prices the unwind of long (and, where the theory allows, short)
positions whose execution moves the market: a standard convex risk
functional is applied to the offsetting exposure of the position, either as
a single block or as a continuously split schedule, and the resulting
position-size risk curves are verified against their axioms and their
convex-duality representations on finite scenario spaces.
"""

from .errors import (
    AbsoluteContinuityViolation,
    ConfigError,
    EmptyGrid,
    IlliqriskError,
    InvalidModel,
    InvalidParams,
    MissingProbability,
    NonFiniteInput,
    NonPSDCovariance,
    OutOfGridSpan,
    ParseError,
    ProbabilityError,
    QuadratureNonConvergence,
    SpaceMismatch,
    TrancheCapViolation,
    UnsupportedModelForShortSide,
)
from .scenario import (
    GbmParams,
    ProbabilityVector,
    ScenarioSpace,
    ScenarioVector,
    expectation,
    load_scenarios,
    sample_gbm,
    sample_gbm_correlated,
    sup_norm,
)
from .impact import (
    Exposure,
    ExponentialMultiplicative,
    ImpactModel,
    LinearAdditive,
    PowerLaw,
    SeparableAdditive,
    SeparableMultiplicative,
    SignLinear,
    StochasticSlope,
    SupplyCurve,
    CheckReport,
    check_assumption1,
    check_concavity,
    initial_cost,
    offsetting_exposure,
    price_at,
    saturating_exp_antiderivative,
    saturating_exp_h,
    split_exposure,
    split_exposure_discrete,
    split_exposure_trapezoid,
)
from .riskmeasure import (
    AverageValueAtRisk,
    Entropic,
    RiskFunctional,
    ValueAtRisk,
    WorstCase,
    avar_gbm_quadrature,
    check_rho_axioms,
    make_functional,
    rho,
    rho_curve,
    var_gbm_closed_form,
)
from .illiq import (
    CapitalReport,
    Portfolio,
    Position,
    avar_exponential_gbm,
    beta,
    beta_portfolio,
    beta_portfolio_split,
    beta_split,
    block_risk_curve,
    capital_requirement,
    capital_requirement_portfolio,
    capital_requirement_return_based,
    check_beta_axioms,
    delta_short,
    short_risk_curve,
    split_risk_curve,
    var_gbm_portfolio,
)
from .duality import (
    ConjugatePair,
    GridFunction,
    PenaltyEvaluation,
    TensorGridFunction,
    beta_hat,
    beta_hat_nd,
    biconjugate_check,
    biconjugate_nd,
    build_f,
    build_f_portfolio,
    build_g,
    conjugate,
    conjugate_nd,
    conjugate_value,
    dual_check,
    lipschitz_check,
    penalty_alpha,
    INF_SENTINEL,
)

__version__ = "0.1.0"
