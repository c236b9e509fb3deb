"""Monopoly nonlinear pricing when consumers misperceive the marginal price.

Consumers respond to a perceived marginal price, a weighted average of the
tariff's marginal prices below their current consumption. The package
evaluates tariffs, best responses and market functionals under such
perception, computes optimal quadratic tariffs and their comparative
statics, checks Euler-Lagrange conditions for general tariffs, and compares
flat with increasing-block tariffs.
"""

from .block_tariff import compare_block_vs_flat, lambda_sweep
from .comparative_statics import (
    efficiency_cost,
    profit_bias_derivative_sign,
    shape_functions,
    surplus_bias_derivative_sign,
    sweep,
    welfare_bias_derivative_sign,
)
from .consumer import Preferences, best_response, simulate_dynamics
from .errors import (
    AssumptionViolation,
    ConfigError,
    ConvergenceFailure,
    DegenerateSchemeError,
    DomainError,
    HypothesisError,
    KinkError,
    NonmonotoneCutoffError,
    OracleDisagreementError,
    PricingError,
    RegimeError,
    UnboundedDemandError,
    UnboundedDomainError,
)
from .market import (
    CutoffMap,
    MarketEnv,
    aggregate_consumption,
    consumer_surplus,
    cutoff_type,
    expected_profit,
    expected_welfare,
    max_quantity,
)
from .perception import BetaMix, Custom, Dirac0, MixDirac, Uniform, mean_fraction, perceived_marginal
from .quadratic_optimum import (
    QuadraticOptimum,
    numeric_quadratic_search,
    optimal_profit_scheme,
    optimal_welfare_scheme,
    profit_foc_residuals,
    profit_welfare_ratio,
    welfare_foc_residuals,
)
from .tariffs import Flat, PiecewiseLinear, Quadratic, TwoTier, average_price, marginal_price, price
from .variational import VariationalProblem, euler_lagrange_residual, transversality_check

__version__ = "0.1.0"
