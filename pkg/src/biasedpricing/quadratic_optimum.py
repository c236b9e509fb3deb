"""Optimal quadratic tariffs P(q) = (A/2) q^2 + B q.

Closed forms for the profit-maximizing and welfare-maximizing schemes under
a linear-mean kernel (E[eps] = a1 q), their first-order-condition residuals,
and a brute-force grid + simplex search that serves as an independent check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from scipy.optimize import minimize

from .errors import DegenerateSchemeError, DomainError, HypothesisError, OracleDisagreementError
from .market import MarketEnv, expected_profit, expected_welfare
from .numerics import adaptive_simpson
from .tariffs import Quadratic

__all__ = [
    "QuadraticOptimum",
    "optimal_profit_scheme",
    "optimal_welfare_scheme",
    "profit_foc_residuals",
    "welfare_foc_residuals",
    "FocResiduals",
    "numeric_quadratic_search",
    "profit_welfare_ratio",
    "exact_at_bottom",
]

OBJECTIVES = ("profit", "welfare")


@dataclass(frozen=True)
class QuadraticOptimum:
    A: float
    B: float
    q_star: float
    value: float
    objective: str
    source: str = "closed_form"

    @property
    def scheme(self) -> Quadratic:
        return Quadratic(self.A, self.B)


def _require(env: MarketEnv, max_a1: float) -> None:
    failed = env.hypothesis_failures(max_a1)
    if failed:
        raise HypothesisError(failed[0], f"a1={env.a1:g}")


def exact_at_bottom(env: MarketEnv, B: float) -> bool:
    """True when theta_P(0) = B - h1 >= theta0.

    The closed-form values integrate the uniform survival function from
    q = 0; if the cutoff starts below theta0 every type buys a positive
    amount and the true functional is smaller than the polynomial.
    """
    return B - env.h1 >= env.theta0


def optimal_profit_scheme(env: MarketEnv) -> QuadraticOptimum:
    """Profit-maximizing quadratic tariff.

    A = [(1-a1) c2 + (3 a1 - 1) h2] / [(1-a1)(2 - 3 a1)]
    B = [(1 - 2 a1)(theta1 + h1) + (1-a1) c1] / (2 - 3 a1)
    pi = (1-a1)^2 T^3 / [6 (theta1 - theta0)(2 - 3 a1)((1-a1) c2 + h2)]

    with T = theta1 + h1 - c1.

    Raises:
        HypothesisError: naming the first failed hypothesis (e.g. "a1 < 2/3").
    """
    _require(env, 2.0 / 3.0)
    a1, c1, c2, h1, h2 = env.a1, env.c1, env.c2, env.h1, env.h2
    top = env.top
    A = ((1 - a1) * c2 + (3 * a1 - 1) * h2) / ((1 - a1) * (2 - 3 * a1))
    B = ((1 - 2 * a1) * (env.theta1 + h1) + (1 - a1) * c1) / (2 - 3 * a1)
    q_star = (1 - a1) * top / ((1 - a1) * c2 + h2)
    value = (1 - a1) ** 2 * top**3 / (6 * env.width * (2 - 3 * a1) * ((1 - a1) * c2 + h2))
    return QuadraticOptimum(A, B, q_star, value, "profit")


def optimal_welfare_scheme(env: MarketEnv) -> QuadraticOptimum:
    """Welfare-maximizing quadratic tariff: A = c2/(1-a1), B = c1.

    Perceived marginal price then equals marginal cost. The value
    T^3 / (6 (theta1 - theta0)(c2 + h2)) does not depend on a1.
    """
    _require(env, 1.0)
    a1 = env.a1
    top = env.top
    q_star = top / (env.c2 + env.h2)
    value = top**3 / (6 * env.width * (env.c2 + env.h2))
    return QuadraticOptimum(env.c2 / (1 - a1), env.c1, q_star, value, "welfare")


def profit_welfare_ratio(env: MarketEnv) -> float:
    """max pi / max W over quadratic tariffs."""
    _require(env, 2.0 / 3.0)
    a1, c2, h2 = env.a1, env.c2, env.h2
    return (1 - a1) ** 2 * (c2 + h2) / ((2 - 3 * a1) * ((1 - a1) * c2 + h2))


class FocResiduals(NamedTuple):
    """First-order conditions of a quadratic tariff, in two forms.

    ``intercept`` and ``slope`` are the polynomial reductions (conditions
    for B and for A, scaled to clear q*); ``d_intercept`` and ``d_slope`` are
    the raw partial derivatives dV/dB and dV/dA obtained by quadrature of the
    Leibniz-rule integrals.
    """

    intercept: float
    slope: float
    d_intercept: float
    d_slope: float


def _foc_setup(env: MarketEnv, A: float, B: float):
    if not env.prefs.is_quadratic or env.type_dist is not None:
        raise DomainError("FOC residuals need quadratic h and uniform types")
    k = (1 - env.a1) * A + env.h2
    T = env.theta1 + env.h1 - B
    if T <= 0.0 or k <= 0.0:
        raise DegenerateSchemeError(f"q* = 0 or undefined at (A, B) = ({A}, {B})")
    return k, T, T / k


def _leibniz(env: MarketEnv, A: float, B: float, q_star: float, weight_slope, weight_icept, markup):
    """Integrals of [w_s q + w_i] (1 - F) - markup(q) f along theta_P, for dA and dB."""
    a1 = env.a1

    def cutoff(q):
        return (1 - a1) * A * q + B - env.h1 + env.h2 * q

    def base(q):
        th = cutoff(q)
        return 1.0 - env.cdf(th), env.pdf(th) if env.theta0 < th < env.theta1 else 0.0

    q_low = (env.theta0 - (B - env.h1)) / ((1 - a1) * A + env.h2)
    cuts = [q_low] if 0.0 < q_low < q_star else []

    def d_slope(q):
        s, f = base(q)
        return q * (weight_slope * s - (1 - a1) * markup(q) * f)

    def d_icept(q):
        s, f = base(q)
        return weight_icept * s - markup(q) * f

    tol = 1e-13 * max(1.0, q_star)
    return (
        adaptive_simpson(d_slope, 0.0, q_star, tol=tol, breakpoints=cuts),
        adaptive_simpson(d_icept, 0.0, q_star, tol=tol, breakpoints=cuts),
    )


def profit_foc_residuals(env: MarketEnv, A: float, B: float, check: bool = True) -> FocResiduals:
    """Profit FOCs at (A, B).

    intercept = (theta1 + h1 - B)(c2 + h2 - a1 A) - 2 (B - c1)((1-a1) A + h2)
    slope     = (theta1 + h1 - B)(h2 - (1-a1) A + 2 c2 (1-a1)) - 3 (1-a1)(B - c1)((1-a1) A + h2)

    Both vanish at the closed-form optimum. When ``check`` is set and the
    cutoff starts at or above theta0, the reductions are compared with the
    quadrature derivatives rescaled by 2k^2/T and 6k^3/T^2 (k the cutoff
    slope, T = theta1 + h1 - B); a mismatch above 1e-8 raises.
    """
    a1, c1, c2, h2 = env.a1, env.c1, env.c2, env.h2
    k, T, q_star = _foc_setup(env, A, B)
    r_b = T * (c2 + h2 - a1 * A) - 2 * (B - c1) * k
    r_a = T * (h2 - (1 - a1) * A + 2 * c2 * (1 - a1)) - 3 * (1 - a1) * (B - c1) * k
    d_a, d_b = _leibniz(env, A, B, q_star, 1.0, 1.0, lambda q: (A - c2) * q + B - c1)
    if check and exact_at_bottom(env, B):
        _compare(r_b, 2 * k**2 / T * env.width * d_b, "profit intercept condition")
        _compare(r_a, 6 * k**3 / T**2 * env.width * d_a, "profit slope condition")
    return FocResiduals(r_b, r_a, d_b, d_a)


def welfare_foc_residuals(env: MarketEnv, A: float, B: float, check: bool = True) -> FocResiduals:
    """Welfare FOCs at (A, B), reduced the same way as the profit ones.

    intercept = T (2k + c2 - 2 h2 - 3 (1-a1) A) - 2 (B - c1) k
    slope     = 2 T (3k + c2 - 3 h2 - 4 (1-a1) A) - 3 (B - c1) k
    """
    a1, c1, c2, h2 = env.a1, env.c1, env.c2, env.h2
    if a1 >= 1.0:
        raise HypothesisError("a1 < 1")
    k, T, q_star = _foc_setup(env, A, B)
    r_b = T * (2 * k + c2 - 2 * h2 - 3 * (1 - a1) * A) - 2 * (B - c1) * k
    r_a = 2 * T * (3 * k + c2 - 3 * h2 - 4 * (1 - a1) * A) - 3 * (B - c1) * k
    alpha = 2 * (1 - a1) * A + h2 - c2
    d_a, d_b = _leibniz(env, A, B, q_star, 2 * (1 - a1), 1.0, lambda q: alpha * q + B - c1)
    if check and exact_at_bottom(env, B):
        _compare(r_b, 2 * k**2 / T * env.width * d_b, "welfare intercept condition")
        _compare(r_a, 6 * k**3 / ((1 - a1) * T**2) * env.width * d_a, "welfare slope condition")
    return FocResiduals(r_b, r_a, d_b, d_a)


def _compare(reduced: float, rescaled: float, label: str, tol: float = 1e-8) -> None:
    if abs(reduced - rescaled) > tol * max(1.0, abs(reduced)):
        raise OracleDisagreementError(f"{label}: reduced form {reduced:.12g} vs quadrature {rescaled:.12g}")


def _value(env: MarketEnv, A: float, B: float, objective: str) -> float:
    """Objective at (A, B); -inf where the cutoff map is not increasing."""
    if (1 - env.a1) * A + env.h2 <= 0.0 and B - env.h1 < env.theta1:
        return -math.inf
    scheme = Quadratic(A, B)
    if objective == "profit":
        return expected_profit(env, scheme)
    return expected_welfare(env, scheme)


def default_search_box(env: MarketEnv) -> tuple[tuple[float, float], tuple[float, float]]:
    """(A range, B range) scaled to the problem.

    A spans +-5 (c2 + h2)/(1 - a1), widened by 1/(2 - 3 a1) once a1 > 1/3:
    the kernel flattens the perceived slope by (1 - a1), and the profit
    optimum grows without bound as a1 approaches 2/3.
    """
    scale = 5.0 * (env.c2 + env.h2) / (1.0 - env.a1)
    if 1.0 / 3.0 < env.a1 < 2.0 / 3.0:
        scale /= min(1.0, 2.0 - 3.0 * env.a1)
    top = env.theta1 + env.h1
    return (-scale, scale), (-top, 2.0 * top)


def numeric_quadratic_search(
    env: MarketEnv,
    objective: str = "profit",
    box: Optional[tuple[tuple[float, float], tuple[float, float]]] = None,
    grid_n: int = 41,
    max_evals: int = 2000,
) -> QuadraticOptimum:
    """Maximize profit or welfare over (A, B) without using any closed form.

    A ``grid_n x grid_n`` grid over ``box`` picks a start, then Nelder-Mead,
    kept inside the box, polishes it (at most ``max_evals`` evaluations).
    The objective is the market functional itself, bottom clipping included.

    Raises:
        OracleDisagreementError: the search finds no positive value although
            the closed form promises one.
    """
    if objective not in OBJECTIVES:
        raise DomainError(f"objective must be 'profit' or 'welfare', got {objective!r}")
    if env.a1 >= 1.0:
        raise HypothesisError("a1 < 1")
    (a_lo, a_hi), (b_lo, b_hi) = box or default_search_box(env)
    best = (-math.inf, 0.0, 0.0)
    for A in np.linspace(a_lo, a_hi, grid_n):
        for B in np.linspace(b_lo, b_hi, grid_n):
            v = _value(env, A, B, objective)
            if v > best[0]:
                best = (v, float(A), float(B))
    x0 = np.array(best[1:])
    span = np.array([(a_hi - a_lo), (b_hi - b_lo)]) / (grid_n - 1)
    simplex = np.array([x0, x0 + [span[0], 0.0], x0 + [0.0, span[1]]])
    res = minimize(
        lambda x: -_value(env, x[0], x[1], objective),
        x0,
        method="Nelder-Mead",
        bounds=[(a_lo, a_hi), (b_lo, b_hi)],
        options={"initial_simplex": simplex, "maxfev": max_evals, "xatol": 1e-11, "fatol": 1e-16},
    )
    A, B = float(res.x[0]), float(res.x[1])
    value = -float(res.fun)
    if value <= 0.0:
        try:
            promised = (optimal_profit_scheme if objective == "profit" else optimal_welfare_scheme)(env).value
        except HypothesisError:
            promised = 0.0
        if promised > 0.0:
            raise OracleDisagreementError(f"search found no positive {objective}; closed form gives {promised:.9g}")
    k = (1 - env.a1) * A + env.h2
    q_star = max(0.0, (env.theta1 + env.h1 - B) / k) if k > 0 else math.inf
    return QuadraticOptimum(A, B, q_star, value, objective, source="oracle")
