"""Euler-Lagrange checks for tariffs seen through a BetaMix kernel.

Under BetaMix(beta) the perceived price is beta*P/q + (1 - beta)*P', so
expected profit is the integral over [0, q*] of the Lagrangian

    L(q, P, P') = (P' - C'(q)) (1 - F(beta P/q + (1 - beta) P' - h'(q))).

A smooth maximizer satisfies dL/dP - d/dq dL/dP' = 0 on the interior and,
at the top, the cutoff reaches theta1 with P'(q*) = C'(q*) (for beta < 1).
Nothing here solves the boundary-value problem; the functions evaluate the
residuals of supplied candidates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .errors import DomainError, KinkError, NonmonotoneCutoffError, UnboundedDomainError
from .market import CutoffMap, MarketEnv
from .numerics import adaptive_simpson
from .perception import BetaMix
from .tariffs import PiecewiseLinear, PriceScheme, Quadratic

__all__ = [
    "VariationalProblem",
    "euler_lagrange_residual",
    "residual_profile",
    "transversality_check",
    "Transversality",
    "PolishReport",
    "polish_piecewise",
]

Q_MIN = 1e-6
REL_STEP = 1e-5
STEP_FLOOR = 1e-8


def _step(x: float) -> float:
    return max(REL_STEP * abs(x), STEP_FLOOR)


@dataclass(frozen=True)
class VariationalProblem:
    """A BetaMix environment together with a candidate tariff."""

    env: MarketEnv
    scheme: PriceScheme

    def __post_init__(self):
        if not isinstance(self.env.kernel, BetaMix):
            raise DomainError(f"variational problems need a BetaMix kernel, got {type(self.env.kernel).__name__}")
        if not isinstance(self.scheme, (Quadratic, PiecewiseLinear)):
            raise DomainError("candidate must be Quadratic or PiecewiseLinear")

    @property
    def beta(self) -> float:
        return self.env.kernel.beta

    def cutoff_of(self, q: float, P: float, dP: float) -> float:
        """Cutoff type for a (q, P, P') triple."""
        return self.beta * P / q + (1 - self.beta) * dP - self.env.prefs.slope(q)

    def integrand(self, q: float, P: float, dP: float) -> float:
        """L(q, P, P') as a free function of its three arguments."""
        return (dP - self.env.marginal_cost(q)) * (1.0 - self.env.cdf(self.cutoff_of(q, P, dP)))

    def along(self, q: float, side: str = "right") -> float:
        """L evaluated on the candidate's own path."""
        return self.integrand(q, self.scheme.price(q), self.scheme.marginal(q, side))

    @property
    def cutoff_map(self) -> CutoffMap:
        return CutoffMap(self.env, self.scheme)

    def objective(self, tol: float = 1e-12) -> float:
        """Integral of L along the candidate over [0, q*]."""
        cmap = self.cutoff_map
        q_star = cmap.q_star
        if not math.isfinite(q_star):
            raise UnboundedDomainError("q* is infinite")
        cuts = list(cmap.kinks(q_star))
        if cmap(0.0) < self.env.theta0 < self.env.theta1:
            cuts.append(cmap.crossing(self.env.theta0))
        return adaptive_simpson(lambda q: self.along(q) if q > 0.0 else self._at_zero(), 0.0, q_star, tol=tol, breakpoints=cuts)

    def _at_zero(self) -> float:
        # P/q -> P'(0) as q -> 0
        dP = self.scheme.marginal(0.0)
        theta = dP - self.env.prefs.slope(0.0)
        return (dP - self.env.marginal_cost(0.0)) * (1.0 - self.env.cdf(theta))


def _check_stencil(problem: VariationalProblem, q: float, h: float) -> None:
    for k in problem.scheme.kinks:
        if abs(q - k) <= 2 * h:
            raise KinkError(f"q={q:.9g} is within the difference stencil of the kink at {k:.9g}")


def _dL_dP(problem: VariationalProblem, q: float, P: float, dP: float) -> float:
    h = _step(P)
    return (problem.integrand(q, P + h, dP) - problem.integrand(q, P - h, dP)) / (2 * h)


def _dL_ddP(problem: VariationalProblem, q: float, P: float, dP: float) -> float:
    h = _step(dP)
    return (problem.integrand(q, P, dP + h) - problem.integrand(q, P, dP - h)) / (2 * h)


def euler_lagrange_residual(problem: VariationalProblem, q: float) -> float:
    """dL/dP - d/dq [dL/dP'] along the candidate at q.

    All derivatives are central differences. Steps in P and P' are 1e-5
    relative to the argument (at least 1e-8). The outer step in q is
    1e-5 * max(q, 1), capped at q/2: a step proportional to q alone would
    amplify the inner differences' rounding error like 1/q.

    Raises:
        DomainError: q below 1e-6, where P/q is numerically fragile.
        KinkError: the q-stencil straddles a kink of the candidate.
    """
    if q < Q_MIN:
        raise DomainError(f"residuals are evaluated for q >= {Q_MIN:g}, got {q}")
    h = min(REL_STEP * max(q, 1.0), 0.5 * q)
    _check_stencil(problem, q, h)
    s = problem.scheme

    def momentum(x):
        return _dL_ddP(problem, x, s.price(x), s.marginal(x))

    return _dL_dP(problem, q, s.price(q), s.marginal(q)) - (momentum(q + h) - momentum(q - h)) / (2 * h)


def residual_profile(problem: VariationalProblem, n: int = 50, q_grid=None) -> list[tuple[float, float]]:
    """(q, residual) pairs over the interior of (0, q*), skipping kink stencils."""
    if q_grid is None:
        q_star = problem.cutoff_map.q_star
        if not math.isfinite(q_star):
            raise UnboundedDomainError("q* is infinite")
        q_grid = np.linspace(0.0, q_star, n + 2)[1:-1]
    out = []
    for q in q_grid:
        q = max(float(q), Q_MIN)
        try:
            out.append((q, euler_lagrange_residual(problem, q)))
        except KinkError:
            continue
    return out


class Transversality(NamedTuple):
    gap_top: float
    markup_at_top: float


def transversality_check(problem: VariationalProblem) -> Transversality:
    """Endpoint conditions at q*.

    ``gap_top`` is the cutoff at q* minus theta1 (zero whenever q* is an
    interior crossing); ``markup_at_top`` is P'(q*) - C'(q*), which must vanish
    at an unconstrained optimum when beta < 1. Left derivatives are used,
    since q* is approached from below.
    """
    q_star = problem.cutoff_map.q_star
    if not math.isfinite(q_star):
        raise UnboundedDomainError("q* is infinite")
    if q_star == 0.0:
        raise DomainError("q* = 0: no consumer buys, so there is no top")
    s, env = problem.scheme, problem.env
    dP = s.marginal(q_star, "left")
    gap = problem.cutoff_of(q_star, s.price(q_star), dP) - env.theta1
    return Transversality(gap, dP - env.marginal_cost(q_star))


@dataclass
class PolishReport:
    """Trace of a projected-gradient polish of a piecewise-linear tariff.

    ``max_residual`` is the largest pointwise Euler-Lagrange residual at
    segment midpoints. A piecewise-linear tariff has P'' = 0 inside every
    segment and the beta*P/q term grows like 1/q near zero, so this need
    not shrink as the fit improves. ``gradient_norm`` is the norm of the
    profit gradient in the slopes (the residual integrated against each
    segment's hat function), the weak form that does go to zero.
    """

    objective: list[float] = field(default_factory=list)
    max_residual: list[float] = field(default_factory=list)
    gradient_norm: list[float] = field(default_factory=list)
    scheme: Optional[PiecewiseLinear] = None

    @property
    def residual_monotone(self) -> bool:
        r = self.max_residual
        return all(b <= a for a, b in zip(r[:-1], r[1:]))


def _safe_objective(env: MarketEnv, slopes: np.ndarray, edges: tuple[float, ...]) -> float:
    try:
        return VariationalProblem(env, PiecewiseLinear(edges, tuple(slopes))).objective(tol=1e-10)
    except (NonmonotoneCutoffError, UnboundedDomainError):
        return -math.inf


def _max_midpoint_residual(env: MarketEnv, scheme: PiecewiseLinear) -> float:
    problem = VariationalProblem(env, scheme)
    q_star = problem.cutoff_map.q_star
    edges = [*scheme.breakpoints, math.inf]
    worst = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        if lo >= q_star:
            break
        q = 0.5 * (lo + min(hi, q_star))
        if q >= Q_MIN:
            worst = max(worst, abs(euler_lagrange_residual(problem, q)))
    return worst


def polish_piecewise(
    env: MarketEnv,
    segments: int = 20,
    iterations: int = 10,
    q_hi: Optional[float] = None,
    slope_bounds: Optional[tuple[float, float]] = None,
) -> PolishReport:
    """Improve a piecewise-linear tariff by projected gradient ascent on profit.

    Starts from marginal cost plus a quarter of theta1 + h1 - c1, uses forward
    differences for the gradient, projects slopes onto ``slope_bounds`` and
    backtracks until profit rises. After each accepted step the largest
    Euler-Lagrange residual at segment midpoints is recorded, and the
    gradient norm before each step. No threshold is asserted: the report
    is diagnostic.
    """
    if q_hi is None:
        q_hi = env.top / (env.c2 + env.h2)
    lo_b, hi_b = slope_bounds or (env.c1, env.theta1 + env.h1)
    edges = tuple(float(x) for x in np.linspace(0.0, q_hi, segments + 1)[:-1])
    mids = np.array(edges) + 0.5 * q_hi / segments
    slopes = np.array([env.marginal_cost(q) for q in mids]) + 0.25 * env.top
    report = PolishReport()
    value = _safe_objective(env, slopes, edges)
    scheme = PiecewiseLinear(edges, tuple(slopes))
    report.objective.append(value)
    report.max_residual.append(_max_midpoint_residual(env, scheme))
    rate = 1.0
    for _ in range(iterations):
        h = 1e-6
        grad = np.array([(_safe_objective(env, slopes + h * e, edges) - value) / h for e in np.eye(segments)])
        if not np.all(np.isfinite(grad)):
            break
        report.gradient_norm.append(float(np.linalg.norm(grad)))
        while rate > 1e-8:
            trial = np.clip(slopes + rate * grad, lo_b, hi_b)
            trial_value = _safe_objective(env, trial, edges)
            if trial_value > value:
                slopes, value = trial, trial_value
                rate *= 2.0
                break
            rate *= 0.5
        else:
            break
        scheme = PiecewiseLinear(edges, tuple(slopes))
        report.objective.append(value)
        report.max_residual.append(_max_midpoint_residual(env, scheme))
    report.scheme = scheme
    return report
