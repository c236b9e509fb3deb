"""Flat versus two-tier increasing block tariffs with a mixed population.

A fraction ``lam`` of consumers perceive the average price, the rest the
true marginal price. Aggregate consumption is compared between a flat rate
p1 and a two-tier tariff (p2 up to qbar, p3 above), with p2 <= p1 <= p3.

Two regimes carry sign claims:

* "tier_window": p2 - h'(qbar) <= theta1 < p1 - h'(qbar). Nobody reaches
  qbar under the flat rate, so the cheaper first tier raises consumption:
  Q(two-tier) > Q(flat).
* "same_first_tier": p1 = p2. The two-tier tariff can only reduce
  consumption, and the reduction shrinks as more consumers look at the
  average price.
"""

from __future__ import annotations

import csv
import io
import math
from collections.abc import Iterable
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .consumer import best_response
from .errors import DomainError, OracleDisagreementError, RegimeError
from .market import MarketEnv, aggregate_consumption
from .numerics import adaptive_simpson
from .perception import Dirac0, PerceptionKernel, Uniform
from .tariffs import Flat, PriceScheme, TwoTier

__all__ = [
    "TIER_WINDOW",
    "SAME_FIRST_TIER",
    "OTHER",
    "classify_regime",
    "BlockComparison",
    "compare_block_vs_flat",
    "BlockComparisonReport",
    "lambda_sweep",
    "bunching_mass",
    "bunching_mass_by_types",
    "demand_closed_form",
    "aggregate_consumption_closed_form",
]

TIER_WINDOW = "tier_window"
SAME_FIRST_TIER = "same_first_tier"
OTHER = "other"

MONOTONE_SLACK = 1e-12


def _validate(env: MarketEnv, p1: float, p2: float, p3: float, qbar: float) -> None:
    if qbar <= 0.0:
        raise RegimeError(f"threshold must be positive, got qbar={qbar}")
    if not p2 <= p1 <= p3:
        raise RegimeError(f"need p2 <= p1 <= p3, got p1={p1}, p2={p2}, p3={p3}")
    if p1 == p3 and p2 != p3:
        raise RegimeError("need p1 < p3 unless the two-tier tariff is flat (p2 = p3)")
    if qbar > env.q_cap:
        raise RegimeError(f"threshold {qbar} lies beyond the quantity cap {env.q_cap:g}")


def classify_regime(env: MarketEnv, p1: float, p2: float, p3: float, qbar: float) -> str:
    """Which sign claim, if any, applies to these prices."""
    _validate(env, p1, p2, p3, qbar)
    if p1 == p2:
        return SAME_FIRST_TIER
    slope = env.prefs.slope(qbar)
    if p2 - slope <= env.theta1 < p1 - slope:
        return TIER_WINDOW
    return OTHER


class BlockComparison(NamedTuple):
    Q_flat: float
    Q_two_tier: float
    delta: float
    regime: str


def compare_block_vs_flat(
    env: MarketEnv, p1: float, p2: float, p3: float, qbar: float, lam: float
) -> BlockComparison:
    """Aggregate consumption under Flat(p1) and TwoTier(p2, p3, qbar).

    ``delta`` is Q_flat - Q_two_tier.

    Raises:
        RegimeError: prices out of order or a nonpositive threshold.
        OracleDisagreementError: the regime's sign claim fails.
    """
    if not 0.0 <= lam <= 1.0:
        raise DomainError(f"lambda must lie in [0, 1], got {lam}")
    regime = classify_regime(env, p1, p2, p3, qbar)
    q1 = aggregate_consumption(env, Flat(p1), lam)
    q2 = aggregate_consumption(env, TwoTier(p2, p3, qbar), lam)
    delta = q1 - q2
    if regime == TIER_WINDOW and not q2 > q1:
        raise OracleDisagreementError(f"two-tier consumption {q2:.9g} does not exceed flat {q1:.9g} (lam={lam})")
    if regime == SAME_FIRST_TIER and delta < -MONOTONE_SLACK:
        raise OracleDisagreementError(f"flat consumption {q1:.9g} below two-tier {q2:.9g} with equal first tier (lam={lam})")
    return BlockComparison(q1, q2, delta, regime)


@dataclass
class BlockComparisonReport:
    p1: float
    p2: float
    p3: float
    qbar: float
    regime: str
    rows: list[BlockComparison] = field(default_factory=list)
    lambdas: list[float] = field(default_factory=list)
    slope: float = 0.0
    affine_residual: float = 0.0

    def to_csv(self, fh=None) -> str:
        out = fh or io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["lambda", "Q_flat", "Q_two_tier", "delta", "regime"])
        for lam, r in zip(self.lambdas, self.rows):
            w.writerow([f"{lam:.9g}", f"{r.Q_flat:.9g}", f"{r.Q_two_tier:.9g}", f"{r.delta:.9g}", r.regime])
        return out.getvalue() if fh is None else ""


def lambda_sweep(
    env: MarketEnv, p1: float, p2: float, p3: float, qbar: float, lam_grid: Iterable[float]
) -> BlockComparisonReport:
    """Compare the two tariffs over a grid of average-price fractions.

    Fits delta(lam) with a line and reports its slope and the largest
    deviation from it. With an equal first tier, delta must be nonincreasing
    and two-tier consumption nondecreasing in lam.
    """
    lams = sorted(float(x) for x in lam_grid)
    report = BlockComparisonReport(p1, p2, p3, qbar, classify_regime(env, p1, p2, p3, qbar))
    for lam in lams:
        report.rows.append(compare_block_vs_flat(env, p1, p2, p3, qbar, lam))
        report.lambdas.append(lam)
    deltas = np.array([r.delta for r in report.rows])
    if len(lams) >= 2:
        slope, icept = np.polyfit(lams, deltas, 1)
        report.slope = float(slope)
        report.affine_residual = float(np.max(np.abs(deltas - (slope * np.array(lams) + icept))))
    if report.regime == SAME_FIRST_TIER:
        q2 = [r.Q_two_tier for r in report.rows]
        if np.any(np.diff(deltas) > MONOTONE_SLACK):
            raise OracleDisagreementError(f"delta not nonincreasing in lambda: {deltas.tolist()}")
        if np.any(np.diff(q2) < -MONOTONE_SLACK):
            raise OracleDisagreementError(f"two-tier consumption falls with lambda: {q2}")
    return report


def bunching_mass(env: MarketEnv, p2: float, p3: float, qbar: float) -> float:
    """Share of marginal-price perceivers who buy exactly qbar.

    Type theta bunches iff p2 <= theta + h'(qbar) <= p3.
    """
    slope = env.prefs.slope(qbar)
    return min(1.0, max(0.0, env.cdf(p3 - slope) - env.cdf(p2 - slope)))


def bunching_mass_by_types(
    env: MarketEnv, scheme: TwoTier, kernel: PerceptionKernel = Dirac0(), tol: float = 1e-12
) -> float:
    """Share of types whose best response is exactly the threshold.

    Locates the ends of the bunching interval by bisection on theta using
    best responses only, so it does not rely on the cutoff formula.
    """
    qbar = scheme.qbar

    def q_of(theta):
        return best_response(env.prefs, kernel, scheme, theta, q_max=env.q_cap, check_monotone=False)

    def first_type(pred):
        # smallest theta in [theta0, theta1] with pred(q_of(theta)), by bisection
        lo, hi = env.theta0, env.theta1
        if pred(q_of(lo)):
            return lo
        if not pred(q_of(hi)):
            return math.inf
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if pred(q_of(mid)):
                hi = mid
            else:
                lo = mid
        return hi

    start = first_type(lambda q: q >= qbar)
    if not math.isfinite(start):
        return 0.0
    end = first_type(lambda q: q > qbar)
    end = min(end, env.theta1)
    return max(0.0, env.cdf(end) - env.cdf(start))


def demand_closed_form(env: MarketEnv, scheme: PriceScheme, theta: float, kernel: PerceptionKernel) -> float:
    """Best response of a type under Flat or TwoTier, solved by hand.

    Needs quadratic h and a Dirac0 or Uniform kernel. Above the threshold an
    average-price perceiver solves h2 q^2 - (theta + h1 - p3) q - (p3 - p2) qbar = 0.
    """
    if not env.prefs.is_quadratic:
        raise DomainError("closed-form demand needs quadratic h")
    if not isinstance(kernel, (Dirac0, Uniform)):
        raise DomainError("closed-form demand needs a Dirac0 or Uniform kernel")
    h1, h2 = env.h1, env.h2
    v = theta + h1
    if isinstance(scheme, Flat):
        return max(0.0, (v - scheme.p1) / h2)
    if not isinstance(scheme, TwoTier):
        raise DomainError("closed-form demand covers Flat and TwoTier only")
    p2, p3, qbar = scheme.p2, scheme.p3, scheme.qbar
    below = (v - p2) / h2
    if below <= 0.0:
        return 0.0
    if below < qbar:
        return below
    if isinstance(kernel, Dirac0):
        above = (v - p3) / h2
        return max(above, qbar)
    b = v - p3
    return (b + math.sqrt(b * b + 4 * h2 * (p3 - p2) * qbar)) / (2 * h2)


def aggregate_consumption_closed_form(env: MarketEnv, scheme: PriceScheme, lam: float, tol: float = 1e-12) -> float:
    """Aggregate consumption from the hand-solved demands, uniform types."""
    if env.type_dist is not None:
        raise DomainError("closed-form aggregation assumes uniform types")
    v_cuts = []
    if isinstance(scheme, TwoTier):
        v_cuts = [scheme.p2, scheme.p2 + env.h2 * scheme.qbar, scheme.p3 + env.h2 * scheme.qbar]
    elif isinstance(scheme, Flat):
        v_cuts = [scheme.p1]
    cuts = [c - env.h1 for c in v_cuts]
    total = 0.0
    for weight, kernel in ((1.0 - lam, Dirac0()), (lam, Uniform())):
        if weight == 0.0:
            continue
        part = adaptive_simpson(
            lambda t, k=kernel: demand_closed_form(env, scheme, t, k) * env.pdf(t),
            env.theta0,
            env.theta1,
            tol=tol,
            breakpoints=cuts,
        )
        total += weight * part
    return total
