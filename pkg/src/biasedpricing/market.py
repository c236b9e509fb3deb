"""Population layer: type distribution, cutoff types and the expected functionals.

Types theta are uniform on [theta0, theta1] unless ``type_dist`` supplies an
object with ``cdf``/``pdf`` (e.g. a frozen scipy distribution); only the
quadrature routes honour it. For a scheme P the cutoff type

    theta_P(q) = P~'(q) - h'(q)

is the valuation indifferent about consuming beyond q, so F(theta_P(q)) is
the CDF of quantities. Profit and welfare are integrated in quantity space
(the Wilson transform); aggregate consumption and the cross-check routes
integrate best responses over types instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Any, Optional

import numpy as np

from .consumer import Preferences, best_response
from .errors import ConfigError, DomainError, NonmonotoneCutoffError, PricingError, UnboundedDomainError
from .numerics import adaptive_simpson, bisect_decreasing
from .perception import (
    Dirac0,
    PerceptionKernel,
    Uniform,
    effective_kinks,
    kernel_from_config,
    kernel_to_config,
    mean_fraction,
    perceived_marginal,
)
from .tariffs import PriceScheme, Quadratic

__all__ = [
    "MarketEnv",
    "CutoffMap",
    "cutoff_type",
    "max_quantity",
    "expected_profit",
    "expected_welfare",
    "consumer_surplus",
    "aggregate_consumption",
    "expected_profit_type_space",
    "expected_welfare_type_space",
    "env_to_config",
    "env_from_config",
]

MODES = ("perceived", "rational", "average")
PROFIT_TOL = 1e-10
CONSUMPTION_TOL = 1e-8
GRID_POINTS = 1024


@dataclass(frozen=True)
class MarketEnv:
    """Preferences, cost C(q) = c1 q + (c2/2) q^2, type range and perception kernel."""

    theta0: float = 0.0
    theta1: float = 1.0
    prefs: Preferences = field(default_factory=Preferences)
    c1: float = 0.0
    c2: float = 0.0
    kernel: PerceptionKernel = field(default_factory=Dirac0)
    type_dist: Optional[Any] = None

    def __post_init__(self):
        if not (0.0 <= self.theta0 < self.theta1):
            raise DomainError(f"need 0 <= theta0 < theta1, got [{self.theta0}, {self.theta1}]")
        if self.c1 < 0.0 or self.c2 < 0.0:
            raise DomainError(f"need c1 >= 0 and c2 >= 0, got c1={self.c1}, c2={self.c2}")
        if self.prefs.is_quadratic and self.c2 + self.prefs.h2 <= 0.0:
            raise DomainError("need c2 + h2 > 0")

    @classmethod
    def quadratic(cls, theta0=0.0, theta1=1.0, h1=0.0, h2=1.0, c1=0.0, c2=0.0, kernel=None):
        return cls(theta0, theta1, Preferences(h1, h2), c1, c2, kernel if kernel is not None else Dirac0())

    def with_kernel(self, kernel: PerceptionKernel) -> "MarketEnv":
        return MarketEnv(self.theta0, self.theta1, self.prefs, self.c1, self.c2, kernel, self.type_dist)

    @property
    def h1(self) -> float:
        return self.prefs.h1

    @property
    def h2(self) -> float:
        return self.prefs.h2

    @cached_property
    def a1(self) -> float:
        return mean_fraction(self.kernel)

    @property
    def width(self) -> float:
        return self.theta1 - self.theta0

    @property
    def top(self) -> float:
        """theta1 + h1 - c1, the surplus scale of the top type."""
        return self.theta1 + self.h1 - self.c1

    def hypothesis_failures(self, max_a1: float) -> list[str]:
        """Closed-form hypotheses that fail, as printable inequalities."""
        failed = []
        if not self.prefs.is_quadratic:
            failed.append("h quadratic")
        if self.type_dist is not None:
            failed.append("uniform types")
        if min(self.h1, self.h2, self.c1, self.c2) < 0.0:
            failed.append("h1, h2, c1, c2 >= 0")
        if not self.c2 + self.h2 > 0.0:
            failed.append("c2 + h2 > 0")
        if not self.top > 0.0:
            failed.append("theta1 + h1 - c1 > 0")
        if not self.a1 < max_a1:
            failed.append("a1 < 2/3" if max_a1 == 2.0 / 3.0 else "a1 < 1")
        return failed

    @property
    def profit_optimum_valid(self) -> bool:
        """Hypotheses of the optimal quadratic tariff result (a1 < 2/3)."""
        return not self.hypothesis_failures(2.0 / 3.0)

    @property
    def welfare_optimum_valid(self) -> bool:
        """Hypotheses of the welfare-maximizing quadratic tariff result (a1 < 1)."""
        return not self.hypothesis_failures(1.0)

    @property
    def q_cap(self) -> float:
        """Search cap for q*_P; beyond it q*_P is reported as infinite."""
        h2 = self.h2 if self.prefs.is_quadratic else 0.0
        return 10.0 * (self.theta1 + self.h1 + 1.0) / max(1e-9, self.c2 + h2)

    # type distribution
    def cdf(self, theta: float) -> float:
        if self.type_dist is not None:
            return float(self.type_dist.cdf(theta))
        if theta <= self.theta0:
            return 0.0
        if theta >= self.theta1:
            return 1.0
        return (theta - self.theta0) / self.width

    def pdf(self, theta: float) -> float:
        if self.type_dist is not None:
            return float(self.type_dist.pdf(theta))
        return 1.0 / self.width if self.theta0 <= theta <= self.theta1 else 0.0

    def cost(self, q: float) -> float:
        return self.c1 * q + 0.5 * self.c2 * q * q

    def marginal_cost(self, q: float) -> float:
        return self.c1 + self.c2 * q


def _mode_kernel(env: MarketEnv, mode: str) -> PerceptionKernel:
    if mode == "perceived":
        return env.kernel
    if mode == "rational":
        return Dirac0()
    if mode == "average":
        return Uniform()
    raise DomainError(f"mode must be one of {MODES}, got {mode!r}")


class CutoffMap:
    """q -> theta_P(q) for one scheme and perception mode, with cached q*_P.

    Monotonicity is verified on a 1024-point grid over [0, q*_P] the first
    time q*_P is requested.
    """

    def __init__(self, env: MarketEnv, scheme: PriceScheme, mode: str = "perceived"):
        self.env = env
        self.scheme = scheme
        self.mode = mode
        self.kernel = _mode_kernel(env, mode)

    def __call__(self, q: float, side: str = "right") -> float:
        return perceived_marginal(self.kernel, self.scheme, q, side) - self.env.prefs.slope(q)

    def kinks(self, q_hi: float) -> list[float]:
        return effective_kinks(self.kernel, self.scheme, q_hi)

    def _verify_monotone(self, q_hi: float) -> None:
        if q_hi <= 0.0:
            return
        grid = np.linspace(0.0, q_hi, GRID_POINTS)
        vals = np.array([self(q) for q in grid])
        drops = np.diff(vals)
        if np.any(drops < -1e-12 * (1.0 + np.max(np.abs(vals)))):
            i = int(np.argmin(drops))
            raise NonmonotoneCutoffError(
                f"cutoff type decreases between q={grid[i]:.6g} and q={grid[i + 1]:.6g} ({self.mode} mode)"
            )

    @cached_property
    def q_star(self) -> float:
        """Smallest q with theta_P(q) >= theta1, or ``math.inf`` past the cap."""
        theta1 = self.env.theta1
        if self(0.0) >= theta1:
            return 0.0
        cap = self.env.q_cap
        coarse = np.linspace(0.0, cap, GRID_POINTS)
        hit = next((q for q in coarse[1:] if self(q) >= theta1), None)
        if hit is None:
            self._verify_monotone(cap)
            return math.inf
        self._verify_monotone(hit)
        q = bisect_decreasing(lambda x: theta1 - self(x), 0.0, hit)
        for k in self.kinks(hit):
            if abs(q - k) <= 1e-12 * (1.0 + k):
                return k
        return q

    def crossing(self, level: float) -> float:
        """Smallest q in [0, q*_P] with theta_P(q) >= level (0 if already there)."""
        if self(0.0) >= level:
            return 0.0
        return bisect_decreasing(lambda x: level - self(x), 0.0, self.q_star)

    def has_jumps(self) -> bool:
        q_hi = self.q_star if math.isfinite(self.q_star) else self.env.q_cap
        return any(abs(self(k) - self(k, "left")) > 1e-12 for k in self.kinks(q_hi))


def cutoff_type(env: MarketEnv, scheme: PriceScheme, q: float, mode: str = "perceived") -> float:
    """theta_P(q) (perceived), P'(q) - h'(q) (rational) or P(q)/q - h'(q) (average)."""
    if q < 0.0:
        raise DomainError(f"quantity must be nonnegative, got {q}")
    return CutoffMap(env, scheme, mode)(q)


def max_quantity(env: MarketEnv, scheme: PriceScheme, mode: str = "perceived") -> float:
    return CutoffMap(env, scheme, mode).q_star


# ---------------------------------------------------------------------------
# exact route for quadratic schemes, quadratic h and uniform types


def _quadratic_exact_applies(env: MarketEnv, scheme: PriceScheme) -> bool:
    return isinstance(scheme, Quadratic) and env.prefs.is_quadratic and env.type_dist is None


def _quadratic_cutoff(env: MarketEnv, scheme: Quadratic) -> tuple[float, float, float]:
    """Slope, intercept and q* of the (linear) cutoff of a quadratic scheme."""
    slope = (1.0 - env.a1) * scheme.A + env.h2
    icept = scheme.B - env.h1
    if icept >= env.theta1:
        return slope, icept, 0.0
    if slope < 0.0:
        raise NonmonotoneCutoffError(f"cutoff slope (1-a1)A + h2 = {slope:.6g} is negative")
    if slope == 0.0:
        raise UnboundedDomainError("cutoff is flat below theta1; q* is infinite")
    return slope, icept, (env.theta1 - icept) / slope


def _linear_times_survival(env: MarketEnv, alpha: float, beta: float, slope: float, icept: float, q_star: float) -> float:
    """Exact integral of (alpha q + beta)(1 - F(icept + slope q)) over [0, q*], F uniform."""
    if q_star == 0.0:
        return 0.0
    q_low = min(max((env.theta0 - icept) / slope, 0.0), q_star)
    # on [0, q_low] all types are above the cutoff: survival is 1
    low = alpha * q_low**2 / 2.0 + beta * q_low
    # on [q_low, q*]: (alpha q + beta)(theta1 - icept - slope q)/width
    t = env.theta1 - icept

    def antideriv(q):
        return beta * t * q + (alpha * t - beta * slope) * q**2 / 2.0 - alpha * slope * q**3 / 3.0

    return low + (antideriv(q_star) - antideriv(q_low)) / env.width


def _quadratic_profit(env: MarketEnv, scheme: Quadratic) -> float:
    slope, icept, q_star = _quadratic_cutoff(env, scheme)
    return _linear_times_survival(env, scheme.A - env.c2, scheme.B - env.c1, slope, icept, q_star)


def _quadratic_welfare(env: MarketEnv, scheme: Quadratic) -> float:
    slope, icept, q_star = _quadratic_cutoff(env, scheme)
    alpha = 2.0 * (1.0 - env.a1) * scheme.A + env.h2 - env.c2
    return _linear_times_survival(env, alpha, scheme.B - env.c1, slope, icept, q_star)


# ---------------------------------------------------------------------------
# quadrature routes


def _quantity_panels(cmap: CutoffMap) -> tuple[float, list[float]]:
    q_star = cmap.q_star
    if not math.isfinite(q_star):
        raise UnboundedDomainError("q*_P is infinite; the quantity-space integral has no finite domain")
    cuts = list(cmap.kinks(q_star))
    cut_low = cmap.crossing(cmap.env.theta0) if cmap(0.0) < cmap.env.theta0 else 0.0
    cuts.append(cut_low)
    return q_star, cuts


def _survival(env: MarketEnv, theta: float) -> float:
    return 1.0 - env.cdf(theta)


def _profit_quadrature(env: MarketEnv, scheme: PriceScheme, tol: float) -> float:
    cmap = CutoffMap(env, scheme)
    q_star, cuts = _quantity_panels(cmap)

    def integrand(q):
        return (scheme.marginal(q) - env.marginal_cost(q)) * _survival(env, cmap(q))

    return adaptive_simpson(integrand, 0.0, q_star, tol=tol, breakpoints=cuts)


def _welfare_quadrature(env: MarketEnv, scheme: PriceScheme, tol: float) -> float:
    cmap = CutoffMap(env, scheme)
    q_star, cuts = _quantity_panels(cmap)
    kernel = cmap.kernel
    edges = sorted({0.0, q_star, *(c for c in cuts if 0.0 < c < q_star)})
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        # one-sided differences at panel ends keep the slope of P~' inside the panel
        step = 1e-6 * (hi - lo)

        def dperc(q, lo=lo, hi=hi, step=step):
            a, b = max(q - step, lo), min(q + step, hi)
            return (perceived_marginal(kernel, scheme, b) - perceived_marginal(kernel, scheme, a)) / (b - a)

        def integrand(q, dperc=dperc):
            inner = (dperc(q) - env.prefs.curvature(q)) * q + perceived_marginal(kernel, scheme, q) - env.marginal_cost(q)
            return inner * _survival(env, cmap(q))

        total += adaptive_simpson(integrand, lo, hi, tol=tol * (hi - lo) / q_star)
    return total


@lru_cache(maxsize=4096)
def _type_integral(env: MarketEnv, scheme: PriceScheme, kernel: PerceptionKernel, what: str, tol: float) -> float:
    """Integrate a per-type quantity over theta with per-type best responses.

    ``what`` selects the integrand: "q" (consumption), "profit" (P - C)
    or "welfare" (theta q + h(q) - C). Plateaus where types bunch at a kink
    are integrated in closed form.
    """
    prefs = env.prefs
    cap = env.q_cap
    cmap = CutoffMap(env.with_kernel(kernel), scheme)
    q_hi = cmap.q_star if math.isfinite(cmap.q_star) else cap

    def q_of(theta):
        return best_response(prefs, kernel, scheme, theta, q_max=cap, check_monotone=False)

    if what == "q":
        g = lambda theta, q: q  # noqa: E731
    elif what == "profit":
        g = lambda theta, q: scheme.price(q) - env.cost(q)  # noqa: E731
    else:
        g = lambda theta, q: theta * q + prefs.value(q) - env.cost(q)  # noqa: E731

    lo, hi = env.theta0, env.theta1
    cuts = {cmap(0.0)}
    plateaus = []
    for k in cmap.kinks(q_hi):
        left, right = cmap(k, "left"), cmap(k)
        cuts.update((left, right))
        if right > left:
            plateaus.append((left, right, k))
    edges = sorted({lo, hi, *(c for c in cuts if lo < c < hi)})
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        mid = 0.5 * (a + b)
        plateau = next((k for (pl, pr, k) in plateaus if pl <= a and b <= pr), None)
        if plateau is not None:
            # every type in (a, b) buys exactly the kink quantity
            total += adaptive_simpson(lambda t: g(t, plateau) * env.pdf(t), a, b, tol=tol * (b - a))
            continue
        if mid <= cmap(0.0):
            continue  # nobody in this panel consumes
        total += adaptive_simpson(lambda t: g(t, q_of(t)) * env.pdf(t), a, b, tol=tol * (b - a) / (hi - lo))
    return total


def _check_method(method: str) -> None:
    if method not in ("auto", "closed_form", "quadrature"):
        raise DomainError(f"method must be auto, closed_form or quadrature, got {method!r}")


def expected_profit(env: MarketEnv, scheme: PriceScheme, method: str = "auto", tol: float = PROFIT_TOL) -> float:
    """Integral of (P'(q) - C'(q)) (1 - F(theta_P(q))) over [0, q*_P].

    ``method="auto"`` uses the exact polynomial antiderivative for quadratic
    schemes (quadratic h, uniform types) and adaptive Simpson otherwise.
    """
    _check_method(method)
    if method != "quadrature" and _quadratic_exact_applies(env, scheme):
        return _quadratic_profit(env, scheme)
    if method == "closed_form":
        raise DomainError("closed form needs a quadratic scheme, quadratic h and uniform types")
    return _profit_quadrature(env, scheme, tol)


def expected_welfare(env: MarketEnv, scheme: PriceScheme, method: str = "auto", tol: float = PROFIT_TOL) -> float:
    """Expected total surplus E[theta q + h(q) - C(q)].

    Integrated in quantity space as
    [(dP~'/dq - h'') q + P~' - C'] (1 - F(theta_P)); exact for quadratic
    schemes. That form relies on a continuous cutoff map, so when the
    perceived price jumps (bunching at a kink) the type-space route is used.
    """
    _check_method(method)
    if method != "quadrature" and _quadratic_exact_applies(env, scheme):
        return _quadratic_welfare(env, scheme)
    if method == "closed_form":
        raise DomainError("closed form needs a quadratic scheme, quadratic h and uniform types")
    cmap = CutoffMap(env, scheme)
    if cmap.has_jumps():
        return expected_welfare_type_space(env, scheme)
    return _welfare_quadrature(env, scheme, tol)


def consumer_surplus(env: MarketEnv, scheme: PriceScheme, method: str = "auto") -> float:
    """W - pi."""
    return expected_welfare(env, scheme, method) - expected_profit(env, scheme, method)


def expected_profit_type_space(env: MarketEnv, scheme: PriceScheme, tol: float = 1e-11) -> float:
    """E[P(q(theta)) - C(q(theta))] integrated over types; cross-check route."""
    return _type_integral(env, scheme, env.kernel, "profit", tol)


def expected_welfare_type_space(env: MarketEnv, scheme: PriceScheme, tol: float = 1e-11) -> float:
    """E[theta q + h(q) - C(q)] integrated over types; cross-check route."""
    return _type_integral(env, scheme, env.kernel, "welfare", tol)


def aggregate_consumption(env: MarketEnv, scheme: PriceScheme, lam: float, tol: float = CONSUMPTION_TOL) -> float:
    """Q(P) = (1 - lam) E[q_rational] + lam E[q_average].

    ``lam`` is the fraction of average-price perceivers; the remainder
    respond to the true marginal price. The env's own kernel is ignored.
    """
    if not 0.0 <= lam <= 1.0:
        raise DomainError(f"lambda must lie in [0, 1], got {lam}")
    total = 0.0
    if lam < 1.0:
        total += (1.0 - lam) * _type_integral(env, scheme, Dirac0(), "q", tol)
    if lam > 0.0:
        total += lam * _type_integral(env, scheme, Uniform(), "q", tol)
    return total


# ---------------------------------------------------------------------------
# configuration

_ENV_FIELDS = ("theta0", "theta1", "h1", "h2", "c1", "c2")


def env_to_config(env: MarketEnv) -> dict:
    if not env.prefs.is_quadratic or env.type_dist is not None:
        raise ConfigError("only quadratic-h, uniform-type environments serialize", "env")
    return {
        "theta0": env.theta0,
        "theta1": env.theta1,
        "h1": env.h1,
        "h2": env.h2,
        "c1": env.c1,
        "c2": env.c2,
        "kernel": kernel_to_config(env.kernel),
    }


def env_from_config(block: dict, where: str = "env") -> MarketEnv:
    if not isinstance(block, dict):
        raise ConfigError("expected an object", where)
    extra = set(block) - set(_ENV_FIELDS) - {"kernel"}
    if extra:
        raise ConfigError(f"unexpected fields {sorted(extra)}", where)
    values = {}
    for name in _ENV_FIELDS:
        raw = block.get(name, {"theta0": 0.0, "theta1": 1.0, "h1": 0.0, "h2": 1.0, "c1": 0.0, "c2": 0.0}[name])
        if isinstance(raw, bool) or not isinstance(raw, (int, float)):
            raise ConfigError(f"expected a number, got {raw!r}", f"{where}.{name}")
        values[name] = float(raw)
    kernel = kernel_from_config(block.get("kernel", {"kind": "dirac0"}), f"{where}.kernel")
    try:
        return MarketEnv.quadratic(kernel=kernel, **values)
    except PricingError as exc:
        raise ConfigError(str(exc), where) from exc
