"""Consumer side: u(q, theta) = q*theta + h(q), best responses and dynamics."""

from __future__ import annotations

import csv
import io
from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConvergenceFailure, DomainError, NonmonotoneCutoffError, UnboundedDemandError
from .numerics import bisect_decreasing
from .perception import PerceptionKernel, effective_kinks, perceived_marginal
from .tariffs import PriceScheme

__all__ = [
    "Preferences",
    "marginal_utility",
    "best_response",
    "simulate_dynamics",
    "Trajectory",
    "DEFAULT_Q_MAX",
]

DEFAULT_Q_MAX = 1e6
MONOTONE_TOL = 1e-12


@dataclass(frozen=True)
class Preferences:
    """Concave part h of the utility.

    By default h(q) = h1*q - (h2/2)*q^2. Passing ``h`` and ``dh`` (and
    optionally ``d2h``) installs a general strictly concave h with h(0)=0
    instead; it is sanity-checked on a grid.
    """

    h1: float = 0.0
    h2: float = 1.0
    h: Optional[Callable[[float], float]] = None
    dh: Optional[Callable[[float], float]] = None
    d2h: Optional[Callable[[float], float]] = None

    def __post_init__(self):
        if self.h is None:
            if self.h1 < 0.0 or self.h2 < 0.0:
                raise DomainError(f"need h1 >= 0 and h2 >= 0, got h1={self.h1}, h2={self.h2}")
            return
        if self.dh is None:
            raise DomainError("a general h needs its derivative dh")
        if abs(self.h(0.0)) > 1e-12:
            raise DomainError("h(0) must be 0")
        grid = np.linspace(0.0, 10.0, 257)
        slopes = np.array([self.dh(x) for x in grid])
        if np.any(np.diff(slopes) >= 0.0):
            raise DomainError("h must be strictly concave (dh strictly decreasing)")

    @property
    def is_quadratic(self) -> bool:
        return self.h is None

    def value(self, q: float) -> float:
        if self.h is None:
            return self.h1 * q - 0.5 * self.h2 * q * q
        return self.h(q)

    def slope(self, q: float) -> float:
        if self.dh is None:
            return self.h1 - self.h2 * q
        return self.dh(q)

    def curvature(self, q: float) -> float:
        if self.h is None:
            return -self.h2
        if self.d2h is not None:
            return self.d2h(q)
        step = max(1e-5 * abs(q), 1e-6)
        lo = max(q - step, 0.0)
        return (self.dh(q + step) - self.dh(lo)) / (q + step - lo)


def marginal_utility(prefs: Preferences, q: float, theta: float) -> float:
    """u_q(q, theta) = theta + h'(q)."""
    if q < 0.0:
        raise DomainError(f"quantity must be nonnegative, got {q}")
    return theta + prefs.slope(q)


def _drift(prefs, kernel, scheme):
    def drift(q, theta):
        return theta + prefs.slope(q) - perceived_marginal(kernel, scheme, q)

    return drift


def _check_monotone(prefs, kernel, scheme, q_hi, n=257):
    grid = np.linspace(0.0, q_hi, n)
    cut = np.array([perceived_marginal(kernel, scheme, q) - prefs.slope(q) for q in grid])
    drops = np.diff(cut)
    scale = 1.0 + np.max(np.abs(cut))
    if np.any(drops < -MONOTONE_TOL * scale):
        i = int(np.argmin(drops))
        raise NonmonotoneCutoffError(
            f"perceived price minus h' decreases between q={grid[i]:.6g} and q={grid[i + 1]:.6g}"
        )


def _bracket(drift, theta, q_max):
    hi = 1.0
    while drift(hi, theta) > 0.0:
        hi *= 2.0
        if hi > q_max:
            raise UnboundedDemandError(f"marginal utility exceeds perceived price up to q_max={q_max:g}")
    return hi


def best_response(
    prefs: Preferences,
    kernel: PerceptionKernel,
    scheme: PriceScheme,
    theta: float,
    q_max: float = DEFAULT_Q_MAX,
    check_monotone: bool = True,
) -> float:
    """Stable steady-state consumption of a type-theta consumer.

    Returns 0 when u_q(0, theta) <= P~'(0). Otherwise returns the smallest
    q where the drift u_q - P~' turns nonpositive, located by bisection; at
    a kink where the perceived price jumps past marginal utility this is
    the kink itself (bunching).

    Raises:
        NonmonotoneCutoffError: P~'(q) - h'(q) decreases on the bracket.
        UnboundedDemandError: no bracket below ``q_max``.
    """
    drift = _drift(prefs, kernel, scheme)
    if drift(0.0, theta) <= 0.0:
        return 0.0
    hi = _bracket(drift, theta, q_max)
    if check_monotone:
        _check_monotone(prefs, kernel, scheme, hi)
    q = bisect_decreasing(lambda x: drift(x, theta), 0.0, hi)
    # snap onto a kink the bisection converged to
    for k in effective_kinks(kernel, scheme, hi):
        if abs(q - k) <= 1e-12 * (1.0 + k):
            return k
    return q


@dataclass
class Trajectory:
    """Explicit-Euler path of the consumption adjustment."""

    q: list[float] = field(default_factory=list)
    drift: list[float] = field(default_factory=list)
    converged: bool = False

    @property
    def terminal(self) -> float:
        return self.q[-1]

    def to_csv(self, fh=None) -> str:
        out = fh or io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["step", "q", "drift"])
        for i, (q, d) in enumerate(zip(self.q, self.drift)):
            w.writerow([i, f"{q:.9g}", f"{d:.9g}"])
        return out.getvalue() if fh is None else ""


def simulate_dynamics(
    prefs: Preferences,
    kernel: PerceptionKernel,
    scheme: PriceScheme,
    theta: float,
    q0: float,
    gain: float = 1.0,
    step: float = 0.1,
    max_steps: int = 100_000,
    tol: float = 1e-10,
) -> Trajectory:
    """Iterate q <- max(0, q + step*gain*(u_q(q) - P~'(q))) from q0.

    Stops once |dq| < tol. Raises ``ConvergenceFailure`` (carrying the
    trajectory) when ``max_steps`` is reached first.
    """
    if q0 <= 0.0:
        raise DomainError(f"initial consumption must be positive, got {q0}")
    if gain <= 0.0 or step <= 0.0:
        raise DomainError("gain and step must be positive")
    drift = _drift(prefs, kernel, scheme)
    traj = Trajectory()
    q = float(q0)
    rate = step * gain
    for _ in range(max_steps):
        d = drift(q, theta)
        traj.q.append(q)
        traj.drift.append(d)
        q_next = max(0.0, q + rate * d)
        if abs(q_next - q) < tol:
            traj.q.append(q_next)
            traj.drift.append(drift(q_next, theta))
            traj.converged = True
            return traj
        q = q_next
    raise ConvergenceFailure(
        f"no steady state within {max_steps} steps (last q={q:.9g}, drift={traj.drift[-1]:.3g})", traj
    )
