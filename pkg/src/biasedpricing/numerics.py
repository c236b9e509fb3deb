"""Quadrature and root bracketing used by the economic modules.

Adaptive Simpson is used instead of a black-box integrator because every
integrand here is piecewise smooth with known kink locations: the caller
passes them as ``breakpoints`` and each smooth panel is integrated
separately. On polynomial pieces of degree <= 3 the rule is exact.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Iterable

from .errors import PricingError

__all__ = ["adaptive_simpson", "bisect_decreasing", "central_difference", "panels"]


def panels(a: float, b: float, breakpoints: Iterable[float] = ()) -> list[tuple[float, float]]:
    """Split [a, b] at the breakpoints that fall strictly inside it."""
    cuts = sorted({x for x in breakpoints if a < x < b})
    edges = [a, *cuts, b]
    return [(lo, hi) for lo, hi in zip(edges[:-1], edges[1:]) if hi > lo]


def _simpson_panel(f, a, b, tol, max_depth):
    fa, fb = f(a), f(b)
    m = 0.5 * (a + b)
    fm = f(m)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    total = 0.0
    # explicit stack: (a, b, fa, fm, fb, whole, tol, depth)
    stack = [(a, b, fa, fm, fb, whole, tol, 0)]
    while stack:
        a, b, fa, fm, fb, whole, tol, depth = stack.pop()
        m = 0.5 * (a + b)
        lm = 0.5 * (a + m)
        rm = 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
        right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
        delta = left + right - whole
        if abs(delta) <= 15.0 * tol or depth >= max_depth or m <= a or b <= m:
            total += left + right + delta / 15.0
        else:
            stack.append((m, b, fm, frm, fb, right, 0.5 * tol, depth + 1))
            stack.append((a, m, fa, flm, fm, left, 0.5 * tol, depth + 1))
    return total


def adaptive_simpson(
    f: Callable[[float], float],
    a: float,
    b: float,
    tol: float = 1e-10,
    breakpoints: Iterable[float] = (),
    max_depth: int = 40,
) -> float:
    """Integrate ``f`` over [a, b] with adaptive Simpson on smooth panels.

    Args:
        f: integrand, evaluated only inside the panels it is integrated on.
        a, b: integration limits; ``b < a`` flips the sign.
        tol: absolute error target for the whole interval, shared among
            panels in proportion to their length.
        breakpoints: locations of kinks or jumps of ``f``.
        max_depth: recursion cap per panel.
    """
    if b == a:
        return 0.0
    if b < a:
        return -adaptive_simpson(f, b, a, tol, breakpoints, max_depth)
    width = b - a
    return math.fsum(
        _simpson_panel(f, lo, hi, tol * (hi - lo) / width, max_depth)
        for lo, hi in panels(a, b, breakpoints)
    )


def bisect_decreasing(
    g: Callable[[float], float],
    lo: float,
    hi: float,
    xtol: float = 1e-14,
    maxiter: int = 200,
) -> float:
    """Smallest x in [lo, hi] with g(x) <= 0 for nonincreasing g.

    Requires g(lo) > 0 >= g(hi). Jumps are allowed: at a downward jump
    through zero the jump location is returned.
    """
    if not g(lo) > 0.0:
        raise PricingError("bisection bracket: g(lo) must be positive")
    if not g(hi) <= 0.0:
        raise PricingError("bisection bracket: g(hi) must be nonpositive")
    for _ in range(maxiter):
        if hi - lo <= xtol * (1.0 + abs(hi)):
            break
        mid = 0.5 * (lo + hi)
        if g(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return hi


def central_difference(f: Callable[[float], float], x: float, rel: float = 1e-5, floor: float = 1e-8) -> float:
    """Central difference with a step scaled to |x| (relative ``rel``, at least ``floor``)."""
    h = max(rel * abs(x), floor)
    return (f(x + h) - f(x - h)) / (2.0 * h)
