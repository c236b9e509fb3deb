"""How the optimal quadratic tariff's outcomes move with the bias a1.

With p = c2/h2 and S = (theta1 + h1 - c1)^3 / (6 (theta1 - theta0) h2), the
profit-optimal quadratic tariff yields welfare S*F(a1, p), consumer surplus
S*H(a1, p) and an efficiency cost S*G(a1, p), where G = 1/(p+1) - F. This
module evaluates those shape functions, their derivatives (closed form and
finite difference, which must agree) and the sign regions for each outcome.
"""

from __future__ import annotations

import csv
import io
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .errors import DomainError, HypothesisError, OracleDisagreementError
from .market import MarketEnv, consumer_surplus, expected_profit, expected_welfare
from .perception import MixDirac
from .quadratic_optimum import exact_at_bottom, optimal_profit_scheme
from .tariffs import Quadratic

__all__ = [
    "StaticsPoint",
    "shape_functions",
    "welfare_shape",
    "efficiency_shape",
    "surplus_shape",
    "aux_polynomial",
    "welfare_shape_da",
    "surplus_shape_da",
    "efficiency_shape_dp",
    "fd_check",
    "efficiency_cost",
    "SignVerdict",
    "welfare_bias_derivative_sign",
    "profit_bias_derivative_sign",
    "surplus_bias_derivative_sign",
    "SweepRow",
    "sweep",
    "sweep_to_csv",
    "efficiency_grid_to_csv",
    "WELFARE_DECREASE_FROM",
]

FD_STEP = 1e-6
FD_RTOL = 1e-4
# above this a1 welfare falls with the bias: root of 9a^2 - a - 2 in (0, 2/3)
WELFARE_DECREASE_FROM = (1.0 + math.sqrt(73.0)) / 18.0
SURPLUS_P_LIMIT = 1.94
SURPLUS_DECREASE_FROM = 0.4


def _check_domain(a: float, p: float) -> None:
    if not 0.0 <= a < 2.0 / 3.0:
        raise DomainError(f"a1 must lie in [0, 2/3), got {a}")
    if p < 0.0:
        raise DomainError(f"p = c2/h2 must be nonnegative, got {p}")


def welfare_shape(a: float, p: float) -> float:
    """F(a, p): welfare at the profit optimum in units of S."""
    u = (1 - a) * p + 1
    return (1 - a) ** 2 / ((2 - 3 * a) ** 2 * u**2) * (3 * (1 - 2 * a) * u + (1 - a) * a * (p + 3))


def efficiency_shape(a: float, p: float) -> float:
    """G(a, p) = 1/(p+1) - F(a, p)."""
    return 1.0 / (p + 1) - welfare_shape(a, p)


def surplus_shape(a: float, p: float) -> float:
    """H(a, p): consumer surplus at the profit optimum in units of S."""
    u = (1 - a) * p + 1
    return (1 - a) ** 2 * ((1 - 3 * a) * u + a * (1 - a) * (p + 3)) / ((2 - 3 * a) ** 2 * u**2)


def aux_polynomial(a: float, p: float) -> float:
    """Numerator factor f(a, p) of dH/da; dH/da has the sign of -f."""
    return (
        (a**3 - 2 * a**2 + a) * p**2
        + (-5 * a**2 + 7 * a - 2) * p
        + 18 * a**3
        - 24 * a**2
        + 12 * a
        - 2
    )


def welfare_shape_da(a: float, p: float) -> float:
    num = (a - 1) * (
        (4 * a**3 - 10 * a**2 + 8 * a - 2) * p**2
        + (-9 * a**3 + 10 * a**2 + a - 2) * p
        + 18 * a**3
        - 15 * a**2
        + 3 * a
    )
    return num / ((3 * a - 2) ** 3 * (p * a - p - 1) ** 3)


def surplus_shape_da(a: float, p: float) -> float:
    return (a - 1) * aux_polynomial(a, p) / ((3 * a - 2) ** 3 * (p * a - p - 1) ** 3)


def efficiency_shape_dp(a: float, p: float) -> float:
    num = (
        (4 * a**5 - 16 * a**4 + 25 * a**3 - 19 * a**2 + 7 * a - 1) * p**3
        + (-4 * a**5 + 2 * a**4 + 18 * a**3 - 29 * a**2 + 16 * a - 3) * p**2
        + (7 * a**5 - 11 * a**4 + 9 * a**3 - 13 * a**2 + 11 * a - 3) * p
        + 6 * a**5
        - 17 * a**4
        + 12 * a**3
        - 3 * a**2
        + 2 * a
        - 1
    )
    return -num / ((3 * a - 2) ** 2 * (p + 1) ** 2 * ((a - 1) * p - 1) ** 3)


class StaticsPoint(NamedTuple):
    a1: float
    p: float
    F: float
    G: float
    H: float
    f_aux: float


def shape_functions(a1: float, p: float) -> StaticsPoint:
    """F, G, H and the auxiliary polynomial at (a1, p)."""
    _check_domain(a1, p)
    F = welfare_shape(a1, p)
    return StaticsPoint(a1, p, F, 1.0 / (p + 1) - F, surplus_shape(a1, p), aux_polynomial(a1, p))


def _central(fn, x: float, step: float = FD_STEP) -> float:
    return (fn(x + step) - fn(x - step)) / (2 * step)


def fd_check(closed: float, numeric: float, label: str, rtol: float = FD_RTOL) -> None:
    """Raise when a closed-form derivative and its finite difference disagree.

    The comparison is relative, with an absolute floor of ``rtol`` so that
    derivatives near zero are not held to an impossible standard.
    """
    if abs(closed - numeric) > rtol * max(1.0, abs(closed)):
        raise OracleDisagreementError(f"{label}: closed form {closed:.10g} vs finite difference {numeric:.10g}")


def _da(shape, closed, a: float, p: float, label: str) -> float:
    # one-sided at a = 0 so the stencil stays inside the domain
    if a < FD_STEP:
        numeric = (shape(a + 2 * FD_STEP, p) - shape(a, p)) / (2 * FD_STEP)
    else:
        numeric = _central(lambda x: shape(x, p), a)
    exact = closed(a, p)
    fd_check(exact, numeric, label)
    return exact


def efficiency_cost(env: MarketEnv) -> float:
    """Welfare lost under the profit-optimal quadratic tariff: S * G(a1, p)."""
    failed = env.hypothesis_failures(2.0 / 3.0)
    if failed:
        raise HypothesisError(failed[0])
    scale = env.top**3 / (6 * env.width * env.h2)
    return scale * efficiency_shape(env.a1, env.c2 / env.h2)


@dataclass(frozen=True)
class SignVerdict:
    """Sign of a comparative-statics derivative.

    ``sign`` is "+", "-", "0" or "undetermined"; ``source`` says whether it
    comes from a proven region ("region"), from the closed-form reduction
    ("closed_form") or only from evaluating the derivative ("numeric").
    """

    sign: str
    source: str
    derivative: float
    minimizer: Optional[float] = None


def _sign_of(x: float, tol: float = 1e-12) -> str:
    if x > tol:
        return "+"
    if x < -tol:
        return "-"
    return "0"


def welfare_bias_derivative_sign(a1: float, p: float) -> SignVerdict:
    """Sign of dW/da1 at the profit-optimal tariff.

    Welfare rises with the bias for 1/3 < a1 < 1/2 and falls for
    a1 > (1 + sqrt 73)/18; elsewhere no sign is claimed and "undetermined"
    is returned together with the derivative's value.

    Raises:
        OracleDisagreementError: closed-form and finite-difference
            derivatives differ, or a proven region's sign is contradicted.
    """
    _check_domain(a1, p)
    d = _da(welfare_shape, welfare_shape_da, a1, p, "dF/da1")
    if 1.0 / 3.0 < a1 < 0.5:
        claim = "+"
    elif a1 > WELFARE_DECREASE_FROM:
        claim = "-"
    else:
        return SignVerdict("undetermined", "numeric", d)
    if _sign_of(d, 0.0) != claim:
        raise OracleDisagreementError(f"dF/da1 = {d:.6g} at (a1, p) = ({a1}, {p}) contradicts sign {claim}")
    return SignVerdict(claim, "region", d)


def profit_bias_derivative_sign(a1: float, c2: float, h2: float) -> SignVerdict:
    """Sign of d(max profit)/da1, which is that of c2 (1 - a1) + h2 (3 a1 - 1).

    Profit rises with the bias exactly when the optimal quadratic tariff is
    convex. For h2 > c2 the minimum over a1 sits at (h2 - c2)/(3 h2 - c2),
    returned as ``minimizer``. The reduction is checked against a finite
    difference of log profit.
    """
    if not 0.0 <= a1 < 2.0 / 3.0:
        raise DomainError(f"a1 must lie in [0, 2/3), got {a1}")
    if c2 < 0.0 or h2 < 0.0 or not c2 + h2 > 0.0:
        raise DomainError("need c2, h2 >= 0 and c2 + h2 > 0")
    reduced = c2 * (1 - a1) + h2 * (3 * a1 - 1)

    def log_profit(a):
        return 2 * math.log(1 - a) - math.log(2 - 3 * a) - math.log((1 - a) * c2 + h2)

    dlog = _central(log_profit, a1) if a1 >= FD_STEP else (log_profit(a1 + 2 * FD_STEP) - log_profit(a1)) / (2 * FD_STEP)
    # d log pi / da1 = reduced / [(1 - a1)(2 - 3 a1)((1 - a1) c2 + h2)]
    exact = reduced / ((1 - a1) * (2 - 3 * a1) * ((1 - a1) * c2 + h2))
    fd_check(exact, dlog, "d log(profit)/da1")
    minimizer = (h2 - c2) / (3 * h2 - c2) if h2 > c2 else None
    scale = max(c2, h2)
    return SignVerdict(_sign_of(reduced, 1e-12 * scale), "closed_form", exact, minimizer)


def surplus_bias_derivative_sign(a1: float, p: float) -> SignVerdict:
    """Sign of dCS/da1 at the profit-optimal tariff.

    "+" on p <= 1.94 with a1 < max((1-p)/(3-p), (p-1)/(p+1)); "-" for
    a1 > 0.4; otherwise the sign of the evaluated derivative, tagged
    "numeric".
    """
    _check_domain(a1, p)
    d = _da(surplus_shape, surplus_shape_da, a1, p, "dH/da1")
    if p <= SURPLUS_P_LIMIT and a1 < max((1 - p) / (3 - p), (p - 1) / (p + 1)):
        claim = "+"
    elif a1 > SURPLUS_DECREASE_FROM:
        claim = "-"
    else:
        return SignVerdict(_sign_of(d), "numeric", d)
    if _sign_of(d, 0.0) != claim:
        raise OracleDisagreementError(f"dH/da1 = {d:.6g} at (a1, p) = ({a1}, {p}) contradicts sign {claim}")
    return SignVerdict(claim, "region", d)


class SweepRow(NamedTuple):
    a1: float
    p: float
    F: float
    G: float
    H: float
    profit: float
    welfare: float
    surplus: float
    efficiency_cost: float


SWEEP_COLUMNS = SweepRow._fields
CROSS_CHECKS = 5
CROSS_CHECK_TOL = 1e-9


def _point_env(template: MarketEnv, a1: float, p: float) -> MarketEnv:
    return MarketEnv.quadratic(
        theta0=template.theta0,
        theta1=template.theta1,
        h1=template.h1,
        h2=template.h2,
        c1=template.c1,
        c2=p * template.h2,
        kernel=MixDirac(a1),
    )


def _row(template: MarketEnv, a1: float, p: float) -> SweepRow:
    pt = shape_functions(a1, p)
    env = _point_env(template, a1, p)
    scale = env.top**3 / (6 * env.width * env.h2)
    profit = optimal_profit_scheme(env).value
    return SweepRow(a1, p, pt.F, pt.G, pt.H, profit, scale * pt.F, scale * pt.H, scale * pt.G)


def _cross_check(template: MarketEnv, row: SweepRow) -> None:
    """Recompute profit, welfare and surplus of the row by quadrature."""
    env = _point_env(template, row.a1, row.p)
    opt = optimal_profit_scheme(env)
    scheme = Quadratic(opt.A, opt.B)
    pairs = (
        ("profit", row.profit, expected_profit(env, scheme, method="quadrature")),
        ("welfare", row.welfare, expected_welfare(env, scheme, method="quadrature")),
        ("surplus", row.surplus, consumer_surplus(env, scheme, method="quadrature")),
    )
    for name, closed, quad in pairs:
        if abs(closed - quad) > CROSS_CHECK_TOL * max(1.0, abs(closed)):
            raise OracleDisagreementError(
                f"{name} at (a1, p) = ({row.a1}, {row.p}): shape formula {closed:.12g} vs quadrature {quad:.12g}"
            )


def sweep(
    template: MarketEnv,
    a1_grid: Iterable[float],
    p_grid: Iterable[float],
    seed: Optional[int] = 0,
    checks: int = CROSS_CHECKS,
) -> list[SweepRow]:
    """Tabulate shape functions and outcome levels over an (a1, p) grid.

    Each grid point uses the template's theta range, h and c1, with kernel
    MixDirac(a1) and c2 = p * h2. Up to ``checks`` rows, drawn with ``seed``,
    are recomputed by quadrature in the market module. Rows whose optimal
    cutoff starts below theta0 are not drawn: there the shape formulas
    describe the polynomial objective rather than the clipped functional.
    """
    a1s, ps = list(a1_grid), list(p_grid)
    rows = [_row(template, a, p) for a in a1s for p in ps]
    eligible = []
    for r in rows:
        env = _point_env(template, r.a1, r.p)
        if exact_at_bottom(env, optimal_profit_scheme(env).B):
            eligible.append(r)
    if eligible and checks > 0:
        rng = np.random.default_rng(seed)
        picks = rng.choice(len(eligible), size=min(checks, len(eligible)), replace=False)
        for i in sorted(picks):
            _cross_check(template, eligible[i])
    return rows


def _fmt(x: float) -> str:
    return f"{x:.9g}"


def sweep_to_csv(rows: Sequence[SweepRow], fh=None) -> str:
    out = fh or io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for r in rows:
        w.writerow([_fmt(x) for x in r])
    return out.getvalue() if fh is None else ""


def efficiency_grid_to_csv(rows: Sequence[SweepRow], fh=None) -> str:
    """(a1, p, G) triplets: the efficiency-cost surface."""
    out = fh or io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["a1", "p", "G"])
    for r in rows:
        w.writerow([_fmt(r.a1), _fmt(r.p), _fmt(r.G)])
    return out.getvalue() if fh is None else ""
