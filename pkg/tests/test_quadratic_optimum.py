import pytest

from biasedpricing.errors import DegenerateSchemeError, DomainError, HypothesisError, OracleDisagreementError
from biasedpricing.market import expected_profit, expected_welfare
from biasedpricing.quadratic_optimum import (
    default_search_box,
    numeric_quadratic_search,
    optimal_profit_scheme,
    optimal_welfare_scheme,
    profit_foc_residuals,
    profit_welfare_ratio,
    welfare_foc_residuals,
)
from biasedpricing.tariffs import Quadratic

from conftest import base_env
from oracle_values import PROFIT_HALF, PROFIT_RATIONAL, WELFARE_MAX


def test_profit_optimum_examples():
    o = optimal_profit_scheme(base_env(0.0))
    assert (o.A, o.B, o.q_star) == pytest.approx((0.0, 0.5, 0.5), abs=1e-15)
    assert o.value == pytest.approx(float(PROFIT_RATIONAL), abs=1e-15)
    o = optimal_profit_scheme(base_env(0.5))
    assert (o.A, o.B, o.q_star) == pytest.approx((4.0, 0.0, 1 / 3), abs=1e-15)
    assert o.value == pytest.approx(float(PROFIT_HALF), abs=1e-15)
    assert o.objective == "profit" and o.source == "closed_form"


@pytest.mark.parametrize("a1", [0.0, 0.2, 0.5, 0.6])
@pytest.mark.parametrize("c2", [0.0, 0.3, 1.0, 3.0])
def test_convex_exactly_above_cost_threshold(a1, c2):
    o = optimal_profit_scheme(base_env(a1, c2=c2))
    threshold = (1 - 3 * a1) / (1 - a1)
    if c2 > threshold + 1e-12:
        assert o.A > 0
    elif c2 < threshold - 1e-12:
        assert o.A < 0


def test_profit_optimum_value_matches_functional():
    env = base_env(0.4, c2=0.5, h1=0.2, c1=0.6)
    o = optimal_profit_scheme(env)
    assert expected_profit(env, o.scheme, method="quadrature") == pytest.approx(o.value, abs=1e-10)


def test_hypothesis_errors_name_the_condition():
    with pytest.raises(HypothesisError) as err:
        optimal_profit_scheme(base_env(0.7))
    assert err.value.hypothesis == "a1 < 2/3"
    assert "a1 < 2/3" in str(err.value)
    with pytest.raises(HypothesisError) as err:
        optimal_welfare_scheme(base_env(0.0, c1=1.5))
    assert err.value.hypothesis == "theta1 + h1 - c1 > 0"
    with pytest.raises(HypothesisError):
        profit_welfare_ratio(base_env(2 / 3))


def test_profit_foc_examples():
    r = profit_foc_residuals(base_env(0.5), 4.0, 0.0)
    assert max(map(abs, r)) <= 1e-12
    r = profit_foc_residuals(base_env(0.0), 0.0, 0.5)
    assert max(map(abs, r)) <= 1e-12
    # (theta1 + h1 - B)(c2 + h2) - 2 (B - c1) h2 = 0.4 * 2 - 2 * 0.6
    r = profit_foc_residuals(base_env(0.0), 0.0, 0.6)
    assert r.intercept == pytest.approx(-0.4, abs=1e-14)


def test_foc_reductions_match_quadrature_off_optimum():
    env = base_env(0.3, c2=0.8, h1=0.1, c1=0.2)
    # check=True raises on disagreement; also spot-check the sign pairing
    for A, B in ((0.5, 0.3), (2.0, 0.6), (-0.4, 0.4)):
        p = profit_foc_residuals(env, A, B)
        w = welfare_foc_residuals(env, A, B)
        assert (p.intercept > 0) == (p.d_intercept > 0)
        assert (w.slope > 0) == (w.d_slope > 0)


def test_degenerate_scheme():
    with pytest.raises(DegenerateSchemeError):
        profit_foc_residuals(base_env(0.5), 1.0, 1.0)


def test_welfare_optimum_examples():
    o = optimal_welfare_scheme(base_env(0.5))
    assert (o.A, o.B) == (2.0, 0.0) and o.value == pytest.approx(float(WELFARE_MAX), abs=1e-15)
    o = optimal_welfare_scheme(base_env(0.0))
    assert (o.A, o.B) == (1.0, 0.0) and o.value == pytest.approx(float(WELFARE_MAX), abs=1e-15)
    for a1 in (0.0, 0.4, 0.8):
        assert optimal_welfare_scheme(base_env(a1, c2=0.0)).A == 0.0


def test_welfare_foc_examples():
    assert max(map(abs, welfare_foc_residuals(base_env(0.5), 2.0, 0.0))) <= 1e-12
    assert max(map(abs, welfare_foc_residuals(base_env(0.0), 1.0, 0.0))) <= 1e-12
    r = welfare_foc_residuals(base_env(0.5), 4.0, 0.0)
    assert abs(r.intercept) > 0.1 and abs(r.slope) > 0.1


def test_search_examples():
    o = numeric_quadratic_search(base_env(0.5), "profit")
    assert (o.A, o.B) == pytest.approx((4.0, 0.0), abs=1e-4)
    assert o.value == pytest.approx(float(PROFIT_HALF), rel=1e-7)
    assert o.source == "oracle"
    for a1, A in ((0.0, 1.0), (0.5, 2.0)):
        o = numeric_quadratic_search(base_env(a1), "welfare")
        assert (o.A, o.B) == pytest.approx((A, 0.0), abs=1e-4)
        assert o.value == pytest.approx(float(WELFARE_MAX), rel=1e-7)
    with pytest.raises(DomainError):
        numeric_quadratic_search(base_env(0.5), "revenue")


def test_search_reports_disagreement_on_a_useless_box():
    with pytest.raises(OracleDisagreementError):
        numeric_quadratic_search(base_env(0.5), "profit", box=((5.0, 6.0), (2.0, 3.0)), grid_n=5)


def test_ratio_examples():
    assert profit_welfare_ratio(base_env(0.0)) == pytest.approx(0.5)
    assert profit_welfare_ratio(base_env(0.5)) == pytest.approx(2 / 3)
    assert profit_welfare_ratio(base_env(0.0, c2=0.0)) == pytest.approx(0.5)
    env = base_env(0.5)
    assert optimal_profit_scheme(env).value == pytest.approx(
        profit_welfare_ratio(env) * optimal_welfare_scheme(env).value, abs=1e-15
    )


def test_cutoff_increasing_at_optimum():
    for a1 in (0.0, 0.3, 0.6):
        for c2 in (0.0, 1.0):
            env = base_env(a1, c2=c2)
            o = optimal_profit_scheme(env)
            slope = (1 - a1) * o.A + env.h2
            assert slope == pytest.approx(((1 - a1) * c2 + env.h2) / (2 - 3 * a1), rel=1e-12)
            assert slope > 0


def test_welfare_value_does_not_depend_on_bias():
    values = [optimal_welfare_scheme(base_env(a1, c2=0.7, c1=0.1)).value for a1 in (0.0, 0.25, 0.5, 0.9)]
    quad = [expected_welfare(base_env(a1, c2=0.7, c1=0.1), Quadratic(0.7 / (1 - a1), 0.1)) for a1 in (0.0, 0.25, 0.5, 0.9)]
    assert max(values) - min(values) <= 1e-15
    assert max(quad) - min(quad) <= 1e-12


def test_search_agrees_when_every_cutoff_starts_inside_support():
    # keeping B - h1 >= theta0 rules out tariffs that push the lowest type to buy
    env = base_env(0.6, c1=0.75)
    closed = optimal_profit_scheme(env)
    (a_box, (_, b_hi)) = default_search_box(env)
    found = numeric_quadratic_search(env, "profit", box=(a_box, (env.theta0 + env.h1, b_hi)))
    assert (found.A, found.B) == pytest.approx((closed.A, closed.B), abs=1e-4)
    assert found.value == pytest.approx(closed.value, rel=1e-7)


@pytest.mark.parametrize("a1,grows", [(0.4, False), (0.6, True)])
def test_profit_along_clipped_rays(a1, grows):
    # with B = -A/10 every type buys at least 1/(10(1 - a1)); the bill outgrows
    # perceived cost exactly when a1 > 1/2
    env = base_env(a1, c1=0.75)
    values = [expected_profit(env, Quadratic(A, -A / 10)) for A in (50.0, 100.0, 200.0, 400.0)]
    increasing = all(b > a for a, b in zip(values[:-1], values[1:]))
    assert increasing == grows
    if grows:
        assert values[-1] > optimal_profit_scheme(env).value
