import math

import pytest
from scipy import stats
from scipy.integrate import quad

from biasedpricing.errors import ConfigError, DomainError, NonmonotoneCutoffError
from biasedpricing.market import (
    MarketEnv,
    aggregate_consumption,
    consumer_surplus,
    cutoff_type,
    env_from_config,
    env_to_config,
    expected_profit,
    expected_profit_type_space,
    expected_welfare,
    expected_welfare_type_space,
    max_quantity,
)
from biasedpricing.perception import BetaMix, Dirac0, MixDirac, Uniform
from biasedpricing.tariffs import Flat, PiecewiseLinear, Quadratic, TwoTier

from conftest import base_env
from oracle_values import (
    PROFIT_HALF,
    PROFIT_RATIONAL,
    Q_FLAT_06,
    Q_TWO_TIER_AVERAGE,
    Q_TWO_TIER_RATIONAL,
    SURPLUS_HALF,
    WELFARE_HALF,
    WELFARE_MAX,
    WELFARE_RATIONAL,
)


def test_cutoff_examples():
    env = base_env(0.0)
    assert cutoff_type(env, Flat(0.6), 0.4, mode="rational") == pytest.approx(1.0)
    assert cutoff_type(env, Quadratic(4, 0), 1 / 3, mode="average") == pytest.approx(1.0)
    assert cutoff_type(base_env(0.5, h1=0.2), Quadratic(4, 0.3), 0.0) == pytest.approx(0.1)


def test_max_quantity_examples():
    env = base_env(0.5)
    assert max_quantity(env, Quadratic(4, 0)) == pytest.approx(1 / 3, abs=1e-12)
    assert max_quantity(base_env(0.0), Flat(0.6), mode="rational") == pytest.approx(0.4, abs=1e-12)
    assert max_quantity(env, Quadratic(3.0, 1.0)) == 0.0


def test_profit_examples():
    assert expected_profit(base_env(0.0), Quadratic(0, 0.5)) == pytest.approx(float(PROFIT_RATIONAL), abs=1e-12)
    assert expected_profit(base_env(0.0).with_kernel(Uniform()), Quadratic(4, 0)) == pytest.approx(float(PROFIT_HALF), abs=1e-12)
    for k in (Dirac0(), Uniform(), BetaMix(0.4)):
        assert expected_profit(base_env(0.0).with_kernel(k), Quadratic(1.0, 0.0)) == pytest.approx(0.0, abs=1e-12)


def test_welfare_and_surplus_examples():
    env = base_env(0.5)
    s = Quadratic(4, 0)
    assert expected_welfare(env, s) == pytest.approx(float(WELFARE_HALF), abs=1e-12)
    assert consumer_surplus(env, s) == pytest.approx(float(SURPLUS_HALF), abs=1e-12)
    for a1 in (0.0, 0.3, 0.5, 0.9):
        assert expected_welfare(base_env(a1), Quadratic(1 / (1 - a1), 0.0)) == pytest.approx(float(WELFARE_MAX), abs=1e-12)
    zero = Quadratic(2.0, 1.0)
    assert expected_welfare(env, zero) == 0.0 and consumer_surplus(env, zero) == 0.0
    rational = base_env(0.0)
    assert expected_welfare(rational, Quadratic(0, 0.5)) == pytest.approx(float(WELFARE_RATIONAL), abs=1e-12)
    assert consumer_surplus(rational, Quadratic(0, 0.5)) == pytest.approx(1 / 48, abs=1e-12)


@pytest.mark.parametrize("a1,A,B", [(0.5, 4.0, 0.0), (0.2, 1.5, 0.3), (0.0, -0.3, 0.2), (0.6, 2.0, -0.2)])
def test_exact_and_quadrature_routes_agree(a1, A, B):
    env = base_env(a1, c2=0.7, h1=0.1, c1=0.05)
    s = Quadratic(A, B)
    assert expected_profit(env, s, method="quadrature") == pytest.approx(expected_profit(env, s), abs=1e-9)
    assert expected_welfare(env, s, method="quadrature") == pytest.approx(expected_welfare(env, s), abs=1e-9)


@pytest.mark.parametrize(
    "scheme,kernel",
    [
        (Quadratic(4.0, 0.0), Uniform()),
        (Quadratic(1.0, 0.2), BetaMix(0.5)),
        (Flat(0.3), Dirac0()),
        (PiecewiseLinear((0.0, 0.2, 0.4), (0.2, 0.5, 0.9)), BetaMix(0.4)),
    ],
)
def test_quantity_and_type_space_agree(scheme, kernel):
    env = base_env(0.0).with_kernel(kernel)
    assert expected_profit(env, scheme, method="quadrature") == pytest.approx(
        expected_profit_type_space(env, scheme), abs=1e-7
    )
    assert expected_welfare(env, scheme, method="quadrature") == pytest.approx(
        expected_welfare_type_space(env, scheme), abs=1e-7
    )


def test_welfare_with_bunching_uses_types():
    env = base_env(0.0)
    tt = TwoTier(0.4, 0.9, 0.5)
    # demand by hand: theta - 0.4 on [0.4, 0.9], bunched at 0.5 above

    def per_type(theta):
        q = 0.0 if theta < 0.4 else min(theta - 0.4, 0.5)
        return tt.price(q) - env.cost(q), theta * q - q * q / 2 - env.cost(q)

    p_ref = quad(lambda t: per_type(t)[0], 0, 1, points=[0.4, 0.9])[0]
    w_ref = quad(lambda t: per_type(t)[1], 0, 1, points=[0.4, 0.9])[0]
    assert expected_profit(env, tt) == pytest.approx(p_ref, abs=1e-9)
    assert expected_welfare(env, tt) == pytest.approx(w_ref, abs=1e-9)


def test_aggregate_consumption_examples():
    env = base_env(0.0)
    for lam in (0.0, 0.3, 1.0):
        assert aggregate_consumption(env, Flat(0.6), lam) == pytest.approx(Q_FLAT_06, abs=1e-10)
    tt = TwoTier(0.4, 0.9, 0.5)
    assert aggregate_consumption(env, tt, 0.0) == pytest.approx(Q_TWO_TIER_RATIONAL, abs=1e-10)
    assert aggregate_consumption(env, tt, 1.0) == pytest.approx(Q_TWO_TIER_AVERAGE, abs=1e-9)
    mid = aggregate_consumption(env, tt, 0.5)
    assert mid == pytest.approx(0.5 * (Q_TWO_TIER_RATIONAL + Q_TWO_TIER_AVERAGE), abs=1e-9)
    with pytest.raises(DomainError):
        aggregate_consumption(env, tt, 1.5)


def test_nonuniform_types_use_quadrature():
    env = MarketEnv(0.0, 1.0, base_env().prefs, 0.0, 1.0, Dirac0(), type_dist=stats.beta(2, 2))
    s = Quadratic(0.0, 0.5)
    assert expected_profit(env, s) == pytest.approx(expected_profit_type_space(env, s), abs=1e-8)
    assert "uniform types" in env.hypothesis_failures(2 / 3)


def test_hypothesis_failures_are_named():
    env = base_env(0.7)
    assert env.hypothesis_failures(2 / 3) == ["a1 < 2/3"]
    assert not env.profit_optimum_valid and env.welfare_optimum_valid
    assert "theta1 + h1 - c1 > 0" in base_env(0.0, c1=2.0).hypothesis_failures(2 / 3)


def test_nonmonotone_cutoff_rejected():
    with pytest.raises(NonmonotoneCutoffError):
        expected_profit(base_env(0.0), Quadratic(-2.0, 0.1))


def test_env_config_round_trip():
    env = base_env(0.3, c2=0.25, h1=0.1)
    assert env_from_config(env_to_config(env)) == env
    with pytest.raises(ConfigError) as err:
        env_from_config({"theta1": "one"})
    assert err.value.where == "env.theta1"
    with pytest.raises(ConfigError):
        env_from_config({"theta9": 1})
