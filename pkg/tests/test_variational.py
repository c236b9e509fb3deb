import numpy as np
import pytest

from biasedpricing.errors import DomainError, KinkError, UnboundedDomainError
from biasedpricing.market import MarketEnv, expected_profit
from biasedpricing.perception import BetaMix, Uniform
from biasedpricing.tariffs import Flat, PiecewiseLinear, Quadratic
from biasedpricing.variational import (
    VariationalProblem,
    euler_lagrange_residual,
    polish_piecewise,
    residual_profile,
    transversality_check,
)

from conftest import base_env


def beta_env(beta, **kw):
    return base_env(**kw).with_kernel(BetaMix(beta))


def test_requires_beta_mix():
    with pytest.raises(DomainError):
        VariationalProblem(base_env().with_kernel(Uniform()), Quadratic(4, 0))
    with pytest.raises(DomainError):
        VariationalProblem(beta_env(0.5), Flat(0.6))


def test_integrand_form():
    prob = VariationalProblem(beta_env(0.4), Quadratic(2.0, 0.1))
    q, P, dP = 0.3, 0.2, 0.7
    theta = 0.4 * P / q + 0.6 * dP + q
    assert prob.integrand(q, P, dP) == pytest.approx((dP - q) * (1 - theta), abs=1e-15)


def test_residual_vanishes_on_rational_optimum():
    prob = VariationalProblem(beta_env(0.0), Quadratic(0.0, 0.5))
    profile = residual_profile(prob, n=100)
    assert len(profile) == 100
    assert max(abs(r) for _, r in profile) <= 1e-5
    assert abs(euler_lagrange_residual(prob, 1e-6)) <= 1e-4


def test_residual_of_marginal_cost_tariff():
    # dL/dP = 0 and dL/dP' = 1 - F(theta), so the residual is f(theta) * dtheta/dq = 2
    prob = VariationalProblem(beta_env(0.0), Quadratic(1.0, 0.0))
    for q in (0.1, 0.3, 0.45):
        assert euler_lagrange_residual(prob, q) == pytest.approx(2.0, abs=1e-5)


def test_full_bias_profile_is_reported():
    prob = VariationalProblem(beta_env(1.0), Quadratic(4.0, 0.0))
    profile = residual_profile(prob, n=20)
    assert len(profile) == 20 and all(np.isfinite(r) for _, r in profile)


def test_residual_errors():
    prob = VariationalProblem(beta_env(0.5), PiecewiseLinear((0.0, 0.2), (0.3, 0.8)))
    with pytest.raises(KinkError):
        euler_lagrange_residual(prob, 0.2)
    with pytest.raises(DomainError):
        euler_lagrange_residual(prob, 1e-8)


def test_transversality_examples():
    gap, markup = transversality_check(VariationalProblem(beta_env(0.0), Quadratic(0.0, 0.5)))
    assert abs(gap) <= 1e-12 and abs(markup) <= 1e-12
    gap, markup = transversality_check(VariationalProblem(beta_env(0.0), PiecewiseLinear((0.0,), (0.6,))))
    assert abs(gap) <= 1e-12 and markup == pytest.approx(0.2, abs=1e-12)


def test_transversality_needs_finite_top():
    env = MarketEnv.quadratic(h2=0.0, c2=1.0, kernel=BetaMix(0.0))
    with pytest.raises(UnboundedDomainError):
        transversality_check(VariationalProblem(env, Quadratic(0.0, 0.5)))


@pytest.mark.parametrize("beta", [0.0, 0.3, 0.8, 1.0])
@pytest.mark.parametrize("A,B", [(4.0, 0.0), (1.0, 0.2), (0.3, 0.5)])
def test_objective_matches_profit(beta, A, B):
    env = beta_env(beta, c2=0.6)
    s = Quadratic(A, B)
    assert VariationalProblem(env, s).objective() == pytest.approx(expected_profit(env, s), abs=1e-9)


def test_objective_on_piecewise_candidate():
    env = beta_env(0.5)
    s = PiecewiseLinear((0.0, 0.2, 0.4), (0.3, 0.6, 0.9))
    assert VariationalProblem(env, s).objective() == pytest.approx(expected_profit(env, s), abs=1e-8)


@pytest.mark.parametrize("beta", [0.0, 0.5])
def test_polish_improves_profit(beta):
    rep = polish_piecewise(beta_env(beta), segments=20, iterations=4)
    assert len(rep.objective) >= 2
    assert all(b > a for a, b in zip(rep.objective[:-1], rep.objective[1:]))
    assert len(rep.max_residual) == len(rep.objective)
    assert len(rep.gradient_norm) >= len(rep.objective) - 1
    assert isinstance(rep.residual_monotone, bool)
