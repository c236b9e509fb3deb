import math

import pytest

from biasedpricing.consumer import Preferences, best_response, marginal_utility, simulate_dynamics
from biasedpricing.errors import ConvergenceFailure, DomainError, NonmonotoneCutoffError, UnboundedDemandError
from biasedpricing.perception import BetaMix, Dirac0, MixDirac, Uniform
from biasedpricing.tariffs import Flat, PiecewiseLinear, Quadratic, TwoTier

from oracle_values import BR_TWO_TIER_AVERAGE_TOP

PREFS = Preferences(0.0, 1.0)


def test_marginal_utility_examples():
    assert marginal_utility(PREFS, 0.0, 1.0) == 1.0
    assert marginal_utility(PREFS, 0.5, 1.0) == 0.5
    assert marginal_utility(Preferences(2.0, 3.0), 1.0, 0.0) == -1.0


def test_best_response_examples():
    assert best_response(PREFS, Dirac0(), Flat(0.5), 1.0) == pytest.approx(0.5, abs=1e-13)
    for k in (Dirac0(), Uniform(), BetaMix(0.3)):
        assert best_response(PREFS, k, Flat(0.5), 0.3) == 0.0
    q = best_response(PREFS, Uniform(), TwoTier(0.4, 0.9, 0.5), 1.0)
    assert q == pytest.approx(BR_TWO_TIER_AVERAGE_TOP, abs=1e-12)


def test_rational_consumer_bunches_at_threshold():
    tt = TwoTier(0.4, 0.9, 0.5)
    for theta in (0.9, 0.95, 1.0, 1.4):
        assert best_response(PREFS, Dirac0(), tt, theta) == 0.5
    assert best_response(PREFS, Dirac0(), tt, 1.5) == pytest.approx(0.6, abs=1e-12)


@pytest.mark.parametrize("a1,A,B", [(0.0, 1.0, 0.2), (0.5, 4.0, 0.0), (0.3, -0.5, 0.1)])
def test_quadratic_best_response_closed_form(a1, A, B):
    k = MixDirac(a1)
    for theta in (0.0, 0.1, 0.5, 1.0):
        expected = max(0.0, (theta - B) / ((1 - a1) * A + 1.0))
        assert best_response(PREFS, k, Quadratic(A, B), theta) == pytest.approx(expected, abs=1e-12)


def test_decreasing_cutoff_is_reported():
    with pytest.raises(NonmonotoneCutoffError):
        best_response(PREFS, Dirac0(), PiecewiseLinear((0.0, 0.5), (1.0, 0.0)), 1.2)


def test_unbounded_demand():
    with pytest.raises(UnboundedDemandError):
        best_response(Preferences(0.0, 0.0), Dirac0(), Flat(0.5), 1.0, q_max=1e3)


def test_general_concave_utility():
    prefs = Preferences(h=lambda q: math.log1p(q) - q, dh=lambda q: 1 / (1 + q) - 1)
    # theta + 1/(1+q) - 1 = 0.5 at theta = 1  ->  q = 1
    assert best_response(prefs, Dirac0(), Flat(0.5), 1.0) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(DomainError):
        Preferences(h=lambda q: q * q, dh=lambda q: 2 * q)


def test_dynamics_examples():
    traj = simulate_dynamics(PREFS, Dirac0(), Flat(0.5), 1.0, 0.1)
    assert traj.converged and traj.terminal == pytest.approx(0.5, abs=1e-8)
    # 1 - q = 2q at the steady state
    traj = simulate_dynamics(PREFS, Uniform(), Quadratic(4.0, 0.0), 1.0, 1.0)
    assert traj.terminal == pytest.approx(1 / 3, abs=1e-8)
    for q0 in (0.1, 2.0):
        assert simulate_dynamics(PREFS, Uniform(), Flat(0.5), 0.3, q0).terminal == 0.0


def test_dynamics_failure_carries_trajectory():
    with pytest.raises(ConvergenceFailure) as err:
        simulate_dynamics(PREFS, Dirac0(), Flat(0.5), 1.0, 0.1, step=1e-4, max_steps=10)
    assert len(err.value.trajectory.q) == 10


def test_trajectory_csv():
    traj = simulate_dynamics(PREFS, Dirac0(), Flat(0.5), 1.0, 0.1)
    lines = traj.to_csv().splitlines()
    assert lines[0] == "step,q,drift"
    assert lines[1] == "0,0.1,0.4"
    assert len(lines) == len(traj.q) + 1
