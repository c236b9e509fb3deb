import pytest

from biasedpricing import MarketEnv, MixDirac


def base_env(a1=0.0, c2=1.0, **kw):
    """theta ~ U[0, 1], h(q) = -q^2/2, C(q) = c2 q^2/2, MixDirac(a1) perception."""
    params = dict(theta0=0.0, theta1=1.0, h1=0.0, h2=1.0, c1=0.0, c2=c2)
    params.update(kw)
    return MarketEnv.quadratic(kernel=MixDirac(a1), **params)


@pytest.fixture
def env_half():
    return base_env(0.5)


@pytest.fixture
def env_rational():
    return base_env(0.0)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
