import math

import pytest

from biasedpricing.errors import ConfigError, DomainError
from biasedpricing.tariffs import (
    Flat,
    PiecewiseLinear,
    Quadratic,
    TwoTier,
    average_price,
    marginal_price,
    price,
    scheme_from_config,
    scheme_to_config,
)


def test_price_examples():
    assert price(Quadratic(2, 0), 0.0) == 0.0
    assert price(TwoTier(0.4, 0.9, 0.5), 0.5) == pytest.approx(0.2)
    assert price(Quadratic(4, 0), 1 / 3) == pytest.approx(2 / 9)


def test_marginal_examples():
    assert marginal_price(Flat(0.6), 0.3) == 0.6
    assert marginal_price(Quadratic(2, 0.5), 1.0) == 2.5
    assert marginal_price(TwoTier(0.4, 0.9, 0.5), 0.5) == 0.9
    assert marginal_price(TwoTier(0.4, 0.9, 0.5), 0.5, side="left") == 0.4


def test_average_examples():
    assert average_price(Quadratic(2, 0), 1.0) == 1.0
    assert average_price(TwoTier(0.4, 0.9, 0.5), 1.0) == pytest.approx(0.65)
    assert average_price(Flat(0.6), 0.0) == 0.6


def test_negative_quantity_rejected():
    for fn in (price, marginal_price, average_price):
        with pytest.raises(DomainError):
            fn(Flat(1.0), -0.1)


def test_two_tier_needs_positive_threshold():
    with pytest.raises(DomainError):
        TwoTier(0.4, 0.9, 0.0)


def test_piecewise_linear_validation():
    with pytest.raises(DomainError):
        PiecewiseLinear((0.1, 1.0), (1.0, 2.0))
    with pytest.raises(DomainError):
        PiecewiseLinear((0.0, 1.0, 1.0), (1.0, 2.0, 3.0))
    with pytest.raises(DomainError):
        PiecewiseLinear((0.0, 1.0), (1.0,))


def test_piecewise_linear_matches_two_tier():
    pl = PiecewiseLinear((0.0, 0.5), (0.4, 0.9))
    tt = TwoTier(0.4, 0.9, 0.5)
    for q in (0.0, 0.2, 0.5, 0.7, 3.0):
        assert pl.price(q) == pytest.approx(tt.price(q), abs=1e-15)
        assert pl.marginal(q) == tt.marginal(q)
        assert pl.marginal(q, "left") == tt.marginal(q, "left")
    assert pl.kinks == tt.kinks


def test_convexity_flags():
    assert Quadratic(1, 0).is_convex and not Quadratic(-1, 0).is_convex
    assert TwoTier(0.4, 0.9, 0.5).is_convex and not TwoTier(0.9, 0.4, 0.5).is_convex
    assert not PiecewiseLinear((0.0, 1.0), (2.0, 1.0)).is_convex


@pytest.mark.parametrize(
    "scheme",
    [Quadratic(0.1 + 0.2, 1 / 3), Flat(math.pi), TwoTier(0.4, 0.9, 0.5), PiecewiseLinear((0.0, 0.3), (1 / 7, 2.0))],
)
def test_config_round_trip_is_exact(scheme):
    assert scheme_from_config(scheme_to_config(scheme)) == scheme


def test_config_errors_name_the_field():
    with pytest.raises(ConfigError) as err:
        scheme_from_config({"kind": "two_tier", "p2": 0.4, "p3": 0.9})
    assert err.value.where == "scheme.qbar"
    with pytest.raises(ConfigError):
        scheme_from_config({"kind": "cubic"})
    with pytest.raises(ConfigError):
        scheme_from_config({"kind": "flat", "p1": 1, "p9": 2})
