"""Tariff schemes P: R+ -> R with P(0) = 0.

Four variants are supported: quadratic ``(A/2) q^2 + B q``, a flat per-unit
price, a two-tier increasing block tariff and a general continuous
piecewise-linear tariff. At a kink the marginal price is the right
derivative unless ``side="left"`` is requested.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import ClassVar, Union

from .errors import ConfigError, DomainError

__all__ = [
    "Quadratic",
    "Flat",
    "TwoTier",
    "PiecewiseLinear",
    "PriceScheme",
    "price",
    "marginal_price",
    "average_price",
    "scheme_to_config",
    "scheme_from_config",
]


def _finite(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise DomainError(f"{name} must be finite, got {value!r}")
    return value


@dataclass(frozen=True)
class Quadratic:
    """P(q) = (A/2) q^2 + B q."""

    A: float
    B: float
    kind: ClassVar[str] = "quadratic"
    kinks: ClassVar[tuple[float, ...]] = ()

    def __post_init__(self):
        object.__setattr__(self, "A", _finite("A", self.A))
        object.__setattr__(self, "B", _finite("B", self.B))

    def price(self, q: float) -> float:
        return 0.5 * self.A * q * q + self.B * q

    def marginal(self, q: float, side: str = "right") -> float:
        return self.A * q + self.B

    @property
    def is_convex(self) -> bool:
        return self.A >= 0.0


@dataclass(frozen=True)
class Flat:
    """Constant per-unit price p1."""

    p1: float
    kind: ClassVar[str] = "flat"
    kinks: ClassVar[tuple[float, ...]] = ()

    def __post_init__(self):
        object.__setattr__(self, "p1", _finite("p1", self.p1))

    def price(self, q: float) -> float:
        return self.p1 * q

    def marginal(self, q: float, side: str = "right") -> float:
        return self.p1

    is_convex = True


@dataclass(frozen=True)
class TwoTier:
    """Rate p2 up to the threshold qbar, rate p3 on every unit above it."""

    p2: float
    p3: float
    qbar: float
    kind: ClassVar[str] = "two_tier"

    def __post_init__(self):
        for name in ("p2", "p3", "qbar"):
            object.__setattr__(self, name, _finite(name, getattr(self, name)))
        if self.qbar <= 0.0:
            raise DomainError(f"two-tier threshold must be positive, got qbar={self.qbar}")

    @property
    def kinks(self) -> tuple[float, ...]:
        return (self.qbar,)

    def price(self, q: float) -> float:
        if q <= self.qbar:
            return self.p2 * q
        return self.p2 * self.qbar + self.p3 * (q - self.qbar)

    def marginal(self, q: float, side: str = "right") -> float:
        if q < self.qbar or (q == self.qbar and side == "left"):
            return self.p2
        return self.p3

    @property
    def is_convex(self) -> bool:
        return self.p3 >= self.p2


@dataclass(frozen=True)
class PiecewiseLinear:
    """Continuous tariff with slope ``slopes[i]`` on [breakpoints[i], breakpoints[i+1]).

    The last slope extends to infinity. ``breakpoints[0]`` must be 0.
    """

    breakpoints: tuple[float, ...]
    slopes: tuple[float, ...]
    kind: ClassVar[str] = "piecewise_linear"
    _cum: tuple[float, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        bps = tuple(_finite("breakpoint", b) for b in self.breakpoints)
        slopes = tuple(_finite("slope", s) for s in self.slopes)
        if not bps or bps[0] != 0.0:
            raise DomainError("piecewise-linear breakpoints must start at 0")
        if any(b1 <= b0 for b0, b1 in zip(bps[:-1], bps[1:])):
            raise DomainError("piecewise-linear breakpoints must be strictly increasing")
        if len(slopes) != len(bps):
            raise DomainError(f"need one slope per segment: {len(bps)} breakpoints, {len(slopes)} slopes")
        cum = [0.0]
        for i in range(1, len(bps)):
            cum.append(cum[-1] + slopes[i - 1] * (bps[i] - bps[i - 1]))
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "slopes", slopes)
        object.__setattr__(self, "_cum", tuple(cum))

    @property
    def kinks(self) -> tuple[float, ...]:
        return tuple(b for i, b in enumerate(self.breakpoints[1:], 1) if self.slopes[i] != self.slopes[i - 1])

    def price(self, q: float) -> float:
        i = bisect.bisect_right(self.breakpoints, q) - 1
        return self._cum[i] + self.slopes[i] * (q - self.breakpoints[i])

    def marginal(self, q: float, side: str = "right") -> float:
        if side == "left" and q > 0.0:
            i = bisect.bisect_left(self.breakpoints, q) - 1
        else:
            i = bisect.bisect_right(self.breakpoints, q) - 1
        return self.slopes[i]

    @property
    def is_convex(self) -> bool:
        return all(s1 >= s0 for s0, s1 in zip(self.slopes[:-1], self.slopes[1:]))


PriceScheme = Union[Quadratic, Flat, TwoTier, PiecewiseLinear]


def _check_q(q: float) -> float:
    if q < 0.0:
        raise DomainError(f"quantity must be nonnegative, got {q}")
    return q


def price(scheme: PriceScheme, q: float) -> float:
    """Total payment P(q)."""
    return scheme.price(_check_q(q))


def marginal_price(scheme: PriceScheme, q: float, side: str = "right") -> float:
    """P'(q); right derivative at kinks unless ``side="left"``."""
    return scheme.marginal(_check_q(q), side)


def average_price(scheme: PriceScheme, q: float) -> float:
    """P(q)/q, extended continuously by P'(0+) at q = 0."""
    _check_q(q)
    if q == 0.0:
        return scheme.marginal(0.0)
    return scheme.price(q) / q


_FIELDS = {
    "quadratic": (Quadratic, ("A", "B")),
    "flat": (Flat, ("p1",)),
    "two_tier": (TwoTier, ("p2", "p3", "qbar")),
    "piecewise_linear": (PiecewiseLinear, ("breakpoints", "slopes")),
}


def scheme_to_config(scheme: PriceScheme) -> dict:
    """Serialize to a ``{kind, ...}`` block; floats are kept bit-exact."""
    _, names = _FIELDS[scheme.kind]
    block = {"kind": scheme.kind}
    for name in names:
        value = getattr(scheme, name)
        block[name] = list(value) if isinstance(value, tuple) else value
    return block


def scheme_from_config(block: dict, where: str = "scheme") -> PriceScheme:
    if not isinstance(block, dict):
        raise ConfigError("expected an object", where)
    kind = str(block.get("kind", "")).lower().replace("-", "_")
    if kind not in _FIELDS:
        raise ConfigError(f"unknown scheme kind {block.get('kind')!r}; expected one of {sorted(_FIELDS)}", f"{where}.kind")
    cls, names = _FIELDS[kind]
    extra = set(block) - set(names) - {"kind", "id"}
    if extra:
        raise ConfigError(f"unexpected fields {sorted(extra)}", where)
    kwargs = {}
    for name in names:
        if name not in block:
            raise ConfigError("missing field", f"{where}.{name}")
        value = block[name]
        if kind == "piecewise_linear":
            if not isinstance(value, list):
                raise ConfigError("expected a list of numbers", f"{where}.{name}")
            value = tuple(value)
        kwargs[name] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), where) from exc
